//! Leakage-distortion tradeoff `ε(D, b)`: minimize worst-case per-record leakage over
//! mechanisms whose expected distortion under `p0` is at most `D`.
//!
//! Alternates an adversary update (maximal leakage for the current mechanism) with a
//! penalized mechanism update driven by exponentiated gradient descent.

use crate::error::{Error, Result};
use crate::infotheory::{grad_mi_mechanism, max_record_leakage, sigmoid, softplus};
use crate::leakage::{max_leakage, LeakageConfig};
use crate::matrix::Matrix;
use crate::mechanism::Mechanism;
use crate::prior::JointPrior;
use crate::query::DistortionModel;
use crate::space::ProblemSpace;

#[derive(Clone, Debug, PartialEq)]
pub struct GradientConfig {
    pub initial_step: f64,
    pub backtrack_factor: f64,
    /// Backtracking gives up below this step.
    pub min_step: f64,
    pub max_steps: usize,
    /// Stop when `||q_t - q_{t-1}||_1` falls below this.
    pub tolerance: f64,
    /// Sufficient-decrease coefficient.
    pub armijo_c: f64,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            backtrack_factor: 0.5,
            min_step: 1e-12,
            max_steps: 200,
            tolerance: 1e-6,
            armijo_c: 0.5,
        }
    }
}

/// One accepted exponentiated-gradient step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoStep {
    pub objective_before: f64,
    pub objective_after: f64,
    pub step: f64,
    /// Squared gradient norm in the local metric of the update.
    pub decrease_measure: f64,
    pub armijo_c: f64,
}

impl ArmijoStep {
    pub fn satisfied(&self, slack: f64) -> bool {
        self.objective_after <= self.objective_before - self.armijo_c * self.step * self.decrease_measure + slack
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalConfig {
    pub distortion_bound: f64,
    pub penalty_init: f64,
    pub penalty_factor: f64,
    pub constraint_margin: f64,
    /// Outer stop on `|ΔI|`.
    pub tolerance: f64,
    pub max_outer_iterations: usize,
    pub min_outer_iterations: usize,
    /// Tolerance `ε` of the penalty loop's exit test.
    pub penalty_tolerance: f64,
    pub max_penalty_rounds: usize,
    pub gradient: GradientConfig,
    pub leakage: LeakageConfig,
}

impl Default for PrimalConfig {
    fn default() -> Self {
        Self {
            distortion_bound: 0.0,
            penalty_init: 1.0,
            penalty_factor: 1.5,
            constraint_margin: 0.01,
            tolerance: 1e-4,
            max_outer_iterations: 30,
            min_outer_iterations: 3,
            penalty_tolerance: 1e-6,
            max_penalty_rounds: 100,
            gradient: GradientConfig::default(),
            leakage: LeakageConfig::default(),
        }
    }
}

impl PrimalConfig {
    pub fn new(distortion_bound: f64, entropy_bound: f64) -> Self {
        Self {
            distortion_bound,
            leakage: LeakageConfig::with_bound(entropy_bound),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distortion_bound >= 0.0) {
            return Err(Error::Domain("distortion bound must be nonnegative".into()));
        }
        if !(self.penalty_factor > 1.0) || !(self.constraint_margin > 0.0) || !(self.penalty_init > 0.0) {
            return Err(Error::Domain("need penalty factor > 1, margin > 0, initial penalty > 0".into()));
        }
        validate_gradient(&self.gradient)
    }
}

pub(crate) fn validate_gradient(g: &GradientConfig) -> Result<()> {
    if !(g.initial_step > 0.0) || !(g.backtrack_factor > 0.0 && g.backtrack_factor < 1.0) || !(g.armijo_c > 0.0) {
        return Err(Error::Domain("invalid gradient configuration".into()));
    }
    Ok(())
}

/// A solved point on a tradeoff curve.
#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffPoint {
    pub bound_requested: f64,
    /// Leakage for primal points, distortion for dual points.
    pub value_achieved: f64,
    /// `E - D` for primal points, `L_achieved - L` for dual points.
    pub constraint_residual: f64,
    pub leakage: f64,
    pub distortion: f64,
    pub mechanism: Mechanism,
    /// Worst-case prior found when auditing `mechanism`.
    pub prior: JointPrior,
    pub iterations: usize,
    pub feasible: bool,
    pub armijo_steps: Vec<ArmijoStep>,
    /// Incumbent traces of every maximal-leakage run.
    pub leakage_traces: Vec<Vec<f64>>,
    /// Incumbent value after each outer round.
    pub incumbent_trace: Vec<f64>,
}

/// `P = softplus(E - D)^2` and its gradient `2 softplus(E-D) σ(E-D) p0(x) d(f(x), y)`.
pub fn penalty_distortion(model: &DistortionModel, mech: &Mechanism, bound: f64) -> (f64, Matrix) {
    let z = model.expected(mech) - bound;
    let sp = softplus(z);
    let scale = 2.0 * sp * sigmoid(z);
    let w = model.weights();
    let g = Matrix::from_vec(w.rows(), w.cols(), w.as_slice().iter().map(|v| scale * v).collect());
    (sp * sp, g)
}

fn scaled_add(acc: &mut Matrix, other: &Matrix, scale: f64) {
    for (a, b) in acc.as_mut_slice().iter_mut().zip(other.as_slice()) {
        *a += scale * b;
    }
}

/// `J = max_i I(X_i;Y) + λ P` (evaluated over all records).
pub fn primal_objective(
    space: &ProblemSpace,
    prior: &JointPrior,
    mech: &Mechanism,
    model: &DistortionModel,
    lambda: f64,
    bound: f64,
) -> f64 {
    let z = model.expected(mech) - bound;
    max_record_leakage(space, prior, mech).0 + lambda * softplus(z).powi(2)
}

/// `J` and `∂J/∂q = p(x) ln(p(y|x_{i*}) / p(y)) + λ ∂P/∂q`, with `i*` the lowest-index
/// argmax record.
pub fn mechanism_objective_grad(
    space: &ProblemSpace,
    prior: &JointPrior,
    mech: &Mechanism,
    model: &DistortionModel,
    lambda: f64,
    bound: f64,
) -> (f64, Matrix, usize) {
    let (leak, istar) = max_record_leakage(space, prior, mech);
    let (pen, pgrad) = penalty_distortion(model, mech, bound);
    let mut g = grad_mi_mechanism(space, prior, mech, istar);
    scaled_add(&mut g, &pgrad, lambda);
    (leak + lambda * pen, g, istar)
}

/// `q'(y|x) ∝ q(y|x) exp(-η g(y|x))`, row by row in the log domain.
pub fn exp_gradient_step(mech: &Mechanism, grad: &Matrix, eta: f64) -> Mechanism {
    let m = mech.output_size();
    let mut out = Matrix::zeros(mech.input_size(), m);
    for x in 0..mech.input_size() {
        let q = mech.row(x);
        let g = grad.row(x);
        let logits: Vec<f64> = q
            .iter()
            .zip(g)
            .map(|(&qv, &gv)| if qv > 0.0 { qv.ln() - eta * gv } else { f64::NEG_INFINITY })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let row = out.row_mut(x);
        let mut s = 0.0;
        for (o, l) in row.iter_mut().zip(&logits) {
            *o = (l - max).exp();
            s += *o;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    Mechanism::from_raw(out)
}

/// `sum_x sum_y q(y|x) (g(y|x) - ḡ_x)^2`, `ḡ_x = sum_y q(y|x) g(y|x)`: the squared gradient
/// norm seen by a multiplicative update. Row-constant gradient components leave `q`
/// unchanged and contribute nothing.
pub fn local_gradient_norm(mech: &Mechanism, grad: &Matrix) -> f64 {
    (0..mech.input_size())
        .map(|x| {
            let q = mech.row(x);
            let g = grad.row(x);
            let mean: f64 = q.iter().zip(g).map(|(a, b)| a * b).sum();
            q.iter().zip(g).map(|(a, b)| a * (b - mean).powi(2)).sum::<f64>()
        })
        .sum()
}

fn l1(a: &Mechanism, b: &Mechanism) -> f64 {
    a.matrix().l1_distance(b.matrix())
}

pub(crate) struct DescentOutcome {
    pub mechanism: Mechanism,
    pub steps: Vec<ArmijoStep>,
    pub stalled: bool,
}

/// Exponentiated gradient descent with Armijo backtracking and `η0 / sqrt(t+1)` decay.
/// `eval` returns the objective and its gradient at a mechanism; `value` the objective only.
pub(crate) fn exp_gradient_descent(
    start: &Mechanism,
    cfg: &GradientConfig,
    eval: impl Fn(&Mechanism) -> (f64, Matrix),
    value: impl Fn(&Mechanism) -> f64,
) -> DescentOutcome {
    let mut q = start.clone();
    let mut steps = Vec::new();
    let mut eta = cfg.initial_step;
    let mut stalled = false;
    for t in 1..=cfg.max_steps {
        let (j, g) = eval(&q);
        let measure = local_gradient_norm(&q, &g);
        if measure == 0.0 {
            break;
        }
        let accepted = loop {
            let cand = exp_gradient_step(&q, &g, eta);
            let jc = value(&cand);
            if jc <= j - cfg.armijo_c * eta * measure {
                break Some((cand, jc));
            }
            eta *= cfg.backtrack_factor;
            if eta < cfg.min_step {
                break None;
            }
        };
        let Some((next, jn)) = accepted else {
            stalled = true;
            break;
        };
        steps.push(ArmijoStep {
            objective_before: j,
            objective_after: jn,
            step: eta,
            decrease_measure: measure,
            armijo_c: cfg.armijo_c,
        });
        let moved = l1(&next, &q);
        q = next;
        eta = cfg.initial_step / ((t + 1) as f64).sqrt();
        if moved < cfg.tolerance {
            break;
        }
    }
    DescentOutcome { mechanism: q, steps, stalled }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MechanismUpdate {
    pub mechanism: Mechanism,
    pub penalty: f64,
    pub rounds: usize,
    pub steps: Vec<ArmijoStep>,
    /// Descents that ended because backtracking ran out of step size.
    pub stalls: usize,
}

/// Adaptive smooth-penalty mechanism update for a fixed prior. `λ` grows by `μ` while
/// `E > D + δ` and shrinks while `E < D - δ`. Returns the distortion-feasible iterate with
/// the lowest leakage, or the lowest-`J` iterate when none is feasible.
pub fn update_mechanism(
    space: &ProblemSpace,
    prior: &JointPrior,
    model: &DistortionModel,
    start: &Mechanism,
    cfg: &PrimalConfig,
) -> MechanismUpdate {
    let d = cfg.distortion_bound;
    let mut q = start.clone();
    let mut lambda = cfg.penalty_init;
    let mut e_prev = f64::INFINITY;
    let mut best_j = (f64::INFINITY, q.clone());
    let mut best_feasible: Option<(f64, Mechanism)> = None;
    let e0 = model.expected(&q);
    if e0 <= d + cfg.constraint_margin {
        best_feasible = Some((max_record_leakage(space, prior, &q).0, q.clone()));
    }
    let mut steps = Vec::new();
    let mut stalls = 0;
    let mut rounds = 0;
    for _ in 0..cfg.max_penalty_rounds {
        rounds += 1;
        let lam = lambda;
        let out = exp_gradient_descent(
            &q,
            &cfg.gradient,
            |m| {
                let (j, g, _) = mechanism_objective_grad(space, prior, m, model, lam, d);
                (j, g)
            },
            |m| primal_objective(space, prior, m, model, lam, d),
        );
        steps.extend(out.steps);
        stalls += usize::from(out.stalled);
        let q_new = out.mechanism;
        let e = model.expected(&q_new);
        let leak = max_record_leakage(space, prior, &q_new).0;
        let j = leak + lambda * softplus(e - d).powi(2);
        if j < best_j.0 {
            best_j = (j, q_new.clone());
        }
        if e <= d + cfg.constraint_margin && best_feasible.as_ref().is_none_or(|b| leak < b.0) {
            best_feasible = Some((leak, q_new.clone()));
        }
        if e > d + cfg.constraint_margin {
            lambda *= cfg.penalty_factor;
        } else if e < d - cfg.constraint_margin {
            lambda /= cfg.penalty_factor;
        }
        q = q_new;
        let settled = (e - e_prev).abs() < cfg.penalty_tolerance && e <= d + cfg.constraint_margin;
        e_prev = e;
        if settled {
            break;
        }
    }
    let mechanism = best_feasible.map(|b| b.1).unwrap_or(best_j.1);
    MechanismUpdate { mechanism, penalty: lambda, rounds, steps, stalls }
}

/// `(1-θ)·exact + θ·uniform` with the largest `θ <= 1` keeping `E <= D`.
pub fn initial_primal_mechanism(space: &ProblemSpace, model: &DistortionModel, bound: f64) -> Mechanism {
    let exact = model.exact_release(space.output_size());
    let uniform = Mechanism::uniform(space);
    let eu = model.expected(&uniform);
    let theta = if eu <= bound { 1.0 } else { bound / eu };
    uniform.mix(&exact, theta)
}

/// Spends unused distortion budget by mixing toward a constant mechanism. Leakage is convex
/// in the mechanism and zero for constant rows, so this never raises it.
pub fn absorb_slack(space: &ProblemSpace, model: &DistortionModel, mech: &Mechanism, bound: f64) -> Mechanism {
    let e = model.expected(mech);
    if e >= bound {
        return mech.clone();
    }
    let m = space.output_size();
    let mut best: Option<(f64, Mechanism)> = None;
    let mut targets: Vec<Mechanism> = (0..m)
        .map(|y| {
            let mut row = vec![0.0; m];
            row[y] = 1.0;
            Mechanism::constant(space, &row).expect("unit row")
        })
        .collect();
    targets.push(Mechanism::uniform(space));
    for c in targets {
        let ec = model.expected(&c);
        let t = if ec <= bound { 1.0 } else { (bound - e) / (ec - e) };
        if best.as_ref().is_none_or(|b| t > b.0) {
            best = Some((t, c));
        }
    }
    let (t, c) = best.expect("at least one constant mechanism");
    c.mix(mech, t.clamp(0.0, 1.0))
}

struct Audit {
    leakage: f64,
    prior: JointPrior,
    trace: Vec<f64>,
}

fn audit(space: &ProblemSpace, mech: &Mechanism, cfg: &LeakageConfig) -> Result<Audit> {
    let r = max_leakage(space, mech, cfg)?;
    Ok(Audit { leakage: r.leakage, prior: r.optimal_prior, trace: r.trace })
}

/// Solves `ε(D, b)` from the closed-form initial mechanism.
pub fn primal_tradeoff(
    space: &ProblemSpace,
    p0: &JointPrior,
    model: &DistortionModel,
    cfg: &PrimalConfig,
) -> Result<TradeoffPoint> {
    primal_tradeoff_from(space, p0, model, cfg, None)
}

/// As [`primal_tradeoff`], additionally considering `warm` (e.g. the previous point of a
/// sweep) as a starting mechanism when it satisfies the distortion bound.
pub fn primal_tradeoff_from(
    space: &ProblemSpace,
    p0: &JointPrior,
    model: &DistortionModel,
    cfg: &PrimalConfig,
    warm: Option<&Mechanism>,
) -> Result<TradeoffPoint> {
    cfg.validate()?;
    cfg.leakage.validate(space)?;
    p0.check_space(space)?;
    let d = cfg.distortion_bound;
    let dmin = model.min_distortion();
    if dmin > d {
        return Err(Error::Infeasible(format!("smallest achievable distortion {dmin:.6} exceeds {d}")));
    }
    let init = initial_primal_mechanism(space, model, d);
    let mut q = match warm {
        Some(w) if model.expected(w) <= d => w.clone(),
        _ => init.clone(),
    };
    let feasible_cap = d + cfg.constraint_margin;
    let mut incumbent: Option<(f64, Mechanism, JointPrior)> = None;
    let mut traces = Vec::new();
    let mut incumbent_trace = Vec::new();
    let mut armijo = Vec::new();
    let consider = |m: &Mechanism, a: Audit, inc: &mut Option<(f64, Mechanism, JointPrior)>| {
        if model.expected(m) <= feasible_cap && inc.as_ref().is_none_or(|b| a.leakage < b.0) {
            *inc = Some((a.leakage, m.clone(), a.prior));
        }
    };

    if warm.is_some() {
        let a = audit(space, &init, &cfg.leakage)?;
        traces.push(a.trace.clone());
        consider(&init, a, &mut incumbent);
    }
    let mut i_prev = f64::NEG_INFINITY;
    let mut iterations = 0;
    for k in 0..cfg.max_outer_iterations {
        iterations += 1;
        let a = audit(space, &q, &cfg.leakage)?;
        traces.push(a.trace.clone());
        let prior = a.prior.clone();
        consider(&q, a, &mut incumbent);
        incumbent_trace.push(incumbent.as_ref().map_or(f64::INFINITY, |b| b.0));

        let upd = update_mechanism(space, &prior, model, &q, cfg);
        armijo.extend(upd.steps);
        q = upd.mechanism;
        let i_now = max_record_leakage(space, &prior, &q).0;
        let delta = (i_now - i_prev).abs();
        i_prev = i_now;
        if k + 1 >= cfg.min_outer_iterations && delta <= cfg.tolerance {
            break;
        }
    }
    let a = audit(space, &q, &cfg.leakage)?;
    traces.push(a.trace.clone());
    consider(&q, a, &mut incumbent);

    // Spend leftover budget on the incumbent; keep it only if the audit agrees.
    if let Some((leak, m, _)) = incumbent.clone() {
        let absorbed = absorb_slack(space, model, &m, d);
        if absorbed != m {
            let a = audit(space, &absorbed, &cfg.leakage)?;
            traces.push(a.trace.clone());
            if a.leakage < leak {
                consider(&absorbed, a, &mut incumbent);
            }
        }
    }
    incumbent_trace.push(incumbent.as_ref().map_or(f64::INFINITY, |b| b.0));

    let (leakage, mechanism, prior) = match incumbent {
        Some(v) => v,
        None => {
            let a = audit(space, &q, &cfg.leakage)?;
            (a.leakage, q, a.prior)
        }
    };
    let distortion = model.expected(&mechanism);
    Ok(TradeoffPoint {
        bound_requested: d,
        value_achieved: leakage,
        constraint_residual: distortion - d,
        leakage,
        distortion,
        feasible: distortion <= feasible_cap,
        mechanism,
        prior,
        iterations,
        armijo_steps: armijo,
        leakage_traces: traces,
        incumbent_trace,
    })
}

/// Solves each bound in order, warm-starting from the previous point's mechanism.
pub fn primal_sweep(
    space: &ProblemSpace,
    p0: &JointPrior,
    model: &DistortionModel,
    bounds: &[f64],
    cfg: &PrimalConfig,
) -> Vec<Result<TradeoffPoint>> {
    let mut prev: Option<Mechanism> = None;
    bounds
        .iter()
        .map(|&d| {
            let c = PrimalConfig { distortion_bound: d, ..cfg.clone() };
            let r = primal_tradeoff_from(space, p0, model, &c, prev.as_ref());
            if let Ok(p) = &r {
                prev = Some(p.mechanism.clone());
            }
            r
        })
        .collect()
}
