//! Minimal distortion `D(L, b)` subject to worst-case leakage at most `L`.
//!
//! Starts from exact release and trades distortion for privacy through an adaptive
//! leakage penalty. The final mechanism is audited and, when needed, pulled back onto the
//! feasible side of the leakage constraint along a segment toward a constant mechanism.

use crate::error::{Error, Result};
use crate::infotheory::{grad_mi_mechanism, max_record_leakage, sigmoid, softplus};
use crate::leakage::{max_leakage, LeakageConfig};
use crate::matrix::Matrix;
use crate::mechanism::Mechanism;
use crate::primal::{exp_gradient_descent, validate_gradient, ArmijoStep, GradientConfig, TradeoffPoint};
use crate::prior::JointPrior;
use crate::query::DistortionModel;
use crate::space::ProblemSpace;

#[derive(Clone, Debug, PartialEq)]
pub struct DualConfig {
    pub leakage_bound: f64,
    pub outer_tolerance: f64,
    pub constraint_tolerance: f64,
    pub penalty_init: f64,
    pub penalty_factor: f64,
    /// Inner adaptation margin `δ`.
    pub constraint_margin: f64,
    pub max_outer_iterations: usize,
    pub penalty_tolerance: f64,
    pub max_penalty_rounds: usize,
    /// Average the up and down penalty updates when the audited leakage crosses `L`.
    pub zigzag_damping: bool,
    /// Bisection steps used to place the returned mechanism on the constraint boundary.
    pub boundary_steps: usize,
    pub gradient: GradientConfig,
    pub leakage: LeakageConfig,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self {
            leakage_bound: 0.1,
            outer_tolerance: 1e-3,
            constraint_tolerance: 0.01,
            penalty_init: 1.0,
            penalty_factor: 1.5,
            constraint_margin: 0.01,
            max_outer_iterations: 30,
            penalty_tolerance: 1e-6,
            max_penalty_rounds: 100,
            zigzag_damping: false,
            boundary_steps: 30,
            gradient: GradientConfig::default(),
            leakage: LeakageConfig::default(),
        }
    }
}

impl DualConfig {
    pub fn new(leakage_bound: f64, entropy_bound: f64) -> Self {
        Self {
            leakage_bound,
            leakage: LeakageConfig::with_bound(entropy_bound),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.leakage_bound > 0.0) {
            return Err(Error::Domain("leakage bound must be positive".into()));
        }
        if !(self.penalty_factor > 1.0) || !(self.penalty_init > 0.0) || !(self.constraint_tolerance > 0.0) {
            return Err(Error::Domain("need penalty factor > 1, initial penalty > 0, constraint tolerance > 0".into()));
        }
        validate_gradient(&self.gradient)
    }
}

/// `P = softplus(I - L)^2` with `I = max_i I(X_i;Y)`, and its gradient through `i*`.
pub fn penalty_leakage(space: &ProblemSpace, prior: &JointPrior, mech: &Mechanism, bound: f64) -> (f64, Matrix) {
    let (leak, istar) = max_record_leakage(space, prior, mech);
    let z = leak - bound;
    let sp = softplus(z);
    let scale = 2.0 * sp * sigmoid(z);
    let mut g = grad_mi_mechanism(space, prior, mech, istar);
    g.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
    (sp * sp, g)
}

/// `E + λ P`.
pub fn dual_objective(
    space: &ProblemSpace,
    prior: &JointPrior,
    mech: &Mechanism,
    model: &DistortionModel,
    lambda: f64,
    bound: f64,
) -> f64 {
    let leak = max_record_leakage(space, prior, mech).0;
    model.expected(mech) + lambda * softplus(leak - bound).powi(2)
}

fn dual_eval(
    space: &ProblemSpace,
    prior: &JointPrior,
    mech: &Mechanism,
    model: &DistortionModel,
    lambda: f64,
    bound: f64,
) -> (f64, Matrix) {
    let (pen, pg) = penalty_leakage(space, prior, mech, bound);
    let mut g = model.weights().clone();
    for (a, b) in g.as_mut_slice().iter_mut().zip(pg.as_slice()) {
        *a += lambda * b;
    }
    (model.expected(mech) + lambda * pen, g)
}

/// Exponentiated gradient on `E + λ P` with backtracking; the worst record is refreshed at
/// every step. The flag reports a backtracking stall.
pub fn dual_exp_gradient(
    space: &ProblemSpace,
    prior: &JointPrior,
    model: &DistortionModel,
    start: &Mechanism,
    lambda: f64,
    bound: f64,
    cfg: &GradientConfig,
) -> (Mechanism, Vec<ArmijoStep>, bool) {
    let out = exp_gradient_descent(
        start,
        cfg,
        |m| dual_eval(space, prior, m, model, lambda, bound),
        |m| dual_objective(space, prior, m, model, lambda, bound),
    );
    (out.mechanism, out.steps, out.stalled)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualUpdate {
    pub mechanism: Mechanism,
    pub penalty: f64,
    pub rounds: usize,
    pub steps: Vec<ArmijoStep>,
    pub stalls: usize,
}

/// Adaptive penalty loop for a fixed prior. Returns the lowest-distortion iterate with
/// `I <= L + δ`, or the lowest-objective iterate when none qualifies.
pub fn dual_mechanism_update(
    space: &ProblemSpace,
    prior: &JointPrior,
    model: &DistortionModel,
    start: &Mechanism,
    lambda: f64,
    cfg: &DualConfig,
) -> DualUpdate {
    let l = cfg.leakage_bound;
    let mut q = start.clone();
    let mut lambda = lambda;
    let mut i_prev = f64::INFINITY;
    let mut best_j = (f64::INFINITY, q.clone());
    let mut best_feasible: Option<(f64, Mechanism)> = None;
    let mut steps = Vec::new();
    let mut stalls = 0;
    let mut rounds = 0;
    for _ in 0..cfg.max_penalty_rounds {
        rounds += 1;
        let (next, s, stalled) = dual_exp_gradient(space, prior, model, &q, lambda, l, &cfg.gradient);
        steps.extend(s);
        stalls += usize::from(stalled);
        q = next;
        let i = max_record_leakage(space, prior, &q).0;
        let e = model.expected(&q);
        let j = e + lambda * softplus(i - l).powi(2);
        if j < best_j.0 {
            best_j = (j, q.clone());
        }
        if i <= l + cfg.constraint_margin && best_feasible.as_ref().is_none_or(|b| e < b.0) {
            best_feasible = Some((e, q.clone()));
        }
        if i > l + cfg.constraint_margin {
            lambda *= cfg.penalty_factor;
        } else if i < l - cfg.constraint_margin {
            lambda /= cfg.penalty_factor;
        }
        let settled = (i - i_prev).abs() < cfg.penalty_tolerance && (i - l).abs() < cfg.penalty_tolerance;
        i_prev = i;
        if settled {
            break;
        }
    }
    let mechanism = best_feasible.map(|b| b.1).unwrap_or(best_j.1);
    DualUpdate { mechanism, penalty: lambda, rounds, steps, stalls }
}

/// Constant mechanism with the lowest expected distortion; it leaks nothing.
pub fn best_constant_mechanism(space: &ProblemSpace, model: &DistortionModel) -> Mechanism {
    let (y, _) = model.best_constant_output();
    let mut row = vec![0.0; space.output_size()];
    row[y] = 1.0;
    Mechanism::constant(space, &row).expect("unit row")
}

struct Audited {
    leakage: f64,
    prior: JointPrior,
}

struct Auditor<'a> {
    space: &'a ProblemSpace,
    cfg: &'a LeakageConfig,
    traces: Vec<Vec<f64>>,
}

impl Auditor<'_> {
    fn run(&mut self, m: &Mechanism) -> Result<Audited> {
        let r = max_leakage(self.space, m, self.cfg)?;
        self.traces.push(r.trace);
        Ok(Audited { leakage: r.leakage, prior: r.optimal_prior })
    }

    /// Largest `t` in `[0, 1]` with `leak(t·toward + (1-t)·from) <= bound`, given that
    /// `from` satisfies it. Leakage is convex along the segment, so the feasible `t` form
    /// an interval containing 0.
    fn furthest_feasible(
        &mut self,
        from: &Mechanism,
        toward: &Mechanism,
        bound: f64,
        steps: usize,
    ) -> Result<(Mechanism, Audited)> {
        let end = self.run(toward)?;
        if end.leakage <= bound {
            return Ok((toward.clone(), end));
        }
        let mut best = (from.clone(), self.run(from)?);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..steps {
            let t = 0.5 * (lo + hi);
            let m = toward.mix(from, t);
            let a = self.run(&m)?;
            if a.leakage <= bound {
                lo = t;
                best = (m, a);
            } else {
                hi = t;
            }
        }
        Ok(best)
    }
}

/// Solves `D(L, b)` from exact release.
pub fn dual_solve(
    space: &ProblemSpace,
    p0: &JointPrior,
    model: &DistortionModel,
    cfg: &DualConfig,
) -> Result<TradeoffPoint> {
    cfg.validate()?;
    cfg.leakage.validate(space)?;
    p0.check_space(space)?;
    let l = cfg.leakage_bound;
    let cap = l + cfg.constraint_tolerance;
    let exact = model.exact_release(space.output_size());
    let mut q = exact.clone();
    let mut lambda = cfg.penalty_init;
    let mut d_prev = f64::INFINITY;
    let mut last_side: Option<bool> = None;
    let mut auditor = Auditor { space, cfg: &cfg.leakage, traces: Vec::new() };
    let mut armijo = Vec::new();
    let mut incumbent_trace = Vec::new();
    // (distortion, mechanism, audit) of the best leakage-feasible mechanism seen.
    let mut incumbent: Option<(f64, Mechanism, Audited)> = None;
    let mut least_leaky: Option<(f64, Mechanism)> = None;
    let mut iterations = 0;

    fn offer(inc: &mut Option<(f64, Mechanism, Audited)>, e: f64, m: &Mechanism, a: Audited, cap: f64) {
        if a.leakage <= cap && inc.as_ref().is_none_or(|b| e < b.0) {
            *inc = Some((e, m.clone(), a));
        }
    }

    for _ in 0..cfg.max_outer_iterations {
        iterations += 1;
        let a = auditor.run(&q)?;
        let i = a.leakage;
        let prior = a.prior.clone();
        let e = model.expected(&q);
        if least_leaky.as_ref().is_none_or(|b| i < b.0) {
            least_leaky = Some((i, q.clone()));
        }
        offer(&mut incumbent, e, &q, a, cap);
        incumbent_trace.push(incumbent.as_ref().map_or(f64::INFINITY, |b| b.0));

        let half = 0.5 * cfg.constraint_tolerance;
        let side = if i > l + half {
            Some(true)
        } else if i < l - half {
            Some(false)
        } else {
            None
        };
        match side {
            Some(up) if cfg.zigzag_damping && last_side.is_some_and(|s| s != up) => {
                lambda = 0.5 * (lambda * cfg.penalty_factor + lambda / cfg.penalty_factor);
            }
            Some(true) => lambda *= cfg.penalty_factor,
            Some(false) => lambda /= cfg.penalty_factor,
            None => {}
        }
        if side.is_some() {
            last_side = side;
        }

        let upd = dual_mechanism_update(space, &prior, model, &q, lambda, cfg);
        armijo.extend(upd.steps);
        lambda = upd.penalty;
        q = upd.mechanism;
        let d_now = model.expected(&q);
        let change = if d_prev.is_infinite() {
            f64::INFINITY
        } else if d_prev == 0.0 {
            if (d_now - d_prev).abs() < 1e-9 { 0.0 } else { f64::INFINITY }
        } else {
            (d_now - d_prev).abs() / d_prev
        };
        d_prev = d_now;
        if change < cfg.outer_tolerance && (i - l).abs() < cfg.constraint_tolerance {
            break;
        }
    }
    let a = auditor.run(&q)?;
    if least_leaky.as_ref().is_none_or(|b| a.leakage < b.0) {
        least_leaky = Some((a.leakage, q.clone()));
    }
    offer(&mut incumbent, model.expected(&q), &q, a, cap);

    // Restoration: pull the least leaky iterate toward a zero-leakage mechanism until it
    // meets the bound.
    let constant = best_constant_mechanism(space, model);
    let uniform = Mechanism::uniform(space);
    if let Some((_, m)) = least_leaky {
        for safe in [&constant, &uniform] {
            let (r, a) = auditor.furthest_feasible(safe, &m, l, cfg.boundary_steps)?;
            offer(&mut incumbent, model.expected(&r), &r, a, cap);
        }
    }
    // Boundary refinement: move the incumbent toward exact release while the audit allows.
    if let Some((_, m, _)) = incumbent.as_ref().map(|(e, m, a)| (*e, m.clone(), a.leakage)) {
        let (r, a) = auditor.furthest_feasible(&m, &exact, l, cfg.boundary_steps)?;
        offer(&mut incumbent, model.expected(&r), &r, a, cap);
    }
    incumbent_trace.push(incumbent.as_ref().map_or(f64::INFINITY, |b| b.0));

    let (distortion, mechanism, audit) = incumbent.expect("restoration always yields a feasible point");
    Ok(TradeoffPoint {
        bound_requested: l,
        value_achieved: distortion,
        constraint_residual: audit.leakage - l,
        leakage: audit.leakage,
        distortion,
        feasible: audit.leakage <= cap,
        mechanism,
        prior: audit.prior,
        iterations,
        armijo_steps: armijo,
        leakage_traces: auditor.traces,
        incumbent_trace,
    })
}

/// Solves each leakage bound independently.
pub fn dual_sweep(
    space: &ProblemSpace,
    p0: &JointPrior,
    model: &DistortionModel,
    bounds: &[f64],
    cfg: &DualConfig,
) -> Vec<Result<TradeoffPoint>> {
    bounds
        .iter()
        .map(|&l| dual_solve(space, p0, model, &DualConfig { leakage_bound: l, ..cfg.clone() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::binary_entropy;
    use crate::mechanisms::build_bsc;
    use crate::oracle::bsc_distortion_inverse;
    use crate::query::{DistortionMetric, Query};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn parity(n: usize) -> (ProblemSpace, JointPrior, DistortionModel) {
        let s = ProblemSpace::binary(n, 2).unwrap();
        let p0 = JointPrior::uniform(&s);
        let m = DistortionModel::new(&s, &p0, &Query::parity(), &DistortionMetric::AbsoluteDifference).unwrap();
        (s, p0, m)
    }

    #[test]
    fn penalty_at_and_far_below_the_bound() {
        let (s, p0, _) = parity(2);
        let q = build_bsc(&s, &Query::parity(), 0.2).unwrap();
        let leak = max_record_leakage(&s, &p0, &q).0;
        let (p, g) = penalty_leakage(&s, &p0, &q, leak + 30.0);
        assert!(p < 1e-20 && g.as_slice().iter().all(|v| v.abs() < 1e-12));
        let (p, g) = penalty_leakage(&s, &p0, &q, leak);
        assert_abs_diff_eq!(p, 2f64.ln().powi(2), epsilon = 1e-12);
        let raw = grad_mi_mechanism(&s, &p0, &q, 0);
        for (a, b) in g.as_slice().iter().zip(raw.as_slice()) {
            assert_abs_diff_eq!(*a, 2f64.ln() * b, epsilon = 1e-12);
        }
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let (s, _, _) = parity(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 10 {
            let mut m = Matrix::zeros(8, 2);
            m.as_mut_slice().iter_mut().for_each(|v| *v = rng.random::<f64>() + 0.05);
            let q = Mechanism::from_weights(m).unwrap();
            let prior = JointPrior::from_weights((0..8).map(|_| rng.random::<f64>() + 0.1).collect()).unwrap();
            let mut leaks = crate::infotheory::record_leakages(&s, &prior, &q);
            leaks.sort_by(f64::total_cmp);
            if leaks[2] - leaks[1] < 1e-4 {
                continue;
            }
            checked += 1;
            let bound = leaks[2] * rng.random::<f64>() * 2.0;
            let (_, g) = penalty_leakage(&s, &prior, &q, bound);
            for k in 0..16 {
                let mut hi = q.matrix().clone();
                let mut lo = q.matrix().clone();
                hi.as_mut_slice()[k] += h;
                lo.as_mut_slice()[k] -= h;
                let f = |m: Matrix| penalty_leakage(&s, &prior, &Mechanism::from_raw(m), bound).0;
                let n = (f(hi) - f(lo)) / (2.0 * h);
                let a = g.as_slice()[k];
                assert!((a - n).abs() <= 1e-9 + 1e-5 * a.abs().max(n.abs()), "{a} vs {n}");
            }
        }
    }

    #[test]
    fn pure_distortion_descent_heads_to_exact_release() {
        let (s, p0, model) = parity(2);
        let start = Mechanism::uniform(&s);
        let cfg = GradientConfig { max_steps: 2000, ..GradientConfig::default() };
        let (q, steps, _) = dual_exp_gradient(&s, &p0, &model, &start, 0.0, 0.1, &cfg);
        assert!(model.expected(&q) < 1e-3, "{}", model.expected(&q));
        assert!(steps.iter().all(|st| st.satisfied(1e-12)));
        let (same, _, _) = dual_exp_gradient(&s, &p0, &model, &model.exact_release(2), 0.0, 0.1, &cfg);
        assert_eq!(same, model.exact_release(2));
    }

    #[test]
    fn one_step_descends_on_a_toy() {
        let s = ProblemSpace::new(vec![2], 2).unwrap();
        let p0 = JointPrior::uniform(&s);
        let model = DistortionModel::new(&s, &p0, &Query::Table(vec![0, 1]), &DistortionMetric::AbsoluteDifference).unwrap();
        let q = Mechanism::new(Matrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]])).unwrap();
        let (j, g) = dual_eval(&s, &p0, &q, &model, 2.0, 0.1);
        let next = crate::primal::exp_gradient_step(&q, &g, 0.05);
        assert!(dual_objective(&s, &p0, &next, &model, 2.0, 0.1) < j);
    }

    #[test]
    fn loose_bound_keeps_exact_release() {
        let (s, p0, model) = parity(2);
        let pt = dual_solve(&s, &p0, &model, &DualConfig::new(0.7, 0.0)).unwrap();
        assert_eq!(pt.distortion, 0.0);
        let pt = dual_solve(&s, &p0, &model, &DualConfig::new(0.05, 4f64.ln())).unwrap();
        assert_eq!(pt.distortion, 0.0);
        assert!(pt.leakage < 1e-9);
    }

    #[test]
    fn constant_mechanism_is_always_feasible() {
        let (s, _, model) = parity(3);
        let c = best_constant_mechanism(&s, &model);
        assert!(max_leakage(&s, &c, &LeakageConfig::default()).unwrap().leakage < 1e-12);
        assert_abs_diff_eq!(model.expected(&c), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn tiny_bound_approaches_best_constant() {
        let (s, p0, model) = parity(2);
        let pt = dual_solve(&s, &p0, &model, &DualConfig::new(1e-4, 0.0)).unwrap();
        assert!(pt.leakage <= 1e-4 + 0.01);
        assert!(pt.distortion > 0.45 && pt.distortion <= 0.5 + 1e-9, "{}", pt.distortion);
    }

    #[test]
    fn bsc_certificate_at_p_three_tenths() {
        let (s, p0, model) = parity(2);
        let l = 2f64.ln() - binary_entropy(0.3);
        let pt = dual_solve(&s, &p0, &model, &DualConfig::new(l, 0.0)).unwrap();
        assert!(pt.distortion <= 0.3 + 5e-3, "{}", pt.distortion);
        assert!(pt.leakage <= l + 0.01);
        assert_abs_diff_eq!(bsc_distortion_inverse(l), 0.3, epsilon = 1e-9);
        assert!(pt.armijo_steps.iter().all(|st| st.satisfied(1e-12)));
    }

    #[test]
    fn rejects_nonpositive_bound() {
        let (s, p0, model) = parity(2);
        assert!(dual_solve(&s, &p0, &model, &DualConfig::new(0.0, 0.0)).is_err());
    }
}
