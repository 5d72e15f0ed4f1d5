//! Maximal per-record leakage `L(b) = max_{p : H(p) >= b} max_i I(X_i; Y)`.
//!
//! The outer loop alternates over records. For each record the marginal is updated by a
//! multiplier-penalized Blahut–Arimoto step and the conditionals either by a joint
//! unit-vector search (when `H(X_i) >= b` leaves the constraint inactive) or by projected
//! gradient coordinate ascent on the entropy boundary of each row.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::infotheory::{
    entropy, floored_ln, grad_mi_conditional_row, max_record_leakage, mutual_information,
    mutual_information_from_channel, symbol_divergences,
};
use crate::matrix::Matrix;
use crate::mechanism::{output_channel, Mechanism};
use crate::prior::{compose_view, extract_view, JointPrior, RecordView};
use crate::projections::{project_entropy, project_simplex, EntropyProjectionConfig};
use crate::space::ProblemSpace;

/// Slack on `H(p) >= b` for accepted priors.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Joint enumeration of deterministic conditional matrices is used up to this many matrices.
pub const JOINT_UNIT_SEARCH_CAP: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct LeakageConfig {
    /// Entropy floor `b` on the adversary prior, nats.
    pub entropy_bound: f64,
    pub tolerance: f64,
    pub max_outer_iterations: usize,
    /// Multiplier step `α` of the marginal update.
    pub ba_step_size: f64,
    pub gd_initial_step: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    pub entropy_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Budget for each marginal update and each conditional ascent.
    pub inner_iterations: usize,
}

impl Default for LeakageConfig {
    fn default() -> Self {
        Self {
            entropy_bound: 0.0,
            tolerance: 1e-6,
            max_outer_iterations: 1000,
            ba_step_size: 0.1,
            gd_initial_step: 1.0,
            backtrack_factor: 0.5,
            max_backtracks: 30,
            entropy_tol: 1e-8,
            restarts: 5,
            seed: 0,
            inner_iterations: 200,
        }
    }
}

impl LeakageConfig {
    pub fn with_bound(b: f64) -> Self {
        Self { entropy_bound: b, ..Self::default() }
    }

    pub fn validate(&self, space: &ProblemSpace) -> Result<()> {
        let b = self.entropy_bound;
        let hmax = space.max_entropy();
        if !(b >= 0.0) || b > hmax + 1e-12 {
            return Err(Error::Domain(format!("entropy bound {b} outside [0, ln|X| = {hmax:.6}]")));
        }
        if !(self.tolerance > 0.0)
            || !(self.ba_step_size > 0.0)
            || !(self.gd_initial_step > 0.0)
            || !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0)
            || !(self.entropy_tol > 0.0)
        {
            return Err(Error::Domain("tolerances and step sizes must be positive".into()));
        }
        if self.restarts == 0 || self.inner_iterations == 0 || self.max_outer_iterations == 0 {
            return Err(Error::Domain("iteration budgets and restarts must be positive".into()));
        }
        Ok(())
    }

    fn projection(&self) -> EntropyProjectionConfig {
        EntropyProjectionConfig { tolerance: self.entropy_tol, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeakageResult {
    pub leakage: f64,
    pub worst_record: usize,
    pub optimal_prior: JointPrior,
    /// Incumbent value after every accepted outer iteration of the winning restart.
    pub trace: Vec<f64>,
    pub feasible: bool,
    pub restarts_used: usize,
    pub iterations: usize,
    /// Final value of every restart, in restart order.
    pub restart_values: Vec<f64>,
    pub restart_traces: Vec<Vec<f64>>,
}

/// Minimal entropy row `k` must carry so that `H(X) >= b` given the other rows:
/// `c = (b - H(X_i)) / p_k - sum_{l != k} p_l / p_k H(X_{-i} | l)`.
pub fn compute_c_ik(view: &RecordView, b: f64, k: usize) -> Result<f64> {
    let pk = view.marginal[k];
    if pk <= 0.0 {
        return Err(Error::Domain(format!("row {k} has zero marginal mass")));
    }
    let rest: f64 = view
        .marginal
        .iter()
        .zip(view.row_entropies())
        .enumerate()
        .filter(|(l, _)| *l != k)
        .map(|(_, (p, h))| p * h)
        .sum();
    Ok((b - entropy(&view.marginal) - rest) / pk)
}

fn joint_entropy(marginal: &[f64], row_entropies: &[f64]) -> f64 {
    entropy(marginal) + marginal.iter().zip(row_entropies).map(|(p, h)| p * h).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalOutcome {
    pub marginal: Vec<f64>,
    pub leakage: f64,
    pub multiplier: f64,
    pub iterations: usize,
}

/// Marginal update with conditionals fixed:
/// `p(a) ∝ p(a) exp( D_a / (1+s) + s/(1+s) (H(X_{-i}|a) - ln p(a)) )`,
/// `s <- max(0, s - α (H(X) - b))`.
///
/// Iterates that fall below the entropy floor are pulled back along the segment from the
/// last feasible marginal. The best feasible marginal seen is returned.
pub fn optimize_marginal(
    space: &ProblemSpace,
    view: &RecordView,
    mech: &Mechanism,
    cfg: &LeakageConfig,
) -> MarginalOutcome {
    let b = cfg.entropy_bound;
    let ch = output_channel(space, view, mech);
    let h_rows = view.row_entropies();
    let mut p = view.marginal.clone();
    let mut best = (mutual_information_from_channel(&p, &ch), p.clone());
    let mut s: f64 = 0.0;
    let mut iterations = 0;
    for _ in 0..cfg.inner_iterations {
        iterations += 1;
        let d = symbol_divergences(&p, &ch);
        let w = 1.0 / (1.0 + s);
        let logits: Vec<f64> = p
            .iter()
            .zip(&d)
            .zip(&h_rows)
            .map(|((&pa, &da), &ha)| {
                if pa > 0.0 {
                    pa.ln() + w * da + (1.0 - w) * (ha - floored_ln(pa))
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut prop: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = prop.iter().sum();
        prop.iter_mut().for_each(|v| *v /= z);

        let h_prop = joint_entropy(&prop, &h_rows);
        s = (s - cfg.ba_step_size * (h_prop - b)).max(0.0);
        let moved: f64 = prop.iter().zip(&p).map(|(a, c)| (a - c).abs()).sum();
        if h_prop < b {
            prop = pull_back(&p, &prop, &h_rows, b);
        }
        p = prop;
        let val = mutual_information_from_channel(&p, &ch);
        if val > best.0 && joint_entropy(&p, &h_rows) >= b - FEASIBILITY_TOL {
            best = (val, p.clone());
        }
        if moved < 1e-12 {
            break;
        }
    }
    MarginalOutcome { marginal: best.1, leakage: best.0, multiplier: s, iterations }
}

/// Largest step from feasible `from` toward `to` that keeps `H(X) >= b`.
fn pull_back(from: &[f64], to: &[f64], h_rows: &[f64], b: f64) -> Vec<f64> {
    let at = |t: f64| -> Vec<f64> { from.iter().zip(to).map(|(a, c)| a + t * (c - a)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if joint_entropy(&at(mid), h_rows) >= b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

fn view_leakage(space: &ProblemSpace, view: &RecordView, mech: &Mechanism) -> f64 {
    mutual_information(space, view, mech)
}

/// Best unit vector for row `k` with the other rows fixed; lowest index wins ties.
pub fn best_unit_row(space: &ProblemSpace, view: &RecordView, mech: &Mechanism, k: usize) -> (usize, f64) {
    let mut trial = view.clone();
    let mut best = (0, f64::NEG_INFINITY);
    let nr = view.rest_size();
    for r in 0..nr {
        let row = trial.conditional.row_mut(k);
        row.fill(0.0);
        row[r] = 1.0;
        let v = view_leakage(space, &trial, mech);
        if v > best.1 {
            best = (r, v);
        }
    }
    best
}

fn unit_matrix(choice: &[usize], nr: usize) -> Matrix {
    let mut m = Matrix::zeros(choice.len(), nr);
    for (a, &r) in choice.iter().enumerate() {
        m[(a, r)] = 1.0;
    }
    m
}

/// Maximizes leakage over deterministic conditional matrices with the marginal fixed.
/// Joint enumeration when `n_{-i}^{n_i}` is at most [`JOINT_UNIT_SEARCH_CAP`], row-wise
/// sweeps otherwise.
pub fn best_unit_conditionals(space: &ProblemSpace, view: &RecordView, mech: &Mechanism) -> (Matrix, f64) {
    let ni = view.alphabet_size();
    let nr = view.rest_size();
    let combos = (nr as f64).powi(ni as i32);
    let mut trial = view.clone();
    if combos <= JOINT_UNIT_SEARCH_CAP as f64 {
        let mut best = (vec![0; ni], f64::NEG_INFINITY);
        let mut choice = vec![0usize; ni];
        for c in 0..combos as usize {
            let mut rem = c;
            // row 0 is the slowest digit so that ties resolve to the lexicographically first matrix
            for a in (0..ni).rev() {
                choice[a] = rem % nr;
                rem /= nr;
            }
            trial.conditional = unit_matrix(&choice, nr);
            let v = view_leakage(space, &trial, mech);
            if v > best.1 {
                best = (choice.clone(), v);
            }
        }
        return (unit_matrix(&best.0, nr), best.1);
    }
    let mut choice: Vec<usize> = (0..ni)
        .map(|a| {
            let row = view.conditional.row(a);
            (0..nr).fold(0, |b, r| if row[r] > row[b] { r } else { b })
        })
        .collect();
    trial.conditional = unit_matrix(&choice, nr);
    let mut val = view_leakage(space, &trial, mech);
    for _ in 0..64 {
        let mut changed = false;
        for a in 0..ni {
            let (r, v) = best_unit_row(space, &trial, mech, a);
            if v > val {
                choice[a] = r;
                val = v;
                trial.conditional = unit_matrix(&choice, nr);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (trial.conditional, val)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalOutcome {
    pub conditional: Matrix,
    pub leakage: f64,
    /// Leakage after every pass over the rows.
    pub trace: Vec<f64>,
    pub passes: usize,
}

/// Coordinate ascent over conditional rows with the marginal fixed. Rows whose boundary
/// entropy `c` is nonpositive (or whose marginal is zero) become the best unit vector;
/// the others take a gradient step, are projected to the simplex and then retracted to
/// entropy `c`, backtracking until leakage does not decrease.
pub fn optimize_conditionals(
    space: &ProblemSpace,
    view: &RecordView,
    mech: &Mechanism,
    cfg: &LeakageConfig,
) -> Result<ConditionalOutcome> {
    let b = cfg.entropy_bound;
    let nr = view.rest_size();
    let hmax = (nr as f64).ln();
    let pcfg = cfg.projection();
    let mut v = view.clone();
    let mut cur = view_leakage(space, &v, mech);
    let mut trace = vec![cur];
    let mut passes = 0;
    for _ in 0..cfg.inner_iterations {
        passes += 1;
        let before = cur;
        for k in 0..v.alphabet_size() {
            if v.marginal[k] <= 0.0 {
                let (r, _) = best_unit_row(space, &v, mech, k);
                let row = v.conditional.row_mut(k);
                row.fill(0.0);
                row[r] = 1.0;
                continue;
            }
            let c = compute_c_ik(&v, b, k)?;
            if c > hmax + FEASIBILITY_TOL {
                return Err(Error::Infeasible(format!(
                    "row {k} needs entropy {c:.6} but at most {hmax:.6} is available"
                )));
            }
            if c <= 0.0 {
                let (r, val) = best_unit_row(space, &v, mech, k);
                if val >= cur {
                    let row = v.conditional.row_mut(k);
                    row.fill(0.0);
                    row[r] = 1.0;
                    cur = val;
                }
                continue;
            }
            let target = c.min(hmax);
            let g = grad_mi_conditional_row(space, &v, mech, k);
            let row: Vec<f64> = v.conditional.row(k).to_vec();
            let mut eta = cfg.gd_initial_step;
            let mut accepted = false;
            let mut trial = v.clone();
            for _ in 0..=cfg.max_backtracks {
                let stepped: Vec<f64> = row.iter().zip(&g).map(|(r, gr)| r + eta * gr).collect();
                if let Ok(cand) = project_entropy(&project_simplex(&stepped), target, &pcfg) {
                    trial.conditional.set_row(k, &cand);
                    let val = view_leakage(space, &trial, mech);
                    if val >= cur {
                        v.conditional.set_row(k, &cand);
                        cur = val;
                        accepted = true;
                        break;
                    }
                }
                eta *= cfg.backtrack_factor;
            }
            if !accepted {
                // Stationary or tied rows (e.g. uniform rows under a symmetric channel) cannot be
                // retracted along their own temperature path; move toward the best vertex instead.
                let (r, _) = best_unit_row(space, &v, mech, k);
                let mut t = 1.0;
                for _ in 0..=cfg.max_backtracks {
                    let mixed: Vec<f64> = row
                        .iter()
                        .enumerate()
                        .map(|(j, &x)| (1.0 - t) * x + if j == r { t } else { 0.0 })
                        .collect();
                    if let Ok(cand) = project_entropy(&mixed, target, &pcfg) {
                        trial.conditional.set_row(k, &cand);
                        let val = view_leakage(space, &trial, mech);
                        if val >= cur {
                            v.conditional.set_row(k, &cand);
                            cur = val;
                            break;
                        }
                    }
                    t *= cfg.backtrack_factor;
                }
            }
        }
        trace.push(cur);
        if cur - before < cfg.tolerance {
            break;
        }
    }
    Ok(ConditionalOutcome { conditional: v.conditional, leakage: cur, trace, passes })
}

/// One alternating run from `init`. Only the best per-record candidate of each sweep is
/// kept, and only if it improves the incumbent.
pub fn max_leakage_from(
    space: &ProblemSpace,
    mech: &Mechanism,
    cfg: &LeakageConfig,
    init: &JointPrior,
) -> Result<(JointPrior, f64, usize, Vec<f64>)> {
    cfg.validate(space)?;
    mech.check_space(space)?;
    init.check_space(space)?;
    let b = cfg.entropy_bound;
    if init.entropy() < b - FEASIBILITY_TOL {
        return Err(Error::Infeasible(format!(
            "initial prior has entropy {:.6} below {b}",
            init.entropy()
        )));
    }
    let mut p = init.clone();
    let (mut best, mut worst) = max_record_leakage(space, &p, mech);
    let mut trace = vec![best];
    for _ in 0..cfg.max_outer_iterations {
        let mut cand_best: Option<(f64, usize, JointPrior)> = None;
        for i in 0..space.record_count() {
            let mut view = extract_view(space, &p, i);
            view.marginal = optimize_marginal(space, &view, mech, cfg).marginal;
            if b <= entropy(&view.marginal) {
                view.conditional = best_unit_conditionals(space, &view, mech).0;
            } else {
                match optimize_conditionals(space, &view, mech, cfg) {
                    Ok(o) => view.conditional = o.conditional,
                    Err(Error::Infeasible(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            let cand = compose_view(space, &view);
            if cand.entropy() < b - FEASIBILITY_TOL {
                continue;
            }
            let (val, w) = max_record_leakage(space, &cand, mech);
            if cand_best.as_ref().is_none_or(|c| val > c.0) {
                cand_best = Some((val, w, cand));
            }
        }
        match cand_best {
            Some((val, w, cand)) if val > best => {
                let gain = val - best;
                p = cand;
                best = val;
                worst = w;
                trace.push(best);
                if gain < cfg.tolerance {
                    break;
                }
            }
            _ => break,
        }
    }
    Ok((p, best, worst, trace))
}

/// A seeded random prior with entropy at least `b`: Dirichlet(1) weights, flattened along
/// the temperature path when they fall short of `b`.
pub fn random_feasible_prior(space: &ProblemSpace, b: f64, seed: u64, entropy_tol: f64) -> Result<JointPrior> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..space.universe_size()).map(|_| Exp1.sample(&mut rng)).collect();
    let p = JointPrior::from_weights(w)?;
    if p.entropy() >= b {
        return Ok(p);
    }
    let cfg = EntropyProjectionConfig { tolerance: entropy_tol, ..Default::default() };
    let mut lifted = project_entropy(p.probs(), b, &cfg)?;
    // land on the feasible side of the tolerance band
    if entropy(&lifted) < b {
        let k = lifted.len() as f64;
        let mut t = 1e-9;
        while entropy(&lifted) < b && t <= 1.0 {
            lifted = p.probs().iter().zip(&lifted).map(|(_, l)| (1.0 - t) * l + t / k).collect();
            t *= 2.0;
        }
    }
    JointPrior::from_weights(lifted)
}

/// `L(b)`: best over restarts. Restart 0 starts from the uniform prior; restart `r > 0`
/// from [`random_feasible_prior`] seeded with `seed + r`.
pub fn max_leakage(space: &ProblemSpace, mech: &Mechanism, cfg: &LeakageConfig) -> Result<LeakageResult> {
    cfg.validate(space)?;
    mech.check_space(space)?;
    let b = cfg.entropy_bound.min(space.max_entropy());
    let cfg = LeakageConfig { entropy_bound: b, ..cfg.clone() };
    let mut best: Option<(JointPrior, f64, usize, Vec<f64>)> = None;
    let mut restart_values = Vec::with_capacity(cfg.restarts);
    let mut restart_traces = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let init = if r == 0 {
            JointPrior::uniform(space)
        } else {
            random_feasible_prior(space, b, cfg.seed.wrapping_add(r as u64), cfg.entropy_tol)?
        };
        let run = max_leakage_from(space, mech, &cfg, &init)?;
        restart_values.push(run.1);
        restart_traces.push(run.3.clone());
        if best.as_ref().is_none_or(|b| run.1 > b.1) {
            best = Some(run);
        }
    }
    let (prior, leakage, worst_record, trace) = best.expect("at least one restart");
    let feasible = prior.entropy() >= b - FEASIBILITY_TOL;
    Ok(LeakageResult {
        leakage,
        worst_record,
        iterations: trace.len() - 1,
        optimal_prior: prior,
        trace,
        feasible,
        restarts_used: cfg.restarts,
        restart_values,
        restart_traces,
    })
}
