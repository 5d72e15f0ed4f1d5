//! Brute-force verifiers that share no code path with the solvers' factorized updates.

use crate::error::{Error, Result};
use crate::mechanism::Mechanism;
use crate::space::ProblemSpace;

/// Largest universe the joint-grid oracle accepts.
pub const BRUTE_FORCE_MAX_UNIVERSE: usize = 16;
pub const BRUTE_FORCE_MAX_GRID: usize = 50;
/// Upper limit on the number of grid points visited.
pub const BRUTE_FORCE_POINT_CAP: u128 = 50_000_000;
pub const EXTREME_ENUMERATION_CAP: usize = 4096;
/// Slack on the entropy filter at grid points.
pub const ENTROPY_FILTER_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub leakage: f64,
    pub record: usize,
    /// Joint prior at the best grid point.
    pub prior: Vec<f64>,
    pub points_visited: u64,
    pub points_feasible: u64,
}

/// `I(X_i;Y)` for every record, straight from `p(x) q(y|x)`.
fn leakages(space: &ProblemSpace, p: &[f64], mech: &Mechanism, scratch: &mut Vec<f64>) -> Vec<f64> {
    let m = space.output_size();
    let mut py = vec![0.0; m];
    for (x, &px) in p.iter().enumerate() {
        for y in 0..m {
            py[y] += px * mech.row(x)[y];
        }
    }
    (0..space.record_count())
        .map(|i| {
            let ni = space.alphabet_size(i);
            scratch.clear();
            scratch.resize(ni * (m + 1), 0.0);
            for (x, &px) in p.iter().enumerate() {
                let a = space.decode(x)[i];
                scratch[ni * m + a] += px;
                for y in 0..m {
                    scratch[a * m + y] += px * mech.row(x)[y];
                }
            }
            let mut mi = 0.0;
            for a in 0..ni {
                let pa = scratch[ni * m + a];
                for y in 0..m {
                    let j = scratch[a * m + y];
                    if j > 0.0 {
                        mi += j * (j / (pa * py[y])).ln();
                    }
                }
            }
            mi.max(0.0)
        })
        .collect()
}

fn plain_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|v| **v > 0.0).map(|v| -v * v.ln()).sum()
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| acc * (n - j) / (j + 1))
}

/// Visits every composition of `total` into `parts` nonnegative integers.
fn for_each_composition(parts: usize, total: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(c: &mut [usize], pos: usize, left: usize, visit: &mut dyn FnMut(&[usize])) {
        if pos + 1 == c.len() {
            c[pos] = left;
            visit(c);
            return;
        }
        for v in 0..=left {
            c[pos] = v;
            rec(c, pos + 1, left - v, visit);
        }
    }
    let mut c = vec![0usize; parts];
    rec(&mut c, 0, total, &mut visit);
}

/// Maximum of `I(X_i;Y)` over all records and all grid points `k / grid_steps` of the full
/// joint simplex with `H >= b`. A lower bound on the true maximal leakage.
pub fn brute_force_leakage_detailed(
    space: &ProblemSpace,
    mech: &Mechanism,
    b: f64,
    grid_steps: usize,
) -> Result<OracleResult> {
    mech.check_space(space)?;
    let k = space.universe_size();
    if k > BRUTE_FORCE_MAX_UNIVERSE {
        return Err(Error::SizeCap(format!("universe {k} exceeds {BRUTE_FORCE_MAX_UNIVERSE}")));
    }
    if grid_steps == 0 || grid_steps > BRUTE_FORCE_MAX_GRID {
        return Err(Error::Domain(format!("grid steps must lie in 1..={BRUTE_FORCE_MAX_GRID}")));
    }
    let count = binomial((grid_steps + k - 1) as u128, (k - 1) as u128);
    if count > BRUTE_FORCE_POINT_CAP {
        return Err(Error::SizeCap(format!("{count} grid points exceed {BRUTE_FORCE_POINT_CAP}")));
    }
    let g = grid_steps as f64;
    let mut best = OracleResult {
        leakage: f64::NEG_INFINITY,
        record: 0,
        prior: vec![],
        points_visited: 0,
        points_feasible: 0,
    };
    let mut p = vec![0.0; k];
    let mut scratch = Vec::new();
    for_each_composition(k, grid_steps, |c| {
        best.points_visited += 1;
        for (pi, &ci) in p.iter_mut().zip(c) {
            *pi = ci as f64 / g;
        }
        if plain_entropy(&p) < b - ENTROPY_FILTER_TOL {
            return;
        }
        best.points_feasible += 1;
        for (i, l) in leakages(space, &p, mech, &mut scratch).into_iter().enumerate() {
            if l > best.leakage {
                best.leakage = l;
                best.record = i;
                best.prior = p.clone();
            }
        }
    });
    if best.points_feasible == 0 {
        return Err(Error::Infeasible(format!("no grid point has entropy >= {b}")));
    }
    Ok(best)
}

pub fn brute_force_leakage(space: &ProblemSpace, mech: &Mechanism, b: f64, grid_steps: usize) -> Result<f64> {
    brute_force_leakage_detailed(space, mech, b, grid_steps).map(|r| r.leakage)
}

/// Maximum of `I(X_i;Y)` over every deterministic conditional matrix and every marginal
/// on a `marginal_grid`-step grid.
pub fn enumerate_extreme_conditionals(
    space: &ProblemSpace,
    mech: &Mechanism,
    record: usize,
    marginal_grid: usize,
) -> Result<(f64, usize)> {
    mech.check_space(space)?;
    let ni = space.alphabet_size(record);
    let nr = space.rest_size(record);
    let combos = (nr as f64).powi(ni as i32);
    if combos > EXTREME_ENUMERATION_CAP as f64 {
        return Err(Error::SizeCap(format!("{nr}^{ni} conditional matrices exceed {EXTREME_ENUMERATION_CAP}")));
    }
    if marginal_grid == 0 {
        return Err(Error::Domain("marginal grid must be positive".into()));
    }
    let combos = combos as usize;
    let m = space.output_size();
    let mut best = 0.0f64;
    let mut choice = vec![0usize; ni];
    for c in 0..combos {
        let mut rem = c;
        for ch in choice.iter_mut() {
            *ch = rem % nr;
            rem /= nr;
        }
        // rows of the effective channel are the selected mechanism rows
        let rows: Vec<&[f64]> = (0..ni).map(|a| mech.row(space.join(record, a, choice[a]))).collect();
        for_each_composition(ni, marginal_grid, |w| {
            let pa: Vec<f64> = w.iter().map(|&v| v as f64 / marginal_grid as f64).collect();
            let mut py = vec![0.0; m];
            for a in 0..ni {
                for y in 0..m {
                    py[y] += pa[a] * rows[a][y];
                }
            }
            let mut mi = 0.0;
            for a in 0..ni {
                for y in 0..m {
                    let c = rows[a][y];
                    if pa[a] > 0.0 && c > 0.0 {
                        mi += pa[a] * c * (c / py[y]).ln();
                    }
                }
            }
            best = best.max(mi);
        });
    }
    Ok((best, combos))
}

/// The flip probability `p` in `[0, 1/2]` with `ln 2 - H_b(p) = leakage`, by bisection.
pub fn bsc_distortion_inverse(leakage: f64) -> f64 {
    let cap = |p: f64| 2f64.ln() - plain_entropy(&[p, 1.0 - p]);
    if leakage <= 0.0 {
        return 0.5;
    }
    if leakage >= 2f64.ln() {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if cap(mid) > leakage {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
