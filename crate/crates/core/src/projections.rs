//! Euclidean projection onto the probability simplex and entropy-matching projection
//! along the temperature path `w ∝ v^β`.

use crate::error::{Error, Result};
use crate::infotheory::{entropy, LOG_FLOOR};

/// Euclidean projection onto `{w : w >= 0, sum w = 1}` by the sort-and-threshold rule.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootMethod {
    Brent,
    Bisection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyProjectionConfig {
    /// Accepted `|H(w) - t|`, nats.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub beta_bracket: (f64, f64),
    pub method: RootMethod,
}

impl Default for EntropyProjectionConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
            beta_bracket: (1e-6, 1e6),
            method: RootMethod::Brent,
        }
    }
}

impl EntropyProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.beta_bracket;
        if !(self.tolerance > 0.0) || !(lo > 0.0) || !(lo < hi) || self.max_iterations == 0 {
            return Err(Error::Domain("invalid entropy projection config".into()));
        }
        Ok(())
    }
}

/// `w_j ∝ exp(β ln v_j)`, in the log domain.
pub fn tempered(log_v: &[f64], beta: f64) -> Vec<f64> {
    let max = log_v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = log_v.iter().map(|&l| (beta * (l - max)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Floors at the log floor and renormalizes.
pub fn floor_and_normalize(v: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = v.iter().map(|&x| x.max(LOG_FLOOR)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Returns `w` on the temperature path of `v` with `|H(w) - target| < tolerance`.
///
/// This matches entropy along `β`; it is not the Euclidean-nearest point of the level set.
pub fn project_entropy(v: &[f64], target: f64, cfg: &EntropyProjectionConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = v.len();
    if n == 0 {
        return Err(Error::Domain("empty vector".into()));
    }
    let hmax = (n as f64).ln();
    if !(target >= 0.0) || target > hmax + cfg.tolerance {
        return Err(Error::Domain(format!("entropy target {target} outside [0, ln {n}]")));
    }
    if (entropy(v) - target).abs() < cfg.tolerance {
        return Ok(v.to_vec());
    }
    if target >= hmax - cfg.tolerance {
        return Ok(vec![1.0 / n as f64; n]);
    }
    let fl = floor_and_normalize(v);
    let log_v: Vec<f64> = fl.iter().map(|x| x.ln()).collect();
    let f = |beta: f64| entropy(&tempered(&log_v, beta)) - target;

    let (mut lo, mut hi) = cfg.beta_bracket;
    let mut flo = f(lo);
    let mut fhi = f(hi);
    let mut expansions = 0;
    // f decreases in β: need f(lo) >= 0 >= f(hi).
    while flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
        if expansions == 10 {
            return Err(Error::Numerical(format!(
                "entropy target {target} not bracketed; achievable range [{:.6}, {:.6}]",
                fhi + target,
                flo + target
            )));
        }
        if flo < 0.0 {
            lo /= 10.0;
            flo = f(lo);
        } else {
            hi *= 10.0;
            fhi = f(hi);
        }
        expansions += 1;
    }
    let beta = match cfg.method {
        RootMethod::Brent => brent(&f, lo, hi, flo, fhi, cfg.tolerance, cfg.max_iterations),
        RootMethod::Bisection => bisect(&f, lo, hi, flo, cfg.tolerance, cfg.max_iterations),
    };
    let w = tempered(&log_v, beta);
    let err = entropy(&w) - target;
    if err.abs() >= cfg.tolerance {
        return Err(Error::Numerical(format!(
            "entropy projection stalled at beta {beta:.6e} with residual {err:.3e}"
        )));
    }
    Ok(w)
}

/// Bisection on a sign-changing bracket; stops once `|f| < ftol`.
pub fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, mut fa: f64, ftol: f64, max_iter: usize) -> f64 {
    let mut mid = 0.5 * (a + b);
    // Long brackets spanning decades are halved geometrically first.
    for _ in 0..max_iter.max(1) * 4 {
        mid = if a > 0.0 && b / a > 4.0 { (a * b).sqrt() } else { 0.5 * (a + b) };
        let fm = f(mid);
        if fm.abs() < ftol || (b - a).abs() <= f64::EPSILON * mid.abs() {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    mid
}

/// Brent–Dekker root finding: inverse quadratic / secant steps guarded by bisection.
pub fn brent<F: Fn(f64) -> f64>(f: &F, a0: f64, b0: f64, fa0: f64, fb0: f64, ftol: f64, max_iter: usize) -> f64 {
    let (mut a, mut b, mut fa, mut fb) = (a0, b0, fa0, fb0);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..max_iter {
        if fb.abs() < ftol {
            return b;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * b.abs() {
            return b;
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let (l, h) = if lo < b { (lo, b) } else { (b, lo) };
        let tol = 2.0 * f64::EPSILON * b.abs();
        let reject = !(s > l && s < h)
            || (bisected && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!bisected && (s - b).abs() >= (c - d).abs() / 2.0)
            || (bisected && (b - c).abs() < tol)
            || (!bisected && (c - d).abs() < tol);
        if reject {
            // Geometric midpoint when the bracket spans decades.
            s = if a > 0.0 && b > 0.0 && (a / b > 4.0 || b / a > 4.0) {
                (a * b).sqrt()
            } else {
                0.5 * (a + b)
            };
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    b
}
