//! Entropy, per-record mutual information and their analytic gradients. All values in nats.

use crate::matrix::Matrix;
use crate::mechanism::{output_channel, output_marginal, Mechanism};
use crate::prior::{JointPrior, RecordView};
use crate::space::ProblemSpace;

/// Probabilities are floored here before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-10;

#[inline]
pub fn floored_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

/// `-sum p ln p` with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    h.max(0.0)
}

/// Binary entropy `H_b(p)`.
pub fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

/// `H(X) = H(X_i) + sum_a p(a) H(X_{-i} | a)`.
pub fn joint_entropy_via_chain(view: &RecordView) -> f64 {
    entropy(&view.marginal)
        + view
            .marginal
            .iter()
            .zip(view.row_entropies())
            .map(|(p, h)| p * h)
            .sum::<f64>()
}

/// `I = sum_a p(a) sum_y p(y|a) ln(p(y|a) / p(y))` from an effective channel.
pub fn mutual_information_from_channel(marginal: &[f64], channel: &Matrix) -> f64 {
    let py = output_marginal(marginal, channel);
    let mut mi = 0.0;
    for (a, &pa) in marginal.iter().enumerate() {
        if pa <= 0.0 {
            continue;
        }
        for (&c, &y) in channel.row(a).iter().zip(&py) {
            if c > 0.0 && y > 0.0 {
                mi += pa * c * (c / y).ln();
            }
        }
    }
    mi.max(0.0)
}

/// `I(X_i; Y)` for the record of `view`.
pub fn mutual_information(space: &ProblemSpace, view: &RecordView, mech: &Mechanism) -> f64 {
    let ch = output_channel(space, view, mech);
    mutual_information_from_channel(&view.marginal, &ch)
}

/// `I(X_i; Y)` for every record, computed from the joint `p(x) q(y|x)` in one pass.
pub fn record_leakages(space: &ProblemSpace, prior: &JointPrior, mech: &Mechanism) -> Vec<f64> {
    let m = space.output_size();
    (0..space.record_count())
        .map(|i| {
            let ni = space.alphabet_size(i);
            let mut joint = Matrix::zeros(ni, m);
            let mut marg = vec![0.0; ni];
            for (x, &p) in prior.probs().iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let a = space.digit(x, i);
                marg[a] += p;
                for (o, &q) in joint.row_mut(a).iter_mut().zip(mech.row(x)) {
                    *o += p * q;
                }
            }
            let mut channel = joint;
            for (a, &pa) in marg.iter().enumerate() {
                if pa > 0.0 {
                    channel.row_mut(a).iter_mut().for_each(|v| *v /= pa);
                }
            }
            mutual_information_from_channel(&marg, &channel)
        })
        .collect()
}

/// Largest per-record leakage and the lowest record index attaining it.
pub fn max_record_leakage(space: &ProblemSpace, prior: &JointPrior, mech: &Mechanism) -> (f64, usize) {
    argmax_lowest(&record_leakages(space, prior, mech))
}

pub(crate) fn argmax_lowest(v: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &x) in v.iter().enumerate() {
        if x > best.0 {
            best = (x, i);
        }
    }
    best
}

/// `dI(X_i;Y)/dq(y|x) = p(x) ln(p(y|x_i) / p(y))`.
pub fn grad_mi_mechanism(space: &ProblemSpace, prior: &JointPrior, mech: &Mechanism, record: usize) -> Matrix {
    let view = crate::prior::extract_view(space, prior, record);
    let ch = output_channel(space, &view, mech);
    let py = output_marginal(&view.marginal, &ch);
    let ln_py: Vec<f64> = py.iter().map(|&v| floored_ln(v)).collect();
    let ratio = Matrix::from_vec(
        ch.rows(),
        ch.cols(),
        ch.as_slice()
            .iter()
            .enumerate()
            .map(|(k, &c)| floored_ln(c) - ln_py[k % ch.cols()])
            .collect(),
    );
    let mut g = Matrix::zeros(space.universe_size(), space.output_size());
    for (x, &p) in prior.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let a = space.digit(x, record);
        for (o, &r) in g.row_mut(x).iter_mut().zip(ratio.row(a)) {
            *o = p * r;
        }
    }
    g
}

/// Per-symbol divergences `D_a = sum_y p(y|a) ln(p(y|a) / p(y))`.
pub fn symbol_divergences(marginal: &[f64], channel: &Matrix) -> Vec<f64> {
    let py = output_marginal(marginal, channel);
    channel
        .iter_rows()
        .map(|row| {
            row.iter()
                .zip(&py)
                .filter(|(c, _)| **c > 0.0)
                .map(|(&c, &y)| c * (floored_ln(c) - floored_ln(y)))
                .sum()
        })
        .collect()
}

/// `dI/dp(a) = D_a - 1`.
pub fn grad_mi_marginal(space: &ProblemSpace, view: &RecordView, mech: &Mechanism) -> Vec<f64> {
    let ch = output_channel(space, view, mech);
    symbol_divergences(&view.marginal, &ch).into_iter().map(|d| d - 1.0).collect()
}

/// `dI/dp(x_{-i} | x_i = a_k) = p(a_k) sum_y q(y|x) ln(p(y|a_k) / p(y))`.
pub fn grad_mi_conditional_row(space: &ProblemSpace, view: &RecordView, mech: &Mechanism, k: usize) -> Vec<f64> {
    let pk = view.marginal[k];
    let nr = view.rest_size();
    if pk == 0.0 {
        return vec![0.0; nr];
    }
    let ch = output_channel(space, view, mech);
    let py = output_marginal(&view.marginal, &ch);
    let log_ratio: Vec<f64> = ch
        .row(k)
        .iter()
        .zip(&py)
        .map(|(&c, &y)| floored_ln(c) - floored_ln(y))
        .collect();
    (0..nr)
        .map(|r| {
            let q = mech.row(space.join(view.record, k, r));
            pk * q.iter().zip(&log_ratio).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Which parameterization an entropy gradient is taken against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyTarget {
    /// `dH/dp(x) = -ln p(x) - 1`.
    Joint,
    /// `dH/dp(a) = H(X_{-i}|a) - ln p(a) - 1`.
    Marginal,
    /// `dH/dp(x_{-i}|a_k) = -p(a_k) (ln[p(a_k) p(x_{-i}|a_k)] + 1)`.
    ConditionalRow(usize),
}

pub fn grad_entropy_joint(prior: &JointPrior) -> Vec<f64> {
    prior.probs().iter().map(|&p| -floored_ln(p) - 1.0).collect()
}

pub fn grad_entropy_view(view: &RecordView, target: EntropyTarget) -> Vec<f64> {
    match target {
        EntropyTarget::Joint => {
            let mut g = Vec::with_capacity(view.alphabet_size() * view.rest_size());
            for (a, &m) in view.marginal.iter().enumerate() {
                g.extend(view.conditional.row(a).iter().map(|&c| -floored_ln(m * c) - 1.0));
            }
            g
        }
        EntropyTarget::Marginal => view
            .marginal
            .iter()
            .zip(view.row_entropies())
            .map(|(&p, h)| h - floored_ln(p) - 1.0)
            .collect(),
        EntropyTarget::ConditionalRow(k) => {
            let pk = view.marginal[k];
            view.conditional
                .row(k)
                .iter()
                .map(|&c| -pk * (floored_ln(pk * c) + 1.0))
                .collect()
        }
    }
}

/// `ln(1 + e^x)`, stable for large `|x|`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
