//! Adversary priors over the dataset universe and their per-record factorization.

use crate::error::{Error, Result};
use crate::infotheory::entropy;
use crate::matrix::Matrix;
use crate::space::ProblemSpace;

/// Tolerance on the total mass of a prior.
pub const PRIOR_SUM_TOL: f64 = 1e-9;

/// The adversary's belief `p(x)`, indexed in mixed-radix order.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPrior {
    probs: Vec<f64>,
}

impl JointPrior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_distribution(&probs, PRIOR_SUM_TOL)?;
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights into a prior.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("weights sum to zero".into()));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(space: &ProblemSpace) -> Self {
        let k = space.universe_size();
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    /// All mass on one dataset.
    pub fn point_mass(space: &ProblemSpace, index: usize) -> Self {
        let mut probs = vec![0.0; space.universe_size()];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    pub fn check_space(&self, space: &ProblemSpace) -> Result<()> {
        if self.probs.len() != space.universe_size() {
            return Err(Error::Dimension(format!(
                "prior has {} entries but the universe has {}",
                self.probs.len(),
                space.universe_size()
            )));
        }
        Ok(())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }
}

pub(crate) fn check_distribution(p: &[f64], tol: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain("empty distribution".into()));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!("probability {v} is negative or not finite")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::NotStochastic { row: 0, sum });
    }
    Ok(())
}

/// Per-record factorization `p(x) = p(x_i) p(x_{-i} | x_i)`.
///
/// Rows of `conditional` whose marginal entry is zero hold the uniform row.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordView {
    pub record: usize,
    pub marginal: Vec<f64>,
    /// `n_i x n_{-i}`
    pub conditional: Matrix,
}

impl RecordView {
    pub fn alphabet_size(&self) -> usize {
        self.marginal.len()
    }

    pub fn rest_size(&self) -> usize {
        self.conditional.cols()
    }

    /// Entropy of each conditional row, `H(X_{-i} | x_i = a)`.
    pub fn row_entropies(&self) -> Vec<f64> {
        self.conditional.iter_rows().map(entropy).collect()
    }
}

pub fn extract_view(space: &ProblemSpace, prior: &JointPrior, record: usize) -> RecordView {
    let ni = space.alphabet_size(record);
    let nr = space.rest_size(record);
    let mut marginal = vec![0.0; ni];
    let mut conditional = Matrix::zeros(ni, nr);
    for (x, &p) in prior.probs().iter().enumerate() {
        let (a, r) = space.split(x, record);
        marginal[a] += p;
        conditional[(a, r)] = p;
    }
    for (a, &m) in marginal.iter().enumerate() {
        let row = conditional.row_mut(a);
        if m > 0.0 {
            row.iter_mut().for_each(|v| *v /= m);
        } else {
            row.fill(1.0 / nr as f64);
        }
    }
    RecordView {
        record,
        marginal,
        conditional,
    }
}

pub fn compose_view(space: &ProblemSpace, view: &RecordView) -> JointPrior {
    let mut probs = vec![0.0; space.universe_size()];
    for (a, &m) in view.marginal.iter().enumerate() {
        for (r, &c) in view.conditional.row(a).iter().enumerate() {
            probs[space.join(view.record, a, r)] = m * c;
        }
    }
    JointPrior { probs }
}
