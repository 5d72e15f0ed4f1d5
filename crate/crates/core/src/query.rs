//! Query functions `f: X -> Y` and output distortion metrics.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mechanism::Mechanism;
use crate::prior::JointPrior;
use crate::space::ProblemSpace;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    /// `sum_i x_i mod m`; `ModularSum(2)` is parity.
    ModularSum(usize),
    /// `sum_{i<j} x_i x_j`.
    PairwiseProduct,
    /// Explicit output per dataset index.
    Table(Vec<usize>),
}

impl Query {
    pub fn parity() -> Self {
        Query::ModularSum(2)
    }

    /// The smallest output alphabet that holds every answer of this query.
    pub fn natural_output_size(&self, space: &ProblemSpace) -> usize {
        match self {
            Query::ModularSum(m) => *m,
            Query::PairwiseProduct => {
                let s = space.alphabet_sizes();
                let mut max = 0;
                for i in 0..s.len() {
                    for j in i + 1..s.len() {
                        max += (s[i] - 1) * (s[j] - 1);
                    }
                }
                max + 1
            }
            Query::Table(t) => t.iter().copied().max().map_or(1, |v| v + 1),
        }
    }

    pub fn eval(&self, space: &ProblemSpace, x: usize) -> usize {
        match self {
            Query::ModularSum(m) => {
                (0..space.record_count()).map(|i| space.digit(x, i)).sum::<usize>() % m
            }
            Query::PairwiseProduct => {
                let d = space.decode(x);
                let mut acc = 0;
                for i in 0..d.len() {
                    for j in i + 1..d.len() {
                        acc += d[i] * d[j];
                    }
                }
                acc
            }
            Query::Table(t) => t[x],
        }
    }

    /// Answers for every dataset, checked against the space's output alphabet.
    pub fn answers(&self, space: &ProblemSpace) -> Result<Vec<usize>> {
        if let Query::ModularSum(0) = self {
            return Err(Error::Domain("modulus must be positive".into()));
        }
        if let Query::Table(t) = self {
            if t.len() != space.universe_size() {
                return Err(Error::Dimension(format!(
                    "query table has {} entries, universe has {}",
                    t.len(),
                    space.universe_size()
                )));
            }
        }
        let m = space.output_size();
        (0..space.universe_size())
            .map(|x| {
                let y = self.eval(space, x);
                if y < m {
                    Ok(y)
                } else {
                    Err(Error::Domain(format!(
                        "query answer {y} for dataset {x} is outside the output alphabet of size {m}"
                    )))
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistortionMetric {
    /// `|y - y'|`.
    AbsoluteDifference,
    /// Explicit `m x m` table.
    Table(Matrix),
}

impl DistortionMetric {
    pub fn eval(&self, truth: usize, released: usize) -> f64 {
        match self {
            DistortionMetric::AbsoluteDifference => truth.abs_diff(released) as f64,
            DistortionMetric::Table(t) => t[(truth, released)],
        }
    }

    pub fn validate(&self, output_size: usize) -> Result<()> {
        if let DistortionMetric::Table(t) = self {
            if t.rows() != output_size || t.cols() != output_size {
                return Err(Error::Dimension("distortion table must be m x m".into()));
            }
            for y in 0..output_size {
                if t[(y, y)] != 0.0 {
                    return Err(Error::Domain(format!("d({y},{y}) must be 0")));
                }
            }
            if t.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Domain("distortions must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Largest distortion between any two outputs.
    pub fn max_value(&self, output_size: usize) -> f64 {
        let mut max: f64 = 0.0;
        for a in 0..output_size {
            for b in 0..output_size {
                max = max.max(self.eval(a, b));
            }
        }
        max
    }
}

/// Everything needed to evaluate expected distortion under the true distribution `p0`.
///
/// Expected distortion is linear in the mechanism: `E = sum_{x,y} w(x,y) q(y|x)` with
/// `w(x,y) = p0(x) d(f(x), y)`.
#[derive(Clone, Debug)]
pub struct DistortionModel {
    weights: Matrix,
    answers: Vec<usize>,
}

impl DistortionModel {
    pub fn new(
        space: &ProblemSpace,
        p0: &JointPrior,
        query: &Query,
        metric: &DistortionMetric,
    ) -> Result<Self> {
        p0.check_space(space)?;
        metric.validate(space.output_size())?;
        let answers = query.answers(space)?;
        let m = space.output_size();
        let mut weights = Matrix::zeros(space.universe_size(), m);
        for (x, (&p, &f)) in p0.probs().iter().zip(&answers).enumerate() {
            for y in 0..m {
                weights[(x, y)] = p * metric.eval(f, y);
            }
        }
        Ok(Self { weights, answers })
    }

    /// `w(x,y) = p0(x) d(f(x), y)`, which is also the gradient of `E` in `q`.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn answers(&self) -> &[usize] {
        &self.answers
    }

    pub fn expected(&self, mech: &Mechanism) -> f64 {
        self.weights
            .as_slice()
            .iter()
            .zip(mech.matrix().as_slice())
            .map(|(w, q)| w * q)
            .sum()
    }

    /// The mechanism that releases `f(x)` exactly.
    pub fn exact_release(&self, output_size: usize) -> Mechanism {
        let mut m = Matrix::zeros(self.answers.len(), output_size);
        for (x, &f) in self.answers.iter().enumerate() {
            m[(x, f)] = 1.0;
        }
        Mechanism::new(m).expect("one-hot rows are stochastic")
    }

    /// The output `y*` minimizing `E[d(f(X), y*)]` and the resulting distortion.
    pub fn best_constant_output(&self) -> (usize, f64) {
        let m = self.weights.cols();
        (0..m)
            .map(|y| (y, self.weights.iter_rows().map(|r| r[y]).sum::<f64>()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    /// Smallest achievable distortion: each dataset releases its least-distorted output.
    pub fn min_distortion(&self) -> f64 {
        self.weights
            .iter_rows()
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
            .sum()
    }
}

/// `E_{p0}[d(f(X), Y)] = sum_{x,y} p0(x) q(y|x) d(f(x), y)`.
pub fn expected_distortion(
    space: &ProblemSpace,
    p0: &JointPrior,
    mech: &Mechanism,
    query: &Query,
    metric: &DistortionMetric,
) -> Result<f64> {
    mech.check_space(space)?;
    Ok(DistortionModel::new(space, p0, query, metric)?.expected(mech))
}

/// `parity`, `modsum:m` or `pairwise`.
impl FromStr for Query {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parity" => Ok(Query::parity()),
            "pairwise" => Ok(Query::PairwiseProduct),
            _ => {
                let m = s
                    .strip_prefix("modsum:")
                    .and_then(|m| m.parse::<usize>().ok())
                    .ok_or_else(|| Error::Domain(format!("unknown query {s:?}")))?;
                if m < 2 {
                    return Err(Error::Domain("modulus must be at least 2".into()));
                }
                Ok(Query::ModularSum(m))
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::ModularSum(2) => f.write_str("parity"),
            Query::ModularSum(m) => write!(f, "modsum:{m}"),
            Query::PairwiseProduct => f.write_str("pairwise"),
            Query::Table(t) => write!(f, "table:{}", t.len()),
        }
    }
}
