//! Privacy mechanisms as row-stochastic channels `q(y|x)`.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::prior::RecordView;
use crate::space::ProblemSpace;

/// Row-sum tolerance for a constructed mechanism.
pub const MECHANISM_ROW_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Mechanism {
    rows: Matrix,
}

impl Mechanism {
    pub fn new(rows: Matrix) -> Result<Self> {
        check_stochastic(&rows, MECHANISM_ROW_TOL)?;
        Ok(Self { rows })
    }

    /// No validation; for iterates that are renormalized immediately after.
    pub(crate) fn from_raw(rows: Matrix) -> Self {
        Self { rows }
    }

    /// Row-normalizes nonnegative weights. Rows that are entirely zero are rejected.
    pub fn from_weights(mut rows: Matrix) -> Result<Self> {
        for r in 0..rows.rows() {
            let row = rows.row_mut(r);
            let s: f64 = row.iter().sum();
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NotStochastic { row: r, sum: s });
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        Ok(Self { rows })
    }

    /// Every row equal to `row`; such a mechanism leaks nothing.
    pub fn constant(space: &ProblemSpace, row: &[f64]) -> Result<Self> {
        if row.len() != space.output_size() {
            return Err(Error::Dimension("constant row length differs from |Y|".into()));
        }
        let mut m = Matrix::zeros(space.universe_size(), row.len());
        for x in 0..space.universe_size() {
            m.set_row(x, row);
        }
        Self::new(m)
    }

    pub fn uniform(space: &ProblemSpace) -> Self {
        let m = space.output_size();
        Self {
            rows: Matrix::filled(space.universe_size(), m, 1.0 / m as f64),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }

    pub fn into_matrix(self) -> Matrix {
        self.rows
    }

    pub fn row(&self, x: usize) -> &[f64] {
        self.rows.row(x)
    }

    pub fn input_size(&self) -> usize {
        self.rows.rows()
    }

    pub fn output_size(&self) -> usize {
        self.rows.cols()
    }

    /// `alpha * self + (1 - alpha) * other`; stays a mechanism for `alpha` in `[0, 1]`.
    pub fn mix(&self, other: &Mechanism, alpha: f64) -> Mechanism {
        Mechanism {
            rows: self.rows.mix(&other.rows, alpha),
        }
    }

    pub fn check_space(&self, space: &ProblemSpace) -> Result<()> {
        if self.rows.rows() != space.universe_size() || self.rows.cols() != space.output_size() {
            return Err(Error::Dimension(format!(
                "mechanism is {}x{} but the space needs {}x{}",
                self.rows.rows(),
                self.rows.cols(),
                space.universe_size(),
                space.output_size()
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_stochastic(m: &Matrix, tol: f64) -> Result<()> {
    for (r, row) in m.iter_rows().enumerate() {
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!("row {r} has a negative or non-finite entry")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::NotStochastic { row: r, sum });
        }
    }
    Ok(())
}

/// The effective channel from record `i` to the output,
/// `p(y|x_i) = sum_{x_{-i}} p(x_{-i}|x_i) q(y|x_i, x_{-i})`, one row per symbol.
pub fn output_channel(space: &ProblemSpace, view: &RecordView, mech: &Mechanism) -> Matrix {
    let ni = view.alphabet_size();
    let m = mech.output_size();
    let mut out = Matrix::zeros(ni, m);
    for a in 0..ni {
        let row = out.row_mut(a);
        for (r, &c) in view.conditional.row(a).iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let q = mech.row(space.join(view.record, a, r));
            for (o, &qv) in row.iter_mut().zip(q) {
                *o += c * qv;
            }
        }
    }
    out
}

/// `p(y) = sum_a p(a) p(y|a)`.
pub fn output_marginal(marginal: &[f64], channel: &Matrix) -> Vec<f64> {
    let mut py = vec![0.0; channel.cols()];
    for (a, &pa) in marginal.iter().enumerate() {
        for (o, &v) in py.iter_mut().zip(channel.row(a)) {
            *o += pa * v;
        }
    }
    py
}
