//! Dataset universes and mixed-radix indexing.
//!
//! A dataset `x = (x_0, .., x_{n-1})` is stored as a single index with record 0
//! as the slowest-varying digit, so `(1, 0)` over alphabets `(2, 2)` is index 2.
//! Splitting an index around record `i` yields the record's symbol and the
//! index of the remaining records, encoded in the same order with `i` removed.

use crate::error::{Error, Result};

/// Default cap on `|X|`.
pub const DEFAULT_UNIVERSE_CAP: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemSpace {
    alphabet_sizes: Vec<usize>,
    output_size: usize,
    universe: usize,
    // product of alphabet sizes strictly after record i
    strides: Vec<usize>,
}

impl ProblemSpace {
    pub fn new(alphabet_sizes: Vec<usize>, output_size: usize) -> Result<Self> {
        Self::with_cap(alphabet_sizes, output_size, DEFAULT_UNIVERSE_CAP)
    }

    pub fn with_cap(alphabet_sizes: Vec<usize>, output_size: usize, cap: usize) -> Result<Self> {
        if alphabet_sizes.is_empty() {
            return Err(Error::Domain("a dataset needs at least one record".into()));
        }
        if let Some((i, &s)) = alphabet_sizes.iter().enumerate().find(|(_, &s)| s < 2) {
            return Err(Error::Domain(format!(
                "record {i} has alphabet size {s}; every record needs at least 2 symbols"
            )));
        }
        if output_size < 2 {
            return Err(Error::Domain(format!(
                "output alphabet size {output_size} is below 2"
            )));
        }
        let mut universe: usize = 1;
        for &s in &alphabet_sizes {
            universe = universe
                .checked_mul(s)
                .filter(|&u| u <= cap)
                .ok_or_else(|| Error::SizeCap(format!("universe exceeds {cap} datasets")))?;
        }
        let mut strides = vec![1; alphabet_sizes.len()];
        for i in (0..alphabet_sizes.len() - 1).rev() {
            strides[i] = strides[i + 1] * alphabet_sizes[i + 1];
        }
        Ok(Self {
            alphabet_sizes,
            output_size,
            universe,
            strides,
        })
    }

    /// `n` binary records with an `m`-ary output.
    pub fn binary(n: usize, output_size: usize) -> Result<Self> {
        Self::new(vec![2; n], output_size)
    }

    pub fn record_count(&self) -> usize {
        self.alphabet_sizes.len()
    }

    pub fn alphabet_sizes(&self) -> &[usize] {
        &self.alphabet_sizes
    }

    pub fn alphabet_size(&self, record: usize) -> usize {
        self.alphabet_sizes[record]
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    /// `|X|`.
    pub fn universe_size(&self) -> usize {
        self.universe
    }

    /// `n_{-i} = |X| / n_i`.
    pub fn rest_size(&self, record: usize) -> usize {
        self.universe / self.alphabet_sizes[record]
    }

    /// Maximum joint entropy, `ln |X|`.
    pub fn max_entropy(&self) -> f64 {
        (self.universe as f64).ln()
    }

    pub fn encode(&self, symbols: &[usize]) -> Result<usize> {
        if symbols.len() != self.record_count() {
            return Err(Error::Dimension(format!(
                "expected {} symbols, got {}",
                self.record_count(),
                symbols.len()
            )));
        }
        let mut index = 0;
        for (i, (&s, &size)) in symbols.iter().zip(&self.alphabet_sizes).enumerate() {
            if s >= size {
                return Err(Error::Domain(format!(
                    "symbol {s} out of range for record {i} (alphabet size {size})"
                )));
            }
            index = index * size + s;
        }
        Ok(index)
    }

    /// Panics if `index >= |X|`.
    pub fn decode(&self, index: usize) -> Vec<usize> {
        assert!(index < self.universe, "dataset index out of range");
        let mut rem = index;
        let mut out = vec![0; self.record_count()];
        for i in (0..self.record_count()).rev() {
            out[i] = rem % self.alphabet_sizes[i];
            rem /= self.alphabet_sizes[i];
        }
        out
    }

    /// The symbol of record `record` in dataset `index`.
    pub fn digit(&self, index: usize, record: usize) -> usize {
        (index / self.strides[record]) % self.alphabet_sizes[record]
    }

    /// Splits a dataset index into `(x_i, x_{-i})`.
    pub fn split(&self, index: usize, record: usize) -> (usize, usize) {
        let stride = self.strides[record];
        let size = self.alphabet_sizes[record];
        let high = index / (stride * size);
        let low = index % stride;
        ((index / stride) % size, high * stride + low)
    }

    /// Inverse of [`split`](Self::split).
    pub fn join(&self, record: usize, symbol: usize, rest: usize) -> usize {
        let stride = self.strides[record];
        let size = self.alphabet_sizes[record];
        (rest / stride) * stride * size + symbol * stride + rest % stride
    }
}
