//! Shared fixtures for the solver benchmarks in `benches/`.

use privleak_core::mechanisms::build_laplace_thresholded;
use privleak_core::{DistortionMetric, DistortionModel, JointPrior, Mechanism, ProblemSpace, Query};

pub struct ParityFixture {
    pub space: ProblemSpace,
    pub prior: JointPrior,
    pub model: DistortionModel,
}

pub fn parity(n: usize) -> ParityFixture {
    let space = ProblemSpace::binary(n, 2).expect("binary space");
    let prior = JointPrior::uniform(&space);
    let model = DistortionModel::new(&space, &prior, &Query::parity(), &DistortionMetric::AbsoluteDifference)
        .expect("parity model");
    ParityFixture { space, prior, model }
}

pub fn laplace(space: &ProblemSpace, epsilon: f64) -> Mechanism {
    build_laplace_thresholded(space, &Query::parity(), epsilon).expect("binary output")
}

/// Deterministic pseudo-random vector in `[-1, 2)`.
pub fn scrambled(len: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..len)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            -1.0 + 3.0 * ((state >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}
