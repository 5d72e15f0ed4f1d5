//! Leakage auditing and privacy-utility tradeoffs for discrete mechanisms under an
//! adversary whose prior is only known to satisfy `H(X) >= b`.
//!
//! All information quantities are in nats.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod error;
pub mod infotheory;
pub mod io;
pub mod leakage;
pub mod matrix;
pub mod mechanism;
pub mod mechanisms;
pub mod oracle;
pub mod primal;
pub mod prior;
pub mod projections;
pub mod query;
pub mod space;

pub use dual::{dual_solve, DualConfig};
pub use error::{Error, Result};
pub use leakage::{max_leakage, LeakageConfig, LeakageResult};
pub use matrix::Matrix;
pub use mechanism::Mechanism;
pub use mechanisms::MechanismSpec;
pub use primal::{primal_tradeoff, PrimalConfig, TradeoffPoint};
pub use prior::{compose_view, extract_view, JointPrior, RecordView};
pub use query::{DistortionMetric, DistortionModel, Query};
pub use space::ProblemSpace;

/// Nats to bits.
pub fn to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
