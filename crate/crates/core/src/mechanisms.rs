//! Reference mechanisms with closed-form flip probabilities, and mechanism loading.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::infotheory::binary_entropy;
use crate::io::read_mechanism;
use crate::matrix::Matrix;
use crate::mechanism::Mechanism;
use crate::query::Query;
use crate::space::ProblemSpace;

/// Releases `f(x)` with probability `1 - p`, otherwise one of the other `m - 1` outputs uniformly.
pub fn build_bsc(space: &ProblemSpace, query: &Query, p: f64) -> Result<Mechanism> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::Domain(format!("flip probability {p} outside [0, 1/2]")));
    }
    symmetric_channel(space, query, p)
}

fn symmetric_channel(space: &ProblemSpace, query: &Query, p: f64) -> Result<Mechanism> {
    let m = space.output_size();
    let off = p / (m - 1) as f64;
    let answers = query.answers(space)?;
    let mut rows = Matrix::filled(space.universe_size(), m, off);
    for (x, &f) in answers.iter().enumerate() {
        rows[(x, f)] = 1.0 - p;
    }
    Mechanism::new(rows)
}

/// `p_L = e^{-ε/2} / 2`: Laplace noise of scale `1/ε` added to a binary answer, thresholded at 1/2.
pub fn laplace_flip_probability(epsilon: f64) -> f64 {
    0.5 * (-epsilon / 2.0).exp()
}

/// `p_E = 1 / (e^{ε/2} + 1)` for the binary exponential mechanism with utility `1{y = f(x)}`.
pub fn exponential_flip_probability(epsilon: f64) -> f64 {
    1.0 / ((epsilon / 2.0).exp() + 1.0)
}

/// Total flip mass of the exponential mechanism over `m` outputs, `(m-1) / (e^{ε/2} + m - 1)`.
pub fn exponential_flip_mass(epsilon: f64, m: usize) -> f64 {
    let k = (m - 1) as f64;
    k / ((epsilon / 2.0).exp() + k)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

pub fn build_laplace_thresholded(space: &ProblemSpace, query: &Query, epsilon: f64) -> Result<Mechanism> {
    check_epsilon(epsilon)?;
    if space.output_size() != 2 {
        return Err(Error::Unsupported(
            "thresholded Laplace is only defined for binary outputs".into(),
        ));
    }
    build_bsc(space, query, laplace_flip_probability(epsilon))
}

/// Binary exponential mechanism. With `extended`, any output size is accepted and the
/// flip mass `(m-1)/(e^{ε/2}+m-1)` is spread evenly.
pub fn build_exponential_binary(
    space: &ProblemSpace,
    query: &Query,
    epsilon: f64,
    extended: bool,
) -> Result<Mechanism> {
    check_epsilon(epsilon)?;
    let m = space.output_size();
    if m != 2 && !extended {
        return Err(Error::Unsupported(
            "exponential mechanism for more than two outputs requires the extended variant".into(),
        ));
    }
    symmetric_channel(space, query, exponential_flip_mass(epsilon, m))
}

/// `ln 2 - H_b(p)`.
pub fn bsc_capacity_closed_form(p: f64) -> f64 {
    (2f64.ln() - binary_entropy(p)).max(0.0)
}

/// Reads a mechanism file and checks it against `space`.
pub fn load_mechanism(path: impl AsRef<Path>, space: &ProblemSpace) -> Result<Mechanism> {
    let mech = read_mechanism(path)?;
    mech.check_space(space)?;
    Ok(mech)
}

#[derive(Clone, Debug, PartialEq)]
pub enum MechanismSpec {
    GeneralizedBsc(f64),
    LaplaceThresholded(f64),
    ExponentialBinary(f64),
    FromFile(PathBuf),
}

impl MechanismSpec {
    pub fn realize(&self, space: &ProblemSpace, query: &Query, extended: bool) -> Result<Mechanism> {
        match self {
            MechanismSpec::GeneralizedBsc(p) => build_bsc(space, query, *p),
            MechanismSpec::LaplaceThresholded(e) => build_laplace_thresholded(space, query, *e),
            MechanismSpec::ExponentialBinary(e) => build_exponential_binary(space, query, *e, extended),
            MechanismSpec::FromFile(p) => load_mechanism(p, space),
        }
    }

    /// Flip probability for the closed-form families.
    pub fn flip_probability(&self) -> Option<f64> {
        match self {
            MechanismSpec::GeneralizedBsc(p) => Some(*p),
            MechanismSpec::LaplaceThresholded(e) => Some(laplace_flip_probability(*e)),
            MechanismSpec::ExponentialBinary(e) => Some(exponential_flip_probability(*e)),
            MechanismSpec::FromFile(_) => None,
        }
    }
}

impl FromStr for MechanismSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::Domain(format!("mechanism spec {s:?} must look like kind:value")))?;
        let num = || {
            arg.parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad number {arg:?} in mechanism spec")))
        };
        let spec = match kind {
            "bsc" => MechanismSpec::GeneralizedBsc(num()?),
            "laplace" => MechanismSpec::LaplaceThresholded(num()?),
            "exp" => MechanismSpec::ExponentialBinary(num()?),
            "file" => MechanismSpec::FromFile(PathBuf::from(arg)),
            _ => return Err(Error::Domain(format!("unknown mechanism kind {kind:?}"))),
        };
        match spec {
            MechanismSpec::GeneralizedBsc(p) if !(0.0..=0.5).contains(&p) => {
                Err(Error::Domain(format!("flip probability {p} outside [0, 1/2]")))
            }
            MechanismSpec::LaplaceThresholded(e) | MechanismSpec::ExponentialBinary(e) if !(e > 0.0) => {
                Err(Error::Domain(format!("epsilon must be positive, got {e}")))
            }
            s => Ok(s),
        }
    }
}

impl fmt::Display for MechanismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MechanismSpec::GeneralizedBsc(p) => write!(f, "bsc:{p}"),
            MechanismSpec::LaplaceThresholded(e) => write!(f, "laplace:{e}"),
            MechanismSpec::ExponentialBinary(e) => write!(f, "exp:{e}"),
            MechanismSpec::FromFile(p) => write!(f, "file:{}", p.display()),
        }
    }
}
