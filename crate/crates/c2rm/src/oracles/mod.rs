//! Independent verification machinery: brute-force grid searches, a
//! block-coordinate-descent baseline, finite-difference derivative checks,
//! Monte-Carlo verification of the subset-sampling identities, and a toy
//! convex federated trainer for the convergence bound.
//!
//! Every checker here recomputes its reference answer from primitive model
//! evaluations (grids, differences, random draws) rather than calling the
//! solver it is meant to validate, so agreement between the two is evidence
//! and not circularity.

mod bcd;
mod feel;
mod findiff;
mod grid;
mod report;
mod sampling;

pub use bcd::bcd_solve_p4;
pub use feel::{toy_feel_train, FeelReport};
pub use findiff::{envelope_check, finite_difference_check, EnvelopeReport, RateQuery};
pub use grid::{grid_search_p1, grid_search_p3, grid_search_p4_two_devices};
pub use report::{run_verification, VerificationEntry, VerificationReport};
pub use sampling::{verify_sampling_identities, SamplingReport};

use std::fmt;

use crate::comm_rm::CommError;
use crate::joint_rm::JointError;
use crate::model::ModelError;
use crate::numerics::NumericsError;

/// Failures of the verification machinery.
#[derive(Debug, Clone)]
pub enum OracleError {
    Model(ModelError),
    Comm(CommError),
    Joint(Box<JointError>),
    Numerics(NumericsError),
    /// Operation outside the oracle's supported range (e.g. too many
    /// devices for an exhaustive scan).
    Unsupported { what: String },
    /// An iterative oracle failed to reach its own tolerance.
    NoConvergence { what: String, residual: f64 },
    /// A finite-difference step too small to move the evaluation point.
    StepUnderflow { point: f64, step: f64 },
    /// Parameters violate a precondition of the synthetic training setup.
    Config { what: String },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::Model(e) => write!(f, "{e}"),
            OracleError::Comm(e) => write!(f, "{e}"),
            OracleError::Joint(e) => write!(f, "{e}"),
            OracleError::Numerics(e) => write!(f, "{e}"),
            OracleError::Unsupported { what } => write!(f, "unsupported: {what}"),
            OracleError::NoConvergence { what, residual } => {
                write!(f, "{what} failed to converge (residual {residual:e})")
            }
            OracleError::StepUnderflow { point, step } => {
                write!(f, "step {step:e} vanishes at point {point:e}")
            }
            OracleError::Config { what } => write!(f, "bad configuration: {what}"),
        }
    }
}

impl std::error::Error for OracleError {}

impl From<ModelError> for OracleError {
    fn from(e: ModelError) -> Self {
        OracleError::Model(e)
    }
}

impl From<CommError> for OracleError {
    fn from(e: CommError) -> Self {
        OracleError::Comm(e)
    }
}

impl From<JointError> for OracleError {
    fn from(e: JointError) -> Self {
        OracleError::Joint(Box::new(e))
    }
}

impl From<NumericsError> for OracleError {
    fn from(e: NumericsError) -> Self {
        OracleError::Numerics(e)
    }
}
