//! Dense linear-algebra kernels: spectra and Hurwitz tests, rank-aware
//! least squares, stabilizability, Bass stabilizing gains, Lyapunov
//! equations and matrix exponentials.

mod eigen;
mod expm;
mod lyapunov;
mod solve;
mod stabilize;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eigen::{eigenvalues, is_hurwitz, is_hurwitz_with, HurwitzReport};
pub use expm::{expm, expm_with_order, DEFAULT_PADE_ORDER};
pub use lyapunov::{exp_envelope, solve_lyapunov, ExpEnvelope};
pub use solve::{numerical_rank, solve_matrix_equation, LinearSolveReport};
pub use stabilize::{controllability_matrix, is_stabilizable, stabilize, StabilizabilityReport};

/// Eigenvalue as a `(re, im)` pair; public types carry no complex arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl std::fmt::Display for Eigenvalue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.im == 0.0 {
            write!(f, "{:.6}", self.re)
        } else {
            write!(f, "{:.6}{:+.6}i", self.re, self.im)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("eigenvalue iteration did not converge for a {0}×{0} matrix")]
    ConvergenceFailure(usize),
    #[error("expected a square matrix, got {0}×{1}")]
    NotSquare(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("pair is not stabilizable: uncontrollable eigenvalue {witness}")]
    NotStabilizable { witness: Eigenvalue },
    #[error("gain synthesis failed: {0}")]
    SynthesisFailure(String),
    #[error("decay rate {alpha} is not below the stability margin {margin}")]
    RateTooAggressive { alpha: f64, margin: f64 },
    #[error("Lyapunov equation is singular")]
    SingularLyapunov,
    #[error("envelope certificate violated at t = {t}: ‖e^(tA)‖ = {norm} > {bound}")]
    CertificateFailed { t: f64, norm: f64, bound: f64 },
}

pub(crate) fn ensure_square(a: &DMatrix<f64>) -> Result<usize, NumericsError> {
    if a.is_square() {
        Ok(a.nrows())
    } else {
        Err(NumericsError::NotSquare(a.nrows(), a.ncols()))
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}
