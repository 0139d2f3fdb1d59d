use nalgebra::DMatrix;
use serde::Serialize;

use super::{ensure_square, expm_with_order, is_hurwitz_with, spectral_norm, NumericsError};
use crate::config::Tolerances;

/// Solves `F X + X Fᵀ = Q` through the Kronecker form
/// `(I ⊗ F + F ⊗ I) vec X = vec Q` (column-major `vec`). Intended for the
/// small dense systems of this crate.
pub fn solve_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
    let n = ensure_square(f)?;
    if q.shape() != (n, n) {
        return Err(NumericsError::ShapeMismatch(format!(
            "Q is {}×{}, expected {n}×{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    let nn = n * n;
    let mut k = DMatrix::zeros(nn, nn);
    for blk in 0..n {
        for i in 0..n {
            for j in 0..n {
                // I ⊗ F
                k[(blk * n + i, blk * n + j)] += f[(i, j)];
                // F ⊗ I
                k[(i * n + blk, j * n + blk)] += f[(i, j)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(q.as_slice());
    let lu = k.lu();
    let v = lu.solve(&rhs).ok_or(NumericsError::SingularLyapunov)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::SingularLyapunov);
    }
    let x = DMatrix::from_column_slice(n, n, v.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

/// Certified bound `‖e^{tA}‖ ≤ C e^{−α t}` for all `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpEnvelope {
    pub c: f64,
    pub alpha: f64,
}

impl ExpEnvelope {
    pub fn bound(&self, t: f64) -> f64 {
        self.c * (-self.alpha * t).exp()
    }
}

/// Computes `C = sqrt(cond P)` where `(A + αI)ᵀ P + P (A + αI) = −I`, then
/// checks the bound on 200 points of `[0, 20/α]`.
pub fn exp_envelope(
    a: &DMatrix<f64>,
    alpha: f64,
    tol: &Tolerances,
    pade_order: usize,
) -> Result<ExpEnvelope, NumericsError> {
    let n = ensure_square(a)?;
    let report = is_hurwitz_with(a, tol)?;
    let margin = -report.spectral_abscissa;
    if alpha.is_nan() || alpha <= 0.0 || alpha >= margin {
        return Err(NumericsError::RateTooAggressive { alpha, margin });
    }
    let shifted = a + DMatrix::identity(n, n) * alpha;
    let p = solve_lyapunov(&shifted.transpose(), &(-DMatrix::identity(n, n)))?;
    let eig = p.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo.is_nan() || lo <= 0.0 {
        return Err(NumericsError::SingularLyapunov);
    }
    let envelope = ExpEnvelope {
        c: (hi / lo).sqrt().max(1.0),
        alpha,
    };

    let horizon = 20.0 / alpha;
    for k in 0..200 {
        let t = horizon * k as f64 / 199.0;
        let norm = spectral_norm(&expm_with_order(&(a * t), pade_order));
        let bound = envelope.bound(t) * (1.0 + 1e-6);
        if norm > bound {
            return Err(NumericsError::CertificateFailed { t, norm, bound });
        }
    }
    Ok(envelope)
}
