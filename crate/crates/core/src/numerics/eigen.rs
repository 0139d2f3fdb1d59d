use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use serde::Serialize;

use super::{ensure_square, Eigenvalue, NumericsError};
use crate::config::Tolerances;

/// Eigenvalues with multiplicity from a real Schur reduction, sorted by
/// descending real part (then descending imaginary part).
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Eigenvalue>, NumericsError> {
    let n = ensure_square(a)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 200 * n.max(4))
        .ok_or(NumericsError::ConvergenceFailure(n))?;
    let mut out: Vec<Eigenvalue> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Eigenvalue { re: z.re, im: z.im })
        .collect();
    out.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurwitzReport {
    /// `max Re λ`.
    pub spectral_abscissa: f64,
    pub eigenvalues: Vec<Eigenvalue>,
    pub is_hurwitz: bool,
    pub margin: f64,
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> Result<HurwitzReport, NumericsError> {
    is_hurwitz_with(a, &Tolerances::default())
}

pub fn is_hurwitz_with(a: &DMatrix<f64>, tol: &Tolerances) -> Result<HurwitzReport, NumericsError> {
    let eigenvalues = eigenvalues(a)?;
    let spectral_abscissa = eigenvalues.first().map_or(f64::NEG_INFINITY, |e| e.re);
    Ok(HurwitzReport {
        spectral_abscissa,
        is_hurwitz: spectral_abscissa < -tol.hurwitz,
        eigenvalues,
        margin: tol.hurwitz,
    })
}
