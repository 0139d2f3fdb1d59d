use nalgebra::DMatrix;
use serde::Serialize;

use super::{ensure_square, eigenvalues, is_hurwitz_with, solve_lyapunov, Eigenvalue, NumericsError};
use crate::config::Tolerances;

/// `[B, AB, …, A^{n−1}B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizabilityReport {
    pub stabilizable: bool,
    /// First eigenvalue with `Re λ ≥ −ε` at which `[A − λI, B]` loses rank.
    pub witness: Option<Eigenvalue>,
    /// Eigenvalues that were tested (`Re λ ≥ −ε`).
    pub tested: Vec<Eigenvalue>,
}

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<usize, NumericsError> {
    let n = ensure_square(a)?;
    if b.nrows() != n {
        return Err(NumericsError::ShapeMismatch(format!(
            "B has {} rows, A is {n}×{n}",
            b.nrows()
        )));
    }
    Ok(n)
}

/// Rank of the complex matrix `[A − λI, B]`, computed on its real
/// `2n × 2(n+m)` embedding (whose rank is twice the complex rank).
fn pbh_rank(a: &DMatrix<f64>, b: &DMatrix<f64>, lambda: Eigenvalue, tol: &Tolerances) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let w = n + m;
    let mut re = DMatrix::zeros(n, w);
    re.view_mut((0, 0), (n, n)).copy_from(a);
    re.view_mut((0, n), (n, m)).copy_from(b);
    for k in 0..n {
        re[(k, k)] -= lambda.re;
    }
    let mut real = DMatrix::zeros(2 * n, 2 * w);
    real.view_mut((0, 0), (n, w)).copy_from(&re);
    real.view_mut((n, w), (n, w)).copy_from(&re);
    for k in 0..n {
        real[(k, w + k)] = lambda.im;
        real[(n + k, k)] = -lambda.im;
    }
    let s = real.svd(false, false).singular_values;
    let cutoff = tol.rank_cutoff(n, w, s.max());
    let count = s.iter().filter(|&&x| x > cutoff && x > 0.0).count();
    count / 2
}

/// PBH test on every eigenvalue with `Re λ ≥ −ε_hurwitz`.
pub fn is_stabilizable(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<StabilizabilityReport, NumericsError> {
    let n = check_shapes(a, b)?;
    let tested: Vec<Eigenvalue> = eigenvalues(a)?
        .into_iter()
        .filter(|l| l.re >= -tol.hurwitz)
        .collect();
    let witness = tested.iter().copied().find(|&l| pbh_rank(a, b, l, tol) < n);
    Ok(StabilizabilityReport {
        stabilizable: witness.is_none(),
        witness,
        tested,
    })
}

/// Orthonormal basis of the column space, using a cutoff a little looser
/// than the rank tolerance so roundoff does not leak into the span.
fn orth(k: &DMatrix<f64>, tol: &Tolerances) -> DMatrix<f64> {
    let (rows, cols) = k.shape();
    if cols == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = k.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let s = &svd.singular_values;
    let cutoff = 100.0 * tol.rank_cutoff(rows, cols, s.max());
    let r = s.iter().filter(|&&x| x > cutoff && x > 0.0).count();
    u.columns(0, r).into_owned()
}

/// Orthogonal `Q` whose first `r` columns span the controllable subspace.
fn controllable_basis(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &Tolerances) -> (DMatrix<f64>, usize) {
    let n = a.nrows();
    let mut w = orth(b, tol);
    loop {
        let r = w.ncols();
        if r == n {
            break;
        }
        let aw = a * &w;
        let stacked = DMatrix::from_fn(n, 2 * r, |i, j| if j < r { w[(i, j)] } else { aw[(i, j - r)] });
        let next = orth(&stacked, tol);
        if next.ncols() <= r {
            break;
        }
        w = next;
    }
    let r = w.ncols();
    let mut aug = DMatrix::zeros(n, r + n);
    aug.view_mut((0, 0), (n, r)).copy_from(&w);
    aug.view_mut((0, r), (n, n)).fill_with_identity();
    let q = aug.qr().q();
    (q, r)
}

/// Stabilizing gain `S` (`m × n`) with `A + B S` Hurwitz.
///
/// The pair is first brought to controllability staircase form; the
/// uncontrollable block must already be Hurwitz. On the controllable block
/// `(A_c, B_c)` the Bass gain is `S_c = −B_cᵀ P⁺` with
/// `(A_c + βI) P + P (A_c + βI)ᵀ = 2 B_c B_cᵀ` and `β = ‖A_c‖_F + 1`, which
/// places every controllable closed-loop eigenvalue on `Re λ = −β`.
pub fn stabilize(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>, NumericsError> {
    let n = check_shapes(a, b)?;
    let m = b.ncols();
    let report = is_stabilizable(a, b, tol)?;
    if let Some(witness) = report.witness {
        return Err(NumericsError::NotStabilizable { witness });
    }

    let (q, r) = controllable_basis(a, b, tol);
    let a_bar = q.transpose() * a * &q;
    let b_bar = q.transpose() * b;
    if r < n {
        let a_u = a_bar.view((r, r), (n - r, n - r)).into_owned();
        let hu = is_hurwitz_with(&a_u, tol)?;
        if !hu.is_hurwitz {
            return Err(NumericsError::SynthesisFailure(format!(
                "uncontrollable block has spectral abscissa {:e}",
                hu.spectral_abscissa
            )));
        }
    }

    let s = if r == 0 {
        DMatrix::zeros(m, n)
    } else {
        let a_c = a_bar.view((0, 0), (r, r)).into_owned();
        let b_c = b_bar.rows(0, r).into_owned();
        let beta = a_c.norm() + 1.0;
        let shifted = &a_c + DMatrix::identity(r, r) * beta;
        let p = solve_lyapunov(&shifted, &(&b_c * b_c.transpose() * 2.0))?;
        let eps = f64::EPSILON * r as f64 * p.norm();
        let p_pinv = p
            .pseudo_inverse(eps)
            .map_err(|e| NumericsError::SynthesisFailure(e.to_string()))?;
        let s_c = -(b_c.transpose() * p_pinv);
        s_c * q.columns(0, r).transpose()
    };

    let closed = a + b * &s;
    let h = is_hurwitz_with(&closed, tol)?;
    if !h.is_hurwitz || s.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::SynthesisFailure(format!(
            "closed loop has spectral abscissa {:e}",
            h.spectral_abscissa
        )));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{is_hurwitz, numerical_rank};
    use nalgebra::dmatrix;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn controllable_chain_pair() {
        let a = dmatrix![2.0, 1.0; 1.0, 3.0];
        let b = dmatrix![1.0; 1.0];
        let c = controllability_matrix(&a, &b);
        assert_eq!(c, dmatrix![1.0, 3.0; 1.0, 4.0]);
        assert_eq!(numerical_rank(&c, &tol()), 2);
        assert!(is_stabilizable(&a, &b, &tol()).unwrap().stabilizable);
        let s = stabilize(&a, &b, &tol()).unwrap();
        assert!(is_hurwitz(&(a + b * s)).unwrap().is_hurwitz);
    }

    #[test]
    fn zero_input_on_unstable_matrix() {
        let a = dmatrix![1.0, 0.0; 0.0, 2.0];
        let b = DMatrix::zeros(2, 1);
        let r = is_stabilizable(&a, &b, &tol()).unwrap();
        assert!(!r.stabilizable);
        assert_eq!(r.witness.unwrap().re, 2.0);
        assert!(matches!(
            stabilize(&a, &b, &tol()),
            Err(NumericsError::NotStabilizable { .. })
        ));
    }

    #[test]
    fn zero_input_on_hurwitz_matrix() {
        let a = dmatrix![-1.0, 0.0; 0.0, -2.0];
        let b = DMatrix::zeros(2, 1);
        assert!(is_stabilizable(&a, &b, &tol()).unwrap().stabilizable);
        assert_eq!(stabilize(&a, &b, &tol()).unwrap(), DMatrix::zeros(1, 2));
    }

    #[test]
    fn partially_controllable_with_stable_rest() {
        // x2 is uncontrollable but decays.
        let a = dmatrix![1.0, 0.0; 0.0, -1.0];
        let b = dmatrix![1.0; 0.0];
        let s = stabilize(&a, &b, &tol()).unwrap();
        let h = is_hurwitz(&(a + b * s)).unwrap();
        assert!(h.is_hurwitz);
    }

    #[test]
    fn complex_unstable_mode_uncontrollable() {
        let a = dmatrix![0.1, 1.0, 0.0; -1.0, 0.1, 0.0; 0.0, 0.0, 1.0];
        let b = dmatrix![0.0; 0.0; 1.0];
        let r = is_stabilizable(&a, &b, &tol()).unwrap();
        assert!(!r.stabilizable);
        assert!((r.witness.unwrap().re - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bass_places_real_parts_at_minus_beta() {
        let a = dmatrix![0.0, 1.0; 0.0, 0.0];
        let b = dmatrix![0.0; 1.0];
        let s = stabilize(&a, &b, &tol()).unwrap();
        let beta = a.norm() + 1.0;
        for e in crate::numerics::eigenvalues(&(a + b * s)).unwrap() {
            assert!((e.re + beta).abs() < 1e-6, "{e}");
        }
    }
}
