use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::Tolerances;
use crate::serde_util;

/// Minimum-norm least-squares solution of `B X = C` with its residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSolveReport {
    #[serde(with = "serde_util::matrix")]
    pub solution: DMatrix<f64>,
    /// `‖B X − C‖_F` at the returned `X`.
    pub residual_norm: f64,
    /// `residual_norm / (1 + ‖C‖_F)`.
    pub relative_residual: f64,
    pub solvable: bool,
    pub rank_b: usize,
    /// Orthonormal basis of `ker B` (columns). Every solution is
    /// `solution + kernel · W` for arbitrary `W`.
    #[serde(with = "serde_util::matrix")]
    pub kernel: DMatrix<f64>,
}

struct Pinv {
    /// `V_r Σ_r⁻¹ U_rᵀ`
    pinv: DMatrix<f64>,
    rank: usize,
    kernel: DMatrix<f64>,
}

fn pseudo_inverse(b: &DMatrix<f64>, tol: &Tolerances) -> Pinv {
    let (n, m) = b.shape();
    // Pad with zero rows so the SVD returns a full m×m right factor.
    let rows = n.max(m);
    let mut padded = DMatrix::zeros(rows, m);
    padded.view_mut((0, 0), (n, m)).copy_from(b);
    let svd = padded.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = tol.rank_cutoff(n, m, sigma_max);
    let rank = sigma.iter().filter(|&&s| s > cutoff && s > 0.0).count();
    let mut pinv = DMatrix::zeros(m, n);
    for k in 0..rank {
        let v = vt.row(k).transpose();
        let uk = u.view((0, k), (n, 1));
        pinv += (v * uk.transpose()) / sigma[k];
    }
    let kernel = vt.rows(rank, m - rank).transpose();
    Pinv { pinv, rank, kernel }
}

/// Numerical rank with the configured singular-value cutoff.
pub fn numerical_rank(a: &DMatrix<f64>, tol: &Tolerances) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = a.clone().svd(false, false).singular_values;
    let sigma_max = s.max();
    let cutoff = tol.rank_cutoff(a.nrows(), a.ncols(), sigma_max);
    s.iter().filter(|&&v| v > cutoff && v > 0.0).count()
}

/// Solves `B X = C` in the least-squares sense via the SVD, returning the
/// minimum-norm solution refined by residual correction.
pub fn solve_matrix_equation(b: &DMatrix<f64>, c: &DMatrix<f64>, tol: &Tolerances) -> LinearSolveReport {
    assert_eq!(b.nrows(), c.nrows(), "row counts of B and C must match");
    let Pinv { pinv, rank, kernel } = pseudo_inverse(b, tol);
    let mut x = &pinv * c;
    let mut residual = (b * &x - c).norm();
    // Corrections lie in the row space of B, so the minimum-norm property survives.
    for _ in 0..2 {
        let candidate = &x + &pinv * (c - b * &x);
        let r = (b * &candidate - c).norm();
        if r < residual {
            x = candidate;
            residual = r;
        } else {
            break;
        }
    }
    let relative_residual = residual / (1.0 + c.norm());
    LinearSolveReport {
        solution: x,
        residual_norm: residual,
        relative_residual,
        solvable: relative_residual <= tol.solve,
        rank_b: rank,
        kernel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn consistent_column_system() {
        let r = solve_matrix_equation(
            &dmatrix![1.0; 1.0],
            &dmatrix![1.0, 1.0; 1.0, 1.0],
            &Tolerances::default(),
        );
        assert!(r.solvable);
        assert_eq!(r.solution, dmatrix![1.0, 1.0]);
        assert_eq!(r.rank_b, 1);
        assert_eq!(r.kernel.shape(), (1, 0));
    }

    #[test]
    fn inconsistent_system() {
        let r = solve_matrix_equation(
            &dmatrix![1.0; 2.0],
            &dmatrix![0.0, 0.0; 1.0, 1.0],
            &Tolerances::default(),
        );
        assert!(!r.solvable);
        // projection of (0,1) onto (1,2) leaves (-0.4, 0.2) per column
        assert!((r.residual_norm - (0.4f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_system() {
        let r = solve_matrix_equation(&DMatrix::zeros(2, 1), &DMatrix::zeros(2, 1), &Tolerances::default());
        assert!(r.solvable);
        assert_eq!(r.solution, DMatrix::zeros(1, 1));
        assert_eq!(r.rank_b, 0);
        assert_eq!(r.kernel.shape(), (1, 1));
    }

    #[test]
    fn wide_matrix_has_kernel_and_min_norm_solution() {
        let b = dmatrix![1.0, 1.0];
        let r = solve_matrix_equation(&b, &dmatrix![2.0], &Tolerances::default());
        assert!(r.solvable);
        assert!((r.solution[(0, 0)] - 1.0).abs() < 1e-14 && (r.solution[(1, 0)] - 1.0).abs() < 1e-14);
        assert_eq!(r.kernel.shape(), (2, 1));
        assert!((&b * &r.kernel).norm() < 1e-14);
    }

    #[test]
    fn rank_of_controllability_style_matrix() {
        let tol = Tolerances::default();
        assert_eq!(numerical_rank(&dmatrix![1.0, -2.0; 1.0, 0.0], &tol), 2);
        assert_eq!(numerical_rank(&dmatrix![1.0, 2.0; 2.0, 4.0], &tol), 1);
    }
}
