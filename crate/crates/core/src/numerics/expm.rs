use nalgebra::DMatrix;

pub const DEFAULT_PADE_ORDER: usize = 8;

/// Matrix exponential by scaling and squaring with the default diagonal Padé degree.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    expm_with_order(a, DEFAULT_PADE_ORDER)
}

/// Matrix exponential by scaling and squaring with a diagonal `[q/q]` Padé
/// approximant. The matrix is scaled so that `‖A/2^s‖_1 ≤ 1/2`.
pub fn expm_with_order(a: &DMatrix<f64>, q: usize) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    assert!(q >= 1, "Padé degree must be positive");
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = a / 2f64.powi(s);

    let mut c = 1.0;
    let mut power = DMatrix::identity(n, n);
    let mut num = DMatrix::identity(n, n);
    let mut den = DMatrix::identity(n, n);
    for k in 1..=q {
        c *= (q + 1 - k) as f64 / (k * (2 * q + 1 - k)) as f64;
        power = &power * &x;
        num += &power * c;
        if k % 2 == 0 {
            den += &power * c;
        } else {
            den -= &power * c;
        }
    }
    let mut r = den
        .lu()
        .solve(&num)
        .expect("Padé denominator is nonsingular for ‖X‖ ≤ 1/2");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
