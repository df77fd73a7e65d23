//! Matrix exponential by scaling and squaring with a diagonal Padé(6, 6)
//! approximant, and zero-order-hold discretization built on it.

use nalgebra::DMatrix;

/// Padé(6, 6) numerator coefficients `c_k = (12-k)! 6! / (12! k! (6-k)!)`.
const PADE6: [f64; 7] = [
    1.0,
    0.5,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

/// The scaled matrix must satisfy `‖M‖₁ / 2^s ≤ SCALED_NORM`.
const SCALED_NORM: f64 = 0.5;

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^M` for a square matrix.
///
/// # Panics
/// If `m` is not square.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "expm needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = norm1(m);
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let x = m / 2f64.powi(squarings);

    // Even and odd parts share powers: N = U + V, D = U − V.
    let ident = DMatrix::<f64>::identity(n, n);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let even = &ident * PADE6[0] + &x2 * PADE6[2] + &x4 * PADE6[4] + &x6 * PADE6[6];
    let odd = &x * (&ident * PADE6[1] + &x2 * PADE6[3] + &x4 * PADE6[5]);
    let num = &even + &odd;
    let den = &even - &odd;
    let mut e = den
        .lu()
        .solve(&num)
        .expect("Padé denominator is nonsingular for ‖X‖ ≤ 1/2");
    for _ in 0..squarings {
        e = &e * &e;
    }
    e
}

/// Zero-order-hold discretization of `ẋ = A x + B u` over `h`:
/// returns `(e^{Ah}, ∫₀ʰ e^{As} ds B)`.
///
/// Both blocks come from a single exponential of `[[A, B], [0, 0]] h`, which
/// equals `A⁻¹(e^{Ah} − I) B` when `A` is invertible and stays well defined
/// when it is not.
pub fn exact_discretize(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * h));
    let e = expm(&aug);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}
