#![allow(dead_code)]

use lpv_fdi::nalgebra::{DMatrix, RowDVector};
use lpv_fdi::StackedSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// `n×m` matrix of rank `r` with singular values in `[0.5, 2]`.
pub fn conditioned_low_rank(rng: &mut ChaCha8Rng, n: usize, m: usize, r: usize) -> DMatrix<f64> {
    let u = random(rng, n, r).qr().q();
    let v = random(rng, m, r).qr().q();
    let s = DMatrix::from_diagonal(&lpv_fdi::nalgebra::DVector::from_fn(r, |_, _| {
        rng.random_range(0.5..2.0)
    }));
    u * s * v.transpose()
}

/// Single-fault stacked system with every `F̄` column in one fault channel.
pub fn single_fault(h: DMatrix<f64>, f: DMatrix<f64>) -> StackedSystem {
    let n = h.nrows();
    StackedSystem {
        n_r: n,
        n_x: h.ncols(),
        n_z: 1,
        n_f: 1,
        order: 0,
        l: DMatrix::identity(n, 1),
        h,
        f,
    }
}

/// Unit-norm row with a fixed sign (largest entry positive).
pub fn unit(v: &RowDVector<f64>) -> RowDVector<f64> {
    let mut u = v / v.norm();
    let i = u.transpose().iamax();
    if u[i] < 0.0 {
        u.neg_mut();
    }
    u
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}
