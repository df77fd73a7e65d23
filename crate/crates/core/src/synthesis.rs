//! Filter synthesis on the stacked matrices.
//!
//! A filter row `N̄` must satisfy `N̄ H̄ = 0` (disturbances and unknown states
//! cancel) while `N̄ F̄ ≠ 0`. Among such rows we take the minimizer of
//! `‖N̄‖² − |N̄ F̄_j|` over the columns `j` of `F̄`:
//!
//! * [`synthesize_exact`] solves this in closed form with the orthogonal
//!   projector onto the left nullspace of `H̄`: `N̄_j = ½ F̄_jᵀ Π`.
//! * [`synthesize_analytic`] replaces the constraint with the penalty
//!   `γ‖N̄ H̄‖²`, giving `N̄_j = (2γ)⁻¹ F̄_jᵀ (γ⁻¹I + H̄H̄ᵀ)⁻¹`, which tends to
//!   the exact row as `γ → ∞`. This is the path used at run time.
//!
//! With several fault channels, one scalar residual is built per target fault
//! and the columns of the other faults are appended to `H̄`, so they are
//! decoupled like disturbances.

use nalgebra::{DMatrix, RowDVector};

use crate::error::{FdiError, Result};
use crate::stacking::StackedSystem;

/// Relative decoupling level below which an analytic row counts as exact.
pub const EXACT_DECOUPLING_TOL: f64 = 1e-6;

/// Columns whose sensitivities agree to this relative level are tied; the
/// lowest index wins.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Penalty weight `γ` of the regularized synthesis.
    pub gamma: f64,
    /// Singular values below `factor · σ_max` count as zero. `None` uses
    /// `max(rows, cols) · ε`.
    pub rank_tol_factor: Option<f64>,
    /// Fault channel the residual estimates.
    pub target_fault: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            gamma: 1e10,
            rank_tol_factor: None,
            target_fault: 0,
        }
    }
}

impl SynthesisOptions {
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(FdiError::InvalidOption(format!(
                "gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        if let Some(t) = self.rank_tol_factor {
            if !(t > 0.0 && t.is_finite()) {
                return Err(FdiError::InvalidOption(format!(
                    "rank tolerance factor must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }

    fn tol_factor(&self, rows: usize, cols: usize) -> f64 {
        self.rank_tol_factor
            .unwrap_or(rows.max(cols) as f64 * f64::EPSILON)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Isolability {
    pub isolable: bool,
    /// Rank of the decoupling matrix (`H̄`, plus the other faults' columns).
    pub rank_h: usize,
    /// Rank with the target fault's columns appended.
    pub rank_hf: usize,
}

/// Whether a synthesized row decouples exactly or carries a regularization
/// bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exactness {
    Exact,
    Regularized,
}

/// A synthesized filter row before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRow {
    /// `N̄ = [N_0 .. N_{d_N}]`, length `(d_N + 1) n_r`.
    pub coeffs: RowDVector<f64>,
    /// Column `j*` of `F̄` the row was built from.
    pub selected_column: usize,
    /// `N̄ F̄_{j*}`.
    pub sensitivity: f64,
    pub target_fault: usize,
    pub exactness: Exactness,
}

struct Split {
    decoupling: DMatrix<f64>,
    candidates: Vec<usize>,
}

fn split(stk: &StackedSystem, target: usize) -> Result<Split> {
    if target >= stk.n_f {
        return Err(FdiError::TargetFault {
            target,
            n_faults: stk.n_f,
        });
    }
    let candidates = stk.fault_columns(target);
    let others: Vec<usize> = (0..stk.f.ncols())
        .filter(|c| c % stk.n_f != target)
        .collect();
    let decoupling = if others.is_empty() {
        stk.h.clone()
    } else {
        let mut d = DMatrix::zeros(stk.h.nrows(), stk.h.ncols() + others.len());
        d.columns_mut(0, stk.h.ncols()).copy_from(&stk.h);
        for (k, &c) in others.iter().enumerate() {
            d.column_mut(stk.h.ncols() + k).copy_from(&stk.f.column(c));
        }
        d
    };
    Ok(Split {
        decoupling,
        candidates,
    })
}

fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Thin SVD `(U, σ)` whose reconstruction has been verified.
///
/// nalgebra's default convergence threshold can stop early on
/// rank-deficient inputs and return factors that do not reproduce `m`. The
/// default is tried first, then a tighter threshold, then the transpose.
fn verified_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let limit = 64.0 * f64::EPSILON * m.nrows().max(m.ncols()) as f64 * scale;
    let accurate = |a: &DMatrix<f64>, svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>| {
        svd.clone().recompose().is_ok_and(|back| (back - a).amax() <= limit)
    };
    for eps in [f64::EPSILON, 1e-17, 1e-19] {
        if let Some(svd) = m.clone().try_svd(true, true, eps, 10_000) {
            if accurate(m, &svd) {
                let sv = svd.singular_values.iter().copied().collect();
                return Ok((svd.u.expect("requested U"), sv));
            }
        }
    }
    let t = m.transpose();
    if let Some(svd) = t.clone().try_svd(true, true, f64::EPSILON, 10_000) {
        if accurate(&t, &svd) {
            let sv = svd.singular_values.iter().copied().collect();
            return Ok((svd.v_t.expect("requested V").transpose(), sv));
        }
    }
    Err(FdiError::Numerical("SVD did not converge to an accurate factorization".into()))
}

fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    Ok(verified_svd(m)?.1)
}

/// Index of the largest `|value|`; near-ties go to the lowest index.
fn argmax_abs(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if v.abs() > values[best].abs() * (1.0 + TIE_TOL) {
            best = i;
        }
    }
    best
}

/// Numerical rank test `rank([H̄ F̄]) > rank(H̄)` for the target fault.
pub fn isolability_check(stk: &StackedSystem, opt: &SynthesisOptions) -> Result<Isolability> {
    let Split {
        decoupling,
        candidates,
    } = split(stk, opt.target_fault)?;
    let joint = hcat(&decoupling, &select_columns(&stk.f, &candidates));
    let sv_joint = singular_values(&joint)?;
    let sigma_max = sv_joint.iter().copied().fold(0.0, f64::max);
    let tol = opt.tol_factor(joint.nrows(), joint.ncols()) * sigma_max;
    let rank = |sv: &[f64]| sv.iter().filter(|&&s| s > tol).count();
    let rank_hf = rank(&sv_joint);
    let rank_h = rank(&singular_values(&decoupling)?);
    Ok(Isolability {
        isolable: rank_hf > rank_h,
        rank_h,
        rank_hf,
    })
}

/// Exact minimizer via the left-nullspace projector of `H̄`.
pub fn synthesize_exact(stk: &StackedSystem, opt: &SynthesisOptions) -> Result<FilterRow> {
    opt.validate()?;
    let Split {
        decoupling,
        candidates,
    } = split(stk, opt.target_fault)?;
    let n = decoupling.nrows();
    let fc = select_columns(&stk.f, &candidates);

    // Π F = F − U_r U_rᵀ F with U_r spanning the column space of the
    // decoupling matrix.
    let projected = if decoupling.ncols() == 0 || n == 0 {
        fc.clone()
    } else {
        let (u, sv) = verified_svd(&decoupling)?;
        let sigma_max = sv.iter().copied().fold(0.0, f64::max);
        let tol = opt.tol_factor(decoupling.nrows(), decoupling.ncols()) * sigma_max;
        let range: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > tol).collect();
        let u_r = select_columns(&u, &range);
        &fc - &u_r * (u_r.transpose() * &fc)
    };

    let sens: Vec<f64> = (0..fc.ncols())
        .map(|c| 0.5 * projected.column(c).dot(&fc.column(c)))
        .collect();
    let best = argmax_abs(&sens);

    let scale = decoupling
        .norm()
        .max(fc.column_iter().map(|c| c.norm()).fold(0.0, f64::max));
    let tol = opt.tol_factor(n, decoupling.ncols() + fc.ncols()) * scale;
    if fc.ncols() == 0 || projected.column(best).norm() <= tol {
        return Err(FdiError::NotIsolable {
            fault: opt.target_fault,
        });
    }

    Ok(FilterRow {
        coeffs: 0.5 * projected.column(best).transpose(),
        selected_column: candidates[best],
        sensitivity: sens[best],
        target_fault: opt.target_fault,
        exactness: Exactness::Exact,
    })
}

/// Regularized closed form `(2γ)⁻¹ F̄_{j*}ᵀ (γ⁻¹I + H̄H̄ᵀ)⁻¹`.
///
/// The Cholesky factor of `γ⁻¹I + H̄H̄ᵀ` is taken from a QR decomposition of
/// `[H̄ᵀ; γ^{-1/2} I]`, so `H̄H̄ᵀ` is never formed. All candidate columns are
/// solved at once.
pub fn synthesize_analytic(stk: &StackedSystem, opt: &SynthesisOptions) -> Result<FilterRow> {
    opt.validate()?;
    let Split {
        decoupling,
        candidates,
    } = split(stk, opt.target_fault)?;
    let n = decoupling.nrows();
    let m = decoupling.ncols();
    let fc = select_columns(&stk.f, &candidates);
    if fc.ncols() == 0 {
        return Err(FdiError::NotIsolable {
            fault: opt.target_fault,
        });
    }
    let gamma = opt.gamma;

    let mut aug = DMatrix::zeros(m + n, n);
    aug.rows_mut(0, m).copy_from(&decoupling.transpose());
    aug.rows_mut(m, n).fill_diagonal(gamma.sqrt().recip());
    let r = aug.qr().r();

    let y = r
        .tr_solve_upper_triangular(&fc)
        .and_then(|t| r.solve_upper_triangular(&t))
        .ok_or_else(|| FdiError::Numerical("singular regularized factor".into()))?;
    let rows = y.transpose() / (2.0 * gamma);

    let sens: Vec<f64> = (0..fc.ncols())
        .map(|c| rows.row(c).dot(&fc.column(c).transpose()))
        .collect();
    let best = argmax_abs(&sens);
    if !(sens[best].is_finite() && sens[best] != 0.0) {
        return Err(FdiError::NotIsolable {
            fault: opt.target_fault,
        });
    }
    let coeffs: RowDVector<f64> = rows.row(best).into_owned();

    let denom = coeffs.norm() * decoupling.norm();
    let exactness = if denom == 0.0 || (&coeffs * &decoupling).norm() <= EXACT_DECOUPLING_TOL * denom {
        Exactness::Exact
    } else {
        Exactness::Regularized
    };

    Ok(FilterRow {
        coeffs,
        selected_column: candidates[best],
        sensitivity: sens[best],
        target_fault: opt.target_fault,
        exactness,
    })
}

/// `‖N̄ H̄‖ / (‖N̄‖ ‖H̄‖)`, Frobenius norms; 0 for a zero row or matrix.
pub fn decoupling_ratio(row: &RowDVector<f64>, stk: &StackedSystem) -> f64 {
    let denom = row.norm() * stk.h.norm();
    if denom == 0.0 {
        0.0
    } else {
        (row * &stk.h).norm() / denom
    }
}

/// Steady-state map from constant faults to the unnormalized residual:
/// `−N̄ F̄ (1 ⊗ I) / Σ a_h`, one entry per fault channel.
pub fn dc_fault_gain(
    row: &RowDVector<f64>,
    stk: &StackedSystem,
    denominator: &[f64],
) -> Result<RowDVector<f64>> {
    let sum: f64 = denominator.iter().sum();
    let scale: f64 = denominator.iter().map(|a| a.abs()).sum();
    if sum == 0.0 || sum.abs() <= f64::EPSILON * scale {
        return Err(FdiError::ZeroDcDenominator);
    }
    Ok(-(row * stk.fault_block_sum()) / sum)
}

/// Normalized numerator `E = s · N̄ L̄` with `s` chosen so that a constant
/// target fault produces a residual equal to it in steady state.
///
/// Returns `(E, s)`.
pub fn build_numerator(
    row: &FilterRow,
    stk: &StackedSystem,
    denominator: &[f64],
) -> Result<(RowDVector<f64>, f64)> {
    let gain = dc_fault_gain(&row.coeffs, stk, denominator)?;
    let g = gain[row.target_fault];
    if g == 0.0 || !g.is_finite() {
        return Err(FdiError::NotIsolable {
            fault: row.target_fault,
        });
    }
    let s = g.recip();
    Ok((s * (&row.coeffs * &stk.l), s))
}

/// A normalized filter ready to run: numerator `E(w)` over the measurement
/// window and denominator `a(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedFilter {
    pub row: RowDVector<f64>,
    pub selected_column: usize,
    pub target_fault: usize,
    /// Unnormalized steady-state gain per fault channel.
    pub fault_gain: RowDVector<f64>,
    /// Normalization factor applied to `N̄ L̄`.
    pub scale: f64,
    /// `E(w)`, length `(d_N + d_L + 1) n_z`.
    pub numerator: RowDVector<f64>,
    pub denominator: Vec<f64>,
    pub exactness: Exactness,
}

impl SynthesizedFilter {
    pub fn assemble(row: FilterRow, stk: &StackedSystem, denominator: &[f64]) -> Result<Self> {
        let fault_gain = dc_fault_gain(&row.coeffs, stk, denominator)?;
        let (numerator, scale) = build_numerator(&row, stk, denominator)?;
        Ok(Self {
            row: row.coeffs,
            selected_column: row.selected_column,
            target_fault: row.target_fault,
            fault_gain,
            scale,
            numerator,
            denominator: denominator.to_vec(),
            exactness: row.exactness,
        })
    }

    /// Steady-state residual per unit of constant target fault (1 by
    /// construction).
    pub fn normalized_dc_gain(&self) -> f64 {
        self.scale * self.fault_gain[self.target_fault]
    }
}
