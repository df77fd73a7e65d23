//! Window-evaluated block matrices `H̄(w)`, `F̄(w)`, `L̄(w)`.
//!
//! For a filter `N(w,q) = sum_i N_i q^i` of order `d_N`, the product
//! `N(w,q) M(w,q)` has coefficient `sum_{i+j=m} N_i M_j(w_{k-d_a+i})` at `q^m`.
//! Stacking `N̄ = [N_0 .. N_{d_N}]` as a row, that product is `N̄ M̄` where
//! block `(i, m)` of `M̄` is `M_{m-i}(w_{k-d_a+i})`.

use nalgebra::DMatrix;

use crate::error::{FdiError, Result};
use crate::lpv_model::{DaeModel, ParamPolyMatrix, SchedulingPoint};

/// Scheduling samples `w_{k-d_a} .. w_{k-d_a+d_N}` used to evaluate the
/// stacked matrices at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterWindow {
    samples: Vec<SchedulingPoint>,
    delay: usize,
}

impl ParameterWindow {
    /// `samples.len() - 1` is the filter order `d_N`; `delay` is `d_a`.
    pub fn new(samples: Vec<SchedulingPoint>, delay: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(FdiError::WindowLength {
                expected: 1,
                got: 0,
            });
        }
        Ok(Self { samples, delay })
    }

    /// Window with every sample equal to `w` (time-invariant evaluation).
    pub fn constant(w: SchedulingPoint, order: usize, delay: usize) -> Self {
        Self {
            samples: vec![w; order + 1],
            delay,
        }
    }

    pub fn order(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn samples(&self) -> &[SchedulingPoint] {
        &self.samples
    }
}

/// Shapes `(rows, cols)` of the three stacked matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackShape {
    pub h: (usize, usize),
    pub f: (usize, usize),
    pub l: (usize, usize),
}

/// Shapes of `H̄`, `F̄`, `L̄` for a filter of order `order`.
pub fn row_width(model: &DaeModel, order: usize) -> StackShape {
    let rows = (order + 1) * model.n_r();
    let width = |m: &ParamPolyMatrix| (order + m.degree() + 1) * m.cols();
    StackShape {
        h: (rows, width(model.h())),
        f: (rows, width(model.f())),
        l: (rows, width(model.l())),
    }
}

/// The stacked matrices for one parameter window.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem {
    pub h: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub n_r: usize,
    pub n_x: usize,
    pub n_z: usize,
    pub n_f: usize,
    pub order: usize,
}

impl StackedSystem {
    /// `F̄ (1 ⊗ I_{n_f})`: the block columns of `F̄` summed, one column per fault.
    pub fn fault_block_sum(&self) -> DMatrix<f64> {
        let blocks = self.f.ncols() / self.n_f.max(1);
        let mut out = DMatrix::zeros(self.f.nrows(), self.n_f);
        for b in 0..blocks {
            out += self.f.columns(b * self.n_f, self.n_f);
        }
        out
    }

    /// Indices of the `F̄` columns that belong to fault channel `fault`.
    pub fn fault_columns(&self, fault: usize) -> Vec<usize> {
        (fault..self.f.ncols()).step_by(self.n_f.max(1)).collect()
    }
}

fn stack(poly: &ParamPolyMatrix, coeffs: &[Vec<DMatrix<f64>>], order: usize) -> DMatrix<f64> {
    let (r, c) = (poly.rows(), poly.cols());
    let d = poly.degree();
    let mut out = DMatrix::zeros((order + 1) * r, (order + d + 1) * c);
    for (i, row_coeffs) in coeffs.iter().enumerate() {
        for (j, coeff) in row_coeffs.iter().enumerate() {
            out.view_mut((i * r, (i + j) * c), (r, c)).copy_from(coeff);
        }
    }
    out
}

/// Evaluates the model over the window and assembles `H̄`, `F̄`, `L̄`.
pub fn build_stacked(model: &DaeModel, win: &ParameterWindow) -> Result<StackedSystem> {
    let order = win.order();
    let mut h = Vec::with_capacity(order + 1);
    let mut f = Vec::with_capacity(order + 1);
    let mut l = Vec::with_capacity(order + 1);
    for w in win.samples() {
        model.bounds().check(w)?;
        h.push(model.h().eval_all(w)?);
        f.push(model.f().eval_all(w)?);
        l.push(model.l().eval_all(w)?);
    }
    Ok(StackedSystem {
        h: stack(model.h(), &h, order),
        f: stack(model.f(), &f, order),
        l: stack(model.l(), &l, order),
        n_r: model.n_r(),
        n_x: model.n_x(),
        n_z: model.n_z(),
        n_f: model.n_f(),
        order,
    })
}

/// Like [`build_stacked`] but checks the window length against `order`.
pub fn build_stacked_checked(
    model: &DaeModel,
    win: &ParameterWindow,
    order: usize,
) -> Result<StackedSystem> {
    if win.order() != order {
        return Err(FdiError::WindowLength {
            expected: order + 1,
            got: win.samples().len(),
        });
    }
    build_stacked(model, win)
}
