//! LPV polynomial DAE models `H(w,q)[x] + L(w,q)[z] + F(w,q)[f] = 0` and the
//! conversion from LPV state-space difference equations.
//!
//! Coefficient matrices are stored as evaluable functions of the scheduling
//! parameter so that the model can be queried at any measured point inside
//! its declared box.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{FdiError, Result};

/// A value of the scheduling parameter `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulingPoint(Vec<f64>);

impl SchedulingPoint {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn scalar(value: f64) -> Self {
        Self(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// First component; convenient for the common single-parameter case.
    pub fn first(&self) -> f64 {
        self.0[0]
    }
}

impl From<f64> for SchedulingPoint {
    fn from(value: f64) -> Self {
        Self::scalar(value)
    }
}

/// Per-component box `W` in which the scheduling parameter is allowed to live.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulingBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SchedulingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(FdiError::InvalidOption(
                "scheduling box bounds must be non-empty and of equal length".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(lo, hi)| !(lo <= hi)) {
            return Err(FdiError::InvalidOption(
                "scheduling box lower bound exceeds upper bound".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    /// Unbounded single-parameter box, for LTI models.
    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// A representative interior point (midpoint, or 0 for infinite bounds).
    pub fn center(&self) -> SchedulingPoint {
        SchedulingPoint(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(&lo, &hi)| match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => 0.5 * (lo + hi),
                    (true, false) => lo,
                    (false, true) => hi,
                    (false, false) => 0.0,
                })
                .collect(),
        )
    }

    pub fn check(&self, w: &SchedulingPoint) -> Result<()> {
        if w.dim() != self.dim() {
            return Err(FdiError::SchedulingDimension {
                expected: self.dim(),
                got: w.dim(),
            });
        }
        for (component, ((&value, &lo), &hi)) in
            w.0.iter().zip(&self.lower).zip(&self.upper).enumerate()
        {
            // NaN fails both comparisons and is rejected here as well.
            if !(value >= lo && value <= hi) {
                return Err(FdiError::OutOfBounds {
                    point: w.0.clone(),
                    component,
                });
            }
        }
        Ok(())
    }
}

type CoeffFn = dyn Fn(&SchedulingPoint) -> Result<Vec<DMatrix<f64>>> + Send + Sync;

/// Polynomial matrix `M(w,q) = sum_i M_i(w) q^i` with parameter-dependent
/// coefficients.
///
/// The coefficient map returns all `degree + 1` coefficients at once, which
/// lets expensive per-point work (a discretization, say) be shared between
/// them.
#[derive(Clone)]
pub struct ParamPolyMatrix {
    rows: usize,
    cols: usize,
    degree: usize,
    bounds: SchedulingBox,
    coeffs: Arc<CoeffFn>,
}

impl fmt::Debug for ParamPolyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamPolyMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("degree", &self.degree)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl ParamPolyMatrix {
    pub fn new<F>(rows: usize, cols: usize, degree: usize, bounds: SchedulingBox, coeffs: F) -> Self
    where
        F: Fn(&SchedulingPoint) -> Result<Vec<DMatrix<f64>>> + Send + Sync + 'static,
    {
        Self {
            rows,
            cols,
            degree,
            bounds,
            coeffs: Arc::new(coeffs),
        }
    }

    /// Parameter-independent polynomial matrix from its coefficient list.
    pub fn constant(coeffs: Vec<DMatrix<f64>>, bounds: SchedulingBox) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| FdiError::InvalidOption("empty coefficient list".into()))?;
        let shape = first.shape();
        for c in &coeffs {
            if c.shape() != shape {
                return Err(FdiError::DimensionMismatch {
                    what: "constant polynomial coefficient".into(),
                    expected: shape,
                    got: c.shape(),
                });
            }
        }
        let degree = coeffs.len() - 1;
        Ok(Self::new(shape.0, shape.1, degree, bounds, move |_| Ok(coeffs.clone())))
    }

    pub fn zeros(rows: usize, cols: usize, bounds: SchedulingBox) -> Self {
        Self::new(rows, cols, 0, bounds, move |_| Ok(vec![DMatrix::zeros(rows, cols)]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn bounds(&self) -> &SchedulingBox {
        &self.bounds
    }

    /// All coefficients `M_0(w) .. M_d(w)`.
    pub fn eval_all(&self, w: &SchedulingPoint) -> Result<Vec<DMatrix<f64>>> {
        self.bounds.check(w)?;
        let coeffs = (self.coeffs)(w)?;
        if coeffs.len() != self.degree + 1 {
            return Err(FdiError::DimensionMismatch {
                what: "coefficient count".into(),
                expected: (self.degree + 1, 1),
                got: (coeffs.len(), 1),
            });
        }
        for c in &coeffs {
            if c.shape() != (self.rows, self.cols) {
                return Err(FdiError::DimensionMismatch {
                    what: "polynomial coefficient".into(),
                    expected: (self.rows, self.cols),
                    got: c.shape(),
                });
            }
        }
        Ok(coeffs)
    }

    /// Coefficient `M_i(w)`.
    pub fn eval_coeff(&self, w: &SchedulingPoint, i: usize) -> Result<DMatrix<f64>> {
        if i > self.degree {
            return Err(FdiError::CoefficientIndex {
                index: i,
                degree: self.degree,
            });
        }
        Ok(self.eval_all(w)?.swap_remove(i))
    }
}

/// The triple `(H, L, F)` of an LPV polynomial DAE model.
#[derive(Debug, Clone)]
pub struct DaeModel {
    h: ParamPolyMatrix,
    l: ParamPolyMatrix,
    f: ParamPolyMatrix,
    bounds: SchedulingBox,
}

impl DaeModel {
    pub fn new(
        h: ParamPolyMatrix,
        l: ParamPolyMatrix,
        f: ParamPolyMatrix,
        bounds: SchedulingBox,
    ) -> Result<Self> {
        let n_r = h.rows();
        for (name, m) in [("L", &l), ("F", &f)] {
            if m.rows() != n_r {
                return Err(FdiError::DimensionMismatch {
                    what: format!("row count of {name}"),
                    expected: (n_r, m.cols()),
                    got: (m.rows(), m.cols()),
                });
            }
        }
        for m in [&h, &l, &f] {
            if m.bounds().dim() != bounds.dim() {
                return Err(FdiError::SchedulingDimension {
                    expected: bounds.dim(),
                    got: m.bounds().dim(),
                });
            }
        }
        Ok(Self { h, l, f, bounds })
    }

    pub fn h(&self) -> &ParamPolyMatrix {
        &self.h
    }

    pub fn l(&self) -> &ParamPolyMatrix {
        &self.l
    }

    pub fn f(&self) -> &ParamPolyMatrix {
        &self.f
    }

    pub fn bounds(&self) -> &SchedulingBox {
        &self.bounds
    }

    pub fn n_r(&self) -> usize {
        self.h.rows()
    }

    pub fn n_x(&self) -> usize {
        self.h.cols()
    }

    pub fn n_z(&self) -> usize {
        self.l.cols()
    }

    pub fn n_f(&self) -> usize {
        self.f.cols()
    }

    /// Left-hand side of the model equation at sample `k`:
    /// `sum_i H_i(w_k) x(k+i) + L_i(w_k) z(k+i) + F_i(w_k) f(k+i)`.
    ///
    /// The signal slices start at sample `k` and must cover each degree.
    pub fn equation_residual(
        &self,
        w_k: &SchedulingPoint,
        x: &[DVector<f64>],
        z: &[DVector<f64>],
        f: &[DVector<f64>],
    ) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.n_r());
        for (poly, signal) in [(&self.h, x), (&self.l, z), (&self.f, f)] {
            let coeffs = poly.eval_all(w_k)?;
            if signal.len() < coeffs.len() {
                return Err(FdiError::DimensionMismatch {
                    what: "signal samples for equation residual".into(),
                    expected: (coeffs.len(), poly.cols()),
                    got: (signal.len(), poly.cols()),
                });
            }
            for (c, s) in coeffs.iter().zip(signal) {
                out += c * s;
            }
        }
        Ok(out)
    }
}

/// Dimensions of an [`LpvStateSpace`] model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpaceDims {
    pub n_states: usize,
    pub n_inputs: usize,
    pub n_disturbances: usize,
    pub n_faults: usize,
    pub n_outputs: usize,
}

/// State-space matrices at one scheduling point:
///
/// ```text
/// G X(k+1) = A X(k) + B_u u(k) + B_d d(k) + B_f f(k)
///     y(k) = C X(k) + D_u u(k) + D_d d(k) + D_f f(k)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceMatrices {
    pub g: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_d: DMatrix<f64>,
    pub b_f: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d_u: DMatrix<f64>,
    pub d_d: DMatrix<f64>,
    pub d_f: DMatrix<f64>,
}

impl StateSpaceMatrices {
    /// `G = I`, all feedthrough zero; the remaining matrices are given.
    pub fn standard(
        a: DMatrix<f64>,
        b_u: DMatrix<f64>,
        b_d: DMatrix<f64>,
        b_f: DMatrix<f64>,
        c: DMatrix<f64>,
    ) -> Self {
        let n = a.nrows();
        let p = c.nrows();
        Self {
            g: DMatrix::identity(n, n),
            d_u: DMatrix::zeros(p, b_u.ncols()),
            d_d: DMatrix::zeros(p, b_d.ncols()),
            d_f: DMatrix::zeros(p, b_f.ncols()),
            a,
            b_u,
            b_d,
            b_f,
            c,
        }
    }

    fn validate(&self, dims: &StateSpaceDims) -> Result<()> {
        let StateSpaceDims {
            n_states: nx,
            n_inputs: nu,
            n_disturbances: nd,
            n_faults: nf,
            n_outputs: ny,
        } = *dims;
        let expected = [
            ("G", &self.g, (nx, nx)),
            ("A", &self.a, (nx, nx)),
            ("B_u", &self.b_u, (nx, nu)),
            ("B_d", &self.b_d, (nx, nd)),
            ("B_f", &self.b_f, (nx, nf)),
            ("C", &self.c, (ny, nx)),
            ("D_u", &self.d_u, (ny, nu)),
            ("D_d", &self.d_d, (ny, nd)),
            ("D_f", &self.d_f, (ny, nf)),
        ];
        for (name, m, shape) in expected {
            if m.shape() != shape {
                return Err(FdiError::DimensionMismatch {
                    what: name.into(),
                    expected: shape,
                    got: m.shape(),
                });
            }
        }
        Ok(())
    }
}

type StateSpaceFn = dyn Fn(&SchedulingPoint) -> StateSpaceMatrices + Send + Sync;

/// LPV state-space difference equations with scheduling-dependent matrices.
#[derive(Clone)]
pub struct LpvStateSpace {
    dims: StateSpaceDims,
    bounds: SchedulingBox,
    eval: Arc<StateSpaceFn>,
}

impl fmt::Debug for LpvStateSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LpvStateSpace")
            .field("dims", &self.dims)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl LpvStateSpace {
    pub fn new<F>(dims: StateSpaceDims, bounds: SchedulingBox, eval: F) -> Self
    where
        F: Fn(&SchedulingPoint) -> StateSpaceMatrices + Send + Sync + 'static,
    {
        Self {
            dims,
            bounds,
            eval: Arc::new(eval),
        }
    }

    /// Time-invariant model; dimensions are read off the matrices.
    pub fn constant(m: StateSpaceMatrices, bounds: SchedulingBox) -> Self {
        let dims = StateSpaceDims {
            n_states: m.a.nrows(),
            n_inputs: m.b_u.ncols(),
            n_disturbances: m.b_d.ncols(),
            n_faults: m.b_f.ncols(),
            n_outputs: m.c.nrows(),
        };
        Self::new(dims, bounds, move |_| m.clone())
    }

    pub fn dims(&self) -> StateSpaceDims {
        self.dims
    }

    pub fn bounds(&self) -> &SchedulingBox {
        &self.bounds
    }

    pub fn eval(&self, w: &SchedulingPoint) -> Result<StateSpaceMatrices> {
        self.bounds.check(w)?;
        let m = (self.eval)(w);
        m.validate(&self.dims)?;
        Ok(m)
    }
}

/// Rewrites LPV state-space equations as a DAE model with `x = [X; d]` and
/// `z = [y; u]`:
///
/// ```text
/// H = [ -G q + A   B_d ]    L = [  0   B_u ]    F = [ B_f ]
///     [    C       D_d ]        [ -I   D_u ]        [ D_f ]
/// ```
pub fn ss_to_dae(ss: &LpvStateSpace) -> Result<DaeModel> {
    let dims = ss.dims();
    // Shape check at a representative point; later evaluations are checked
    // again on every call.
    ss.eval(&ss.bounds().center())?;

    let StateSpaceDims {
        n_states: nx,
        n_inputs: nu,
        n_disturbances: nd,
        n_faults: nf,
        n_outputs: ny,
    } = dims;
    let n_r = nx + ny;
    let bounds = ss.bounds().clone();

    let eval_h = ss.clone();
    let h = ParamPolyMatrix::new(n_r, nx + nd, 1, bounds.clone(), move |w| {
        let m = eval_h.eval(w)?;
        let mut h0 = DMatrix::zeros(n_r, nx + nd);
        h0.view_mut((0, 0), (nx, nx)).copy_from(&m.a);
        h0.view_mut((0, nx), (nx, nd)).copy_from(&m.b_d);
        h0.view_mut((nx, 0), (ny, nx)).copy_from(&m.c);
        h0.view_mut((nx, nx), (ny, nd)).copy_from(&m.d_d);
        let mut h1 = DMatrix::zeros(n_r, nx + nd);
        h1.view_mut((0, 0), (nx, nx)).copy_from(&(-&m.g));
        Ok(vec![h0, h1])
    });

    let eval_l = ss.clone();
    let l = ParamPolyMatrix::new(n_r, ny + nu, 0, bounds.clone(), move |w| {
        let m = eval_l.eval(w)?;
        let mut l0 = DMatrix::zeros(n_r, ny + nu);
        l0.view_mut((0, ny), (nx, nu)).copy_from(&m.b_u);
        l0.view_mut((nx, 0), (ny, ny)).fill_with_identity();
        l0.view_mut((nx, 0), (ny, ny)).neg_mut();
        l0.view_mut((nx, ny), (ny, nu)).copy_from(&m.d_u);
        Ok(vec![l0])
    });

    let eval_f = ss.clone();
    let f = ParamPolyMatrix::new(n_r, nf, 0, bounds.clone(), move |w| {
        let m = eval_f.eval(w)?;
        let mut f0 = DMatrix::zeros(n_r, nf);
        f0.view_mut((0, 0), (nx, nf)).copy_from(&m.b_f);
        f0.view_mut((nx, 0), (ny, nf)).copy_from(&m.d_f);
        Ok(vec![f0])
    });

    DaeModel::new(h, l, f, bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn scalar_lti(a: f64, b: f64) -> LpvStateSpace {
        let m = StateSpaceMatrices::standard(
            dmatrix![a],
            dmatrix![b],
            DMatrix::zeros(1, 0),
            DMatrix::zeros(1, 0),
            dmatrix![1.0],
        );
        LpvStateSpace::constant(m, SchedulingBox::unbounded(1))
    }

    #[test]
    fn constant_matrix_ignores_parameter() {
        let c = dmatrix![1.0, 2.0; 3.0, 4.0];
        let m = ParamPolyMatrix::constant(vec![c.clone()], SchedulingBox::unbounded(1)).unwrap();
        for w in [-3.0, 0.0, 17.5] {
            assert_eq!(m.eval_coeff(&w.into(), 0).unwrap(), c);
        }
    }

    #[test]
    fn zero_trailing_coefficient() {
        let m = ParamPolyMatrix::constant(
            vec![DMatrix::identity(2, 3), DMatrix::zeros(2, 3)],
            SchedulingBox::unbounded(1),
        )
        .unwrap();
        assert_eq!(m.degree(), 1);
        assert_eq!(m.eval_coeff(&1.0.into(), 1).unwrap(), DMatrix::zeros(2, 3));
    }

    #[test]
    fn coefficient_index_out_of_range() {
        let m = ParamPolyMatrix::zeros(2, 2, SchedulingBox::unbounded(1));
        assert_eq!(
            m.eval_coeff(&0.0.into(), 1),
            Err(FdiError::CoefficientIndex { index: 1, degree: 0 })
        );
    }

    #[test]
    fn out_of_box_is_rejected() {
        let bounds = SchedulingBox::interval(14.0, 24.0).unwrap();
        let m = ParamPolyMatrix::zeros(1, 1, bounds);
        assert!(m.eval_coeff(&19.0.into(), 0).is_ok());
        assert!(matches!(
            m.eval_coeff(&25.0.into(), 0),
            Err(FdiError::OutOfBounds { component: 0, .. })
        ));
        assert!(matches!(
            m.eval_coeff(&f64::NAN.into(), 0),
            Err(FdiError::OutOfBounds { .. })
        ));
        assert!(matches!(
            m.eval_coeff(&SchedulingPoint::new(vec![19.0, 1.0]), 0),
            Err(FdiError::SchedulingDimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn wrong_coefficient_shape_is_reported() {
        let m = ParamPolyMatrix::new(2, 2, 0, SchedulingBox::unbounded(1), |_| {
            Ok(vec![DMatrix::zeros(2, 3)])
        });
        assert!(matches!(
            m.eval_all(&0.0.into()),
            Err(FdiError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scalar_state_space_conversion() {
        let (a, b) = (0.7, 0.3);
        let dae = ss_to_dae(&scalar_lti(a, b)).unwrap();
        let w = SchedulingPoint::scalar(0.0);
        assert_eq!(dae.h().eval_coeff(&w, 1).unwrap(), dmatrix![-1.0; 0.0]);
        assert_eq!(dae.h().eval_coeff(&w, 0).unwrap(), dmatrix![a; 1.0]);
        assert_eq!(dae.l().eval_coeff(&w, 0).unwrap(), dmatrix![0.0, b; -1.0, 0.0]);
        assert_eq!(dae.n_f(), 0);
    }

    #[test]
    fn sensor_fault_placement() {
        let mut m = StateSpaceMatrices::standard(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 0),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
        );
        m.d_f = DMatrix::identity(2, 2);
        let dae = ss_to_dae(&LpvStateSpace::constant(m, SchedulingBox::unbounded(1))).unwrap();
        let f0 = dae.f().eval_coeff(&0.0.into(), 0).unwrap();
        let mut expected = DMatrix::zeros(4, 2);
        expected.view_mut((2, 0), (2, 2)).fill_with_identity();
        assert_eq!(f0, expected);
    }

    #[test]
    fn conversion_rejects_bad_shapes() {
        let mut m = StateSpaceMatrices::standard(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
        );
        m.d_u = DMatrix::zeros(3, 1);
        let dims = StateSpaceDims {
            n_states: 2,
            n_inputs: 1,
            n_disturbances: 1,
            n_faults: 1,
            n_outputs: 2,
        };
        let ss = LpvStateSpace::new(dims, SchedulingBox::unbounded(1), move |_| m.clone());
        assert!(matches!(
            ss_to_dae(&ss),
            Err(FdiError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn descriptor_matrix_enters_shift_coefficient() {
        let mut m = StateSpaceMatrices::standard(
            dmatrix![0.5, 0.1; 0.0, 0.9],
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 0),
            DMatrix::zeros(2, 0),
            dmatrix![1.0, 0.0],
        );
        m.g = dmatrix![2.0, 0.0; 1.0, 1.0];
        let dae = ss_to_dae(&LpvStateSpace::constant(m, SchedulingBox::unbounded(1))).unwrap();
        let h1 = dae.h().eval_coeff(&0.0.into(), 1).unwrap();
        assert_eq!(h1.view((0, 0), (2, 2)), dmatrix![-2.0, 0.0; -1.0, -1.0]);
        assert_eq!(h1.row(2).sum(), 0.0);
    }

    #[test]
    fn healthy_trajectory_satisfies_model_equation() {
        // Scheduling-dependent second-order system with one disturbance.
        let bounds = SchedulingBox::interval(0.0, 1.0).unwrap();
        let dims = StateSpaceDims {
            n_states: 2,
            n_inputs: 1,
            n_disturbances: 1,
            n_faults: 1,
            n_outputs: 1,
        };
        let ss = LpvStateSpace::new(dims, bounds, |w| {
            let p = w.first();
            let mut m = StateSpaceMatrices::standard(
                nalgebra::dmatrix![0.9 - 0.2 * p, 0.1; -0.1, 0.8],
                nalgebra::dmatrix![0.0; 1.0],
                nalgebra::dmatrix![0.5 * p; 0.2],
                nalgebra::dmatrix![0.0; 1.0],
                nalgebra::dmatrix![1.0, p],
            );
            m.d_u = nalgebra::dmatrix![0.1];
            m.d_d = nalgebra::dmatrix![0.3];
            m
        });
        let dae = ss_to_dae(&ss).unwrap();
        let mut x_state = DVector::from_vec(vec![0.2, -0.1]);
        let mut xs = Vec::new();
        let mut zs = Vec::new();
        let mut ws = Vec::new();
        for k in 0..40 {
            let w = SchedulingPoint::scalar(0.5 + 0.5 * (0.3 * k as f64).sin());
            let m = ss.eval(&w).unwrap();
            let u = DVector::from_element(1, (0.7 * k as f64).cos());
            let d = DVector::from_element(1, (1.3 * k as f64).sin());
            let y = &m.c * &x_state + &m.d_u * &u + &m.d_d * &d;
            let next = &m.a * &x_state + &m.b_u * &u + &m.b_d * &d;
            xs.push(DVector::from_iterator(3, x_state.iter().chain(d.iter()).copied()));
            zs.push(DVector::from_iterator(2, y.iter().chain(u.iter()).copied()));
            ws.push(w);
            x_state = next;
        }
        let f0 = vec![DVector::zeros(1); 2];
        for k in 0..39 {
            let res = dae
                .equation_residual(&ws[k], &xs[k..k + 2], &zs[k..k + 2], &f0)
                .unwrap();
            assert_relative_eq!(res.amax(), 0.0, epsilon = 1e-12);
        }
    }
}
