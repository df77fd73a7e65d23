//! Causal residual generator
//!
//! ```text
//! sum_h a_h r(k - d_a + h) = E(w) [z(k - d_a); ...; z(k - d_a + d_N + d_L)]
//! ```
//!
//! re-synthesizing `E(w)` from the parameter window at every step.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{FdiError, Result};
use crate::lpv_model::{DaeModel, SchedulingPoint};
use crate::stacking::{build_stacked, ParameterWindow};
use crate::synthesis::{synthesize_analytic, SynthesisOptions, SynthesizedFilter};

/// Root magnitudes must stay below `1 - STABILITY_MARGIN`.
const STABILITY_MARGIN: f64 = 1e-9;

/// Stable denominator `a(q) = sum_i a_i q^i`, ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenominatorPoly {
    coeffs: Vec<f64>,
}

impl DenominatorPoly {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let lead = *coeffs
            .last()
            .ok_or_else(|| FdiError::InvalidDenominator("no coefficients".into()))?;
        if lead == 0.0 || !coeffs.iter().all(|c| c.is_finite()) {
            return Err(FdiError::InvalidDenominator(
                "leading coefficient must be nonzero and all coefficients finite".into(),
            ));
        }
        let degree = coeffs.len() - 1;
        if degree > 0 {
            // Companion matrix of the monic polynomial.
            let mut comp = DMatrix::zeros(degree, degree);
            for i in 1..degree {
                comp[(i, i - 1)] = 1.0;
            }
            for i in 0..degree {
                comp[(i, degree - 1)] = -coeffs[i] / lead;
            }
            let magnitude = comp
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if magnitude >= 1.0 - STABILITY_MARGIN {
                return Err(FdiError::UnstableDenominator { magnitude });
            }
        }
        if coeffs.iter().sum::<f64>() == 0.0 {
            return Err(FdiError::ZeroDcDenominator);
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn dc_value(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

/// Monic `a(q) = prod (q - p_i)`. Complex poles must come in conjugate pairs.
pub fn make_denominator(poles: &[Complex64]) -> Result<DenominatorPoly> {
    let mut unmatched: Vec<Complex64> = Vec::new();
    for p in poles {
        if !(p.norm() < 1.0) {
            return Err(FdiError::UnstableDenominator {
                magnitude: p.norm(),
            });
        }
        if p.im != 0.0 {
            let tol = 1e-12 * p.norm().max(1.0);
            if let Some(pos) = unmatched.iter().position(|q| (q.conj() - p).norm() <= tol) {
                unmatched.swap_remove(pos);
            } else {
                unmatched.push(*p);
            }
        }
    }
    if let Some(p) = unmatched.first() {
        return Err(FdiError::UnpairedPole { re: p.re, im: p.im });
    }

    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for p in poles {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * p;
        }
        poly = next;
    }
    DenominatorPoly::new(poly.into_iter().map(|c| c.re).collect())
}

/// Convenience for repeated real poles, e.g. `(q + 0.95)^3`.
pub fn repeated_pole(pole: f64, multiplicity: usize) -> Result<DenominatorPoly> {
    make_denominator(&vec![Complex64::new(pole, 0.0); multiplicity])
}

/// Where the numerator `E` comes from at each step.
#[derive(Debug, Clone)]
enum NumeratorSource {
    /// Re-synthesized from the current parameter window.
    Scheduled,
    /// Fixed numerator, e.g. an LTI design applied to LPV data.
    Frozen(Arc<SynthesizedFilter>),
}

type WindowKey = Vec<u64>;

/// Streaming state of one residual generator.
#[derive(Debug, Clone)]
pub struct ResidualFilter {
    model: DaeModel,
    denominator: DenominatorPoly,
    options: SynthesisOptions,
    order: usize,
    source: NumeratorSource,
    z_history: VecDeque<DVector<f64>>,
    w_history: VecDeque<SchedulingPoint>,
    r_history: VecDeque<f64>,
    k: usize,
    cache: Option<HashMap<WindowKey, Arc<SynthesizedFilter>>>,
    last_filter: Option<Arc<SynthesizedFilter>>,
}

impl ResidualFilter {
    /// Filter of order `d_N = d_a`.
    pub fn new(model: DaeModel, denominator: DenominatorPoly, options: SynthesisOptions) -> Result<Self> {
        let order = denominator.degree();
        Self::with_order(model, denominator, options, order)
    }

    pub fn with_order(
        model: DaeModel,
        denominator: DenominatorPoly,
        options: SynthesisOptions,
        order: usize,
    ) -> Result<Self> {
        options.validate()?;
        if options.target_fault >= model.n_f() {
            return Err(FdiError::TargetFault {
                target: options.target_fault,
                n_faults: model.n_f(),
            });
        }
        let delay = denominator.degree();
        let numerator_degree = model.l().degree();
        if delay < order + numerator_degree {
            return Err(FdiError::NonCausal {
                delay,
                order,
                numerator_degree,
            });
        }
        Ok(Self {
            z_history: VecDeque::with_capacity(delay + 1),
            w_history: VecDeque::with_capacity(delay + 1),
            r_history: VecDeque::from(vec![0.0; delay]),
            model,
            denominator,
            options,
            order,
            source: NumeratorSource::Scheduled,
            k: 0,
            cache: None,
            last_filter: None,
        })
    }

    /// Runs a fixed, pre-synthesized numerator instead of re-synthesizing.
    pub fn frozen(
        model: DaeModel,
        filter: SynthesizedFilter,
        order: usize,
    ) -> Result<Self> {
        let denominator = DenominatorPoly::new(filter.denominator.clone())?;
        let expected = (order + model.l().degree() + 1) * model.n_z();
        if filter.numerator.len() != expected {
            return Err(FdiError::DimensionMismatch {
                what: "frozen numerator".into(),
                expected: (1, expected),
                got: (1, filter.numerator.len()),
            });
        }
        let mut me = Self::with_order(model, denominator, SynthesisOptions {
            target_fault: filter.target_fault,
            ..SynthesisOptions::default()
        }, order)?;
        let filter = Arc::new(filter);
        me.last_filter = Some(Arc::clone(&filter));
        me.source = NumeratorSource::Frozen(filter);
        Ok(me)
    }

    /// Reuses the synthesized numerator when a parameter window repeats
    /// exactly (bit-for-bit), so outputs are unchanged.
    pub fn with_cache(mut self, enabled: bool) -> Self {
        self.cache = enabled.then(HashMap::new);
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn delay(&self) -> usize {
        self.denominator.degree()
    }

    /// Sample index of the next call to [`step`](Self::step).
    pub fn sample(&self) -> usize {
        self.k
    }

    /// The filter used at the most recent non-warm-up step.
    pub fn last_filter(&self) -> Option<&SynthesizedFilter> {
        self.last_filter.as_deref()
    }

    pub fn reset(&mut self) {
        let delay = self.delay();
        self.z_history.clear();
        self.w_history.clear();
        self.r_history = VecDeque::from(vec![0.0; delay]);
        self.k = 0;
        if matches!(self.source, NumeratorSource::Scheduled) {
            self.last_filter = None;
        }
    }

    fn synthesize(&mut self, win: ParameterWindow) -> Result<Arc<SynthesizedFilter>> {
        let key: Option<WindowKey> = self.cache.as_ref().map(|_| {
            win.samples()
                .iter()
                .flat_map(|w| w.as_slice().iter().map(|v| v.to_bits()))
                .collect()
        });
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(hit) = cache.get(key) {
                return Ok(Arc::clone(hit));
            }
        }
        let stk = build_stacked(&self.model, &win)?;
        let row = synthesize_analytic(&stk, &self.options)?;
        let filt = Arc::new(SynthesizedFilter::assemble(row, &stk, self.denominator.coeffs())?);
        if let (Some(cache), Some(key)) = (&mut self.cache, key) {
            cache.insert(key, Arc::clone(&filt));
        }
        Ok(filt)
    }

    /// Consumes `z(k)` and `w_k`, returns `r(k)`. Outputs are 0 until `d_a`
    /// samples of history are available.
    pub fn step(&mut self, z_k: &DVector<f64>, w_k: SchedulingPoint) -> Result<f64> {
        if z_k.len() != self.model.n_z() {
            return Err(FdiError::DimensionMismatch {
                what: "measurement z(k)".into(),
                expected: (self.model.n_z(), 1),
                got: (z_k.len(), 1),
            });
        }
        self.model.bounds().check(&w_k)?;

        let delay = self.delay();
        if self.z_history.len() == delay + 1 {
            self.z_history.pop_front();
            self.w_history.pop_front();
        }
        self.z_history.push_back(z_k.clone());
        self.w_history.push_back(w_k);
        self.k += 1;

        if self.z_history.len() <= delay {
            self.push_residual(0.0);
            return Ok(0.0);
        }

        let filt = match &self.source {
            NumeratorSource::Frozen(f) => Arc::clone(f),
            NumeratorSource::Scheduled => {
                let samples = self.w_history.iter().take(self.order + 1).cloned().collect();
                let win = ParameterWindow::new(samples, delay)?;
                self.synthesize(win)?
            }
        };

        let n_z = self.model.n_z();
        let span = filt.numerator.len() / n_z;
        let mut acc = 0.0;
        for (i, z) in self.z_history.iter().take(span).enumerate() {
            acc += filt.numerator.columns(i * n_z, n_z).dot(&z.transpose());
        }
        let a = self.denominator.coeffs();
        for (h, r) in self.r_history.iter().enumerate() {
            acc -= a[h] * r;
        }
        let r_k = acc / a[delay];

        self.last_filter = Some(filt);
        self.push_residual(r_k);
        Ok(r_k)
    }

    fn push_residual(&mut self, r: f64) {
        if self.delay() > 0 {
            self.r_history.pop_front();
            self.r_history.push_back(r);
        }
    }
}

/// Runs a fresh filter of order `d_a` over whole traces.
pub fn run_batch(
    model: &DaeModel,
    denominator: &DenominatorPoly,
    options: &SynthesisOptions,
    z_trace: &[DVector<f64>],
    w_trace: &[SchedulingPoint],
) -> Result<Vec<f64>> {
    if z_trace.len() != w_trace.len() {
        return Err(FdiError::TraceLength {
            z: z_trace.len(),
            w: w_trace.len(),
        });
    }
    let mut filter = ResidualFilter::new(model.clone(), denominator.clone(), *options)?;
    z_trace
        .iter()
        .zip(w_trace)
        .map(|(z, w)| filter.step(z, w.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpv_model::{ss_to_dae, LpvStateSpace, SchedulingBox, StateSpaceMatrices};
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn binomial_expansions() {
        let a = repeated_pole(-0.95, 3).unwrap();
        let expected = [0.857375, 2.7075, 2.85, 1.0];
        for (x, y) in a.coeffs().iter().zip(expected) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
        let a = repeated_pole(-0.98, 3).unwrap();
        let expected = [0.941192, 2.8812, 2.94, 1.0];
        for (x, y) in a.coeffs().iter().zip(expected) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
        assert_eq!(repeated_pole(0.0, 1).unwrap().coeffs(), &[0.0, 1.0]);
    }

    #[test]
    fn complex_pair_expands_to_real() {
        let p = Complex64::new(0.3, 0.4);
        let a = make_denominator(&[p, p.conj()]).unwrap();
        // (q - p)(q - p*) = q² - 0.6 q + 0.25
        assert_relative_eq!(a.coeffs()[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(a.coeffs()[1], -0.6, epsilon = 1e-15);
        assert_eq!(a.coeffs()[2], 1.0);
    }

    #[test]
    fn denominator_errors() {
        assert!(matches!(
            make_denominator(&[Complex64::new(1.2, 0.0)]),
            Err(FdiError::UnstableDenominator { .. })
        ));
        assert!(matches!(
            make_denominator(&[Complex64::new(0.1, 0.2)]),
            Err(FdiError::UnpairedPole { .. })
        ));
        assert!(matches!(
            DenominatorPoly::new(vec![1.0, 0.0]),
            Err(FdiError::InvalidDenominator(_))
        ));
        // q - 1 has a root on the unit circle.
        assert!(matches!(
            DenominatorPoly::new(vec![-1.0, 1.0]),
            Err(FdiError::UnstableDenominator { .. })
        ));
    }

    /// Two-state LTI plant, one input, one disturbance, one actuator fault and
    /// two outputs; the second output sees the disturbance.
    fn lti_plant() -> LpvStateSpace {
        let mut m = StateSpaceMatrices::standard(
            dmatrix![0.9, 0.1; -0.05, 0.8],
            dmatrix![0.0; 1.0],
            dmatrix![0.3; 0.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, 0.0; 0.0, 1.0],
        );
        m.d_d = dmatrix![0.0; 0.5];
        LpvStateSpace::constant(m, SchedulingBox::unbounded(1))
    }

    fn simulate_plant(
        ss: &LpvStateSpace,
        n: usize,
        fault: impl Fn(usize) -> f64,
    ) -> (Vec<DVector<f64>>, Vec<SchedulingPoint>) {
        let w = SchedulingPoint::scalar(0.0);
        let m = ss.eval(&w).unwrap();
        let mut x = DVector::from_vec(vec![0.1, -0.2]);
        let mut zs = Vec::new();
        for k in 0..n {
            let u = DVector::from_element(1, (0.21 * k as f64).sin());
            let d = DVector::from_element(1, (0.37 * k as f64).cos() + 0.3 * (1.9 * k as f64).sin());
            let f = DVector::from_element(1, fault(k));
            let y = &m.c * &x + &m.d_d * &d;
            zs.push(DVector::from_iterator(3, y.iter().chain(u.iter()).copied()));
            x = &m.a * &x + &m.b_u * &u + &m.b_d * &d + &m.b_f * &f;
        }
        (zs, vec![w; n])
    }

    #[test]
    fn zero_input_gives_zero_residual() {
        let dae = ss_to_dae(&lti_plant()).unwrap();
        let mut filt =
            ResidualFilter::new(dae, repeated_pole(-0.5, 2).unwrap(), SynthesisOptions::default()).unwrap();
        for _ in 0..10 {
            assert_eq!(filt.step(&DVector::zeros(3), 0.0.into()).unwrap(), 0.0);
        }
    }

    #[test]
    fn lti_healthy_residual_vanishes_and_fault_is_tracked() {
        let ss = lti_plant();
        let dae = ss_to_dae(&ss).unwrap();
        let a = repeated_pole(0.5, 2).unwrap();
        let (zs, ws) = simulate_plant(&ss, 200, |_| 0.0);
        let r = run_batch(&dae, &a, &SynthesisOptions::with_gamma(1e10), &zs, &ws).unwrap();
        let scale = zs.iter().map(|z| z.amax()).fold(0.0, f64::max);
        let worst = r[2..].iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-8 * scale, "{worst}");

        let (zs, ws) = simulate_plant(&ss, 200, |k| if k >= 50 { 0.7 } else { 0.0 });
        let r = run_batch(&dae, &a, &SynthesisOptions::with_gamma(1e10), &zs, &ws).unwrap();
        assert_relative_eq!(r[199], 0.7, max_relative = 1e-6);
    }

    #[test]
    fn batch_equals_repeated_steps_and_handles_empty() {
        let ss = lti_plant();
        let dae = ss_to_dae(&ss).unwrap();
        let a = repeated_pole(-0.3, 2).unwrap();
        let opt = SynthesisOptions::default();
        assert!(run_batch(&dae, &a, &opt, &[], &[]).unwrap().is_empty());
        let (zs, ws) = simulate_plant(&ss, 30, |k| 0.01 * k as f64);
        let batch = run_batch(&dae, &a, &opt, &zs, &ws).unwrap();
        let mut filt = ResidualFilter::new(dae.clone(), a.clone(), opt).unwrap();
        let online: Vec<f64> = zs.iter().zip(&ws).map(|(z, w)| filt.step(z, w.clone()).unwrap()).collect();
        assert_eq!(batch, online);
        assert_eq!(
            run_batch(&dae, &a, &opt, &zs[..3], &ws[..2]),
            Err(FdiError::TraceLength { z: 3, w: 2 })
        );
    }

    #[test]
    fn causality_and_dimension_checks() {
        let dae = ss_to_dae(&lti_plant()).unwrap();
        let a = repeated_pole(0.2, 2).unwrap();
        assert_eq!(
            ResidualFilter::with_order(dae.clone(), a.clone(), SynthesisOptions::default(), 3).unwrap_err(),
            FdiError::NonCausal {
                delay: 2,
                order: 3,
                numerator_degree: 0
            }
        );
        let mut filt = ResidualFilter::new(dae, a, SynthesisOptions::default()).unwrap();
        assert!(matches!(
            filt.step(&DVector::zeros(2), 0.0.into()),
            Err(FdiError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cache_is_output_neutral() {
        let ss = lti_plant();
        let dae = ss_to_dae(&ss).unwrap();
        let a = repeated_pole(-0.6, 2).unwrap();
        let (zs, ws) = simulate_plant(&ss, 40, |k| if k > 10 { 1.0 } else { 0.0 });
        let mut plain = ResidualFilter::new(dae.clone(), a.clone(), SynthesisOptions::default()).unwrap();
        let mut cached = ResidualFilter::new(dae, a, SynthesisOptions::default())
            .unwrap()
            .with_cache(true);
        for (z, w) in zs.iter().zip(&ws) {
            let r0 = plain.step(z, w.clone()).unwrap();
            let r1 = cached.step(z, w.clone()).unwrap();
            assert_eq!(r0.to_bits(), r1.to_bits());
        }
    }

    #[test]
    fn reset_restarts_warm_up() {
        let ss = lti_plant();
        let dae = ss_to_dae(&ss).unwrap();
        let (zs, ws) = simulate_plant(&ss, 12, |_| 0.5);
        let mut filt =
            ResidualFilter::new(dae, repeated_pole(-0.4, 2).unwrap(), SynthesisOptions::default()).unwrap();
        let first: Vec<f64> = zs.iter().zip(&ws).map(|(z, w)| filt.step(z, w.clone()).unwrap()).collect();
        filt.reset();
        assert_eq!(filt.sample(), 0);
        let second: Vec<f64> = zs.iter().zip(&ws).map(|(z, w)| filt.step(z, w.clone()).unwrap()).collect();
        assert_eq!(first, second);
        assert_eq!(&first[..2], &[0.0, 0.0]);
    }
}
