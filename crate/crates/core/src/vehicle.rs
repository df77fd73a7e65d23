//! Lateral vehicle dynamics case study.
//!
//! A linear bicycle model in lane-error coordinates, scheduled on the
//! longitudinal velocity `v_x`, discretized exactly at every sample and
//! driven in closed loop by a PD lane-keeping law. The state is
//! `X = (x_1, x_2, y_e, ψ_e)` where `x_1`, `x_2` carry the lateral velocity
//! and yaw rate (sign-flipped with respect to the lane frame); the measured
//! outputs are `(x_2, y_e, ψ_e)`, i.e. yaw rate, lateral deviation and
//! heading deviation. Disturbances are `d = (sin φ, κ)`: road banking and
//! curvature. The fault is an additive offset on the steering input.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{FdiError, Result};
use crate::expm::exact_discretize;
use crate::lpv_model::{
    ss_to_dae, DaeModel, LpvStateSpace, SchedulingBox, SchedulingPoint, StateSpaceDims,
    StateSpaceMatrices,
};
use crate::runtime::{make_denominator, DenominatorPoly, ResidualFilter};
use crate::stacking::{build_stacked, ParameterWindow};
use crate::synthesis::{isolability_check, synthesize_analytic, SynthesisOptions, SynthesizedFilter};

pub const N_STATES: usize = 4;
pub const N_OUTPUTS: usize = 3;
pub const N_DISTURBANCES: usize = 2;

/// Physical parameters of the bicycle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicycleParams {
    /// Front cornering stiffness `C_f` [N/rad].
    pub cornering_front: f64,
    /// Rear cornering stiffness `C_r` [N/rad].
    pub cornering_rear: f64,
    /// Front axle to centre of gravity `l_f` [m].
    pub lf: f64,
    /// Rear axle to centre of gravity `l_r` [m].
    pub lr: f64,
    /// Vehicle mass [kg].
    pub mass: f64,
    /// Yaw moment of inertia `I_z` [kg m²].
    pub inertia: f64,
    pub gravity: f64,
    /// Sampling time `h` [s].
    pub sample_time: f64,
}

impl Default for BicycleParams {
    fn default() -> Self {
        Self {
            cornering_front: 1.50e5,
            cornering_rear: 1.10e5,
            lf: 1.3,
            lr: 1.7,
            mass: 1500.0,
            inertia: 2600.0,
            gravity: 9.81,
            sample_time: 0.01,
        }
    }
}

impl BicycleParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.cornering_front,
            self.cornering_rear,
            self.lf,
            self.lr,
            self.mass,
            self.inertia,
            self.gravity,
            self.sample_time,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(FdiError::InvalidOption(
                "bicycle parameters must be strictly positive".into(),
            ))
        }
    }
}

/// Sign convention for the lateral-dynamics block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixSigns {
    /// Stable lateral block with the centripetal `−v_x` coupling.
    #[default]
    Standard,
    /// Positive-diagonal block exactly as commonly printed; open-loop unstable
    /// lateral modes.
    AsPrinted,
}

/// Continuous-time matrices at one velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousMatrices {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_f: DMatrix<f64>,
    pub b_d: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

pub fn continuous_matrices(p: &BicycleParams, v_x: f64, signs: MatrixSigns) -> Result<ContinuousMatrices> {
    if !(v_x > 0.0 && v_x.is_finite()) {
        return Err(FdiError::InvalidOption(format!(
            "longitudinal velocity must be positive, got {v_x}"
        )));
    }
    let (cf, cr, lf, lr, m, iz) = (
        p.cornering_front,
        p.cornering_rear,
        p.lf,
        p.lr,
        p.mass,
        p.inertia,
    );
    let mut a = DMatrix::zeros(N_STATES, N_STATES);
    a[(0, 0)] = (cf + cr) / (v_x * m);
    a[(0, 1)] = (lf * cf - lr * cr) / (v_x * m);
    a[(1, 0)] = (lf * cf - lr * cr) / (v_x * iz);
    a[(1, 1)] = (lf * lf * cf + lr * lr * cr) / (v_x * iz);
    if signs == MatrixSigns::Standard {
        a.view_mut((0, 0), (2, 2)).neg_mut();
        a[(0, 1)] -= v_x;
    }
    a[(2, 0)] = -1.0;
    a[(2, 3)] = v_x;
    a[(3, 1)] = -1.0;

    let b_u = DMatrix::from_column_slice(N_STATES, 1, &[-cf / m, -lf * cf / iz, 0.0, 0.0]);
    let mut b_d = DMatrix::zeros(N_STATES, N_DISTURBANCES);
    b_d[(0, 0)] = p.gravity;
    b_d[(3, 1)] = v_x;
    let mut c = DMatrix::zeros(N_OUTPUTS, N_STATES);
    c.view_mut((0, 1), (3, 3)).fill_with_identity();
    Ok(ContinuousMatrices {
        b_f: b_u.clone(),
        a,
        b_u,
        b_d,
        c,
    })
}

/// Discrete-time matrices at one velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMatrices {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_f: DMatrix<f64>,
    pub b_d: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

/// The scheduled bicycle plant.
#[derive(Debug, Clone, PartialEq)]
pub struct BicycleModel {
    pub params: BicycleParams,
    pub signs: MatrixSigns,
    /// Multiplies the fault input column; 0 removes the fault from the model.
    pub fault_scale: f64,
    /// Admissible velocity range `[min, max]` [m/s].
    pub velocity_bounds: (f64, f64),
}

impl Default for BicycleModel {
    fn default() -> Self {
        Self {
            params: BicycleParams::default(),
            signs: MatrixSigns::Standard,
            fault_scale: 1.0,
            velocity_bounds: (5.0, 40.0),
        }
    }
}

impl BicycleModel {
    pub fn continuous(&self, v_x: f64) -> Result<ContinuousMatrices> {
        let mut m = continuous_matrices(&self.params, v_x, self.signs)?;
        m.b_f *= self.fault_scale;
        Ok(m)
    }

    /// Exact discretization at `v_x`; all input matrices from one exponential.
    pub fn discrete(&self, v_x: f64) -> Result<DiscreteMatrices> {
        let ct = self.continuous(v_x)?;
        let mut b = DMatrix::zeros(N_STATES, 2 + N_DISTURBANCES);
        b.columns_mut(0, 1).copy_from(&ct.b_u);
        b.columns_mut(1, 1).copy_from(&ct.b_f);
        b.columns_mut(2, N_DISTURBANCES).copy_from(&ct.b_d);
        let (a, bd) = exact_discretize(&ct.a, &b, self.params.sample_time);
        Ok(DiscreteMatrices {
            a,
            b_u: bd.columns(0, 1).into_owned(),
            b_f: bd.columns(1, 1).into_owned(),
            b_d: bd.columns(2, N_DISTURBANCES).into_owned(),
            c: ct.c,
        })
    }

    pub fn bounds(&self) -> Result<SchedulingBox> {
        SchedulingBox::interval(self.velocity_bounds.0, self.velocity_bounds.1)
    }

    pub fn state_space(&self) -> Result<LpvStateSpace> {
        self.params.validate()?;
        let (lo, hi) = self.velocity_bounds;
        if !(lo > 0.0) {
            return Err(FdiError::InvalidOption(
                "velocity bounds must be positive".into(),
            ));
        }
        let bounds = SchedulingBox::interval(lo, hi)?;
        let dims = StateSpaceDims {
            n_states: N_STATES,
            n_inputs: 1,
            n_disturbances: N_DISTURBANCES,
            n_faults: 1,
            n_outputs: N_OUTPUTS,
        };
        let model = self.clone();
        Ok(LpvStateSpace::new(dims, bounds, move |w| {
            let d = model
                .discrete(w.first())
                .expect("velocity inside the positive scheduling box");
            StateSpaceMatrices::standard(d.a, d.b_u, d.b_d, d.b_f, d.c)
        }))
    }

    pub fn dae(&self) -> Result<DaeModel> {
        ss_to_dae(&self.state_space()?)
    }
}

/// `offset + amplitude · sin(ω t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub offset: f64,
    pub amplitude: f64,
    /// Angular frequency ω [rad/s].
    pub omega: f64,
}

impl Sinusoid {
    pub const fn new(offset: f64, amplitude: f64, omega: f64) -> Self {
        Self {
            offset,
            amplitude,
            omega,
        }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn at(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (self.omega * t).sin()
    }
}

/// PD lane-keeping gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    /// Lateral deviation gain [rad/m].
    pub kp: f64,
    /// Lateral deviation rate gain [rad s/m].
    pub kd: f64,
    /// Heading deviation gain [rad/rad].
    pub k_heading: f64,
    /// Steering saturation [rad].
    pub saturation: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp: 0.05,
            kd: 0.01,
            k_heading: 0.5,
            saturation: 0.5,
        }
    }
}

/// `u = −(k_p y_e + k_d Δy_e / h + k_ψ ψ_e)`, saturated. Without a previous
/// sample the derivative term is zero.
pub fn pd_controller(y_e: f64, psi_e: f64, previous_y_e: Option<f64>, gains: &PdGains, h: f64) -> f64 {
    let rate = previous_y_e.map_or(0.0, |prev| (y_e - prev) / h);
    let u = -(gains.kp * y_e + gains.kd * rate + gains.k_heading * psi_e);
    u.clamp(-gains.saturation, gains.saturation)
}

/// Constant fault switched on at sample `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultSpec {
    pub magnitude: f64,
    pub start: usize,
}

impl FaultSpec {
    pub fn at(&self, k: usize) -> f64 {
        if k >= self.start {
            self.magnitude
        } else {
            0.0
        }
    }
}

/// Inputs of one simulated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_samples: usize,
    pub velocity: Sinusoid,
    /// Road banking angle φ(t) [rad].
    pub banking: Sinusoid,
    /// Road curvature κ(t) [1/m].
    pub curvature: Sinusoid,
    /// Standard deviations of white noise added to `(sin φ, κ)`.
    pub disturbance_noise_std: [f64; 2],
    pub fault: FaultSpec,
    /// Sensor noise standard deviations for yaw rate, `y_e`, `ψ_e`.
    pub noise_std: [f64; 3],
    pub noise_enabled: bool,
    pub seed: u64,
    /// Real poles of the denominator `a(q)`.
    pub poles: Vec<f64>,
    /// Filter order `d_N`; defaults to `deg a`.
    pub order: Option<usize>,
    pub lti_baseline_velocity: f64,
    pub gains: PdGains,
    pub initial_state: [f64; N_STATES],
    pub cache: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_samples: 500,
            velocity: Sinusoid::new(19.0, 5.0, 0.1 * PI),
            banking: Sinusoid::new(0.0, 0.03, 0.2 * PI),
            curvature: Sinusoid::new(0.0, 0.002, 0.05 * PI),
            disturbance_noise_std: [0.0, 0.0],
            fault: FaultSpec {
                magnitude: 0.1 * PI / 180.0,
                start: 150,
            },
            noise_std: [8e-4, 5e-2, 3e-3],
            noise_enabled: false,
            seed: 0,
            poles: vec![-0.95; 3],
            order: None,
            lti_baseline_velocity: 19.0,
            gains: PdGains::default(),
            initial_state: [0.0; N_STATES],
            cache: false,
        }
    }
}

impl ScenarioConfig {
    pub fn denominator(&self) -> Result<DenominatorPoly> {
        let poles: Vec<_> = self
            .poles
            .iter()
            .map(|&p| num_complex::Complex64::new(p, 0.0))
            .collect();
        make_denominator(&poles)
    }

    pub fn order(&self) -> usize {
        self.order.unwrap_or(self.poles.len())
    }

    pub fn validate(&self) -> Result<()> {
        let stds = self.noise_std.iter().chain(&self.disturbance_noise_std);
        if stds.into_iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(FdiError::InvalidOption(
                "noise standard deviations must be non-negative".into(),
            ));
        }
        if self.poles.is_empty() {
            return Err(FdiError::InvalidOption("at least one pole is required".into()));
        }
        Ok(())
    }

    /// `count` parameter windows of `order + 1` consecutive samples, spread
    /// over one full period of the velocity schedule (or the first `count`
    /// samples for a constant schedule).
    pub fn sample_windows(&self, h: f64, order: usize, count: usize) -> Result<Vec<ParameterWindow>> {
        let period = if self.velocity.omega != 0.0 && self.velocity.amplitude != 0.0 {
            2.0 * PI / self.velocity.omega.abs()
        } else {
            count as f64 * h
        };
        let delay = self.poles.len();
        (0..count)
            .map(|i| {
                let t0 = period * i as f64 / count as f64;
                let samples = (0..=order)
                    .map(|j| SchedulingPoint::scalar(self.velocity.at(t0 + j as f64 * h)))
                    .collect();
                ParameterWindow::new(samples, delay)
            })
            .collect()
    }
}

/// One simulated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub k: usize,
    pub t: f64,
    pub v_x: f64,
    pub u: f64,
    /// Measured outputs (yaw rate, lateral deviation, heading deviation).
    pub y: [f64; N_OUTPUTS],
    /// Banking angle φ and curvature κ.
    pub phi: f64,
    pub kappa: f64,
    /// Disturbance vector `(sin φ, κ)` as fed to the plant.
    pub d: [f64; N_DISTURBANCES],
    pub state: [f64; N_STATES],
    pub f_true: f64,
    pub r_lpv: f64,
    pub r_lti: f64,
    /// Wall-clock time of the LPV filter step (synthesis and evaluation).
    pub synth_time_s: f64,
    /// Normalized steady-state gain of the filter used at this step.
    pub lpv_dc_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub records: Vec<SimRecord>,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn r_lpv(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.r_lpv).collect()
    }

    pub fn r_lti(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.r_lti).collect()
    }

    pub fn mean_synth_time(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.synth_time_s).sum::<f64>() / self.records.len() as f64
    }

    /// Largest measured-output magnitude over the run.
    pub fn max_output(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| r.y.iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }
}

/// LTI design at a fixed velocity: one synthesis over a constant window.
pub fn lti_baseline_filter(
    model: &DaeModel,
    denominator: &DenominatorPoly,
    options: &SynthesisOptions,
    order: usize,
    v_fixed: f64,
) -> Result<SynthesizedFilter> {
    let win = ParameterWindow::constant(SchedulingPoint::scalar(v_fixed), order, denominator.degree());
    let stk = build_stacked(model, &win)?;
    if !isolability_check(&stk, options)?.isolable {
        return Err(FdiError::NotIsolable {
            fault: options.target_fault,
        });
    }
    let row = synthesize_analytic(&stk, options)?;
    SynthesizedFilter::assemble(row, &stk, denominator.coeffs())
}

const DIVERGENCE_LIMIT: f64 = 1e6;

/// Closed-loop simulation with the LPV filter and the fixed-velocity LTI
/// baseline running side by side on the same measurements.
pub fn simulate(cfg: &ScenarioConfig, plant: &BicycleModel, options: &SynthesisOptions) -> Result<SimLog> {
    cfg.validate()?;
    let h = plant.params.sample_time;
    let dae = plant.dae()?;
    let a = cfg.denominator()?;
    let order = cfg.order();

    let mut lpv = ResidualFilter::with_order(dae.clone(), a.clone(), *options, order)?.with_cache(cfg.cache);
    let baseline = lti_baseline_filter(&dae, &a, options, order, cfg.lti_baseline_velocity)?;
    let mut lti = ResidualFilter::frozen(dae, baseline, order)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sensor_noise: Vec<Normal<f64>> = cfg
        .noise_std
        .iter()
        .map(|&s| Normal::new(0.0, s).expect("validated standard deviation"))
        .collect();
    let dist_noise: Vec<Normal<f64>> = cfg
        .disturbance_noise_std
        .iter()
        .map(|&s| Normal::new(0.0, s).expect("validated standard deviation"))
        .collect();

    let mut x = DVector::from_column_slice(&cfg.initial_state);
    let mut prev_ye = None;
    let mut records = Vec::with_capacity(cfg.n_samples);

    for k in 0..cfg.n_samples {
        let t = k as f64 * h;
        let v_x = cfg.velocity.at(t);
        let w = SchedulingPoint::scalar(v_x);
        let m = plant.discrete(v_x)?;

        let phi = cfg.banking.at(t);
        let kappa = cfg.curvature.at(t);
        let mut d = [phi.sin(), kappa];
        if cfg.disturbance_noise_std.iter().any(|s| *s > 0.0) {
            for (di, n) in d.iter_mut().zip(&dist_noise) {
                *di += n.sample(&mut rng);
            }
        }

        let clean = &m.c * &x;
        let mut y = [clean[0], clean[1], clean[2]];
        if cfg.noise_enabled {
            for (yi, n) in y.iter_mut().zip(&sensor_noise) {
                *yi += n.sample(&mut rng);
            }
        }

        let u = pd_controller(y[1], y[2], prev_ye, &cfg.gains, h);
        prev_ye = Some(y[1]);
        let f = cfg.fault.at(k);
        let z = DVector::from_column_slice(&[y[0], y[1], y[2], u]);

        let started = Instant::now();
        let r_lpv = lpv.step(&z, w.clone())?;
        let synth_time_s = started.elapsed().as_secs_f64();
        let r_lti = lti.step(&z, w)?;
        let lpv_dc_gain = (k >= a.degree())
            .then(|| lpv.last_filter().map(|f| f.normalized_dc_gain()))
            .flatten();

        records.push(SimRecord {
            k,
            t,
            v_x,
            u,
            y,
            phi,
            kappa,
            d,
            state: [x[0], x[1], x[2], x[3]],
            f_true: f,
            r_lpv,
            r_lti,
            synth_time_s,
            lpv_dc_gain,
        });

        let dv = DVector::from_column_slice(&d);
        x = &m.a * &x + &m.b_u * u + &m.b_f * f + &m.b_d * &dv;
        let norm = x.amax();
        if !(norm <= DIVERGENCE_LIMIT) {
            return Err(FdiError::Diverged { k, norm });
        }
    }
    Ok(SimLog { records })
}
