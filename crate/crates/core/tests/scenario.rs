mod common;

use common::max_abs;
use lpv_fdi::nalgebra::DVector;
use lpv_fdi::vehicle::{simulate, BicycleModel, FaultSpec, ScenarioConfig, SimLog, Sinusoid};
use lpv_fdi::{
    build_stacked, decoupling_ratio, run_batch, synthesize_analytic, SchedulingPoint, SynthesisOptions,
};

fn run(cfg: &ScenarioConfig) -> SimLog {
    simulate(cfg, &BicycleModel::default(), &SynthesisOptions::default()).unwrap()
}

fn no_fault() -> FaultSpec {
    FaultSpec {
        magnitude: 0.0,
        start: 0,
    }
}

fn strip_timing(log: &SimLog) -> SimLog {
    let mut out = log.clone();
    for r in &mut out.records {
        r.synth_time_s = 0.0;
    }
    out
}

#[test]
fn same_seed_reproduces_the_log() {
    let cfg = ScenarioConfig {
        noise_enabled: true,
        seed: 42,
        n_samples: 200,
        ..ScenarioConfig::default()
    };
    let first = run(&cfg);
    assert_eq!(strip_timing(&first), strip_timing(&run(&cfg)));
    let other = run(&ScenarioConfig { seed: 43, ..cfg });
    assert_ne!(other.r_lpv(), first.r_lpv());
}

#[test]
fn fault_response_is_linear() {
    let base = ScenarioConfig {
        n_samples: 300,
        ..ScenarioConfig::default()
    };
    let r0 = run(&ScenarioConfig { fault: no_fault(), ..base.clone() }).r_lpv();
    let r1 = run(&base).r_lpv();
    let c = 1e-4;
    let rc = run(&ScenarioConfig {
        fault: FaultSpec {
            magnitude: c * base.fault.magnitude,
            ..base.fault
        },
        ..base.clone()
    })
    .r_lpv();
    let scale = max_abs(r1.iter().copied());
    for k in 0..r0.len() {
        let lhs = rc[k] - r0[k];
        let rhs = c * (r1[k] - r0[k]);
        assert!((lhs - rhs).abs() <= 1e-12 * scale, "k = {k}: {lhs} vs {rhs}");
    }
}

#[test]
fn reduced_fault_is_estimated_with_same_relative_accuracy() {
    let quiet = ScenarioConfig {
        banking: Sinusoid::zero(),
        curvature: Sinusoid::zero(),
        fault: FaultSpec {
            magnitude: 1e-4 * 0.1 * std::f64::consts::PI / 180.0,
            start: 150,
        },
        ..ScenarioConfig::default()
    };
    let log = run(&quiet);
    let f = quiet.fault.magnitude;
    for r in &log.records[450..] {
        assert!((r.r_lpv - f).abs() <= 0.01 * f, "k = {}: {}", r.k, r.r_lpv);
    }
}

#[test]
fn noise_enters_linearly() {
    let base = ScenarioConfig {
        n_samples: 200,
        seed: 9,
        ..ScenarioConfig::default()
    };
    let clean = run(&base).r_lpv();
    let noisy = run(&ScenarioConfig { noise_enabled: true, ..base.clone() }).r_lpv();
    let mut scaled = base.clone();
    scaled.noise_enabled = true;
    for s in &mut scaled.noise_std {
        *s *= 0.5;
    }
    let half = run(&scaled).r_lpv();
    let scale = max_abs(noisy.iter().copied());
    for k in 0..clean.len() {
        let lhs = half[k] - clean[k];
        let rhs = 0.5 * (noisy[k] - clean[k]);
        assert!((lhs - rhs).abs() <= 1e-9 * scale, "k = {k}");
    }
}

#[test]
fn residual_is_causal() {
    let log = run(&ScenarioConfig {
        n_samples: 120,
        ..ScenarioConfig::default()
    });
    let dae = BicycleModel::default().dae().unwrap();
    let a = ScenarioConfig::default().denominator().unwrap();
    let z: Vec<DVector<f64>> = log
        .records
        .iter()
        .map(|r| DVector::from_vec(vec![r.y[0], r.y[1], r.y[2], r.u]))
        .collect();
    let w: Vec<SchedulingPoint> = log.records.iter().map(|r| SchedulingPoint::scalar(r.v_x)).collect();
    let opt = SynthesisOptions::default();
    let reference = run_batch(&dae, &a, &opt, &z, &w).unwrap();
    assert_eq!(reference, log.r_lpv());

    let cut = 70;
    let mut z2 = z.clone();
    let mut w2 = w.clone();
    for k in cut..z.len() {
        z2[k] *= -3.0;
        w2[k] = SchedulingPoint::scalar(30.0);
    }
    let perturbed = run_batch(&dae, &a, &opt, &z2, &w2).unwrap();
    assert_eq!(reference[..cut], perturbed[..cut]);
    assert_ne!(reference[cut], perturbed[cut]);
}

#[test]
fn frozen_baseline_equals_lpv_at_constant_velocity() {
    let cfg = ScenarioConfig {
        velocity: Sinusoid::new(19.0, 0.0, 0.0),
        n_samples: 200,
        ..ScenarioConfig::default()
    };
    let log = run(&cfg);
    assert_eq!(log.r_lpv(), log.r_lti());
}

#[test]
fn baseline_leaks_on_time_varying_healthy_data() {
    let log = run(&ScenarioConfig {
        fault: no_fault(),
        ..ScenarioConfig::default()
    });
    let lti = max_abs(log.r_lti().into_iter().skip(3));
    let lpv = max_abs(log.r_lpv().into_iter().skip(3));
    assert!(lti > 1e3 * lpv, "lti {lti}, lpv {lpv}");
}

#[test]
fn cache_does_not_change_residuals() {
    let cfg = ScenarioConfig {
        velocity: Sinusoid::new(19.0, 0.0, 0.0),
        n_samples: 150,
        ..ScenarioConfig::default()
    };
    let plain = run(&cfg);
    let cached = run(&ScenarioConfig { cache: true, ..cfg });
    assert_eq!(plain.r_lpv(), cached.r_lpv());
}

#[test]
fn decoupling_improves_with_gamma() {
    let dae = BicycleModel::default().dae().unwrap();
    let windows = ScenarioConfig::default().sample_windows(0.01, 3, 5).unwrap();
    for win in &windows {
        let stk = build_stacked(&dae, win).unwrap();
        let mut last = f64::INFINITY;
        for e in 2..=10 {
            let row = synthesize_analytic(&stk, &SynthesisOptions::with_gamma(10f64.powi(e))).unwrap();
            let ratio = decoupling_ratio(&row.coeffs, &stk);
            assert!(ratio <= 2.0 * last, "γ = 1e{e}: {ratio} after {last}");
            last = ratio;
        }
    }
}

#[test]
fn closed_loop_keeps_lane() {
    for v in [14.0, 19.0, 24.0] {
        let cfg = ScenarioConfig {
            velocity: Sinusoid::new(v, 0.0, 0.0),
            initial_state: [0.0, 0.0, 0.3, 0.0],
            ..ScenarioConfig::default()
        };
        let log = run(&cfg);
        let peak = max_abs(log.records.iter().map(|r| r.y[1]));
        let tail = max_abs(log.records[400..].iter().map(|r| r.y[1]));
        assert!(peak < 0.5, "v = {v}: peak {peak}");
        assert!(tail < 0.3, "v = {v}: tail {tail}");
    }
}
