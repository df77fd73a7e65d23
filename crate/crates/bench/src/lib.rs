//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;

use lpv_fdi::nalgebra::DVector;
use lpv_fdi::{ParameterWindow, SchedulingPoint};

pub const SAMPLE_TIME: f64 = 0.01;

/// Velocity schedule `19 + 5 sin(0.1 π t)`.
pub fn velocity(k: usize) -> f64 {
    19.0 + 5.0 * (0.1 * PI * k as f64 * SAMPLE_TIME).sin()
}

/// Order-3 window starting at sample `k`.
pub fn scheduled_window(k: usize) -> ParameterWindow {
    let samples = (k..k + 4).map(|j| SchedulingPoint::scalar(velocity(j))).collect();
    ParameterWindow::new(samples, 3).expect("non-empty window")
}

/// Synthetic measurement and scheduling point at sample `k`.
pub fn measurement(k: usize) -> (DVector<f64>, SchedulingPoint) {
    let t = k as f64 * SAMPLE_TIME;
    let z = DVector::from_vec(vec![0.01 * t.sin(), 0.1 * (0.5 * t).cos(), 0.01 * t.cos(), 0.02 * (2.0 * t).sin()]);
    (z, SchedulingPoint::scalar(velocity(k % 100_000)))
}
