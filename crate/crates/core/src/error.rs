use thiserror::Error;

/// Errors raised while building models, synthesizing filters or running them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdiError {
    #[error("coefficient index {index} exceeds polynomial degree {degree}")]
    CoefficientIndex { index: usize, degree: usize },

    #[error("scheduling point {point:?} lies outside the declared box (component {component})")]
    OutOfBounds { point: Vec<f64>, component: usize },

    #[error("scheduling point has dimension {got}, expected {expected}")]
    SchedulingDimension { expected: usize, got: usize },

    #[error("dimension mismatch in {what}: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        what: String,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("parameter window holds {got} samples, expected {expected}")]
    WindowLength { expected: usize, got: usize },

    #[error("filter is not causal: delay {delay} < order {order} + numerator degree {numerator_degree}")]
    NonCausal {
        delay: usize,
        order: usize,
        numerator_degree: usize,
    },

    #[error("fault {fault} is not isolable: no decoupled row is sensitive to it")]
    NotIsolable { fault: usize },

    #[error("target fault {target} out of range (model has {n_faults} fault channels)")]
    TargetFault { target: usize, n_faults: usize },

    #[error("denominator has a root at q = 1 (coefficient sum is zero)")]
    ZeroDcDenominator,

    #[error("unstable denominator: root with magnitude {magnitude}")]
    UnstableDenominator { magnitude: f64 },

    #[error("complex pole {re}{im:+}i has no conjugate partner")]
    UnpairedPole { re: f64, im: f64 },

    #[error("invalid denominator: {0}")]
    InvalidDenominator(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("trace lengths differ: {z} measurements vs {w} scheduling points")]
    TraceLength { z: usize, w: usize },

    #[error("internal numerical failure: {0}")]
    Numerical(String),

    #[error("simulation diverged at sample {k}: state norm {norm:e}")]
    Diverged { k: usize, norm: f64 },
}

pub type Result<T> = std::result::Result<T, FdiError>;
