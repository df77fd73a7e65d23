//! Real-time fault estimation for discrete-time linear parameter-varying
//! systems.
//!
//! Models are polynomial DAEs `H(w,q)[x] + L(w,q)[z] + F(w,q)[f] = 0` with a
//! measured scheduling parameter `w`. At every sample the model is evaluated
//! over a short parameter window ([`stacking`]), a decoupling filter row is
//! synthesized in closed form ([`synthesis`]), normalized for unit
//! steady-state fault gain, and applied recursively to the measurements
//! ([`runtime`]). The [`vehicle`] module contains the lateral-dynamics case
//! study used by the command-line tool.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expm;
pub mod lpv_model;
pub mod runtime;
pub mod stacking;
pub mod synthesis;
pub mod vehicle;

pub use error::{FdiError, Result};
pub use lpv_model::{
    ss_to_dae, DaeModel, LpvStateSpace, ParamPolyMatrix, SchedulingBox, SchedulingPoint,
    StateSpaceDims, StateSpaceMatrices,
};
pub use runtime::{make_denominator, repeated_pole, run_batch, DenominatorPoly, ResidualFilter};
pub use stacking::{build_stacked, build_stacked_checked, row_width, ParameterWindow, StackShape, StackedSystem};
pub use synthesis::{
    build_numerator, dc_fault_gain, decoupling_ratio, isolability_check, synthesize_analytic,
    synthesize_exact, Exactness, FilterRow, Isolability, SynthesisOptions, SynthesizedFilter,
};

pub use nalgebra;
