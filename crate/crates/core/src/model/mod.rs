//! Right-hand sides of the Lorenz 96 family and the calibration that
//! produces the rescaling constants.
//!
//! State layout used throughout: slow variables `x` are a ring of length
//! `n_x`; fast variables are stored row-major as `(i, k)` with `k` inner,
//! so the boundary rule `y[i][J] = y[i+1][0]` makes the fast block a single
//! ring of length `n_x * j`. The full state is `[x..., y...]`.

mod calibrate;
mod lorenz;
mod params;

pub use calibrate::{calibrate, CalibrationPlan, DEGENERACY_THRESHOLD};
pub use lorenz::{
    block_sum, fast_limiting_rhs, l96_rhs, l96_rhs_into, lift, lifting_matrix, project_fast_operator,
    reduced_rhs, rescaled_l96_rhs, rescaled_l96_rhs_into, two_scale_rhs, FastLimitingSystem,
    Orientation, ReducedSystem, RingCoefficients, TwoScaleSystem, UncoupledSystem,
};
pub use params::{FastState, FullState, ModelParams, RescaleConstants, SlowState};
