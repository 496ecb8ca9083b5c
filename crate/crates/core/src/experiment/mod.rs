//! Regime definitions, the full / reduced / zero-order comparison and its
//! persisted results.

mod output;
mod pipeline;
mod regime;
mod suite;

pub use output::{read_curve_csv, write_curve_csv, CurveFile, CurveKind};
pub use pipeline::{
    build_regime_closure, calibrate_regime, estimate_x_star, fast_closure, load_summary, persist, reduced_series,
    run_regime, Diagnostics, ErrorRow, Errors, RegimeResult, ResponseEigenvalues, Systems, Timings,
};
pub use regime::{
    CalibrationSettings, ModelSpec, RegimeSpec, RescalePair, Stage, StatsConfig, StepPlan, SuiteConfig, SystemPlans,
    XStarMode,
};
pub use suite::{load_summaries, render_tables, run_suite, SuiteEntry, SuiteSummary};
