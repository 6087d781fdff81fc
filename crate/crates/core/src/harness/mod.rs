//! Seeded experiment batteries, aggregation, phase-transition grids and the
//! noise-folding check.
//!
//! Every trial derives its own seed from `(seed_base, m, k, trial)`, so any
//! cell can be rerun in isolation and results do not depend on scheduling.

mod config;
mod folding;
mod phase;
mod stats;
mod trial;

pub use config::{Ensemble, IrwOptions, Method, MethodOptions, SlpOptions, TrialConfig};
pub use folding::noise_folding_check;
pub use phase::{marching_squares, phase_transition, Contour, PhaseGrid, CONTOUR_LEVELS};
pub use stats::{
    fmt_sig, massive_stats, overrun_fraction, run_battery, write_aggregate, AggregateRow, AGGREGATE_HEADER,
};
pub use trial::{
    build_instance, child_seed, read_rows, run_cell, run_trial, slp_params, write_rows, write_timings, Instance,
    RowStatus, TrialRow,
};
