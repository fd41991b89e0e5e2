//! Numerical laboratory for `u_t = u_xx + c u_x + f(x, u)` with a KPP-to-bistable
//! heterogeneous reaction: traveling waves, time integration, front tracking,
//! stationary blocking profiles, barrier certification and phase classification.

// `!(a < b)` is used on purpose so that NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod error;
pub mod fronts;
pub mod harness;
pub mod numerics;
pub mod phase;
pub mod reactions;
pub mod solver;
pub mod stationary;
pub mod waves;

pub use barriers::{
    bump_admissible, check_barrier_residual, fm_params, static_blocking_supersolution, verify_case,
    BarrierCase, BarrierKind, BumpSpec, Direction, FifeMcLeodParams, ResidualReport,
    StaticSupersolution, VerifyReport,
};
pub use error::{Error, Result};
pub use fronts::{
    fit_log_delay, fit_speed, fit_speed_with_log, match_profile, trace_level, FrontTrace,
    LogDelayFit, Orientation, ProfileMatch, Side, SpeedFit,
};
pub use harness::{emit_plot_data, load_trajectory, run, ExperimentConfig, PlotKind, RunManifest};
pub use phase::{
    acceptance_cells, classify, predict, sweep, threshold_width, Agreement, Outcome, OutcomeKind,
    Prediction, SweepCell, SweepRow, SweepSettings, ThresholdResult, ThresholdSettings, Thresholds,
};
pub use reactions::{
    build_blend, build_cubic_bistable, build_kpp, build_modified, reference_field,
    validate_hypotheses, HeterogeneousField, Reaction, ReactionClass, ValidationReport,
};
pub use solver::{
    frame_shift, gaussian_bound_check, integrate, integrate_with, shift_frame, BoundaryCondition,
    GrowPolicy, InitialDatum, Problem, RunOptions, Snapshot, Trajectory, ViolationReport,
};
pub use stationary::{
    profile_shape, semi_persistence_check, solve_blocking_profile, tail_rates, uniqueness_probe,
    StationaryProfile, UniquenessReport,
};
pub use waves::{
    bistable_front, kpp_decay_rate, kpp_front, kpp_min_speed, speed_ordering_check, Normalization,
    WaveProfile,
};
