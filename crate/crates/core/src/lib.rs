//! Equilibrium and policy solvers for a peer-review market in which AI
//! assistance lowers the cost of low-effort refereeing.
//!
//! Reviewers choose to decline, shirk or work ([`reviewer`]); the retained
//! reports form a noisy signal of paper quality ([`signal`]); authors run a
//! polish rat race against the acceptance threshold ([`author`]); the
//! editor trades sorting quality against panel and detection costs
//! ([`editor`]) and reforms acceptance rate and detection subject to author
//! participation ([`reform`]). [`sim`] is an agent-level Monte Carlo check
//! of the analytic pipeline and [`sweep`] drives comparative statics.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod author;
pub mod calibration;
pub mod dist;
pub mod editor;
pub mod error;
pub mod format;
pub mod numerics;
pub mod policy;
pub mod reform;
pub mod reviewer;
pub mod signal;
pub mod sim;
pub mod sweep;

pub use author::{equilibrium_polish, polish_sensitivities, AuthorEquilibrium, PolishSensitivities};
pub use calibration::{Calibration, DensityMode, SolverSettings};
pub use dist::DistributionSpec;
pub use editor::{
    decentralized_n, editor_welfare, misalignment_at_transition, sorting_quality, EditorOutcome,
    Misalignment,
};
pub use error::{ModelError, Result, Violation};
pub use policy::Policy;
pub use reform::{
    author_reservation, premise_report, restoration_scan, sharpness_profile, solve_reform,
    PremiseReport, ReformSolution, Restoration, SharpnessProfile,
};
pub use reviewer::{gamma1, participation, Regime, ReviewerEquilibrium};
pub use signal::{effective_effort, retained_model, RetainedSignalModel, ThresholdDensity};
pub use sim::{oracle_suite, simulate, Estimate, OracleCheck, SimConfig, SimResult};
pub use sweep::{baseline_report, run_sweep, BaselineReport, SweepParameter, SweepSpec, SweepTable};
