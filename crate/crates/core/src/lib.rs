//! Identification of linearized return-map dynamics around a limit cycle from
//! event-sectioned time series, and extended Monte-Carlo cross-validation
//! (normal / mirrored / combined training sets) for testing whether those
//! dynamics are bilaterally symmetric.
//!
//! The pipeline runs
//! [`preprocess`] → [`poincare`] → [`section`] → [`mapfit`] / [`mccv`] → [`stats`],
//! and [`synth`] provides ground-truth generators for every stage.

pub mod error;
pub mod mapfit;
pub mod mccv;
pub mod pipeline;
pub mod poincare;
pub mod preprocess;
pub mod section;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use mapfit::{cve, fit_map, pseudoinverse, SectionMap};
pub use mccv::{
    aggregate_condition, compare_step_stride, run_extended_cv, split_indices, uncertainty, ConditionSummary, CvConfig,
    CvResult, ErrorStats, Method, StepStrideComparison,
};
pub use pipeline::{analyze_sections, state_trajectory, KindSelection, SubjectAnalysis};
pub use poincare::{detect_events, sample_sections, Direction, Event, EventSpec, EventTrain};
pub use preprocess::{
    butterworth_lowpass, central_difference, estimate_velocities, nondimensionalize, Channel, ChannelRole, FilterSpec,
    SosFilter, TimeSeries,
};
pub use section::{
    build_pairs, estimate_fixed_points, kinematic_asymmetry, mirror_state, residuals, FixedPointPair, MirrorSpec,
    PairedDataset, SectionSample, Side, StateVector, TransitionKind,
};
pub use stats::{slope_through_origin, wilcoxon_signed_rank, Alternative, SlopeFit, TestMethod, TestResult};
pub use synth::{
    cohort_models, gen_continuous_gait, gen_sections, make_symmetric, perturb_asymmetry, reference_model,
    AlternatingModel, CohortSpec, ContinuousGait, GaitSpec, NoiseModel,
};

/// Re-exported so downstream crates agree on the matrix type.
pub use nalgebra::{DMatrix, DVector};
