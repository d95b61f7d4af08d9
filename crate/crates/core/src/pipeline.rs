//! Glue from raw angle recordings to per-subject symmetry analyses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mccv::{aggregate_condition, run_extended_cv, ConditionSummary, CvConfig, CvResult};
use crate::poincare::{sample_sections, EventTrain};
use crate::preprocess::{estimate_velocities, nondimensionalize, zero_phase_filter, FilterSpec, TimeSeries};
use crate::section::{
    condition_datasets, estimate_fixed_points, kinematic_asymmetry, residuals, validate_sections, FixedPointPair,
    MirrorSpec, SectionSample, TransitionKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KindSelection {
    Step,
    Stride,
    #[default]
    Both,
}

impl KindSelection {
    pub fn includes_step(self) -> bool {
        matches!(self, Self::Step | Self::Both)
    }

    pub fn includes_stride(self) -> bool {
        matches!(self, Self::Stride | Self::Both)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "step" => Some(Self::Step),
            "stride" => Some(Self::Stride),
            "both" => Some(Self::Both),
            _ => None,
        }
    }
}

/// Filtered angles followed by their velocities, velocities
/// non-dimensionalized. Measured velocities are used when given (filtered
/// with the same low-pass); otherwise they are differentiated from the
/// filtered angles.
pub fn state_trajectory(
    angles: &TimeSeries,
    velocities: Option<&TimeSeries>,
    filter: &FilterSpec,
    l0: f64,
    g: f64,
) -> Result<TimeSeries> {
    let smooth = zero_phase_filter(angles, filter)?;
    let vel = match velocities {
        Some(v) => {
            if !v.same_grid(angles) {
                return Err(Error::InvalidSeries("velocity channels are sampled on a different grid".into()));
            }
            if v.n_channels() != angles.n_channels() {
                return Err(Error::DimensionMismatch { expected: angles.n_channels(), found: v.n_channels() });
            }
            zero_phase_filter(v, filter)?
        }
        None => estimate_velocities(&smooth, filter)?,
    };
    nondimensionalize(&smooth.concat(vel)?, l0, g)
}

/// Section states at every event of `train`.
pub fn extract_sections(states: &TimeSeries, train: &EventTrain) -> Result<Vec<SectionSample>> {
    sample_sections(states, train)
}

/// Both orderings of one condition and their aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionAnalysis {
    pub first: CvResult,
    pub second: CvResult,
    pub summary: ConditionSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectAnalysis {
    pub d: usize,
    pub n_sections: usize,
    pub fixed_points: FixedPointPair,
    pub kinematic_asymmetry: f64,
    pub step: Option<ConditionAnalysis>,
    pub stride: Option<ConditionAnalysis>,
}

fn analyze_condition(
    res: &[SectionSample],
    first: TransitionKind,
    mirror: &MirrorSpec,
    cfg: &CvConfig,
) -> Result<ConditionAnalysis> {
    let (n1, m1) = condition_datasets(res, first, mirror)?;
    let (n2, m2) = condition_datasets(res, first.partner(), mirror)?;
    let first = run_extended_cv(&n1, &m1, cfg)?;
    let second = run_extended_cv(&n2, &m2, cfg)?;
    let summary = aggregate_condition(&first, &second)?;
    Ok(ConditionAnalysis { first, second, summary })
}

/// Residuals below this fraction of the state scale are round-off.
const DEGENERATE_RESIDUAL: f64 = 1e-12;

/// Fixed points, residuals and extended cross-validation of the selected
/// conditions (step: LR/RL, stride: LL/RR).
pub fn analyze_sections(
    sections: &[SectionSample],
    mirror: &MirrorSpec,
    cfg: &CvConfig,
    kinds: KindSelection,
) -> Result<SubjectAnalysis> {
    let d = validate_sections(sections)?;
    if mirror.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: mirror.dim() });
    }
    let fixed_points = estimate_fixed_points(sections)?;
    let res = residuals(sections, &fixed_points)?;
    let scale = fixed_points.mu_l.norm().max(fixed_points.mu_r.norm()).max(1.0);
    if res.iter().all(|s| s.state.norm() <= DEGENERATE_RESIDUAL * scale) {
        return Err(Error::ZeroNormalization);
    }
    let step = kinds.includes_step().then(|| analyze_condition(&res, TransitionKind::LR, mirror, cfg)).transpose()?;
    let stride =
        kinds.includes_stride().then(|| analyze_condition(&res, TransitionKind::LL, mirror, cfg)).transpose()?;
    Ok(SubjectAnalysis {
        d,
        n_sections: sections.len(),
        kinematic_asymmetry: kinematic_asymmetry(&fixed_points, mirror)?,
        fixed_points,
        step,
        stride,
    })
}
