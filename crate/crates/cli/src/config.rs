//! JSON configuration for `analyze` and `simulate`. Every field is optional
//! in the file; command-line flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use cyclesym_core::pipeline::KindSelection;
use cyclesym_core::poincare::Direction;
use cyclesym_core::synth::{CohortSpec, GaitSpec};
use cyclesym_core::{CvConfig, EventSpec, FilterSpec, MirrorSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const STANDARD_GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub order: usize,
    pub cutoff_hz: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { order: FilterSpec::DEFAULT_ORDER, cutoff_hz: FilterSpec::DEFAULT_CUTOFF_HZ }
    }
}

impl FilterConfig {
    pub fn spec(&self, sample_rate_hz: f64) -> cyclesym_core::Result<FilterSpec> {
        FilterSpec::new(self.order, self.cutoff_hz, sample_rate_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventConfig {
    pub threshold: f64,
    pub debounce: f64,
    pub direction: Direction,
    /// Trigger channel names in the data files.
    pub left_channel: String,
    pub right_channel: String,
}

impl Default for EventConfig {
    fn default() -> Self {
        let spec = EventSpec::default();
        Self {
            threshold: spec.threshold,
            debounce: spec.debounce,
            direction: spec.direction,
            left_channel: "trigger_l".into(),
            right_channel: "trigger_r".into(),
        }
    }
}

impl EventConfig {
    pub fn spec(&self) -> EventSpec {
        EventSpec { threshold: self.threshold, debounce: self.debounce, direction: self.direction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub filter: FilterConfig,
    pub events: EventConfig,
    /// Precomputed event files, one per data file; when present, detection
    /// is skipped.
    pub events_files: Vec<PathBuf>,
    /// Relabeling operator; defaults to the bilateral block swap
    /// `[θ_L, θ_R, θ̇_L, θ̇_R]`.
    pub mirror: Option<MirrorSpec>,
    pub cv: CvConfig,
    /// Leg length in metres.
    pub l0: f64,
    pub g: f64,
    pub kinds: KindSelection,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            events: EventConfig::default(),
            events_files: Vec::new(),
            mirror: None,
            cv: CvConfig::default(),
            l0: 1.0,
            g: STANDARD_GRAVITY,
            kinds: KindSelection::Both,
        }
    }
}

impl AnalysisConfig {
    /// The configured mirror, or the bilateral default for dimension `d`.
    pub fn mirror_for(&self, d: usize) -> CliResult<MirrorSpec> {
        match &self.mirror {
            Some(m) if m.dim() == d => Ok(m.clone()),
            Some(m) => Err(CliError::validation(format!(
                "mirror permutation has length {} but the state dimension is {d}",
                m.dim()
            ))),
            None if d.is_multiple_of(4) => Ok(MirrorSpec::bilateral(d / 4)),
            None => Err(CliError::validation(format!(
                "state dimension {d} is not bilateral; give an explicit mirror in the config"
            ))),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.cv.validate()?;
        if !(self.l0 > 0.0 && self.g > 0.0) {
            return Err(CliError::validation("l0 and g must be positive"));
        }
        if !(self.events.debounce >= 0.0) {
            return Err(CliError::validation("events.debounce must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct SimulationConfig {
    pub seed: u64,
    pub cohort: CohortSpec,
    pub gait: GaitSpec,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}
