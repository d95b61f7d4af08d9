//! Smoothing, differentiation and non-dimensionalization of uniformly sampled
//! angle trajectories.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelRole {
    Angle,
    Velocity,
    Trigger,
}

impl ChannelRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelRole::Angle => "angle",
            ChannelRole::Velocity => "velocity",
            ChannelRole::Trigger => "trigger",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "angle" => Some(ChannelRole::Angle),
            "velocity" => Some(ChannelRole::Velocity),
            "trigger" => Some(ChannelRole::Trigger),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub role: ChannelRole,
    pub values: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, role: ChannelRole, values: Vec<f64>) -> Self {
        Self { name: name.into(), role, values }
    }
}

/// Uniformly sampled multichannel signal. Sample `i` is at `t0 + i·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    channels: Vec<Channel>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, channels: Vec<Channel>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidSeries(format!("need finite t0 and dt > 0 (t0 = {t0}, dt = {dt})")));
        }
        let n = channels.first().map(|c| c.values.len()).unwrap_or(0);
        if channels.is_empty() {
            return Err(Error::InvalidSeries("no channels".into()));
        }
        if n < 2 {
            return Err(Error::SeriesTooShort { needed: 1, found: n });
        }
        for c in &channels {
            if c.values.len() != n {
                return Err(Error::InvalidSeries(format!(
                    "channel '{}' has {} samples, expected {n}",
                    c.name,
                    c.values.len()
                )));
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("channel '{}'", c.name)));
            }
        }
        Ok(Self { t0, dt, channels })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn n_samples(&self) -> usize {
        self.channels[0].values.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_samples() - 1)
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn into_channels(self) -> Vec<Channel> {
        self.channels
    }

    /// Channels with the given role, in file order.
    pub fn with_role(&self, role: ChannelRole) -> Option<TimeSeries> {
        let channels: Vec<Channel> = self.channels.iter().filter(|c| c.role == role).cloned().collect();
        if channels.is_empty() {
            return None;
        }
        Some(Self { t0: self.t0, dt: self.dt, channels })
    }

    pub fn single(&self, name: &str) -> Option<TimeSeries> {
        self.channel(name).map(|c| Self { t0: self.t0, dt: self.dt, channels: vec![c.clone()] })
    }

    /// Whether both series sample the same instants.
    pub fn same_grid(&self, other: &TimeSeries) -> bool {
        self.n_samples() == other.n_samples()
            && (self.t0 - other.t0).abs() <= 1e-9 * self.dt
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
    }

    /// Appends the channels of `other`, which must share the sampling grid.
    pub fn concat(mut self, other: TimeSeries) -> Result<TimeSeries> {
        if !self.same_grid(&other) {
            return Err(Error::InvalidSeries("cannot concatenate series on different sampling grids".into()));
        }
        self.channels.extend(other.channels);
        Ok(self)
    }

    pub fn reversed(&self) -> TimeSeries {
        let channels = self
            .channels
            .iter()
            .map(|c| Channel { values: c.values.iter().rev().copied().collect(), ..c.clone() })
            .collect();
        Self { t0: self.t0, dt: self.dt, channels }
    }

    /// Applies `f` to every channel's samples, keeping names and roles.
    pub fn try_map<F>(&self, mut f: F) -> Result<TimeSeries>
    where
        F: FnMut(&Channel) -> Result<Vec<f64>>,
    {
        let channels =
            self.channels.iter().map(|c| Ok(Channel { values: f(c)?, ..c.clone() })).collect::<Result<Vec<_>>>()?;
        TimeSeries::new(self.t0, self.dt, channels)
    }
}

/// Low-pass Butterworth design parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

impl FilterSpec {
    pub const DEFAULT_ORDER: usize = 5;
    pub const DEFAULT_CUTOFF_HZ: f64 = 10.0;

    pub fn new(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        let spec = Self { order, cutoff_hz, sample_rate_hz };
        spec.validate()?;
        Ok(spec)
    }

    /// 5th order, 10 Hz cutoff at the given sample rate.
    pub fn default_for(sample_rate_hz: f64) -> Result<Self> {
        Self::new(Self::DEFAULT_ORDER, Self::DEFAULT_CUTOFF_HZ, sample_rate_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidFilter("order must be positive".into()));
        }
        if !(self.cutoff_hz > 0.0) || !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidFilter("cutoff and sample rate must be positive".into()));
        }
        if self.cutoff_hz >= self.sample_rate_hz / 2.0 {
            return Err(Error::InvalidFilter(format!(
                "cutoff {} Hz is not below the Nyquist frequency {} Hz",
                self.cutoff_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        Ok(())
    }

    /// Samples of odd-reflection padding added at each end before filtering.
    pub fn pad_len(&self) -> usize {
        3 * (self.order + 1)
    }
}

/// One stage of a cascade, normalized so that `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSection {
    FirstOrder { b: [f64; 2], a1: f64 },
    Biquad { b: [f64; 3], a: [f64; 2] },
}

impl FilterSection {
    /// Numerator and denominator coefficients, highest power of z⁻¹ last.
    pub fn coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        match *self {
            FilterSection::FirstOrder { b, a1 } => (b.to_vec(), vec![1.0, a1]),
            FilterSection::Biquad { b, a } => (b.to_vec(), vec![1.0, a[0], a[1]]),
        }
    }

    /// Transposed direct-form II state that a constant unit input holds fixed.
    fn steady_state(&self) -> [f64; 2] {
        match *self {
            FilterSection::FirstOrder { b, a1 } => [b[1] - a1, 0.0],
            FilterSection::Biquad { b, a } => [1.0 - b[0], b[2] - a[1]],
        }
    }

    fn run(&self, x: &mut [f64], level: f64) {
        let zi = self.steady_state();
        let (mut z1, mut z2) = (zi[0] * level, zi[1] * level);
        match *self {
            FilterSection::FirstOrder { b, a1 } => {
                for v in x.iter_mut() {
                    let y = b[0] * *v + z1;
                    z1 = b[1] * *v - a1 * y;
                    *v = y;
                }
            }
            FilterSection::Biquad { b, a } => {
                for v in x.iter_mut() {
                    let y = b[0] * *v + z1;
                    z1 = b[1] * *v - a[0] * y + z2;
                    z2 = b[2] * *v - a[1] * y;
                    *v = y;
                }
            }
        }
    }
}

/// Cascade of second-order sections, plus one first-order section for odd
/// orders.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<FilterSection>,
}

impl SosFilter {
    pub fn sections(&self) -> &[FilterSection] {
        &self.sections
    }

    /// Single causal pass. The state starts at the steady state for a constant
    /// input equal to `x[0]`, so constant signals pass through unchanged.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        let level = x.first().copied().unwrap_or(0.0);
        // every section has unit DC gain, so each sees the same initial level
        for s in &self.sections {
            s.run(&mut out, level);
        }
        out
    }
}

/// Digital Butterworth low-pass via the bilinear transform with the cutoff
/// prewarped so the −3 dB point lands exactly on `cutoff_hz`.
pub fn butterworth_lowpass(spec: &FilterSpec) -> Result<SosFilter> {
    spec.validate()?;
    let n = spec.order;
    let k = (PI * spec.cutoff_hz / spec.sample_rate_hz).tan();
    let k2 = k * k;
    let mut sections = Vec::with_capacity(n.div_ceil(2));
    for j in 0..n / 2 {
        // analog pair s² + 2 sin(θ) s + 1 with θ = π(2j + 1) / (2n)
        let damping = 2.0 * (PI * (2 * j + 1) as f64 / (2 * n) as f64).sin();
        let norm = 1.0 + damping * k + k2;
        let b0 = k2 / norm;
        sections.push(FilterSection::Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) / norm, (1.0 - damping * k + k2) / norm],
        });
    }
    if n % 2 == 1 {
        let b0 = k / (1.0 + k);
        sections.push(FilterSection::FirstOrder { b: [b0, b0], a1: (k - 1.0) / (k + 1.0) });
    }
    Ok(SosFilter { sections })
}

/// Forward-backward filtering of one channel with odd-reflection padding.
pub fn filtfilt(x: &[f64], filter: &SosFilter, pad: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= pad {
        return Err(Error::SeriesTooShort { needed: pad, found: n });
    }
    let (first, last) = (x[0], x[n - 1]);
    let mut padded = Vec::with_capacity(n + 2 * pad);
    padded.extend((1..=pad).rev().map(|k| 2.0 * first - x[k]));
    padded.extend_from_slice(x);
    padded.extend((1..=pad).map(|k| 2.0 * last - x[n - 1 - k]));

    // mean of forward-backward and backward-forward passes
    let mut fb = filter.apply(&padded);
    fb.reverse();
    let mut fb = filter.apply(&fb);
    fb.reverse();

    padded.reverse();
    let mut bf = filter.apply(&padded);
    bf.reverse();
    let bf = filter.apply(&bf);

    Ok(fb[pad..pad + n].iter().zip(&bf[pad..pad + n]).map(|(a, b)| 0.5 * (a + b)).collect())
}

/// Zero-phase low-pass of every channel: the magnitude response is the
/// squared single-pass response and the phase is zero.
pub fn zero_phase_filter(x: &TimeSeries, spec: &FilterSpec) -> Result<TimeSeries> {
    let filter = butterworth_lowpass(spec)?;
    let pad = spec.pad_len();
    x.try_map(|c| filtfilt(&c.values, &filter, pad))
}

/// First derivative by central differences, one-sided at the two endpoints.
pub fn central_difference_slice(x: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::SeriesTooShort { needed: 2, found: n });
    }
    let mut v = Vec::with_capacity(n);
    v.push((x[1] - x[0]) / dt);
    v.extend(x.windows(3).map(|w| (w[2] - w[0]) / (2.0 * dt)));
    v.push((x[n - 1] - x[n - 2]) / dt);
    Ok(v)
}

pub fn central_difference(x: &TimeSeries) -> Result<TimeSeries> {
    let dt = x.dt();
    x.try_map(|c| central_difference_slice(&c.values, dt))
}

/// Angular velocities from smoothed angles: central difference, then another
/// zero-phase low-pass. Output channels are tagged as velocities and named
/// `<angle>_dot`.
pub fn estimate_velocities(angles: &TimeSeries, spec: &FilterSpec) -> Result<TimeSeries> {
    let filtered = zero_phase_filter(&central_difference(angles)?, spec)?;
    let channels = filtered
        .into_channels()
        .into_iter()
        .map(|c| Channel { name: format!("{}_dot", c.name), role: ChannelRole::Velocity, values: c.values })
        .collect();
    TimeSeries::new(angles.t0(), angles.dt(), channels)
}

fn velocity_scale(l0: f64, g: f64) -> Result<f64> {
    if !(l0 > 0.0) || !(g > 0.0) || !l0.is_finite() || !g.is_finite() {
        return Err(Error::InvalidParameter(format!("leg length and gravity must be positive (l0 = {l0}, g = {g})")));
    }
    Ok((l0 / g).sqrt())
}

/// Scales velocity channels by √(l0/g); every other channel is unchanged.
pub fn nondimensionalize(states: &TimeSeries, l0: f64, g: f64) -> Result<TimeSeries> {
    let scale = velocity_scale(l0, g)?;
    scale_velocities(states, scale)
}

/// Inverse of [`nondimensionalize`].
pub fn dimensionalize(states: &TimeSeries, l0: f64, g: f64) -> Result<TimeSeries> {
    let scale = velocity_scale(l0, g)?;
    scale_velocities(states, 1.0 / scale)
}

fn scale_velocities(states: &TimeSeries, scale: f64) -> Result<TimeSeries> {
    states.try_map(|c| {
        Ok(match c.role {
            ChannelRole::Velocity => c.values.iter().map(|v| v * scale).collect(),
            _ => c.values.clone(),
        })
    })
}
