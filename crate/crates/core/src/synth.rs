//! Synthetic gait data with known ground truth: linear step maps around
//! alternating fixed points driven by additive Gaussian noise, and smooth
//! continuous trajectories passing through the generated section states.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poincare::{Event, EventTrain};
use crate::preprocess::{Channel, ChannelRole, TimeSeries};
use crate::section::{MirrorSpec, SectionSample, Side, StateVector};

/// Strides discarded before recording when the model is noisy.
pub const BURN_IN_STRIDES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    Isotropic(f64),
    Covariance(DMatrix<f64>),
}

impl NoiseModel {
    pub fn covariance(&self, d: usize) -> DMatrix<f64> {
        match self {
            NoiseModel::Isotropic(s) => DMatrix::identity(d, d) * (s * s),
            NoiseModel::Covariance(c) => c.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NoiseModel::Isotropic(s) => *s == 0.0,
            NoiseModel::Covariance(c) => c.iter().all(|v| *v == 0.0),
        }
    }

    /// `L` with `L Lᵀ = Σ`.
    fn factor(&self, d: usize) -> Result<DMatrix<f64>> {
        match self {
            NoiseModel::Isotropic(s) => Ok(DMatrix::identity(d, d) * *s),
            NoiseModel::Covariance(c) => psd_sqrt(c),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            NoiseModel::Isotropic(s) if !(s.is_finite() && *s >= 0.0) => {
                Err(Error::InvalidParameter(format!("noise scale {s} must be finite and non-negative")))
            }
            NoiseModel::Isotropic(_) => Ok(()),
            NoiseModel::Covariance(c) => {
                if c.shape() != (d, d) {
                    return Err(Error::DimensionMismatch { expected: d, found: c.nrows() });
                }
                psd_sqrt(c).map(|_| ())
            }
        }
    }
}

fn psd_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("noise covariance".into()));
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    if (c - c.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidParameter("noise covariance is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(c.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
        return Err(Error::InvalidParameter("noise covariance is not positive semidefinite".into()));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `q_R = A_LR q_L + δ`, `q_L' = A_RL q_R + δ'` around fixed points `μ_L`,
/// `μ_R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternatingModel {
    pub a_lr: DMatrix<f64>,
    pub a_rl: DMatrix<f64>,
    pub mu_l: StateVector,
    pub mu_r: StateVector,
    pub noise: NoiseModel,
    pub mirror: MirrorSpec,
    /// Seconds between consecutive heel strikes.
    pub step_period: f64,
}

impl AlternatingModel {
    pub fn dim(&self) -> usize {
        self.mu_l.len()
    }

    pub fn stride_map(&self) -> DMatrix<f64> {
        &self.a_rl * &self.a_lr
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for a in [&self.a_lr, &self.a_rl] {
            if a.shape() != (d, d) {
                return Err(Error::DimensionMismatch { expected: d, found: a.nrows() });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("section map".into()));
            }
        }
        if self.mu_r.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.mu_r.len() });
        }
        if self.mirror.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.mirror.dim() });
        }
        if !(self.step_period > 0.0 && self.step_period.is_finite()) {
            return Err(Error::InvalidParameter(format!("step period {} must be positive", self.step_period)));
        }
        self.noise.validate(d)?;
        let rho = spectral_radius(&self.stride_map());
        if !(rho < 1.0) {
            return Err(Error::UnstableModel(rho));
        }
        Ok(())
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Result<Self> {
        self.noise = noise;
        self.validate()?;
        Ok(self)
    }

    /// Stationary covariance `P` of the left residual, solving
    /// `P = F P Fᵀ + A_RL Σ A_RLᵀ + Σ` with `F` the stride map.
    pub fn stationary_covariance(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        let sigma = self.noise.covariance(self.dim());
        let q = &self.a_rl * &sigma * self.a_rl.transpose() + &sigma;
        Ok(lyapunov(&self.stride_map(), &q))
    }
}

/// Solves `P = F P Fᵀ + Q` for stable `F` by doubling.
pub fn lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = q.clone();
    let mut fk = f.clone();
    for _ in 0..64 {
        let step = &fk * &p * fk.transpose();
        let done = step.amax() <= 1e-17 * p.amax().max(f64::MIN_POSITIVE);
        p += step;
        if done {
            break;
        }
        fk = &fk * &fk;
    }
    p
}

fn gaussian(rng: &mut ChaCha8Rng, factor: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_iterator(factor.ncols(), (0..factor.ncols()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    factor * z
}

/// Residual chain `q_L[1], q_R[2], …, q_L[2n+1]`.
fn residual_chain(model: &AlternatingModel, n_strides: usize, rng: &mut ChaCha8Rng) -> Result<Vec<DVector<f64>>> {
    let d = model.dim();
    let noisy = !model.noise.is_zero();
    let factor = model.noise.factor(d)?;
    let mut q = if noisy { gaussian(rng, &psd_sqrt(&model.stationary_covariance()?)?) } else { DVector::zeros(d) };
    let advance = |q: &DVector<f64>, a: &DMatrix<f64>, rng: &mut ChaCha8Rng| {
        let next = a * q;
        if noisy {
            next + gaussian(rng, &factor)
        } else {
            next
        }
    };
    if noisy {
        for _ in 0..BURN_IN_STRIDES {
            let r = advance(&q, &model.a_lr, rng);
            q = advance(&r, &model.a_rl, rng);
        }
    }
    let mut out = Vec::with_capacity(2 * n_strides + 1);
    out.push(q.clone());
    for _ in 0..n_strides {
        let r = advance(&q, &model.a_lr, rng);
        q = advance(&r, &model.a_rl, rng);
        out.push(r);
        out.push(q.clone());
    }
    Ok(out)
}

/// `2 n_strides + 1` alternating section samples starting and ending on a
/// left event, at times `(k − 1) · step_period`.
pub fn gen_sections(model: &AlternatingModel, n_strides: usize, seed: u64) -> Result<Vec<SectionSample>> {
    model.validate()?;
    if n_strides == 0 {
        return Err(Error::InvalidParameter("need at least one stride".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chain = residual_chain(model, n_strides, &mut rng)?;
    chain
        .into_iter()
        .enumerate()
        .map(|(i, q)| {
            let label = if i % 2 == 0 { Side::Left } else { Side::Right };
            let mu = match label {
                Side::Left => &model.mu_l,
                Side::Right => &model.mu_r,
            };
            Ok(SectionSample {
                k: i + 1,
                time: i as f64 * model.step_period,
                label,
                state: StateVector::new(q.iter().zip(mu.as_slice()).map(|(a, b)| a + b).collect())?,
            })
        })
        .collect()
}

/// Model whose right-to-left statistics are the mirror image of its
/// left-to-right ones: `A_RL = M A_LR Mᵀ`, `μ_R = mirror(μ_L)`.
pub fn make_symmetric(a_lr: &DMatrix<f64>, mu_l: &StateVector, mirror: &MirrorSpec) -> Result<AlternatingModel> {
    let mu_r = StateVector::new(mirror.apply(mu_l.as_slice())?)?;
    Ok(AlternatingModel {
        a_rl: mirror.conjugate(a_lr)?,
        a_lr: a_lr.clone(),
        mu_l: mu_l.clone(),
        mu_r,
        noise: NoiseModel::Isotropic(0.0),
        mirror: mirror.clone(),
        step_period: 0.5,
    })
}

/// `A_RL ← A_RL + Δ`.
pub fn perturb_asymmetry(model: &AlternatingModel, delta: &DMatrix<f64>) -> Result<AlternatingModel> {
    let d = model.dim();
    if delta.shape() != (d, d) {
        return Err(Error::DimensionMismatch { expected: d, found: delta.nrows() });
    }
    let out = AlternatingModel { a_rl: &model.a_rl + delta, ..model.clone() };
    out.validate()?;
    Ok(out)
}

pub const REFERENCE_DIM: usize = 4;
pub const REFERENCE_RADIUS: f64 = 0.7;
pub const REFERENCE_SIGMA: f64 = 0.1;
pub const REFERENCE_STRIDES: usize = 50;

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric model with `A_LR = ρ · Q`, `Q` a random orthogonal matrix, so
/// every eigenvalue of the step map has modulus `ρ` and of the stride map
/// `ρ²`.
pub fn random_symmetric_model(
    radius: f64,
    sigma: f64,
    mu_l: &StateVector,
    mirror: &MirrorSpec,
    seed: u64,
) -> Result<AlternatingModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_lr = random_orthogonal(mu_l.len(), &mut rng) * radius;
    make_symmetric(&a_lr, mu_l, mirror)?.with_noise(NoiseModel::Isotropic(sigma))
}

pub fn reference_mu_l() -> StateVector {
    StateVector::new(vec![0.35, -0.25, 0.4, -0.3]).expect("finite")
}

/// Reference setting: `d = 4` bilateral state `[θ_L, θ_R, θ̇_L, θ̇_R]`,
/// `ρ = 0.7`, `σ = 0.1`.
pub fn reference_model(seed: u64) -> AlternatingModel {
    random_symmetric_model(REFERENCE_RADIUS, REFERENCE_SIGMA, &reference_mu_l(), &MirrorSpec::bilateral(1), seed)
        .expect("reference model is stable")
}

/// Random perturbation with the given Frobenius norm.
pub fn random_delta(d: usize, frobenius: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = g.norm();
    g * (frobenius / norm)
}

/// A group of independently drawn subjects sharing one generator setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub subjects: usize,
    pub radius: f64,
    pub sigma: f64,
    /// Frobenius norm of the random perturbation added to each `A_RL`; 0 for
    /// symmetric subjects.
    pub asymmetry: f64,
    pub mu_l: StateVector,
    pub step_period: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            subjects: 8,
            radius: REFERENCE_RADIUS,
            sigma: REFERENCE_SIGMA,
            asymmetry: 0.0,
            mu_l: reference_mu_l(),
            step_period: 0.5,
        }
    }
}

/// Seed for subject `i` of a cohort generated from `seed`.
pub fn subject_seed(seed: u64, i: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng.random()
}

/// One model per subject. The state must be bilateral
/// (`[θ_L, θ_R, θ̇_L, θ̇_R]`, `d` a multiple of 4).
pub fn cohort_models(spec: &CohortSpec, seed: u64) -> Result<Vec<AlternatingModel>> {
    let d = spec.mu_l.len();
    if d == 0 || !d.is_multiple_of(4) {
        return Err(Error::InvalidParameter(format!("bilateral state dimension must be a multiple of 4, got {d}")));
    }
    if spec.subjects == 0 {
        return Err(Error::InvalidParameter("cohort needs at least one subject".into()));
    }
    if !(spec.asymmetry >= 0.0 && spec.asymmetry.is_finite()) {
        return Err(Error::InvalidParameter(format!("asymmetry {} must be non-negative", spec.asymmetry)));
    }
    let mirror = MirrorSpec::bilateral(d / 4);
    (0..spec.subjects)
        .map(|i| {
            let s = subject_seed(seed, i);
            let mut model = random_symmetric_model(spec.radius, spec.sigma, &spec.mu_l, &mirror, s)?;
            model.step_period = spec.step_period;
            if spec.asymmetry > 0.0 {
                model = perturb_asymmetry(&model, &random_delta(d, spec.asymmetry, s ^ 0x5eed))?;
            }
            model.validate()?;
            Ok(model)
        })
        .collect()
}

/// Sampling parameters for continuous trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitSpec {
    pub sample_rate: f64,
    /// Total length in strides, including one unrecorded stride at each end.
    pub cycles: usize,
    /// Leg length (m) used to convert non-dimensional section velocities.
    pub l0: f64,
    pub g: f64,
}

impl Default for GaitSpec {
    fn default() -> Self {
        Self { sample_rate: 200.0, cycles: 52, l0: 1.0, g: 9.80665 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousGait {
    /// One angle channel per angle coordinate of the state, in state order.
    pub angles: TimeSeries,
    pub left_trigger: TimeSeries,
    pub right_trigger: TimeSeries,
    pub events: EventTrain,
    /// True section states (angles and non-dimensional velocities).
    pub sections: Vec<SectionSample>,
}

pub fn angle_channel_name(j: usize) -> String {
    format!("angle_{j}")
}

/// Smooth bump, 1 at 0 with zero slope, vanishing with zero slope at ±1.
fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (0.5 * PI * u).cos().powi(4)
    }
}

/// Continuous angle trajectories and heel-strike triggers whose sections are
/// the states produced by [`gen_sections`].
///
/// The state is read as `[angles, velocities]` in equal halves, velocities
/// non-dimensional. Each angle follows the trigonometric limit cycle
/// `c₀ + c₁ cos ωt + s₁ sin ωt + s₂ sin 2ωt` (stride frequency ω), which
/// passes through the fixed-point angle and velocity at every left and right
/// event; each event's residual is added through a compact bump of half a
/// step period carrying its position and slope. Triggers are sinusoids
/// rising through 0.5 at the event times, held flat outside the recorded
/// window.
pub fn gen_continuous_gait(model: &AlternatingModel, spec: &GaitSpec, seed: u64) -> Result<ContinuousGait> {
    model.validate()?;
    let d = model.dim();
    if d == 0 || !d.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("state dimension {d} is not [angles, velocities]")));
    }
    let stride = 2.0 * model.step_period;
    if !(spec.sample_rate.is_finite() && spec.sample_rate >= 20.0 / stride) {
        return Err(Error::InvalidParameter(format!(
            "sample rate {} Hz is below 20× the stride frequency {} Hz",
            spec.sample_rate,
            1.0 / stride
        )));
    }
    if spec.cycles < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 cycles, got {}", spec.cycles)));
    }
    if !(spec.l0 > 0.0 && spec.g > 0.0) {
        return Err(Error::InvalidParameter("l0 and g must be positive".into()));
    }
    let na = d / 2;
    let vel_scale = (spec.l0 / spec.g).sqrt();
    let omega = 2.0 * PI / stride;
    let margin = stride;

    let mut sections = gen_sections(model, spec.cycles - 2, seed)?;
    for s in &mut sections {
        s.time += margin;
    }

    let n_rows = (spec.cycles as f64 * stride * spec.sample_rate).round() as usize;
    let dt = 1.0 / spec.sample_rate;
    let h = 0.5 * model.step_period;
    let (mu_l, mu_r) = (model.mu_l.as_slice(), model.mu_r.as_slice());

    let mut channels = Vec::with_capacity(na);
    for j in 0..na {
        let (al, ar) = (mu_l[j], mu_r[j]);
        let (wl, wr) = (mu_l[na + j] / vel_scale, mu_r[na + j] / vel_scale);
        let c0 = 0.5 * (al + ar);
        let c1 = 0.5 * (al - ar);
        let s1 = (wl - wr) / (2.0 * omega);
        let s2 = (wl + wr) / (4.0 * omega);
        let mut values: Vec<f64> = (0..n_rows)
            .map(|i| {
                let ph = omega * (i as f64 * dt - margin);
                c0 + c1 * ph.cos() + s1 * ph.sin() + s2 * (2.0 * ph).sin()
            })
            .collect();
        for s in &sections {
            let mu = if s.label == Side::Left { mu_l } else { mu_r };
            let p = s.state.as_slice()[j] - mu[j];
            let v = (s.state.as_slice()[na + j] - mu[na + j]) / vel_scale;
            if p == 0.0 && v == 0.0 {
                continue;
            }
            let lo = (((s.time - h) / dt).floor().max(0.0)) as usize;
            let hi = (((s.time + h) / dt).ceil() as usize).min(n_rows.saturating_sub(1));
            for (i, value) in values.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let tau = i as f64 * dt - s.time;
                let b = bump(tau / h);
                *value += p * b + v * tau * b;
            }
        }
        channels.push(Channel::new(angle_channel_name(j), ChannelRole::Angle, values));
    }

    let first_l = sections[0].time;
    let last_l = sections[sections.len() - 1].time;
    let first_r = sections[1].time;
    let last_r = sections[sections.len() - 2].time;
    let trigger = |first: f64, last: f64| -> Vec<f64> {
        (0..n_rows)
            .map(|i| {
                let t = i as f64 * dt;
                if t < first - 0.25 * stride {
                    0.0
                } else if t > last + 0.25 * stride {
                    1.0
                } else {
                    0.5 + 0.5 * (omega * (t - first)).sin()
                }
            })
            .collect()
    };
    let left_trigger =
        TimeSeries::new(0.0, dt, vec![Channel::new("trigger_l", ChannelRole::Trigger, trigger(first_l, last_l))])?;
    let right_trigger =
        TimeSeries::new(0.0, dt, vec![Channel::new("trigger_r", ChannelRole::Trigger, trigger(first_r, last_r))])?;
    let events = EventTrain::new(sections.iter().map(|s| Event { time: s.time, label: s.label }).collect())?;

    Ok(ContinuousGait { angles: TimeSeries::new(0.0, dt, channels)?, left_trigger, right_trigger, events, sections })
}
