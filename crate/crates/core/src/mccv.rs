//! Extended Monte-Carlo cross-validation.
//!
//! Every iteration draws one random split of the index set `{0..n}` shared by
//! a normal dataset `N` and an equally sized mirrored dataset `M`, then fits
//! three maps on the training indices:
//!
//! * NCV: rows of `N`,
//! * MCV: the same rows of `M`,
//! * CCV: both, stacked (twice the training rows),
//!
//! and scores all three on the held-out rows of `N`. The per-method spread of
//! the fitted coefficients gives the model-uncertainty metric Ξ.
//!
//! Iteration `i` draws its split from its own ChaCha stream (`seed`, stream
//! `i`), and results are collected into per-iteration slots, so output is
//! bitwise identical regardless of how many threads execute the iterations.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapfit::{cve_matrix, default_rcond, fit_matrix, SectionMap};
use crate::section::{PairedDataset, TransitionKind};
use crate::stats::{slope_through_origin, SlopeFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    /// Monte-Carlo iterations.
    pub m: usize,
    /// Fraction of pairs held out for validation.
    pub v_frac: f64,
    pub seed: u64,
    /// Pseudoinverse truncation; `None` means `d · ε`.
    pub rcond: Option<f64>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { m: 1000, v_frac: 0.2, seed: 0, rcond: None }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("need at least one Monte-Carlo iteration".into()));
        }
        if !(self.v_frac > 0.0 && self.v_frac < 1.0) {
            return Err(Error::InvalidParameter(format!("holdout fraction {} not in (0, 1)", self.v_frac)));
        }
        if let Some(r) = self.rcond {
            if !(r >= 0.0) {
                return Err(Error::InvalidParameter(format!("rcond {r} must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn rcond_for(&self, d: usize) -> f64 {
        self.rcond.unwrap_or_else(|| default_rcond(d))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub fit: Vec<usize>,
    pub validate: Vec<usize>,
}

/// Holdout size `round(v_frac · n)`, at least 1, leaving at least one
/// training pair.
pub fn holdout_size(n: usize, v_frac: f64) -> Result<usize> {
    let nv = ((v_frac * n as f64).round() as usize).max(1);
    if n < 2 || nv >= n {
        return Err(Error::InvalidParameter(format!("cannot split {n} pairs with holdout fraction {v_frac}")));
    }
    Ok(nv)
}

/// Uniform random partition of `0..n` into sorted training and validation
/// index sets.
pub fn split_indices<R: Rng + ?Sized>(n: usize, v_frac: f64, rng: &mut R) -> Result<Split> {
    let nv = holdout_size(n, v_frac)?;
    let mut in_validation = vec![false; n];
    for i in index::sample(rng, n, nv) {
        in_validation[i] = true;
    }
    let (validate, fit): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_validation[i]);
    Ok(Split { fit, validate })
}

/// RNG stream for one Monte-Carlo iteration.
pub fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ncv,
    Mcv,
    Ccv,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ncv, Method::Mcv, Method::Ccv];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1).
    pub sd: f64,
}

impl ErrorStats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

/// Per-iteration errors and fitted maps for one (normal, mirrored) ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub normal_kind: TransitionKind,
    pub mirrored_kind: TransitionKind,
    pub config: CvConfig,
    pub n: usize,
    pub n_fit: usize,
    pub n_validate: usize,
    pub ncv: Vec<f64>,
    pub mcv: Vec<f64>,
    pub ccv: Vec<f64>,
    pub ncv_maps: Vec<SectionMap>,
    pub mcv_maps: Vec<SectionMap>,
    pub ccv_maps: Vec<SectionMap>,
}

impl CvResult {
    pub fn errors(&self, method: Method) -> &[f64] {
        match method {
            Method::Ncv => &self.ncv,
            Method::Mcv => &self.mcv,
            Method::Ccv => &self.ccv,
        }
    }

    pub fn maps(&self, method: Method) -> &[SectionMap] {
        match method {
            Method::Ncv => &self.ncv_maps,
            Method::Mcv => &self.mcv_maps,
            Method::Ccv => &self.ccv_maps,
        }
    }

    pub fn stats(&self, method: Method) -> ErrorStats {
        ErrorStats::of(self.errors(method))
    }

    pub fn xi(&self, method: Method) -> Result<f64> {
        uncertainty(self.maps(method))
    }
}

struct Iteration {
    errors: [f64; 3],
    maps: [DMatrix<f64>; 3],
}

fn run_iteration(
    normal: &PairedDataset,
    mirrored: &PairedDataset,
    cfg: &CvConfig,
    rcond: f64,
    i: usize,
) -> Result<Iteration> {
    let mut rng = iteration_rng(cfg.seed, i as u64);
    let split = split_indices(normal.len(), cfg.v_frac, &mut rng)?;
    let (xv, yv) = normal.select(&split.validate);
    let (xn, yn) = normal.select(&split.fit);
    let (xm, ym) = mirrored.select(&split.fit);

    let a_ncv = fit_matrix(&xn, &yn, rcond)?;
    let a_mcv = fit_matrix(&xm, &ym, rcond)?;
    let (nf, d) = xn.shape();
    let mut xc = DMatrix::zeros(2 * nf, d);
    let mut yc = DMatrix::zeros(2 * nf, d);
    xc.rows_mut(0, nf).copy_from(&xn);
    xc.rows_mut(nf, nf).copy_from(&xm);
    yc.rows_mut(0, nf).copy_from(&yn);
    yc.rows_mut(nf, nf).copy_from(&ym);
    let a_ccv = fit_matrix(&xc, &yc, rcond)?;

    let errors = [cve_matrix(&a_ncv, &xv, &yv)?, cve_matrix(&a_mcv, &xv, &yv)?, cve_matrix(&a_ccv, &xv, &yv)?];
    Ok(Iteration { errors, maps: [a_ncv, a_mcv, a_ccv] })
}

/// Runs `cfg.m` iterations of extended cross-validation. `normal` and
/// `mirrored` must have the same length, row `i` of each describing
/// corresponding transitions; `mirrored` must already be expressed in the
/// normal frame.
pub fn run_extended_cv(normal: &PairedDataset, mirrored: &PairedDataset, cfg: &CvConfig) -> Result<CvResult> {
    cfg.validate()?;
    if normal.len() != mirrored.len() {
        return Err(Error::SizeMismatch { normal: normal.len(), mirrored: mirrored.len() });
    }
    if normal.dim() != mirrored.dim() {
        return Err(Error::DimensionMismatch { expected: normal.dim(), found: mirrored.dim() });
    }
    let n = normal.len();
    let n_validate = holdout_size(n, cfg.v_frac)?;
    let n_fit = n - n_validate;
    let rcond = cfg.rcond_for(normal.dim());

    let iterations: Vec<Iteration> =
        (0..cfg.m).into_par_iter().map(|i| run_iteration(normal, mirrored, cfg, rcond, i)).collect::<Result<_>>()?;

    let mut result = CvResult {
        normal_kind: normal.kind(),
        mirrored_kind: mirrored.kind(),
        config: *cfg,
        n,
        n_fit,
        n_validate,
        ncv: Vec::with_capacity(cfg.m),
        mcv: Vec::with_capacity(cfg.m),
        ccv: Vec::with_capacity(cfg.m),
        ncv_maps: Vec::with_capacity(cfg.m),
        mcv_maps: Vec::with_capacity(cfg.m),
        ccv_maps: Vec::with_capacity(cfg.m),
    };
    for it in iterations {
        let [e_n, e_m, e_c] = it.errors;
        let [a_n, a_m, a_c] = it.maps;
        result.ncv.push(e_n);
        result.mcv.push(e_m);
        result.ccv.push(e_c);
        result.ncv_maps.push(SectionMap { a: a_n, kind: normal.kind(), n_train: n_fit });
        result.mcv_maps.push(SectionMap { a: a_m, kind: mirrored.kind(), n_train: n_fit });
        result.ccv_maps.push(SectionMap { a: a_c, kind: normal.kind(), n_train: 2 * n_fit });
    }
    Ok(result)
}

/// Ξ: the sum over matrix entries of the sample variance (n − 1) of that
/// entry across the maps.
pub fn uncertainty(maps: &[SectionMap]) -> Result<f64> {
    if maps.len() < 2 {
        return Err(Error::TooFewMaps(maps.len()));
    }
    let shape = maps[0].a.shape();
    if let Some(bad) = maps.iter().find(|m| m.a.shape() != shape) {
        return Err(Error::DimensionMismatch { expected: shape.0, found: bad.a.nrows() });
    }
    let count = maps.len() as f64;
    let mut mean = DMatrix::<f64>::zeros(shape.0, shape.1);
    for m in maps {
        mean += &m.a;
    }
    mean /= count;
    let sum_sq: f64 = maps.iter().map(|m| (&m.a - &mean).norm_squared()).sum();
    Ok(sum_sq / (count - 1.0))
}

/// Both orderings of one condition family averaged together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    /// Normal kinds of the two orderings, e.g. `[LR, RL]`.
    pub kinds: [TransitionKind; 2],
    pub n: [usize; 2],
    pub ncv: f64,
    pub mcv: f64,
    pub ccv: f64,
    /// Mean of the two orderings' NCV-map Ξ.
    pub xi_asymmetric: f64,
    /// Ξ of the CCV maps, averaged over the two orderings.
    pub xi_symmetric: f64,
}

impl ConditionSummary {
    pub fn mean(&self, method: Method) -> f64 {
        match method {
            Method::Ncv => self.ncv,
            Method::Mcv => self.mcv,
            Method::Ccv => self.ccv,
        }
    }

    pub fn is_step(&self) -> bool {
        self.kinds[0].is_step()
    }
}

/// Averages the (N, M) and (M, N) orderings of one condition.
pub fn aggregate_condition(first: &CvResult, second: &CvResult) -> Result<ConditionSummary> {
    if first.config != second.config {
        return Err(Error::ConfigMismatch("orderings were run with different CV configurations".into()));
    }
    if first.normal_kind != second.mirrored_kind || first.mirrored_kind != second.normal_kind {
        return Err(Error::ConfigMismatch(format!(
            "({}, {}) and ({}, {}) are not the two orderings of one condition",
            first.normal_kind, first.mirrored_kind, second.normal_kind, second.mirrored_kind
        )));
    }
    let avg = |m: Method| 0.5 * (first.stats(m).mean + second.stats(m).mean);
    Ok(ConditionSummary {
        kinds: [first.normal_kind, second.normal_kind],
        n: [first.n, second.n],
        ncv: avg(Method::Ncv),
        mcv: avg(Method::Mcv),
        ccv: avg(Method::Ccv),
        xi_asymmetric: 0.5 * (first.xi(Method::Ncv)? + second.xi(Method::Ncv)?),
        xi_symmetric: 0.5 * (first.xi(Method::Ccv)? + second.xi(Method::Ccv)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStridePair {
    pub step_ccv: f64,
    pub stride_ccv: f64,
    /// `stride_ccv / step_ccv`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStrideComparison {
    pub pairs: Vec<StepStridePair>,
    /// Line through the origin with step CCV on x and stride CCV on y.
    pub fit: SlopeFit,
}

/// Pairs step and stride CCV errors subject by subject.
pub fn compare_step_stride(step: &[ConditionSummary], stride: &[ConditionSummary]) -> Result<StepStrideComparison> {
    if step.len() != stride.len() {
        return Err(Error::LengthMismatch { left: step.len(), right: stride.len() });
    }
    if step.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(s) = step.iter().find(|s| !s.is_step()) {
        return Err(Error::ConfigMismatch(format!("{} summary given as a step condition", s.kinds[0])));
    }
    if let Some(s) = stride.iter().find(|s| s.is_step()) {
        return Err(Error::ConfigMismatch(format!("{} summary given as a stride condition", s.kinds[0])));
    }
    let pairs: Vec<StepStridePair> = step
        .iter()
        .zip(stride)
        .map(|(a, b)| StepStridePair { step_ccv: a.ccv, stride_ccv: b.ccv, ratio: b.ccv / a.ccv })
        .collect();
    let points: Vec<(f64, f64)> = pairs.iter().map(|p| (p.step_ccv, p.stride_ccv)).collect();
    Ok(StepStrideComparison { fit: slope_through_origin(&points)?, pairs })
}
