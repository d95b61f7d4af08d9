//! Paired Wilcoxon signed-rank test and least-squares slopes through the
//! origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// x tends to exceed y.
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// W⁺, the rank sum of positive differences.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: TestMethod,
}

/// Largest number of nonzero differences handled by exact enumeration.
pub const EXACT_MAX_N: usize = 20;

/// Nonzero differences `x − y` with their mid-ranks by absolute value.
fn signed_ranks(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("test input".into()));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::AllDifferencesZero);
    }
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks = vec![0.0; diffs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && diffs[order[end]].abs() == diffs[order[start]].abs() {
            end += 1;
        }
        // positions start..end share ranks start+1..=end
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    Ok((diffs, ranks))
}

pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestResult> {
    let method = if count_nonzero(x, y) <= EXACT_MAX_N { TestMethod::Exact } else { TestMethod::NormalApprox };
    wilcoxon_signed_rank_with(x, y, alternative, method)
}

fn count_nonzero(x: &[f64], y: &[f64]) -> usize {
    x.iter().zip(y).filter(|(a, b)| a != b).count()
}

/// Same test with the p-value method chosen explicitly. Exact mode is limited
/// to [`EXACT_MAX_N`] nonzero differences.
pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    method: TestMethod,
) -> Result<TestResult> {
    let (diffs, ranks) = signed_ranks(x, y)?;
    let n = diffs.len();
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let p_value = match method {
        TestMethod::Exact => {
            if n > EXACT_MAX_N {
                return Err(Error::InvalidParameter(format!(
                    "exact enumeration limited to {EXACT_MAX_N} differences, have {n}"
                )));
            }
            exact_p(&ranks, w_plus, alternative)
        }
        TestMethod::NormalApprox => normal_p(&ranks, w_plus, alternative),
    };
    Ok(TestResult { statistic: w_plus, p_value: p_value.clamp(0.0, 1.0), n_effective: n, method })
}

/// Exact tail probabilities of W⁺ over all 2ⁿ equally likely sign patterns.
/// Mid-ranks are half-integers, so sums are tracked in doubled units.
fn exact_p(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let observed = (2.0 * w_plus).round() as usize;
    let patterns = (1u64 << ranks.len()) as f64;
    let upper = counts[observed..].iter().sum::<u64>() as f64 / patterns;
    let lower = counts[..=observed].iter().sum::<u64>() as f64 / patterns;
    match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

fn normal_p(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let sd = var.sqrt();
    match alternative {
        Alternative::Greater => upper_tail((w_plus - mean - 0.5) / sd),
        Alternative::Less => 1.0 - upper_tail((w_plus - mean + 0.5) / sd),
        Alternative::TwoSided => (2.0 * upper_tail(((w_plus - mean).abs() - 0.5).max(0.0) / sd)).min(1.0),
    }
}

/// P(Z > z) for a standard normal Z.
fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// `(1 − slope) · 100`.
    pub improvement_pct: f64,
    pub n: usize,
}

/// Least-squares line through the origin, `y ≈ m x`, with `m = Σxy / Σx²`.
pub fn slope_through_origin(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all x values are zero".into()));
    }
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit { slope, improvement_pct: (1.0 - slope) * 100.0, n: points.len() })
}
