//! The `cyclesym/1` report document and the plot-ready tables derived from it.

use cyclesym_core::mccv::{ConditionSummary, CvResult, ErrorStats, StepStrideComparison};
use cyclesym_core::pipeline::{ConditionAnalysis, SubjectAnalysis};
use cyclesym_core::stats::{wilcoxon_signed_rank, Alternative, SlopeFit, TestMethod, TestResult};
use cyclesym_core::{compare_step_stride, slope_through_origin, Error, Method, StateVector, TransitionKind};
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "cyclesym/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventSource {
    Detected,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Step,
    Stride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub normal: TransitionKind,
    pub mirrored: TransitionKind,
    pub n: usize,
    pub n_fit: usize,
    pub n_validate: usize,
    pub ncv: ErrorStats,
    pub mcv: ErrorStats,
    pub ccv: ErrorStats,
    pub xi_ncv: f64,
    pub xi_mcv: f64,
    pub xi_ccv: f64,
}

impl OrderingReport {
    fn from_result(r: &CvResult) -> CliResult<Self> {
        Ok(Self {
            normal: r.normal_kind,
            mirrored: r.mirrored_kind,
            n: r.n,
            n_fit: r.n_fit,
            n_validate: r.n_validate,
            ncv: r.stats(Method::Ncv),
            mcv: r.stats(Method::Mcv),
            ccv: r.stats(Method::Ccv),
            xi_ncv: r.xi(Method::Ncv)?,
            xi_mcv: r.xi(Method::Mcv)?,
            xi_ccv: r.xi(Method::Ccv)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub summary: ConditionSummary,
    pub orderings: [OrderingReport; 2],
}

impl ConditionReport {
    fn from_analysis(condition: Condition, a: &ConditionAnalysis) -> CliResult<Self> {
        Ok(Self {
            condition,
            summary: a.summary.clone(),
            orderings: [OrderingReport::from_result(&a.first)?, OrderingReport::from_result(&a.second)?],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectReport {
    pub name: String,
    pub n_sections: usize,
    pub mu_l: StateVector,
    pub mu_r: StateVector,
    pub kinematic_asymmetry: f64,
    pub conditions: Vec<ConditionReport>,
}

impl SubjectReport {
    pub fn from_analysis(name: &str, a: &SubjectAnalysis) -> CliResult<Self> {
        let mut conditions = Vec::new();
        if let Some(step) = &a.step {
            conditions.push(ConditionReport::from_analysis(Condition::Step, step)?);
        }
        if let Some(stride) = &a.stride {
            conditions.push(ConditionReport::from_analysis(Condition::Stride, stride)?);
        }
        Ok(Self {
            name: name.to_string(),
            n_sections: a.n_sections,
            mu_l: a.fixed_points.mu_l.clone(),
            mu_r: a.fixed_points.mu_r.clone(),
            kinematic_asymmetry: a.kinematic_asymmetry,
            conditions,
        })
    }

    pub fn condition(&self, c: Condition) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|r| r.condition == c).map(|r| &r.summary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// Mirrored-set training predicts worse than normal-set training.
    McvGtNcv,
    NcvGtCcv,
    XiAsymmetricGtSymmetric,
    StrideCcvGtStepCcv,
}

/// One-sided paired signed-rank test across subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub condition: Option<Condition>,
    pub hypothesis: Hypothesis,
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: TestMethod,
}

impl TestReport {
    fn run(condition: Option<Condition>, hypothesis: Hypothesis, x: &[f64], y: &[f64]) -> CliResult<Self> {
        let r = match wilcoxon_signed_rank(x, y, Alternative::Greater) {
            Ok(r) => r,
            // no non-zero difference is no evidence at all
            Err(Error::AllDifferencesZero) => {
                TestResult { statistic: 0.0, p_value: 1.0, n_effective: 0, method: TestMethod::Exact }
            }
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            condition,
            hypothesis,
            statistic: r.statistic,
            p_value: r.p_value,
            n_effective: r.n_effective,
            method: r.method,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    NcvVsMcv,
    NcvVsCcv,
    Uncertainty,
    StepVsStride,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::NcvVsMcv, Family::NcvVsCcv, Family::Uncertainty, Family::StepVsStride];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::NcvVsMcv => "ncv_vs_mcv",
            Family::NcvVsCcv => "ncv_vs_ccv",
            Family::Uncertainty => "uncertainty",
            Family::StepVsStride => "step_vs_stride",
        }
    }

    /// Axis labels `(x, y)`.
    pub fn axes(self) -> (&'static str, &'static str) {
        match self {
            Family::NcvVsMcv => ("ncv", "mcv"),
            Family::NcvVsCcv => ("ncv", "ccv"),
            Family::Uncertainty => ("xi_asymmetric", "xi_symmetric"),
            Family::StepVsStride => ("step_ccv", "stride_ccv"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub family: Family,
    pub condition: Option<Condition>,
    #[serde(flatten)]
    pub fit: SlopeFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub schema: String,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub generated_unix: u64,
    pub seed: u64,
    pub n_subjects: usize,
    pub d: usize,
    pub event_source: EventSource,
    pub config: AnalysisConfig,
    pub subjects: Vec<SubjectReport>,
    pub tests: Vec<TestReport>,
    pub slopes: Vec<SlopeReport>,
    pub step_vs_stride: Option<StepStrideComparison>,
}

/// One scatter point per subject for a figure family and condition.
pub fn family_points(
    subjects: &[SubjectReport],
    family: Family,
    condition: Option<Condition>,
) -> Vec<(String, f64, f64)> {
    subjects
        .iter()
        .filter_map(|s| {
            let p = match family {
                Family::StepVsStride => (s.condition(Condition::Step)?.ccv, s.condition(Condition::Stride)?.ccv),
                _ => {
                    let c = s.condition(condition?)?;
                    match family {
                        Family::NcvVsMcv => (c.ncv, c.mcv),
                        Family::NcvVsCcv => (c.ncv, c.ccv),
                        _ => (c.xi_asymmetric, c.xi_symmetric),
                    }
                }
            };
            Some((s.name.clone(), p.0, p.1))
        })
        .collect()
}

fn conditions_present(subjects: &[SubjectReport]) -> Vec<Condition> {
    [Condition::Step, Condition::Stride]
        .into_iter()
        .filter(|c| subjects.iter().any(|s| s.condition(*c).is_some()))
        .collect()
}

/// Fitted lines for every family with data.
pub fn compute_slopes(subjects: &[SubjectReport]) -> CliResult<Vec<SlopeReport>> {
    let mut out = Vec::new();
    let mut push = |family, condition| -> CliResult<()> {
        let pts: Vec<(f64, f64)> = family_points(subjects, family, condition).into_iter().map(|p| (p.1, p.2)).collect();
        if !pts.is_empty() {
            out.push(SlopeReport { family, condition, fit: slope_through_origin(&pts)? });
        }
        Ok(())
    };
    for c in conditions_present(subjects) {
        for f in [Family::NcvVsMcv, Family::NcvVsCcv, Family::Uncertainty] {
            push(f, Some(c))?;
        }
    }
    push(Family::StepVsStride, None)?;
    Ok(out)
}

fn compute_tests(subjects: &[SubjectReport]) -> CliResult<Vec<TestReport>> {
    let mut out = Vec::new();
    for c in conditions_present(subjects) {
        let s: Vec<&ConditionSummary> = subjects.iter().filter_map(|s| s.condition(c)).collect();
        let col = |f: fn(&ConditionSummary) -> f64| s.iter().map(|x| f(x)).collect::<Vec<f64>>();
        let (ncv, mcv, ccv) = (col(|x| x.ncv), col(|x| x.mcv), col(|x| x.ccv));
        out.push(TestReport::run(Some(c), Hypothesis::McvGtNcv, &mcv, &ncv)?);
        out.push(TestReport::run(Some(c), Hypothesis::NcvGtCcv, &ncv, &ccv)?);
        out.push(TestReport::run(
            Some(c),
            Hypothesis::XiAsymmetricGtSymmetric,
            &col(|x| x.xi_asymmetric),
            &col(|x| x.xi_symmetric),
        )?);
    }
    let pts = family_points(subjects, Family::StepVsStride, None);
    if !pts.is_empty() {
        let step: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let stride: Vec<f64> = pts.iter().map(|p| p.2).collect();
        out.push(TestReport::run(None, Hypothesis::StrideCcvGtStepCcv, &stride, &step)?);
    }
    Ok(out)
}

/// Assembles the report; `analyses` are `(subject name, analysis)` pairs.
pub fn build_report(
    analyses: &[(String, SubjectAnalysis)],
    config: &AnalysisConfig,
    event_source: EventSource,
    generated_unix: u64,
) -> CliResult<SymmetryReport> {
    let d = analyses.first().map(|a| a.1.d).ok_or_else(|| CliError::validation("no subjects to analyze"))?;
    let subjects: Vec<SubjectReport> =
        analyses.iter().map(|(name, a)| SubjectReport::from_analysis(name, a)).collect::<CliResult<_>>()?;
    let step: Vec<ConditionSummary> =
        analyses.iter().filter_map(|a| a.1.step.as_ref().map(|c| c.summary.clone())).collect();
    let stride: Vec<ConditionSummary> =
        analyses.iter().filter_map(|a| a.1.stride.as_ref().map(|c| c.summary.clone())).collect();
    let step_vs_stride =
        if !step.is_empty() && step.len() == stride.len() { Some(compare_step_stride(&step, &stride)?) } else { None };
    Ok(SymmetryReport {
        schema: SCHEMA.to_string(),
        generated_unix,
        seed: config.cv.seed,
        n_subjects: subjects.len(),
        d,
        event_source,
        config: config.clone(),
        tests: compute_tests(&subjects)?,
        slopes: compute_slopes(&subjects)?,
        subjects,
        step_vs_stride,
    })
}

impl SymmetryReport {
    pub fn validate(&self) -> CliResult<()> {
        if self.schema != SCHEMA {
            return Err(CliError::validation(format!(
                "unsupported report schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        if let Some(t) = self.tests.iter().find(|t| !(0.0..=1.0).contains(&t.p_value)) {
            return Err(CliError::validation(format!("p-value {} outside [0, 1]", t.p_value)));
        }
        Ok(())
    }
}
