use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclesym_core::pipeline::{analyze_sections, state_trajectory, KindSelection, SubjectAnalysis};
use cyclesym_core::synth::{cohort_models, gen_continuous_gait, subject_seed, AlternatingModel};
use cyclesym_core::{detect_events, sample_sections, ChannelRole, EventTrain, Method, TimeSeries};
use log::info;
use serde::Serialize;

use crate::config::{self, AnalysisConfig, SimulationConfig};
use crate::csvio::{self, num};
use crate::error::{CliError, CliResult};
use crate::report::{build_report, compute_slopes, family_points, Condition, EventSource, Family, SymmetryReport};

#[derive(Debug, Parser)]
#[command(name = "cyclesym", version, about = "Bilateral symmetry of gait return-map dynamics")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort: per-subject angle/trigger CSVs, event CSVs and truth.json.
    Simulate(SimulateArgs),
    /// Run the full pipeline on recorded subjects and write report.json.
    Analyze(AnalyzeArgs),
    /// Turn report.json into plot-ready CSV tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Recording length in strides.
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Frobenius norm of the per-subject dynamical asymmetry.
    #[arg(long)]
    pub asymmetry: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindsArg {
    Step,
    Stride,
    Both,
}

impl From<KindsArg> for KindSelection {
    fn from(k: KindsArg) -> Self {
        match k {
            KindsArg::Step => KindSelection::Step,
            KindsArg::Stride => KindSelection::Stride,
            KindsArg::Both => KindSelection::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// One time-series CSV per subject.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Event CSV for each input, in the same order; skips event detection.
    #[arg(long)]
    pub events: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub kinds: Option<KindsArg>,
    /// Monte-Carlo iterations.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub v_frac: Option<f64>,
    #[arg(long)]
    pub l0: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub cutoff_hz: Option<f64>,
    #[arg(long)]
    pub filter_order: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub debounce: Option<f64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write every Monte-Carlo iteration to iterations.csv.
    #[arg(long)]
    pub iterations: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
    /// Defaults to the directory containing the report.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Report(a) => report(&a),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::validation(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn subject_name(i: usize) -> String {
    format!("subject_{:02}", i + 1)
}

#[derive(Serialize)]
struct TruthSubject<'a> {
    name: String,
    data_file: String,
    events_file: String,
    n_events: usize,
    model: &'a AlternatingModel,
}

#[derive(Serialize)]
struct Truth<'a> {
    config: &'a SimulationConfig,
    subjects: Vec<TruthSubject<'a>>,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut cfg: SimulationConfig = match &args.config {
        Some(p) => config::load(p)?,
        None => SimulationConfig::default(),
    };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.subjects {
        cfg.cohort.subjects = v;
    }
    if let Some(v) = args.cycles {
        cfg.gait.cycles = v;
    }
    if let Some(v) = args.sample_rate {
        cfg.gait.sample_rate = v;
    }
    if let Some(v) = args.sigma {
        cfg.cohort.sigma = v;
    }
    if let Some(v) = args.asymmetry {
        cfg.cohort.asymmetry = v;
    }
    let models = cohort_models(&cfg.cohort, cfg.seed)?;
    create_dir(&args.out_dir)?;
    let mut subjects = Vec::with_capacity(models.len());
    for (i, model) in models.iter().enumerate() {
        let name = subject_name(i);
        let gait = gen_continuous_gait(model, &cfg.gait, subject_seed(cfg.seed, i).wrapping_add(1))
            .map_err(|e| CliError::from_core(&name, e))?;
        let data = gait.angles.clone().concat(gait.left_trigger.clone())?.concat(gait.right_trigger.clone())?;
        let data_file = format!("{name}.csv");
        let events_file = format!("{name}_events.csv");
        csvio::write_time_series(&args.out_dir.join(&data_file), &data)?;
        csvio::write_events(&args.out_dir.join(&events_file), &gait.events)?;
        info!("{name}: {} samples, {} events", data.n_samples(), gait.events.len());
        subjects.push(TruthSubject { name, data_file, events_file, n_events: gait.events.len(), model });
    }
    write_json(&args.out_dir.join("truth.json"), &Truth { config: &cfg, subjects })
}

fn analysis_config(args: &AnalyzeArgs) -> CliResult<AnalysisConfig> {
    let mut cfg: AnalysisConfig = match &args.config {
        Some(p) => config::load(p)?,
        None => AnalysisConfig::default(),
    };
    cfg.cv.seed = args.seed;
    if !args.events.is_empty() {
        cfg.events_files = args.events.clone();
    }
    if let Some(k) = args.kinds {
        cfg.kinds = k.into();
    }
    if let Some(v) = args.m {
        cfg.cv.m = v;
    }
    if let Some(v) = args.v_frac {
        cfg.cv.v_frac = v;
    }
    if let Some(v) = args.l0 {
        cfg.l0 = v;
    }
    if let Some(v) = args.g {
        cfg.g = v;
    }
    if let Some(v) = args.cutoff_hz {
        cfg.filter.cutoff_hz = v;
    }
    if let Some(v) = args.filter_order {
        cfg.filter.order = v;
    }
    if let Some(v) = args.threshold {
        cfg.events.threshold = v;
    }
    if let Some(v) = args.debounce {
        cfg.events.debounce = v;
    }
    cfg.validate()?;
    if !cfg.events_files.is_empty() && cfg.events_files.len() != args.inputs.len() {
        return Err(CliError::validation(format!(
            "{} event files given for {} inputs",
            cfg.events_files.len(),
            args.inputs.len()
        )));
    }
    Ok(cfg)
}

fn trigger(data: &TimeSeries, name: &str, source: &str) -> CliResult<TimeSeries> {
    data.single(name).ok_or_else(|| CliError::validation(format!("{source}: trigger channel {name:?} not found")))
}

/// Reads one subject's recording and returns its section samples.
fn subject_sections(
    path: &Path,
    events: Option<&Path>,
    cfg: &AnalysisConfig,
) -> CliResult<Vec<cyclesym_core::SectionSample>> {
    let source = path.display().to_string();
    let data = csvio::read_time_series(path)?;
    let angles = data
        .with_role(ChannelRole::Angle)
        .ok_or_else(|| CliError::validation(format!("{source}: no angle channels")))?;
    let velocities = data.with_role(ChannelRole::Velocity);
    let filter = cfg.filter.spec(data.sample_rate()).map_err(|e| CliError::from_core(&source, e))?;
    let states = state_trajectory(&angles, velocities.as_ref(), &filter, cfg.l0, cfg.g)
        .map_err(|e| CliError::from_core(&source, e))?;
    let train: EventTrain = match events {
        Some(p) => csvio::read_events(p)?,
        None => {
            let left = trigger(&data, &cfg.events.left_channel, &source)?;
            let right = trigger(&data, &cfg.events.right_channel, &source)?;
            detect_events(&left, &right, &cfg.events.spec()).map_err(|e| CliError::from_core(&source, e))?
        }
    };
    sample_sections(&states, &train).map_err(|e| CliError::from_core(&source, e))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

pub fn analyze_subjects(args: &AnalyzeArgs, cfg: &AnalysisConfig) -> CliResult<Vec<(String, SubjectAnalysis)>> {
    let mut out: Vec<(String, SubjectAnalysis)> = Vec::with_capacity(args.inputs.len());
    for (i, path) in args.inputs.iter().enumerate() {
        let name = stem(path);
        let sections = subject_sections(path, cfg.events_files.get(i).map(PathBuf::as_path), cfg)?;
        let d = sections.first().map(|s| s.state.len()).unwrap_or(0);
        if let Some((first, prev)) = out.first() {
            if prev.d != d {
                return Err(CliError::validation(format!("{name} has state dimension {d}, {first} has {}", prev.d)));
            }
        }
        let mirror = cfg.mirror_for(d)?;
        let analysis =
            analyze_sections(&sections, &mirror, &cfg.cv, cfg.kinds).map_err(|e| CliError::from_core(&name, e))?;
        info!("{name}: {} sections", analysis.n_sections);
        out.push((name, analysis));
    }
    Ok(out)
}

fn write_iterations(path: &Path, analyses: &[(String, SubjectAnalysis)]) -> CliResult<()> {
    let mut rows = Vec::new();
    for (name, a) in analyses {
        for (cond, c) in [("step", &a.step), ("stride", &a.stride)] {
            let Some(c) = c else { continue };
            for r in [&c.first, &c.second] {
                for i in 0..r.ncv.len() {
                    rows.push(vec![
                        name.clone(),
                        cond.to_string(),
                        r.normal_kind.to_string(),
                        r.mirrored_kind.to_string(),
                        i.to_string(),
                        num(r.errors(Method::Ncv)[i]),
                        num(r.errors(Method::Mcv)[i]),
                        num(r.errors(Method::Ccv)[i]),
                    ]);
                }
            }
        }
    }
    csvio::write_table(path, &["subject", "condition", "normal", "mirrored", "iteration", "ncv", "mcv", "ccv"], &rows)
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<()> {
    let cfg = analysis_config(args)?;
    let analyses = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?
            .install(|| analyze_subjects(args, &cfg))?,
        None => analyze_subjects(args, &cfg)?,
    };
    let source = if cfg.events_files.is_empty() { EventSource::Detected } else { EventSource::File };
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let report = build_report(&analyses, &cfg, source, now)?;
    create_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("report.json"), &report)?;
    if args.iterations {
        write_iterations(&args.out_dir.join("iterations.csv"), &analyses)?;
    }
    Ok(())
}

pub fn load_report(path: &Path) -> CliResult<SymmetryReport> {
    let report: SymmetryReport = config::load(path)?;
    report.validate()?;
    Ok(report)
}

fn condition_label(c: Option<Condition>) -> &'static str {
    match c {
        Some(Condition::Step) => "step",
        Some(Condition::Stride) => "stride",
        None => "",
    }
}

pub fn report(args: &ReportArgs) -> CliResult<()> {
    let report = load_report(&args.report)?;
    let out_dir = match &args.out_dir {
        Some(d) => d.clone(),
        None => args.report.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    create_dir(&out_dir)?;
    let slopes = compute_slopes(&report.subjects)?;

    for family in Family::ALL {
        let (x, y) = family.axes();
        let mut rows = Vec::new();
        for fit in slopes.iter().filter(|s| s.family == family) {
            for (subject, px, py) in family_points(&report.subjects, family, fit.condition) {
                let mut row = vec![subject, condition_label(fit.condition).to_string(), num(px), num(py)];
                if family == Family::StepVsStride {
                    row.push(num(py / px));
                }
                row.extend([num(fit.fit.slope), num(fit.fit.improvement_pct)]);
                rows.push(row);
            }
        }
        let mut header = vec!["subject", "condition", x, y];
        if family == Family::StepVsStride {
            header.push("ratio");
        }
        header.extend(["slope", "improvement_pct"]);
        csvio::write_table(&out_dir.join(format!("{}.csv", family.as_str())), &header, &rows)?;
    }

    let rows: Vec<Vec<String>> = slopes
        .iter()
        .map(|s| {
            vec![
                s.family.as_str().to_string(),
                condition_label(s.condition).to_string(),
                num(s.fit.slope),
                num(s.fit.improvement_pct),
                s.fit.n.to_string(),
            ]
        })
        .collect();
    csvio::write_table(&out_dir.join("slopes.csv"), &["family", "condition", "slope", "improvement_pct", "n"], &rows)
}
