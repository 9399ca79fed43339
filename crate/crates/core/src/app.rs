//! Command-line front end.
//!
//! Failures print one line `error[<code>]: <message>` on stderr and map to
//! exit codes 2 (usage), 3 (data validation), 4 (numerical) and 5 (I/O).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, ErrorClass, Result};
use crate::forecast::LoopMode;
use crate::harness::{
    aggregate_report, ensemble_forecasts, run_grid, select_best, write_report_csv, GridSpec,
    ReportOptions, RowKind, TimingRow,
};
use crate::lm::{train_model, LmSettings};
use crate::manifest::Manifest;
use crate::metrics::evaluate_slices;
use crate::narx::{forward_closed_loop, forward_open_loop, load_model, save_model, NarxConfig};
use crate::synth::{synth_generate, SynthSpec};
use crate::trace::csv::{load_trace, save_trace};
use crate::trace::{split_by_content, SessionTrace};
use crate::vqa::{extract_trace, read_luma_frames};

#[derive(Debug, Parser)]
#[command(
    name = "qoe-narx",
    version,
    about = "Continuous-time QoE prediction with NARX ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from a random NARX teacher.
    Synth(SynthArgs),
    /// Compute PSNR/SSIM/GMSD traces for the manifest's raw videos.
    Extract(ExtractArgs),
    /// Train one network.
    Train(TrainArgs),
    /// Forecast one session with a saved network.
    Predict(PredictArgs),
    /// Sweep a configuration grid and write the results table.
    Gridsearch(GridArgs),
    /// Score a predicted trace against a subjective trace.
    Evaluate(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator settings (TOML); defaults when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the updated manifest; defaults to rewriting the input.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainMode {
    Ol,
    ClTrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictMode {
    Ol,
    Cl,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub du: usize,
    #[arg(long)]
    pub dy: usize,
    #[arg(long)]
    pub hidden: usize,
    #[arg(long, value_enum, default_value = "ol")]
    pub mode: TrainMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Contents held out of training.
    #[arg(long, value_delimiter = ',')]
    pub test_contents: Vec<String>,
    /// Channel subset, in order; all manifest channels when omitted.
    #[arg(long, value_delimiter = ',')]
    pub channels: Vec<String>,
    /// Optimizer settings (TOML).
    #[arg(long)]
    pub lm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub session: String,
    #[arg(long, value_enum, default_value = "cl")]
    pub mode: PredictMode,
    /// Warm-up trace for closed-loop forecasts of sessions without scores.
    #[arg(long)]
    pub warmup: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Grid file (TOML); the default grid when omitted.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Outage threshold in score units; 10% of the training score range
    /// when omitted.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Worker threads; all available cores when omitted.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Record training wall time in the report and write timing.csv.
    #[arg(long)]
    pub timing: bool,
    /// Write best-member and ensemble forecasts as trace CSVs.
    #[arg(long)]
    pub dump_forecasts: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub delta: f64,
    /// Leading samples excluded from scoring.
    #[arg(long, default_value_t = 0)]
    pub warmup: usize,
}

/// Grid file contents: the sweep plus experiment settings.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct GridFile {
    #[serde(flatten)]
    pub grid: GridSpec,
    /// Held-out contents; the last content id when empty.
    pub test_contents: Vec<String>,
    /// Channel subsets to sweep separately; all channels when empty.
    pub channel_sets: Vec<Vec<String>>,
    pub lm: LmSettings,
}

impl GridFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse("grid file", e))
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => 2,
        ErrorClass::Validation => 3,
        ErrorClass::Numerical => 4,
        ErrorClass::Io => 5,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return 2;
        }
    };
    match run(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code_name());
            exit_code(e.class())
        }
    }
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Extract(a) => cmd_extract(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Gridsearch(a) => cmd_gridsearch(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
    }
}

fn emit(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("stdout", e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = match &args.spec {
        Some(p) => SynthSpec::load(p)?,
        None => SynthSpec::default(),
    };
    create_dir(&args.out)?;
    let manifest = synth_generate(&spec, &args.out)?;
    emit(
        out,
        format!(
            "sessions={} manifest={}",
            manifest.sessions.len(),
            args.out.join("manifest.toml").display()
        ),
    )
}

pub fn cmd_extract(args: &ExtractArgs, out: &mut dyn Write) -> Result<()> {
    let mut manifest = Manifest::load(&args.manifest)?;
    let rel_dir = PathBuf::from("extracted");
    create_dir(&manifest.resolve(&rel_dir))?;
    let mut written = 0;
    for raw in manifest.raw_videos.clone() {
        let reference = read_luma_frames(&manifest.resolve(&raw.ref_path), raw.width, raw.height)?;
        let distorted = read_luma_frames(&manifest.resolve(&raw.dist_path), raw.width, raw.height)?;
        for metric in raw.frame_metrics()? {
            let series = extract_trace(&reference, &distorted, metric, raw.fps)?;
            let rel = rel_dir.join(format!("{}_{}.csv", raw.session, metric.name()));
            save_trace(&manifest.resolve(&rel), &series)?;
            let entry = manifest
                .sessions
                .iter_mut()
                .find(|s| s.id == raw.session)
                .expect("validated session reference");
            entry.channels.insert(metric.name().to_string(), rel);
            written += 1;
        }
    }
    let target = args.out.clone().unwrap_or_else(|| args.manifest.clone());
    if let Some(dir) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
        // keep paths valid when the manifest moves
        if std::fs::canonicalize(dir).ok() != std::fs::canonicalize(&manifest.base_dir).ok() {
            return Err(Error::invalid(
                "--out must be in the same directory as the manifest",
            ));
        }
    }
    manifest.save(&target)?;
    emit(
        out,
        format!("traces={written} manifest={}", target.display()),
    )
}

fn select(sessions: &[SessionTrace], channels: &[String]) -> Result<Vec<SessionTrace>> {
    if channels.is_empty() {
        return Ok(sessions.to_vec());
    }
    sessions
        .iter()
        .map(|s| s.select_channels(channels))
        .collect()
}

fn load_lm(path: Option<&Path>) -> Result<LmSettings> {
    let Some(path) = path else {
        return Ok(LmSettings::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::parse("optimizer settings", e))
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let sessions = manifest.load_sessions()?;
    let train: Vec<SessionTrace> = if args.test_contents.is_empty() {
        sessions
    } else {
        split_by_content(&sessions, &args.test_contents)?.0
    };
    let train = select(&train, &args.channels)?;
    let n_channels = train.first().ok_or(Error::Empty)?.channels.len();
    let config = NarxConfig::new(n_channels, args.du, args.dy, args.hidden)?;
    let mode = match args.mode {
        TrainMode::Ol => LoopMode::Open,
        TrainMode::ClTrain => LoopMode::Closed,
    };
    let settings = load_lm(args.lm.as_deref())?;
    let (model, report) = train_model(&config, args.seed, mode, &train, &settings)?;
    if report.diverged() {
        return Err(Error::NonFinite {
            what: "training loss".into(),
        });
    }
    save_model(&args.model_out, &model)?;
    emit(
        out,
        format!(
            "final_loss={} epochs={} stop={:?} model={}",
            report.final_loss,
            report.epochs_run,
            report.stop_reason,
            args.model_out.display()
        ),
    )
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&args.model)?;
    let manifest = Manifest::load(&args.manifest)?;
    let session = manifest.load_session(manifest.session(&args.session)?)?;
    let expected: BTreeSet<&str> = model.channel_names.iter().map(String::as_str).collect();
    let found: BTreeSet<&str> = session.channel_names().into_iter().collect();
    if expected != found {
        return Err(Error::ChannelMismatch {
            expected: model.channel_names.clone(),
            found: found.iter().map(|s| s.to_string()).collect(),
        });
    }
    let forecast = match args.mode {
        PredictMode::Ol => forward_open_loop(&model, &session)?,
        PredictMode::Cl => match &args.warmup {
            Some(p) => forward_closed_loop(&model, &session, load_trace(p)?.values())?,
            None => forward_closed_loop(&model, &session, session.subjective()?.values())?,
        },
    };
    save_trace(&args.out, &forecast.values)?;
    emit(
        out,
        format!(
            "samples={} warmup={} out={}",
            forecast.len(),
            forecast.warmup_len,
            args.out.display()
        ),
    )
}

fn default_delta(train: &[SessionTrace]) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in train {
        for &v in s.subjective()?.values() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let delta = 0.1 * (hi - lo);
    if !(delta > 0.0) {
        return Err(Error::ConstantChannel("subjective".into()));
    }
    Ok(delta)
}

fn merge_timing(rows: Vec<TimingRow>) -> Vec<TimingRow> {
    let mut acc: BTreeMap<(crate::harness::PipelineMode, usize), (usize, f64)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.mode, r.n_inputs)).or_default();
        e.0 += r.trials;
        e.1 += r.mean_seconds * r.trials as f64;
    }
    acc.into_iter()
        .map(|((mode, n_inputs), (trials, total))| TimingRow {
            mode,
            n_inputs,
            trials,
            mean_seconds: total / trials as f64,
        })
        .collect()
}

fn write_timing_csv(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut w = ::csv::Writer::from_path(path).map_err(|e| Error::parse("timing csv", e))?;
    let err = |e: ::csv::Error| Error::parse("timing csv", e);
    w.write_record(["mode", "n_inputs", "trials", "mean_seconds"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.mode.name().to_string(),
            r.n_inputs.to_string(),
            r.trials.to_string(),
            r.mean_seconds.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

pub fn cmd_gridsearch(args: &GridArgs, out: &mut dyn Write) -> Result<()> {
    let file = match &args.grid {
        Some(p) => GridFile::load(p)?,
        None => GridFile::default(),
    };
    file.grid.validate()?;
    file.lm.validate()?;
    if args.jobs == Some(0) {
        return Err(Error::invalid("--jobs must be >= 1"));
    }
    let manifest = Manifest::load(&args.manifest)?;
    let sessions = manifest.load_sessions()?;
    let test_contents = if file.test_contents.is_empty() {
        let contents: BTreeSet<&str> = sessions.iter().map(|s| s.source_content.as_str()).collect();
        vec![contents.last().ok_or(Error::Empty)?.to_string()]
    } else {
        file.test_contents.clone()
    };
    let (train, test) = split_by_content(&sessions, &test_contents)?;
    let delta = match args.delta {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(Error::invalid(format!("--delta must be > 0, got {d}"))),
        None => default_delta(&train)?,
    };
    let sets: Vec<Vec<String>> = if file.channel_sets.is_empty() {
        vec![Vec::new()]
    } else {
        file.channel_sets.clone()
    };
    create_dir(&args.out)?;
    let mut timing = Vec::new();
    let mut any_ok = false;
    let mut last_err = None;
    for set in &sets {
        let dir = if file.channel_sets.is_empty() {
            args.out.clone()
        } else {
            args.out.join(set.join("+"))
        };
        create_dir(&dir)?;
        let train_set = select(&train, set)?;
        let test_set = select(&test, set)?;
        let raw = run_grid(&train_set, &test_set, &file.grid, &file.lm, args.jobs)?;
        let report = match aggregate_report(
            &raw,
            &test_set,
            delta,
            ReportOptions {
                record_timing: args.timing,
            },
        ) {
            Ok(r) => r,
            Err(e @ Error::AllFailed) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        any_ok = true;
        let path = dir.join("report.csv");
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_report_csv(std::io::BufWriter::new(f), &report)?;
        timing.extend(report.timing.iter().cloned());
        let label = if set.is_empty() {
            raw.channel_names.join("+")
        } else {
            set.join("+")
        };
        for mode in raw.modes() {
            for kind in [RowKind::Best, RowKind::Avg] {
                if let Some(r) = report.aggregate(mode, kind) {
                    emit(
                        out,
                        format!(
                            "channels={label} mode={} kind={} rmse={} plcc={} srocc={} or={}",
                            mode.name(),
                            if kind == RowKind::Best { "best" } else { "avg" },
                            fmt_opt(r.rmse),
                            fmt_opt(r.plcc),
                            fmt_opt(r.srocc),
                            fmt_opt(r.outage_rate)
                        ),
                    )?;
                }
            }
        }
        if args.dump_forecasts {
            let fdir = dir.join("forecasts");
            create_dir(&fdir)?;
            for mode in raw.modes() {
                let Ok(best) = select_best(&raw, mode) else {
                    continue;
                };
                for seed in &best.seeds {
                    let outcome = &raw.jobs[&(mode, best.config, *seed)];
                    for f in &outcome.forecasts {
                        let name = format!("{}_best_seed{seed}_{}.csv", mode.name(), f.session_id);
                        save_trace(&fdir.join(name), &f.values)?;
                    }
                }
                for f in ensemble_forecasts(&raw, mode)? {
                    save_trace(
                        &fdir.join(format!("{}_avg_{}.csv", mode.name(), f.session_id)),
                        &f.values,
                    )?;
                }
            }
        }
    }
    if !any_ok {
        return Err(last_err.unwrap_or(Error::AllFailed));
    }
    if args.timing {
        write_timing_csv(&args.out.join("timing.csv"), &merge_timing(timing))?;
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let pred = load_trace(&args.pred)?;
    let truth = load_trace(&args.truth)?;
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if (pred.dt() - truth.dt()).abs() > 1e-9 * truth.dt() || (pred.t0() - truth.t0()).abs() > 1e-9 {
        return Err(Error::invalid(
            "prediction and truth are sampled on different grids",
        ));
    }
    if args.warmup >= pred.len() {
        return Err(Error::TooShort {
            len: pred.len(),
            t_min: args.warmup,
        });
    }
    let w = args.warmup;
    let r = evaluate_slices(&pred.values()[w..], &truth.values()[w..], args.delta)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    emit(out, "rmse,plcc,srocc,or,n")?;
    emit(
        out,
        format!(
            "{},{},{},{},{}",
            r.rmse,
            opt(r.plcc),
            opt(r.srocc),
            r.outage_rate,
            r.n_samples
        ),
    )
}
