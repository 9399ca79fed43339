//! Grid search over NARX configurations and initializations, "best"
//! single-predictor selection and forecast-averaging ensembles.

mod ensemble;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{Forecast, LoopMode};
use crate::lm::{train_model, LmSettings, TrainReport};
use crate::metrics;
use crate::narx::{forward_closed_loop, forward_open_loop, NarxConfig, NarxModel};
use crate::trace::SessionTrace;

pub use ensemble::average_forecasts;
pub use report::{
    aggregate_report, median, parse_report_csv, recompute_aggregates, timing_summary,
    write_report_csv, ExperimentReport, ReportOptions, ReportRow, RowKind, TimingRow,
    AGGREGATE_SESSION,
};

/// How a grid member is trained and then run on the test sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PipelineMode {
    /// Open-loop training, open-loop forecasts.
    #[serde(rename = "ol")]
    Ol,
    /// Open-loop training, closed-loop forecasts.
    #[serde(rename = "cl-eval")]
    ClEval,
    /// Closed-loop training, closed-loop forecasts.
    #[serde(rename = "cl-train")]
    ClTrain,
}

impl PipelineMode {
    pub fn name(self) -> &'static str {
        match self {
            PipelineMode::Ol => "ol",
            PipelineMode::ClEval => "cl-eval",
            PipelineMode::ClTrain => "cl-train",
        }
    }

    pub fn training(self) -> LoopMode {
        match self {
            PipelineMode::Ol | PipelineMode::ClEval => LoopMode::Open,
            PipelineMode::ClTrain => LoopMode::Closed,
        }
    }

    pub fn forecasting(self) -> LoopMode {
        match self {
            PipelineMode::Ol => LoopMode::Open,
            PipelineMode::ClEval | PipelineMode::ClTrain => LoopMode::Closed,
        }
    }
}

impl std::str::FromStr for PipelineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ol" => Ok(PipelineMode::Ol),
            "cl-eval" => Ok(PipelineMode::ClEval),
            "cl-train" => Ok(PipelineMode::ClTrain),
            other => Err(Error::invalid(format!("unknown mode `{other}`"))),
        }
    }
}

/// The configuration sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub d_u: Vec<usize>,
    pub d_y: Vec<usize>,
    pub hidden: Vec<usize>,
    pub seeds: Vec<u64>,
    pub modes: Vec<PipelineMode>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            d_u: vec![4, 6, 8, 10],
            d_y: vec![4, 6, 8, 10],
            hidden: vec![5, 8, 10],
            seeds: (0..5).collect(),
            modes: vec![
                PipelineMode::Ol,
                PipelineMode::ClEval,
                PipelineMode::ClTrain,
            ],
        }
    }
}

fn distinct<T: Ord>(v: &[T]) -> bool {
    v.iter().collect::<BTreeSet<_>>().len() == v.len()
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d_u.is_empty()
            || self.d_y.is_empty()
            || self.hidden.is_empty()
            || self.seeds.is_empty()
            || self.modes.is_empty()
        {
            return Err(Error::invalid("every grid list must be non-empty"));
        }
        if !distinct(&self.seeds) {
            return Err(Error::invalid("grid seeds must be distinct"));
        }
        if !distinct(&self.modes)
            || !distinct(&self.d_u)
            || !distinct(&self.d_y)
            || !distinct(&self.hidden)
        {
            return Err(Error::invalid("grid values must be distinct"));
        }
        if self.d_y.contains(&0) || self.hidden.contains(&0) {
            return Err(Error::invalid("d_y and hidden must be >= 1"));
        }
        Ok(())
    }

    /// Every configuration in lexicographic `(d_u, d_y, hidden)` order.
    pub fn configs(&self, n_channels: usize) -> Vec<NarxConfig> {
        let mut out = Vec::new();
        for &d_u in &self.d_u {
            for &d_y in &self.d_y {
                for &hidden in &self.hidden {
                    out.push(NarxConfig {
                        n_channels,
                        d_u,
                        d_y,
                        hidden,
                    });
                }
            }
        }
        out.sort_by_key(|c| (c.d_u, c.d_y, c.hidden));
        out
    }
}

/// Outcome of one (mode, config, seed) grid member.
#[derive(Debug, Clone)]
pub struct JobOutcome {
    pub report: Option<TrainReport>,
    /// RMSE (score units) of this mode's forecasts on the training sessions.
    pub train_rmse: f64,
    /// One forecast per test session, in test-set order.
    pub forecasts: Vec<Forecast>,
    /// Why the member is excluded, when it is.
    pub failure: Option<String>,
}

impl JobOutcome {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }

    fn failed(report: Option<TrainReport>, why: String) -> Self {
        Self {
            report,
            train_rmse: f64::NAN,
            forecasts: Vec::new(),
            failure: Some(why),
        }
    }
}

pub type JobKey = (PipelineMode, NarxConfig, u64);

/// Everything a grid run produced, keyed for order-independent access.
#[derive(Debug, Clone)]
pub struct RawResults {
    pub jobs: BTreeMap<JobKey, JobOutcome>,
    pub test_ids: Vec<String>,
    pub channel_names: Vec<String>,
}

impl RawResults {
    pub fn modes(&self) -> Vec<PipelineMode> {
        self.jobs
            .keys()
            .map(|k| k.0)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn mode_jobs(&self, mode: PipelineMode) -> impl Iterator<Item = (&JobKey, &JobOutcome)> {
        self.jobs.iter().filter(move |(k, _)| k.0 == mode)
    }
}

fn forecast_session(model: &NarxModel, session: &SessionTrace, mode: LoopMode) -> Result<Forecast> {
    match mode {
        LoopMode::Open => forward_open_loop(model, session),
        LoopMode::Closed => forward_closed_loop(model, session, session.subjective()?.values()),
    }
}

fn pooled_rmse(model: &NarxModel, sessions: &[SessionTrace], mode: LoopMode) -> Result<f64> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for s in sessions {
        let f = forecast_session(model, s, mode)?;
        pred.extend_from_slice(&f.values.values()[f.warmup_len..]);
        truth.extend_from_slice(&s.subjective()?.values()[f.warmup_len..]);
    }
    metrics::rmse(&pred, &truth)
}

fn run_modes(
    model: &NarxModel,
    report: &TrainReport,
    modes: &[PipelineMode],
    train: &[SessionTrace],
    test: &[SessionTrace],
) -> Vec<JobOutcome> {
    modes
        .iter()
        .map(|&mode| {
            let attempt = || -> Result<JobOutcome> {
                let loop_mode = mode.forecasting();
                let train_rmse = pooled_rmse(model, train, loop_mode)?;
                let forecasts = test
                    .iter()
                    .map(|s| forecast_session(model, s, loop_mode))
                    .collect::<Result<Vec<_>>>()?;
                let finite = train_rmse.is_finite()
                    && forecasts
                        .iter()
                        .all(|f| f.values.values().iter().all(|v| v.is_finite()));
                if !finite {
                    return Ok(JobOutcome::failed(
                        Some(report.clone()),
                        "non-finite forecast".into(),
                    ));
                }
                Ok(JobOutcome {
                    report: Some(report.clone()),
                    train_rmse,
                    forecasts,
                    failure: None,
                })
            };
            attempt().unwrap_or_else(|e| JobOutcome::failed(Some(report.clone()), e.to_string()))
        })
        .collect()
}

/// Trains every (config, seed) of `grid` on `train` and forecasts every
/// session of `test` in each requested mode.
///
/// Open-loop-trained networks are shared by the `ol` and `cl-eval` modes.
/// Members that fail to train or produce non-finite output are kept with a
/// failure note. `jobs` bounds worker threads; results do not depend on it.
pub fn run_grid(
    train: &[SessionTrace],
    test: &[SessionTrace],
    grid: &GridSpec,
    lm: &LmSettings,
    jobs: Option<usize>,
) -> Result<RawResults> {
    grid.validate()?;
    lm.validate()?;
    let first = train.first().ok_or(Error::Empty)?;
    let channel_names: Vec<String> = first
        .channel_names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let train_contents: BTreeSet<&str> = train.iter().map(|s| s.source_content.as_str()).collect();
    if let Some(s) = test
        .iter()
        .find(|s| train_contents.contains(s.source_content.as_str()))
    {
        return Err(Error::invalid(format!(
            "test session `{}` shares content `{}` with the training set",
            s.id, s.source_content
        )));
    }
    for s in test {
        s.subjective()?;
        for name in &channel_names {
            s.channel(name).ok_or_else(|| Error::MissingChannel {
                session: s.id.clone(),
                channel: name.clone(),
            })?;
        }
    }

    let mut tasks: Vec<(LoopMode, NarxConfig, u64, Vec<PipelineMode>)> = Vec::new();
    for config in grid.configs(channel_names.len()) {
        for &seed in &grid.seeds {
            for training in [LoopMode::Open, LoopMode::Closed] {
                let modes: Vec<PipelineMode> = grid
                    .modes
                    .iter()
                    .copied()
                    .filter(|m| m.training() == training)
                    .collect();
                if !modes.is_empty() {
                    tasks.push((training, config, seed, modes));
                }
            }
        }
    }

    let work = |task: &(LoopMode, NarxConfig, u64, Vec<PipelineMode>)| {
        let (training, config, seed, modes) = task;
        let outcomes = match train_model(config, *seed, *training, train, lm) {
            Ok((model, report)) if !report.diverged() => {
                run_modes(&model, &report, modes, train, test)
            }
            Ok((_, report)) => modes
                .iter()
                .map(|_| JobOutcome::failed(Some(report.clone()), "training diverged".into()))
                .collect(),
            Err(e) => modes
                .iter()
                .map(|_| JobOutcome::failed(None, e.to_string()))
                .collect(),
        };
        modes
            .iter()
            .zip(outcomes)
            .map(|(&m, o)| ((m, *config, *seed), o))
            .collect::<Vec<_>>()
    };

    let results: Vec<Vec<(JobKey, JobOutcome)>> = match jobs {
        Some(1) => tasks.iter().map(work).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?
            .install(|| tasks.par_iter().map(work).collect()),
        None => tasks.par_iter().map(work).collect(),
    };

    Ok(RawResults {
        jobs: results.into_iter().flatten().collect(),
        test_ids: test.iter().map(|s| s.id.clone()).collect(),
        channel_names,
    })
}

/// The configuration chosen as the single "best" predictor of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BestSelection {
    pub mode: PipelineMode,
    pub config: NarxConfig,
    /// Seeds of that configuration that trained successfully.
    pub seeds: Vec<u64>,
    pub mean_train_rmse: f64,
}

/// Picks the configuration with the lowest training RMSE averaged over its
/// successful seeds; ties go to the lexicographically smallest
/// `(d_u, d_y, hidden)`.
pub fn select_best(raw: &RawResults, mode: PipelineMode) -> Result<BestSelection> {
    let mut per_config: BTreeMap<(usize, usize, usize), (NarxConfig, Vec<u64>, Vec<f64>)> =
        BTreeMap::new();
    for ((_, config, seed), outcome) in raw.mode_jobs(mode) {
        if outcome.ok() {
            let entry = per_config
                .entry((config.d_u, config.d_y, config.hidden))
                .or_insert_with(|| (*config, Vec::new(), Vec::new()));
            entry.1.push(*seed);
            entry.2.push(outcome.train_rmse);
        }
    }
    let mut best: Option<BestSelection> = None;
    for (config, seeds, rmses) in per_config.into_values() {
        let mean = rmses.iter().sum::<f64>() / rmses.len() as f64;
        if best.as_ref().is_none_or(|b| mean < b.mean_train_rmse) {
            best = Some(BestSelection {
                mode,
                config,
                seeds,
                mean_train_rmse: mean,
            });
        }
    }
    best.ok_or(Error::AllFailed)
}

/// Ensemble forecast per test session: the mean over every successful
/// (config, seed) member of `mode`.
pub fn ensemble_forecasts(raw: &RawResults, mode: PipelineMode) -> Result<Vec<Forecast>> {
    let members: Vec<&JobOutcome> = raw
        .mode_jobs(mode)
        .map(|(_, o)| o)
        .filter(|o| o.ok())
        .collect();
    if members.is_empty() {
        return Err(Error::AllFailed);
    }
    (0..raw.test_ids.len())
        .map(|i| {
            let set: Vec<Forecast> = members.iter().map(|o| o.forecasts[i].clone()).collect();
            average_forecasts(&set)
        })
        .collect()
}
