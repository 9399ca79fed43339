//! Per-session and aggregate result tables and their CSV form.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{ensemble_forecasts, select_best, PipelineMode, RawResults};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalResult};
use crate::trace::SessionTrace;

/// Session column value of aggregate rows.
pub const AGGREGATE_SESSION: &str = "AGGREGATE";

const HEADER: [&str; 14] = [
    "mode",
    "kind",
    "config_du",
    "config_dy",
    "config_hidden",
    "seed",
    "session",
    "rmse",
    "plcc",
    "srocc",
    "or",
    "n",
    "train_seconds",
    "failed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowKind {
    /// One trained (config, seed) member.
    Single,
    /// The selected configuration, metrics averaged over its seeds.
    Best,
    /// The forecast-averaging ensemble.
    Avg,
}

impl RowKind {
    fn name(self) -> &'static str {
        match self {
            RowKind::Single => "single",
            RowKind::Best => "best",
            RowKind::Avg => "avg",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub mode: PipelineMode,
    pub kind: RowKind,
    /// `(d_u, d_y, hidden)`
    pub config: Option<(usize, usize, usize)>,
    pub seed: Option<u64>,
    pub session: String,
    pub rmse: Option<f64>,
    pub plcc: Option<f64>,
    pub srocc: Option<f64>,
    pub outage_rate: Option<f64>,
    pub n: usize,
    pub train_seconds: Option<f64>,
    pub failed: bool,
}

impl ReportRow {
    pub fn is_aggregate(&self) -> bool {
        self.session == AGGREGATE_SESSION
    }

    fn from_eval(
        mode: PipelineMode,
        kind: RowKind,
        config: Option<(usize, usize, usize)>,
        seed: Option<u64>,
        session: &str,
        e: &EvalResult,
    ) -> Self {
        Self {
            mode,
            kind,
            config,
            seed,
            session: session.to_string(),
            rmse: Some(e.rmse),
            plcc: e.plcc,
            srocc: e.srocc,
            outage_rate: Some(e.outage_rate),
            n: e.n_samples,
            train_seconds: None,
            failed: false,
        }
    }
}

/// Mean wall-clock training time of one mode at one input count.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub mode: PipelineMode,
    pub n_inputs: usize,
    pub trials: usize,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub timing: Vec<TimingRow>,
}

impl ExperimentReport {
    pub fn aggregate(&self, mode: PipelineMode, kind: RowKind) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.is_aggregate() && r.mode == mode && r.kind == kind)
    }

    pub fn session_rows(
        &self,
        mode: PipelineMode,
        kind: RowKind,
    ) -> impl Iterator<Item = &ReportRow> {
        self.rows
            .iter()
            .filter(move |r| !r.is_aggregate() && r.mode == mode && r.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReportOptions {
    /// Fill `train_seconds`. Off by default so reruns are byte-identical.
    pub record_timing: bool,
}

/// Median of the present values; mean of the two middle values for even counts.
pub fn median(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().flatten().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

fn mean_present(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn triple(c: &crate::narx::NarxConfig) -> (usize, usize, usize) {
    (c.d_u, c.d_y, c.hidden)
}

/// Median rows over test sessions, derived from the per-session `best` and
/// `avg` rows of `rows`.
pub fn recompute_aggregates(rows: &[ReportRow]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(PipelineMode, RowKind), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        if !r.is_aggregate() && !r.failed && matches!(r.kind, RowKind::Best | RowKind::Avg) {
            groups.entry((r.mode, r.kind)).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .map(|((mode, kind), members)| ReportRow {
            mode,
            kind,
            config: members[0].config,
            seed: None,
            session: AGGREGATE_SESSION.to_string(),
            rmse: median(members.iter().map(|r| r.rmse)),
            plcc: median(members.iter().map(|r| r.plcc)),
            srocc: median(members.iter().map(|r| r.srocc)),
            outage_rate: median(members.iter().map(|r| r.outage_rate)),
            n: members.len(),
            train_seconds: None,
            failed: false,
        })
        .collect()
}

/// Mean training wall time per (mode, input count).
pub fn timing_summary(raw: &RawResults) -> Vec<TimingRow> {
    let mut acc: BTreeMap<(PipelineMode, usize), Vec<f64>> = BTreeMap::new();
    for ((mode, config, _), outcome) in &raw.jobs {
        if let Some(rep) = &outcome.report {
            acc.entry((*mode, config.n_channels))
                .or_default()
                .push(rep.wall_time);
        }
    }
    acc.into_iter()
        .map(|((mode, n_inputs), t)| TimingRow {
            mode,
            n_inputs,
            trials: t.len(),
            mean_seconds: t.iter().sum::<f64>() / t.len() as f64,
        })
        .collect()
}

/// Evaluates every member, the best configuration and the ensemble of each
/// mode on the test sessions, then adds median aggregate rows.
pub fn aggregate_report(
    raw: &RawResults,
    test: &[SessionTrace],
    delta: f64,
    options: ReportOptions,
) -> Result<ExperimentReport> {
    if test.iter().map(|s| &s.id).ne(raw.test_ids.iter()) {
        return Err(Error::invalid("test sessions do not match the grid run"));
    }
    let mut rows = Vec::new();
    let mut evals: BTreeMap<(PipelineMode, (usize, usize, usize), u64), Vec<EvalResult>> =
        BTreeMap::new();

    for ((mode, config, seed), outcome) in &raw.jobs {
        let seconds = options
            .record_timing
            .then(|| outcome.report.as_ref().map(|r| r.wall_time))
            .flatten();
        if !outcome.ok() {
            for s in test {
                rows.push(ReportRow {
                    mode: *mode,
                    kind: RowKind::Single,
                    config: Some(triple(config)),
                    seed: Some(*seed),
                    session: s.id.clone(),
                    rmse: None,
                    plcc: None,
                    srocc: None,
                    outage_rate: None,
                    n: 0,
                    train_seconds: seconds,
                    failed: true,
                });
            }
            continue;
        }
        let mut per_session = Vec::with_capacity(test.len());
        for (f, s) in outcome.forecasts.iter().zip(test) {
            let e = evaluate(f, s, delta)?;
            let mut row = ReportRow::from_eval(
                *mode,
                RowKind::Single,
                Some(triple(config)),
                Some(*seed),
                &s.id,
                &e,
            );
            row.train_seconds = seconds;
            rows.push(row);
            per_session.push(e);
        }
        evals.insert((*mode, triple(config), *seed), per_session);
    }

    for mode in raw.modes() {
        let Ok(best) = select_best(raw, mode) else {
            continue;
        };
        let key = triple(&best.config);
        for (i, s) in test.iter().enumerate() {
            let members: Vec<&EvalResult> = best
                .seeds
                .iter()
                .map(|seed| &evals[&(mode, key, *seed)][i])
                .collect();
            rows.push(ReportRow {
                mode,
                kind: RowKind::Best,
                config: Some(key),
                seed: None,
                session: s.id.clone(),
                rmse: mean_present(members.iter().map(|e| Some(e.rmse))),
                plcc: mean_present(members.iter().map(|e| e.plcc)),
                srocc: mean_present(members.iter().map(|e| e.srocc)),
                outage_rate: mean_present(members.iter().map(|e| Some(e.outage_rate))),
                n: members[0].n_samples,
                train_seconds: None,
                failed: false,
            });
        }
        for (f, s) in ensemble_forecasts(raw, mode)?.iter().zip(test) {
            let e = evaluate(f, s, delta)?;
            rows.push(ReportRow::from_eval(
                mode,
                RowKind::Avg,
                None,
                None,
                &s.id,
                &e,
            ));
        }
    }

    if !rows.iter().any(|r| !r.failed) {
        return Err(Error::AllFailed);
    }
    rows.extend(recompute_aggregates(&rows));
    let timing = timing_summary(raw);
    Ok(ExperimentReport { rows, timing })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_report_csv<W: Write>(writer: W, report: &ExperimentReport) -> Result<()> {
    let mut w = ::csv::Writer::from_writer(writer);
    let err = |e: ::csv::Error| Error::parse("report csv", e);
    w.write_record(HEADER).map_err(err)?;
    for r in &report.rows {
        let (du, dy, h) = match r.config {
            Some((a, b, c)) => (a.to_string(), b.to_string(), c.to_string()),
            None => Default::default(),
        };
        w.write_record([
            r.mode.name().to_string(),
            r.kind.name().to_string(),
            du,
            dy,
            h,
            opt(r.seed),
            r.session.clone(),
            opt(r.rmse),
            opt(r.plcc),
            opt(r.srocc),
            opt(r.outage_rate),
            r.n.to_string(),
            opt(r.train_seconds),
            u8::from(r.failed).to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("report csv", e))
}

pub fn parse_report_csv<R: Read>(reader: R) -> Result<Vec<ReportRow>> {
    let mut rdr = ::csv::Reader::from_reader(reader);
    let err = |e: &dyn ToString| Error::parse("report csv", e.to_string());
    let headers = rdr.headers().map_err(|e| err(&e))?;
    if headers.iter().ne(HEADER) {
        return Err(Error::parse("report csv", "unexpected header"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| err(&e))?;
        let f = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                rec[i].parse().map(Some).map_err(|e| err(&e))
            }
        };
        let u = |i: usize| -> Result<Option<usize>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                rec[i].parse().map(Some).map_err(|e| err(&e))
            }
        };
        let kind = match &rec[1] {
            "single" => RowKind::Single,
            "best" => RowKind::Best,
            "avg" => RowKind::Avg,
            other => {
                return Err(Error::parse(
                    "report csv",
                    format!("unknown kind `{other}`"),
                ))
            }
        };
        let config = match (u(2)?, u(3)?, u(4)?) {
            (Some(a), Some(b), Some(c)) => Some((a, b, c)),
            _ => None,
        };
        rows.push(ReportRow {
            mode: rec[0].parse()?,
            kind,
            config,
            seed: if rec[5].is_empty() {
                None
            } else {
                Some(rec[5].parse().map_err(|e| err(&e))?)
            },
            session: rec[6].to_string(),
            rmse: f(7)?,
            plcc: f(8)?,
            srocc: f(9)?,
            outage_rate: f(10)?,
            n: u(11)?.unwrap_or(0),
            train_seconds: f(12)?,
            failed: &rec[13] == "1",
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(kind: RowKind, session: &str, srocc: Option<f64>) -> ReportRow {
        ReportRow {
            mode: PipelineMode::Ol,
            kind,
            config: Some((4, 4, 5)),
            seed: None,
            session: session.into(),
            rmse: Some(1.0),
            plcc: srocc,
            srocc,
            outage_rate: Some(10.0),
            n: 12,
            train_seconds: None,
            failed: false,
        }
    }

    #[test]
    fn medians() {
        assert_eq!(median([Some(0.8), Some(1.0), Some(0.9)]), Some(0.9));
        assert_eq!(median([Some(1.0), None, Some(3.0)]), Some(2.0));
        assert_eq!(median([None]), None);
    }

    #[test]
    fn single_session_aggregate_equals_session() {
        let rows = vec![row(RowKind::Avg, "s1", Some(0.7))];
        let agg = recompute_aggregates(&rows);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].srocc, Some(0.7));
        assert_eq!(agg[0].session, AGGREGATE_SESSION);
    }

    #[test]
    fn csv_round_trip_and_reaggregation() {
        let mut rows = vec![
            row(RowKind::Best, "a", Some(0.8)),
            row(RowKind::Best, "b", Some(0.9)),
            row(RowKind::Best, "c", Some(1.0 / 3.0)),
            row(RowKind::Avg, "a", None),
            ReportRow {
                seed: Some(3),
                kind: RowKind::Single,
                failed: true,
                rmse: None,
                ..row(RowKind::Single, "a", None)
            },
        ];
        rows.extend(recompute_aggregates(&rows));
        let report = ExperimentReport {
            rows,
            timing: vec![],
        };
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &report).unwrap();
        let parsed = parse_report_csv(buf.as_slice()).unwrap();
        assert_eq!(parsed, report.rows);
        let non_agg: Vec<ReportRow> = parsed
            .iter()
            .filter(|r| !r.is_aggregate())
            .cloned()
            .collect();
        let again = recompute_aggregates(&non_agg);
        let original: Vec<&ReportRow> = parsed.iter().filter(|r| r.is_aggregate()).collect();
        assert_eq!(again.iter().collect::<Vec<_>>(), original);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mode,kind,config_du,config_dy,config_hidden,seed,session,rmse,plcc,srocc,or,n,train_seconds,failed\n"));
    }
}
