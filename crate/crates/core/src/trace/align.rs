use serde::{Deserialize, Serialize};

use super::{SessionTrace, TimeSeries};
use crate::error::{Error, Result};

/// How source samples inside one output window are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Mean,
    Min,
    Last,
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "min" => Ok(Pooling::Min),
            "last" => Ok(Pooling::Last),
            other => Err(Error::invalid(format!("unknown pooling `{other}`"))),
        }
    }
}

// Timestamps are products of floating dt; a sample sitting a few ulps below
// a window edge still belongs to the next window.
const EDGE_TOL: f64 = 1e-9;

fn window_of(t: f64, target_dt: f64) -> i64 {
    (t / target_dt + EDGE_TOL).floor() as i64
}

fn pool(window: &[f64], pooling: Pooling) -> f64 {
    match pooling {
        // Offset form keeps constant windows exact.
        Pooling::Mean => {
            let first = window[0];
            let dev: f64 = window.iter().map(|v| v - first).sum();
            first + dev / window.len() as f64
        }
        Pooling::Min => window.iter().copied().fold(f64::INFINITY, f64::min),
        Pooling::Last => window[window.len() - 1],
    }
}

fn resample(
    series: &TimeSeries,
    target_dt: f64,
    k_first: i64,
    n_windows: usize,
    pooling: Pooling,
    what: &str,
) -> Result<TimeSeries> {
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n_windows];
    for (i, &v) in series.values().iter().enumerate() {
        let w = window_of(series.time(i), target_dt) - k_first;
        if w >= 0 && (w as usize) < n_windows {
            buckets[w as usize].push(v);
        }
    }
    let mut out = Vec::with_capacity(n_windows);
    for bucket in &buckets {
        if bucket.is_empty() {
            return Err(Error::EmptyOverlap { target_dt });
        }
        if bucket.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: what.to_string(),
            });
        }
        out.push(pool(bucket, pooling));
    }
    TimeSeries::new(out, target_dt, k_first as f64 * target_dt)
}

/// Resamples every series of `raw` onto a common `target_dt` grid.
///
/// Output window `k` covers `[k*target_dt, (k+1)*target_dt)`. Only windows
/// lying entirely inside the span covered by all series are kept, so
/// trailing partial windows are dropped.
pub fn align_session(raw: &SessionTrace, target_dt: f64, pooling: Pooling) -> Result<SessionTrace> {
    if !(target_dt > 0.0 && target_dt.is_finite()) {
        return Err(Error::invalid(format!(
            "target_dt must be > 0, got {target_dt}"
        )));
    }
    let all: Vec<&TimeSeries> = raw
        .channels
        .iter()
        .map(|(_, s)| s)
        .chain(raw.subjective.iter())
        .collect();
    if all.iter().any(|s| s.is_empty()) {
        return Err(Error::EmptyOverlap { target_dt });
    }
    let max_dt = all.iter().map(|s| s.dt()).fold(0.0, f64::max);
    if target_dt < max_dt * (1.0 - EDGE_TOL) {
        return Err(Error::invalid(format!(
            "target_dt {target_dt} is finer than an input interval {max_dt}"
        )));
    }
    let start = all.iter().map(|s| s.t0()).fold(f64::NEG_INFINITY, f64::max);
    let end = all.iter().map(|s| s.end()).fold(f64::INFINITY, f64::min);
    let k_first = (start / target_dt - EDGE_TOL).ceil() as i64;
    let k_end = window_of(end, target_dt);
    if k_end <= k_first {
        return Err(Error::EmptyOverlap { target_dt });
    }
    let n = (k_end - k_first) as usize;

    let channels = raw
        .channels
        .iter()
        .map(|(name, s)| {
            let what = format!("{}/{}", raw.id, name);
            Ok((
                name.clone(),
                resample(s, target_dt, k_first, n, pooling, &what)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let subjective = raw
        .subjective
        .as_ref()
        .map(|s| {
            resample(
                s,
                target_dt,
                k_first,
                n,
                pooling,
                &format!("{}/subjective", raw.id),
            )
        })
        .transpose()?;
    SessionTrace::new(
        raw.id.clone(),
        raw.source_content.clone(),
        channels,
        subjective,
    )
}
