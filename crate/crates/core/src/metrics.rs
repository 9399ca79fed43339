//! Agreement between a forecast and the recorded subjective trace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::Forecast;
use crate::trace::SessionTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub rmse: f64,
    /// Absent when fewer than two samples or either side is constant.
    pub plcc: Option<f64>,
    pub srocc: Option<f64>,
    /// Percentage of samples deviating by more than the outage threshold.
    pub outage_rate: f64,
    pub n_samples: usize,
}

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Sample Pearson correlation.
pub fn plcc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.len() < 2 || is_constant(pred) || is_constant(truth) {
        return Err(Error::ConstantInput);
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = truth.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let (dp, dt) = (p - mp, t - mt);
        sxy += dp * dt;
        sxx += dp * dp;
        syy += dt * dt;
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Spearman rank-order correlation with fractional ranks for ties.
pub fn srocc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    plcc(&average_ranks(pred), &average_ranks(truth))
}

pub fn outage_rate(pred: &[f64], truth: &[f64], delta: f64) -> Result<f64> {
    check_lengths(pred, truth)?;
    if !(delta > 0.0) {
        return Err(Error::invalid(format!(
            "outage threshold must be > 0, got {delta}"
        )));
    }
    let out = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| (*p - *t).abs() > delta)
        .count();
    Ok(100.0 * out as f64 / pred.len() as f64)
}

/// All four metrics on raw vectors. Correlations are absent rather than
/// failing when an input is constant.
pub fn evaluate_slices(pred: &[f64], truth: &[f64], delta: f64) -> Result<EvalResult> {
    let optional = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::ConstantInput) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(EvalResult {
        rmse: rmse(pred, truth)?,
        plcc: optional(plcc(pred, truth))?,
        srocc: optional(srocc(pred, truth))?,
        outage_rate: outage_rate(pred, truth, delta)?,
        n_samples: pred.len(),
    })
}

/// Scores a forecast on the samples after its warm-up.
pub fn evaluate(forecast: &Forecast, session: &SessionTrace, delta: f64) -> Result<EvalResult> {
    let truth = session.subjective()?.values();
    let pred = forecast.values.values();
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    let w = forecast.warmup_len.min(pred.len());
    evaluate_slices(&pred[w..], &truth[w..], delta)
}
