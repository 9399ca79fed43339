use crate::error::{Error, Result};
use crate::forecast::{Forecast, Provenance};
use crate::trace::TimeSeries;

/// Pointwise mean of forecasts for one session.
pub fn average_forecasts(forecasts: &[Forecast]) -> Result<Forecast> {
    let first = forecasts.first().ok_or(Error::Empty)?;
    for f in &forecasts[1..] {
        if f.session_id != first.session_id {
            return Err(Error::MixedSessions(
                first.session_id.clone(),
                f.session_id.clone(),
            ));
        }
        if f.len() != first.len() {
            return Err(Error::LengthMismatch(first.len(), f.len()));
        }
    }
    let k = forecasts.len() as f64;
    let base = first.values.values();
    let values = (0..first.len())
        .map(|t| {
            // offset form: identical members average to themselves exactly
            let dev: f64 = forecasts
                .iter()
                .map(|f| f.values.values()[t] - base[t])
                .sum();
            base[t] + dev / k
        })
        .collect();
    Ok(Forecast {
        values: TimeSeries::new(values, first.values.dt(), first.values.t0())?,
        session_id: first.session_id.clone(),
        provenance: Provenance::Average {
            members: forecasts.len(),
        },
        warmup_len: forecasts.iter().map(|f| f.warmup_len).max().unwrap_or(0),
    })
}
