use super::NarxConfig;
use crate::error::{Error, Result};
use crate::trace::{Normalizer, SessionTrace};

/// Session channels z-scored with training statistics, in normalizer order.
#[derive(Debug, Clone)]
pub struct NormalizedInputs {
    pub channels: Vec<Vec<f64>>,
    pub len: usize,
}

impl NormalizedInputs {
    pub fn new(session: &SessionTrace, normalizer: &Normalizer) -> Result<Self> {
        let channels = normalizer
            .channels
            .iter()
            .map(|stats| {
                let series = session
                    .channel(&stats.name)
                    .ok_or_else(|| Error::MissingChannel {
                        session: session.id.clone(),
                        channel: stats.name.clone(),
                    })?;
                Ok(series
                    .values()
                    .iter()
                    .map(|&v| stats.normalize(v))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let len = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::invalid(format!(
                "session `{}` is not aligned",
                session.id
            )));
        }
        Ok(Self { channels, len })
    }

    /// Fills `row` for time `t`: every channel's `u_t ... u_{t-d_u}`
    /// (channel-major), then `fb_{t-1} ... fb_{t-d_y}`.
    pub fn fill_row(&self, config: &NarxConfig, t: usize, feedback: &[f64], row: &mut [f64]) {
        let taps = config.d_u + 1;
        for (c, ch) in self.channels.iter().enumerate() {
            for lag in 0..taps {
                row[c * taps + lag] = ch[t - lag];
            }
        }
        let base = self.channels.len() * taps;
        for k in 1..=config.d_y {
            row[base + k - 1] = feedback[t - k];
        }
    }
}

/// Regressor matrix for every predictable index of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressors {
    /// Row-major `rows() x dim`.
    pub x: Vec<f64>,
    pub dim: usize,
    /// Time index of the first row.
    pub t_min: usize,
    /// Normalized subjective scores at the row times, when the session has them.
    pub targets: Option<Vec<f64>>,
}

impl Regressors {
    pub fn rows(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

/// Builds the tapped-delay regressors of `session`, with `feedback` (raw
/// score units) in the autoregressive taps. Everything is normalized.
pub fn build_regressors(
    session: &SessionTrace,
    config: &NarxConfig,
    normalizer: &Normalizer,
    feedback: &[f64],
) -> Result<Regressors> {
    let inputs = NormalizedInputs::new(session, normalizer)?;
    if inputs.channels.len() != config.n_channels {
        return Err(Error::invalid(format!(
            "{} channels for a {}-channel configuration",
            inputs.channels.len(),
            config.n_channels
        )));
    }
    if feedback.len() != inputs.len {
        return Err(Error::LengthMismatch(feedback.len(), inputs.len));
    }
    let t_min = config.t_min();
    if inputs.len <= t_min {
        return Err(Error::TooShort {
            len: inputs.len,
            t_min,
        });
    }
    let fb: Vec<f64> = feedback
        .iter()
        .map(|&v| normalizer.normalize_output(v))
        .collect();
    let dim = config.regressor_dim();
    let n = inputs.len - t_min;
    let mut x = vec![0.0; n * dim];
    for (i, t) in (t_min..inputs.len).enumerate() {
        inputs.fill_row(config, t, &fb, &mut x[i * dim..(i + 1) * dim]);
    }
    let targets = session.subjective.as_ref().map(|s| {
        s.values()[t_min..]
            .iter()
            .map(|&v| normalizer.normalize_output(v))
            .collect()
    });
    Ok(Regressors {
        x,
        dim,
        t_min,
        targets,
    })
}
