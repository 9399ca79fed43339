use serde::{Deserialize, Serialize};

use super::SessionTrace;
use crate::error::{Error, Result};

/// z-score statistics of one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

impl ChannelStats {
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Training-set statistics for every input channel and for the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub channels: Vec<ChannelStats>,
    pub output: ChannelStats,
}

impl Normalizer {
    pub fn new(channels: Vec<ChannelStats>, output: ChannelStats) -> Result<Self> {
        for s in channels.iter().chain(std::iter::once(&output)) {
            if !(s.std > 0.0 && s.std.is_finite() && s.mean.is_finite()) {
                return Err(Error::ConstantChannel(s.name.clone()));
            }
        }
        Ok(Self { channels, output })
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn normalize_output(&self, y: f64) -> f64 {
        self.output.normalize(y)
    }

    pub fn denormalize_output(&self, z: f64) -> f64 {
        self.output.denormalize(z)
    }
}

/// Population mean and standard deviation of everything yielded by `values`.
fn pooled_stats<'a>(
    name: &str,
    values: impl Iterator<Item = &'a [f64]> + Clone,
) -> Result<ChannelStats> {
    let n: usize = values.clone().map(|v| v.len()).sum();
    if n == 0 {
        return Err(Error::Empty);
    }
    let mean = values.clone().flatten().sum::<f64>() / n as f64;
    let var = values.flatten().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    // Anything at rounding-noise level relative to the mean is a constant signal.
    if !(std > f64::EPSILON * 16.0 * mean.abs().max(1e-300)) {
        return Err(Error::ConstantChannel(name.to_string()));
    }
    Ok(ChannelStats {
        name: name.to_string(),
        mean,
        std,
    })
}

/// Pools z-score statistics over all training samples.
///
/// Channel order follows the first session; every other session must carry
/// the same channel names.
pub fn fit_normalizer(train: &[SessionTrace]) -> Result<Normalizer> {
    let first = train.first().ok_or(Error::Empty)?;
    let names: Vec<String> = first
        .channel_names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut channels = Vec::with_capacity(names.len());
    for name in &names {
        let series = train
            .iter()
            .map(|s| {
                s.channel(name)
                    .map(|c| c.values())
                    .ok_or_else(|| Error::MissingChannel {
                        session: s.id.clone(),
                        channel: name.clone(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        channels.push(pooled_stats(name, series.iter().copied())?);
    }
    let outputs = train
        .iter()
        .map(|s| s.subjective().map(|t| t.values()))
        .collect::<Result<Vec<_>>>()?;
    let output = pooled_stats("subjective", outputs.iter().copied())?;
    Normalizer::new(channels, output)
}
