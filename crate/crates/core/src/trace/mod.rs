//! Sampled signals and multi-channel viewing sessions.
//!
//! A [`SessionTrace`] pairs the exogenous quality channels of one viewing
//! session with the continuously recorded subjective score. Raw traces may
//! come at different rates; [`align_session`] pools everything onto one grid.

mod align;
pub mod csv;
mod normalize;
mod split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use align::{align_session, Pooling};
pub use normalize::{fit_normalizer, ChannelStats, Normalizer};
pub use split::split_by_content;

/// Uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    dt: f64,
    t0: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!(
                "sample interval must be > 0, got {dt}"
            )));
        }
        if !(t0 >= 0.0 && t0.is_finite()) {
            return Err(Error::invalid(format!(
                "start offset must be >= 0, got {t0}"
            )));
        }
        Ok(Self { values, dt, t0 })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// End of the covered span, treating each sample as holding for `dt`.
    pub fn end(&self) -> f64 {
        self.time(self.values.len())
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                what: what.to_string(),
            })
        }
    }
}

/// Exogenous channels and subjective output of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub id: String,
    pub source_content: String,
    pub channels: Vec<(String, TimeSeries)>,
    pub subjective: Option<TimeSeries>,
}

impl SessionTrace {
    pub fn new(
        id: impl Into<String>,
        source_content: impl Into<String>,
        channels: Vec<(String, TimeSeries)>,
        subjective: Option<TimeSeries>,
    ) -> Result<Self> {
        let id = id.into();
        if channels.is_empty() {
            return Err(Error::invalid(format!("session `{id}` has no channels")));
        }
        for (i, (name, _)) in channels.iter().enumerate() {
            if channels[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::invalid(format!(
                    "duplicate channel `{name}` in session `{id}`"
                )));
            }
        }
        Ok(Self {
            id,
            source_content: source_content.into(),
            channels,
            subjective,
        })
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn channel(&self, name: &str) -> Option<&TimeSeries> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    pub fn subjective(&self) -> Result<&TimeSeries> {
        self.subjective
            .as_ref()
            .ok_or_else(|| Error::MissingSubjective(self.id.clone()))
    }

    /// Length of an aligned session (all series share it).
    pub fn len(&self) -> usize {
        self.channels[0].1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dt(&self) -> f64 {
        self.channels[0].1.dt()
    }

    pub fn t0(&self) -> f64 {
        self.channels[0].1.t0()
    }

    /// True when every series shares one grid.
    pub fn is_aligned(&self) -> bool {
        let (dt, t0, len) = (self.dt(), self.t0(), self.len());
        self.channels
            .iter()
            .map(|(_, s)| s)
            .chain(self.subjective.iter())
            .all(|s| s.dt() == dt && s.t0() == t0 && s.len() == len)
    }

    /// Copy of this session restricted to (and reordered by) `names`.
    pub fn select_channels<S: AsRef<str>>(&self, names: &[S]) -> Result<SessionTrace> {
        let channels = names
            .iter()
            .map(|name| {
                let name = name.as_ref();
                self.channel(name)
                    .map(|s| (name.to_string(), s.clone()))
                    .ok_or_else(|| Error::MissingChannel {
                        session: self.id.clone(),
                        channel: name.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        SessionTrace::new(
            self.id.clone(),
            self.source_content.clone(),
            channels,
            self.subjective.clone(),
        )
    }
}
