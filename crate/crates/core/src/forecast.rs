use serde::{Deserialize, Serialize};

use crate::narx::NarxConfig;
use crate::trace::TimeSeries;

/// What fills the feedback taps when a forecast is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LoopMode {
    /// Recorded subjective scores (series-parallel).
    Open,
    /// The model's own past predictions (parallel).
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Single {
        config: NarxConfig,
        seed: Option<u64>,
        loop_mode: LoopMode,
    },
    /// Pointwise mean of `members` forecasts.
    Average { members: usize },
}

/// A predicted subjective-score series for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub values: TimeSeries,
    pub session_id: String,
    pub provenance: Provenance,
    /// Leading samples copied from ground truth; excluded from evaluation.
    pub warmup_len: usize,
}

impl Forecast {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
