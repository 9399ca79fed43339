//! Nonlinear autoregressive network with exogenous inputs.
//!
//! The predictor is `y_t = f(u_t, ..., u_{t-d_u}, y_{t-1}, ..., y_{t-d_y})`
//! where `u_t` may hold several quality channels and `f` is a single tanh
//! hidden layer with a linear output. Open loop feeds the recorded subjective
//! score back into the delay line; closed loop feeds the model's own output.

mod forward;
mod persist;
mod regressors;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::trace::Normalizer;

pub use forward::{forward_closed_loop, forward_open_loop, rollout_normalized, Feedback};
pub use persist::{load_model, model_from_json, model_to_json, save_model};
pub use regressors::{build_regressors, NormalizedInputs, Regressors};

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NarxConfig {
    pub n_channels: usize,
    /// Exogenous lag depth; each channel contributes `d_u + 1` taps.
    pub d_u: usize,
    /// Feedback lag depth.
    pub d_y: usize,
    pub hidden: usize,
}

impl NarxConfig {
    pub fn new(n_channels: usize, d_u: usize, d_y: usize, hidden: usize) -> Result<Self> {
        let c = Self {
            n_channels,
            d_u,
            d_y,
            hidden,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 || self.d_y == 0 || self.hidden == 0 {
            return Err(Error::invalid(format!(
                "need n_channels >= 1, d_y >= 1, hidden >= 1; got {self:?}"
            )));
        }
        Ok(())
    }

    /// Length of one regressor row.
    pub fn regressor_dim(&self) -> usize {
        self.n_channels * (self.d_u + 1) + self.d_y
    }

    pub fn param_count(&self) -> usize {
        self.hidden * (self.regressor_dim() + 1) + self.hidden + 1
    }

    /// First index at which every delay tap exists. Earlier samples are
    /// warm-up and come from ground truth.
    pub fn t_min(&self) -> usize {
        self.d_u.max(self.d_y)
    }

    /// Column of feedback tap `k` (1-based) within a regressor row.
    pub fn feedback_column(&self, k: usize) -> usize {
        self.n_channels * (self.d_u + 1) + k - 1
    }
}

/// Network parameters.
///
/// Flattened parameter order, shared by the trainer, the Jacobians and
/// initialization: `W1` row-major (`hidden x R`), then `b1`, `W2`, `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarxWeights {
    pub hidden: usize,
    pub inputs: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl NarxWeights {
    pub fn zeros(config: &NarxConfig) -> Self {
        let (h, r) = (config.hidden, config.regressor_dim());
        Self {
            hidden: h,
            inputs: r,
            w1: vec![0.0; h * r],
            b1: vec![0.0; h],
            w2: vec![0.0; h],
            b2: 0.0,
        }
    }

    pub fn from_params(config: &NarxConfig, params: &[f64]) -> Result<Self> {
        if params.len() != config.param_count() {
            return Err(Error::LengthMismatch(params.len(), config.param_count()));
        }
        let (h, r) = (config.hidden, config.regressor_dim());
        let (w1, rest) = params.split_at(h * r);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        Ok(Self {
            hidden: h,
            inputs: r,
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: rest[0],
        })
    }

    pub fn to_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn check(&self, config: &NarxConfig) -> Result<()> {
        let (h, r) = (config.hidden, config.regressor_dim());
        if self.hidden != h
            || self.inputs != r
            || self.w1.len() != h * r
            || self.b1.len() != h
            || self.w2.len() != h
        {
            return Err(Error::invalid(format!(
                "weight shapes do not match {config:?}"
            )));
        }
        if !self.to_params().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "weights".into(),
            });
        }
        Ok(())
    }

    pub fn w1_row(&self, k: usize) -> &[f64] {
        &self.w1[k * self.inputs..(k + 1) * self.inputs]
    }

    /// Writes `tanh(W1 x + b1)` into `act` and returns the network output.
    pub fn eval_into(&self, x: &[f64], act: &mut [f64]) -> f64 {
        let mut y = self.b2;
        for k in 0..self.hidden {
            let a: f64 = self.b1[k]
                + self
                    .w1_row(k)
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
            let t = a.tanh();
            act[k] = t;
            y += self.w2[k] * t;
        }
        y
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut act = vec![0.0; self.hidden];
        self.eval_into(x, &mut act)
    }
}

/// Deterministic initialization: every parameter i.i.d. uniform on
/// `[-0.5, 0.5)`, parameter `i` keyed by `(seed, i)`.
pub fn init_weights(config: &NarxConfig, seed: u64) -> NarxWeights {
    let params: Vec<f64> = (0..config.param_count() as u64)
        .map(|i| rng::keyed_uniform(seed, i, -0.5, 0.5))
        .collect();
    NarxWeights::from_params(config, &params).expect("param count matches config")
}

/// A trained predictor bound to named input channels.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxModel {
    pub config: NarxConfig,
    pub weights: NarxWeights,
    pub normalizer: Normalizer,
    pub channel_names: Vec<String>,
    /// Initialization seed, when known.
    pub seed: Option<u64>,
}

impl NarxModel {
    pub fn new(
        config: NarxConfig,
        weights: NarxWeights,
        normalizer: Normalizer,
        seed: Option<u64>,
    ) -> Result<Self> {
        config.validate()?;
        weights.check(&config)?;
        let channel_names: Vec<String> =
            normalizer.channels.iter().map(|c| c.name.clone()).collect();
        if channel_names.len() != config.n_channels {
            return Err(Error::invalid(format!(
                "{} normalizer channels for a {}-channel network",
                channel_names.len(),
                config.n_channels
            )));
        }
        Ok(Self {
            config,
            weights,
            normalizer,
            channel_names,
            seed,
        })
    }
}
