//! Levenberg–Marquardt training of NARX weights.
//!
//! Each epoch solves `(J^T J + mu I) delta = J^T r` by Cholesky
//! factorization and tries `theta - delta`. A step is kept only if the mean
//! squared residual strictly drops; `mu` shrinks after an accepted step and
//! grows after a rejected one.

mod jacobian;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::LoopMode;
use crate::narx::{init_weights, NarxConfig, NarxModel, NarxWeights};
use crate::trace::{fit_normalizer, Normalizer, SessionTrace};

pub use jacobian::{jacobian_cl, jacobian_ol, residuals_cl, residuals_ol};
use jacobian::{ClosedLoopSession, OpenLoopData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmSettings {
    pub mu0: f64,
    pub mu_inc: f64,
    pub mu_dec: f64,
    pub mu_max: f64,
    pub max_epochs: usize,
    /// Stop when the infinity norm of the loss gradient falls below this.
    pub grad_tol: f64,
    /// A trial step is accepted iff `new_loss < loss - min_loss_decrease`.
    pub min_loss_decrease: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            mu0: 1e-3,
            mu_inc: 10.0,
            mu_dec: 0.1,
            mu_max: 1e10,
            max_epochs: 200,
            grad_tol: 1e-7,
            min_loss_decrease: 0.0,
        }
    }
}

impl LmSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu0 > 0.0
            && self.mu_inc > 1.0
            && self.mu_dec > 0.0
            && self.mu_dec < 1.0
            && self.mu_max > self.mu0
            && self.grad_tol >= 0.0
            && self.min_loss_decrease >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("inconsistent LM settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    MuMax,
    MaxEpochs,
    /// The starting point already had a non-finite loss.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean squared normalized residual at the returned weights.
    pub final_loss: f64,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub wall_time: f64,
    /// Initial loss followed by the loss after each accepted step.
    pub loss_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

impl TrainReport {
    pub fn diverged(&self) -> bool {
        !self.final_loss.is_finite()
    }
}

/// Training data prepared for repeated residual/Jacobian evaluation.
enum Problem {
    Open(OpenLoopData),
    Closed(Vec<ClosedLoopSession>, NarxConfig),
}

impl Problem {
    fn new(
        mode: LoopMode,
        config: &NarxConfig,
        train: &[SessionTrace],
        normalizer: &Normalizer,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty);
        }
        Ok(match mode {
            LoopMode::Open => Problem::Open(OpenLoopData::new(config, train, normalizer)?),
            LoopMode::Closed => Problem::Closed(
                train
                    .iter()
                    .map(|s| ClosedLoopSession::new(config, s, normalizer))
                    .collect::<Result<_>>()?,
                *config,
            ),
        })
    }

    fn rows(&self) -> usize {
        match self {
            Problem::Open(d) => d.rows(),
            Problem::Closed(s, c) => s.iter().map(|s| s.inputs.len - c.t_min()).sum(),
        }
    }

    /// Residuals over predictable samples only.
    fn residuals(&self, w: &NarxWeights) -> Vec<f64> {
        match self {
            Problem::Open(d) => d.residuals(w),
            Problem::Closed(sessions, c) => sessions
                .iter()
                .flat_map(|s| s.residuals(w, c).split_off(c.t_min()))
                .collect(),
        }
    }

    fn residuals_and_jacobian(&self, w: &NarxWeights) -> (Vec<f64>, DMatrix<f64>) {
        let p = w.param_count();
        match self {
            Problem::Open(d) => {
                let (r, j) = d.residuals_and_jacobian(w);
                let n = r.len();
                (r, DMatrix::from_row_slice(n, p, &j))
            }
            Problem::Closed(sessions, c) => {
                let mut r = Vec::new();
                let mut j = Vec::new();
                for s in sessions {
                    let (rs, js) = s.residuals_and_jacobian(w, c);
                    r.extend_from_slice(&rs[c.t_min()..]);
                    j.extend_from_slice(&js[c.t_min() * p..]);
                }
                let n = r.len();
                (r, DMatrix::from_row_slice(n, p, &j))
            }
        }
    }
}

fn mean_square(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
}

/// Solves `(J^T J + mu I) delta = J^T r` given `jtj = J^T J` and `jtr = J^T r`.
pub fn lm_step(jtj: &DMatrix<f64>, jtr: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
    let mut a = jtj.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += mu;
    }
    let chol = a.cholesky()?;
    let delta = chol.solve(jtr);
    delta.iter().all(|v| v.is_finite()).then_some(delta)
}

/// Levenberg–Marquardt minimization of the mean squared normalized residual.
///
/// Open-loop mode fits one-step-ahead predictions with recorded feedback;
/// closed-loop mode fits the free-running rollout using exact dynamic
/// Jacobians. Returns the lowest-loss weights encountered.
pub fn lm_fit(
    init: &NarxWeights,
    config: &NarxConfig,
    mode: LoopMode,
    train: &[SessionTrace],
    normalizer: &Normalizer,
    settings: &LmSettings,
) -> Result<(NarxWeights, TrainReport)> {
    settings.validate()?;
    init.check(config)?;
    let started = Instant::now();
    let problem = Problem::new(mode, config, train, normalizer)?;
    let n = problem.rows();
    let mut warnings = Vec::new();
    if config.param_count() > n {
        warnings.push(format!(
            "{} parameters exceed {} training samples",
            config.param_count(),
            n
        ));
    }

    let mut weights = init.clone();
    let mut theta = DVector::from_vec(weights.to_params());
    let (mut r, mut jac) = problem.residuals_and_jacobian(&weights);
    let mut loss = mean_square(&r);
    let mut trace = vec![loss];
    let mut mu = settings.mu0;
    let mut epochs = 0;

    let stop_reason = if !loss.is_finite() {
        StopReason::NonFinite
    } else {
        loop {
            let rv = DVector::from_vec(r.clone());
            let jtr = jac.tr_mul(&rv);
            let grad_inf = jtr.amax() * 2.0 / n as f64;
            if grad_inf < settings.grad_tol {
                break StopReason::GradTol;
            }
            if epochs >= settings.max_epochs {
                break StopReason::MaxEpochs;
            }
            let jtj = jac.transpose() * &jac;
            let accepted = loop {
                if let Some(delta) = lm_step(&jtj, &jtr, mu) {
                    let trial_theta = &theta - &delta;
                    let trial = NarxWeights::from_params(config, trial_theta.as_slice())?;
                    let trial_loss = mean_square(&problem.residuals(&trial));
                    if trial_loss < loss - settings.min_loss_decrease {
                        theta = trial_theta;
                        weights = trial;
                        loss = trial_loss;
                        mu = (mu * settings.mu_dec).max(f64::MIN_POSITIVE);
                        break true;
                    }
                }
                mu *= settings.mu_inc;
                if mu > settings.mu_max {
                    break false;
                }
            };
            if !accepted {
                break StopReason::MuMax;
            }
            epochs += 1;
            trace.push(loss);
            (r, jac) = problem.residuals_and_jacobian(&weights);
        }
    };

    Ok((
        weights,
        TrainReport {
            final_loss: loss,
            epochs_run: epochs,
            stop_reason,
            wall_time: started.elapsed().as_secs_f64(),
            loss_trace: trace,
            warnings,
        },
    ))
}

/// Fits the normalizer on `train`, initializes from `seed` and trains.
pub fn train_model(
    config: &NarxConfig,
    seed: u64,
    mode: LoopMode,
    train: &[SessionTrace],
    settings: &LmSettings,
) -> Result<(NarxModel, TrainReport)> {
    config.validate()?;
    let normalizer = fit_normalizer(train)?;
    if normalizer.channels.len() != config.n_channels {
        return Err(Error::invalid(format!(
            "training data has {} channels, configuration expects {}",
            normalizer.channels.len(),
            config.n_channels
        )));
    }
    let init = init_weights(config, seed);
    let (weights, report) = lm_fit(&init, config, mode, train, &normalizer, settings)?;
    Ok((
        NarxModel::new(*config, weights, normalizer, Some(seed))?,
        report,
    ))
}
