//! Residuals and Jacobians of the NARX predictor with respect to its
//! flattened parameters (see [`NarxWeights`] for the ordering).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::narx::{
    build_regressors, rollout_normalized, Feedback, NarxConfig, NarxWeights, NormalizedInputs,
};
use crate::trace::{Normalizer, SessionTrace};

/// Writes `d yhat / d theta` for one regressor row into `out` and returns
/// `yhat`. `act` receives the hidden activations.
pub(crate) fn output_gradient(w: &NarxWeights, x: &[f64], act: &mut [f64], out: &mut [f64]) -> f64 {
    let y = w.eval_into(x, act);
    let (h, r) = (w.hidden, w.inputs);
    let (w1_part, rest) = out.split_at_mut(h * r);
    let (b1_part, rest) = rest.split_at_mut(h);
    let (w2_part, b2_part) = rest.split_at_mut(h);
    for k in 0..h {
        let t = act[k];
        let back = w.w2[k] * (1.0 - t * t);
        for (dst, xj) in w1_part[k * r..(k + 1) * r].iter_mut().zip(x) {
            *dst = back * xj;
        }
        b1_part[k] = back;
        w2_part[k] = t;
    }
    b2_part[0] = 1.0;
    y
}

/// Open-loop training set: the regressors do not depend on the weights, so
/// they are built once.
#[derive(Debug, Clone)]
pub(crate) struct OpenLoopData {
    pub x: Vec<f64>,
    pub targets: Vec<f64>,
    pub dim: usize,
}

impl OpenLoopData {
    pub fn new(
        config: &NarxConfig,
        sessions: &[SessionTrace],
        normalizer: &Normalizer,
    ) -> Result<Self> {
        let mut x = Vec::new();
        let mut targets = Vec::new();
        for s in sessions {
            let truth = s.subjective()?.values();
            let reg = build_regressors(s, config, normalizer, truth)?;
            x.extend_from_slice(&reg.x);
            targets.extend(reg.targets.expect("session has a subjective trace"));
        }
        if targets.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self {
            x,
            targets,
            dim: config.regressor_dim(),
        })
    }

    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn residuals(&self, w: &NarxWeights) -> Vec<f64> {
        let mut act = vec![0.0; w.hidden];
        self.x
            .chunks_exact(self.dim)
            .zip(&self.targets)
            .map(|(row, y)| w.eval_into(row, &mut act) - y)
            .collect()
    }

    /// Residuals and the row-major `N x P` Jacobian.
    pub fn residuals_and_jacobian(&self, w: &NarxWeights) -> (Vec<f64>, Vec<f64>) {
        let p = w.param_count();
        let mut act = vec![0.0; w.hidden];
        let mut jac = vec![0.0; self.rows() * p];
        let r = self
            .x
            .chunks_exact(self.dim)
            .zip(&self.targets)
            .zip(jac.chunks_exact_mut(p))
            .map(|((row, y), out)| output_gradient(w, row, &mut act, out) - y)
            .collect();
        (r, jac)
    }
}

/// One closed-loop training session in normalized units.
#[derive(Debug, Clone)]
pub(crate) struct ClosedLoopSession {
    pub inputs: NormalizedInputs,
    pub truth: Vec<f64>,
}

impl ClosedLoopSession {
    pub fn new(
        config: &NarxConfig,
        session: &SessionTrace,
        normalizer: &Normalizer,
    ) -> Result<Self> {
        let truth: Vec<f64> = session
            .subjective()?
            .values()
            .iter()
            .map(|&v| normalizer.normalize_output(v))
            .collect();
        let inputs = NormalizedInputs::new(session, normalizer)?;
        let t_min = config.t_min();
        if inputs.len <= t_min {
            return Err(Error::TooShort {
                len: inputs.len,
                t_min,
            });
        }
        if inputs.channels.len() != config.n_channels {
            return Err(Error::invalid("channel count does not match configuration"));
        }
        Ok(Self { inputs, truth })
    }

    /// Residuals over the whole session; warm-up entries are zero.
    pub fn residuals(&self, w: &NarxWeights, config: &NarxConfig) -> Vec<f64> {
        let pred = rollout_normalized(w, config, &self.inputs, &self.truth, Feedback::Own);
        pred.iter().zip(&self.truth).map(|(p, y)| p - y).collect()
    }

    /// Residuals and the row-major `L x P` dynamic Jacobian by forward
    /// sensitivity accumulation. Warm-up rows are zero.
    pub fn residuals_and_jacobian(
        &self,
        w: &NarxWeights,
        config: &NarxConfig,
    ) -> (Vec<f64>, Vec<f64>) {
        let len = self.inputs.len;
        let p = w.param_count();
        let t_min = config.t_min();
        let mut jac = vec![0.0; len * p];
        let mut pred: Vec<f64> = self.truth[..t_min].to_vec();
        let mut row = vec![0.0; config.regressor_dim()];
        let mut act = vec![0.0; w.hidden];
        let mut fb_gain = vec![0.0; config.d_y];
        for t in t_min..len {
            self.inputs.fill_row(config, t, &pred, &mut row);
            let (done, current) = jac.split_at_mut(t * p);
            let s_t = &mut current[..p];
            let y = output_gradient(w, &row, &mut act, s_t);
            // d f / d fb_{t-k}
            for (k, gain) in fb_gain.iter_mut().enumerate() {
                let col = config.feedback_column(k + 1);
                *gain = (0..w.hidden)
                    .map(|h| w.w2[h] * (1.0 - act[h] * act[h]) * w.w1[h * w.inputs + col])
                    .sum();
            }
            for (k, &gain) in fb_gain.iter().enumerate() {
                let src = t - (k + 1);
                if src < t_min || gain == 0.0 {
                    continue;
                }
                let s_src = &done[src * p..(src + 1) * p];
                for (dst, s) in s_t.iter_mut().zip(s_src) {
                    *dst += gain * s;
                }
            }
            pred.push(y);
        }
        let r = (0..len)
            .map(|t| {
                if t < t_min {
                    0.0
                } else {
                    pred[t] - self.truth[t]
                }
            })
            .collect();
        (r, jac)
    }
}

/// Open-loop residuals `yhat_t - y_t` in normalized units, concatenated over
/// sessions in order, each session in time order.
pub fn residuals_ol(
    weights: &NarxWeights,
    config: &NarxConfig,
    sessions: &[SessionTrace],
    normalizer: &Normalizer,
) -> Result<Vec<f64>> {
    weights.check(config)?;
    Ok(OpenLoopData::new(config, sessions, normalizer)?.residuals(weights))
}

/// Analytic open-loop Jacobian, one row per residual of [`residuals_ol`].
pub fn jacobian_ol(
    weights: &NarxWeights,
    config: &NarxConfig,
    sessions: &[SessionTrace],
    normalizer: &Normalizer,
) -> Result<DMatrix<f64>> {
    weights.check(config)?;
    let data = OpenLoopData::new(config, sessions, normalizer)?;
    let (_, jac) = data.residuals_and_jacobian(weights);
    Ok(DMatrix::from_row_slice(
        data.rows(),
        config.param_count(),
        &jac,
    ))
}

/// Closed-loop residuals over the full session (warm-up entries zero).
pub fn residuals_cl(
    weights: &NarxWeights,
    config: &NarxConfig,
    session: &SessionTrace,
    normalizer: &Normalizer,
) -> Result<Vec<f64>> {
    weights.check(config)?;
    Ok(ClosedLoopSession::new(config, session, normalizer)?.residuals(weights, config))
}

/// Dynamic Jacobian of the closed-loop rollout, one row per session sample.
pub fn jacobian_cl(
    weights: &NarxWeights,
    config: &NarxConfig,
    session: &SessionTrace,
    normalizer: &Normalizer,
) -> Result<DMatrix<f64>> {
    weights.check(config)?;
    let data = ClosedLoopSession::new(config, session, normalizer)?;
    let (_, jac) = data.residuals_and_jacobian(weights, config);
    Ok(DMatrix::from_row_slice(
        data.inputs.len,
        config.param_count(),
        &jac,
    ))
}
