use super::{build_regressors, NarxConfig, NarxModel, NarxWeights, NormalizedInputs};
use crate::error::{Error, Result};
use crate::forecast::{Forecast, LoopMode, Provenance};
use crate::trace::{SessionTrace, TimeSeries};

/// Source of the autoregressive taps during a rollout.
#[derive(Debug, Clone, Copy)]
pub enum Feedback<'a> {
    /// Previously predicted outputs.
    Own,
    /// An externally supplied normalized sequence, e.g. the recorded scores.
    Teacher(&'a [f64]),
}

/// Runs the recurrence in normalized units.
///
/// The first `t_min` entries of the result are `warmup` verbatim; entry
/// `t >= t_min` is the network output at time `t`.
pub fn rollout_normalized(
    weights: &NarxWeights,
    config: &NarxConfig,
    inputs: &NormalizedInputs,
    warmup: &[f64],
    feedback: Feedback<'_>,
) -> Vec<f64> {
    let t_min = config.t_min();
    let mut out = Vec::with_capacity(inputs.len);
    out.extend_from_slice(&warmup[..t_min.min(inputs.len)]);
    let mut row = vec![0.0; config.regressor_dim()];
    let mut act = vec![0.0; config.hidden];
    for t in t_min..inputs.len {
        let fb = match feedback {
            Feedback::Own => out.as_slice(),
            Feedback::Teacher(seq) => seq,
        };
        inputs.fill_row(config, t, fb, &mut row);
        out.push(weights.eval_into(&row, &mut act));
    }
    out
}

fn check_channels(model: &NarxModel, session: &SessionTrace) -> Result<NormalizedInputs> {
    let inputs = NormalizedInputs::new(session, &model.normalizer)?;
    let t_min = model.config.t_min();
    if inputs.len <= t_min {
        return Err(Error::TooShort {
            len: inputs.len,
            t_min,
        });
    }
    Ok(inputs)
}

fn forecast(
    model: &NarxModel,
    session: &SessionTrace,
    values: Vec<f64>,
    loop_mode: LoopMode,
) -> Result<Forecast> {
    Ok(Forecast {
        values: TimeSeries::new(values, session.dt(), session.t0())?,
        session_id: session.id.clone(),
        provenance: Provenance::Single {
            config: model.config,
            seed: model.seed,
            loop_mode,
        },
        warmup_len: model.config.t_min(),
    })
}

/// One-step-ahead predictions with the recorded subjective scores in the
/// feedback taps. Warm-up samples are copied from ground truth.
pub fn forward_open_loop(model: &NarxModel, session: &SessionTrace) -> Result<Forecast> {
    let truth = session.subjective()?.values();
    check_channels(model, session)?;
    let reg = build_regressors(session, &model.config, &model.normalizer, truth)?;
    let mut values = truth[..reg.t_min].to_vec();
    let mut act = vec![0.0; model.config.hidden];
    values.extend((0..reg.rows()).map(|i| {
        model
            .normalizer
            .denormalize_output(model.weights.eval_into(reg.row(i), &mut act))
    }));
    forecast(model, session, values, LoopMode::Open)
}

/// Free-running predictions seeded with `warmup` subjective samples.
///
/// Only the first `t_min` warm-up samples are used.
pub fn forward_closed_loop(
    model: &NarxModel,
    session: &SessionTrace,
    warmup: &[f64],
) -> Result<Forecast> {
    let t_min = model.config.t_min();
    if warmup.len() < t_min {
        return Err(Error::InsufficientWarmup {
            got: warmup.len(),
            need: t_min,
        });
    }
    let inputs = check_channels(model, session)?;
    let warm: Vec<f64> = warmup[..t_min]
        .iter()
        .map(|&v| model.normalizer.normalize_output(v))
        .collect();
    let norm = rollout_normalized(&model.weights, &model.config, &inputs, &warm, Feedback::Own);
    let mut values = warmup[..t_min].to_vec();
    values.extend(
        norm[t_min..]
            .iter()
            .map(|&z| model.normalizer.denormalize_output(z)),
    );
    forecast(model, session, values, LoopMode::Closed)
}
