//! Synthetic sessions with a known generating model.
//!
//! Exogenous channels are noisy views of a piecewise-constant quality
//! level that switches at random and moves smoothly between levels, like a
//! bitrate ladder under rate adaptation. The subjective score is a randomly
//! initialized NARX teacher run in closed loop over those channels, plus
//! optional i.i.d. Gaussian noise.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{Manifest, SessionEntry};
use crate::narx::{
    init_weights, rollout_normalized, save_model, Feedback, NarxConfig, NarxModel, NarxWeights,
    NormalizedInputs,
};
use crate::rng::keyed_u64;
use crate::trace::csv::save_trace;
use crate::trace::{ChannelStats, Normalizer, SessionTrace, TimeSeries};

/// Score-unit statistics of the teacher's output.
pub const TEACHER_OUTPUT_MEAN: f64 = 50.0;
pub const TEACHER_OUTPUT_STD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherSpec {
    pub d_u: usize,
    pub d_y: usize,
    pub hidden: usize,
    pub seed: u64,
    /// Bound on the summed absolute feedback gain; below 1 the recurrence
    /// forgets its initial state.
    pub feedback_gain: f64,
}

impl Default for TeacherSpec {
    fn default() -> Self {
        Self {
            d_u: 2,
            d_y: 2,
            hidden: 4,
            seed: 1,
            feedback_gain: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_contents: usize,
    pub sessions_per_content: usize,
    pub length_s: f64,
    pub target_dt: f64,
    pub n_channels: usize,
    pub seed: u64,
    /// Standard deviation of the noise added to the subjective score.
    pub noise_std: f64,
    /// Standard deviation of innovations fed back through the teacher's
    /// recurrence: viewer drift the inputs do not explain.
    pub process_noise_std: f64,
    /// Quality levels the latent signal switches between.
    pub levels: Vec<f64>,
    /// Expected level switches per second.
    pub switch_rate: f64,
    /// Time constant of the move towards a new level, seconds.
    pub transition_s: f64,
    /// Per-channel measurement noise; a single value applies to all.
    pub channel_noise: Vec<f64>,
    /// Half-width of the per-(content, channel) offset.
    pub content_offset: f64,
    pub teacher: TeacherSpec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_contents: 3,
            sessions_per_content: 5,
            length_s: 300.0,
            target_dt: 1.0,
            n_channels: 3,
            seed: 0,
            noise_std: 1.0,
            process_noise_std: 4.0,
            levels: vec![0.55, 0.7, 0.8, 0.9, 0.97],
            switch_rate: 0.05,
            transition_s: 4.0,
            channel_noise: vec![0.03],
            content_offset: 0.02,
            teacher: TeacherSpec::default(),
        }
    }
}

impl SynthSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text).map_err(|e| Error::parse("synth spec", e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn teacher_config(&self) -> Result<NarxConfig> {
        NarxConfig::new(
            self.n_channels,
            self.teacher.d_u,
            self.teacher.d_y,
            self.teacher.hidden,
        )
    }

    pub fn samples(&self) -> usize {
        (self.length_s / self.target_dt + 1e-9).floor() as usize
    }

    pub fn channel_names(&self) -> Vec<String> {
        (0..self.n_channels).map(|c| format!("vqa{c}")).collect()
    }

    fn channel_noise(&self, c: usize) -> f64 {
        if self.channel_noise.len() == 1 {
            self.channel_noise[0]
        } else {
            self.channel_noise[c]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let config = self.teacher_config()?;
        if self.n_contents == 0 || self.sessions_per_content == 0 {
            return Err(Error::invalid(
                "need at least one content and one session per content",
            ));
        }
        if !(self.target_dt > 0.0 && self.length_s > 0.0) {
            return Err(Error::invalid("length_s and target_dt must be > 0"));
        }
        let need = config.d_u.max(config.d_y) + 50;
        if self.samples() <= need {
            return Err(Error::invalid(format!(
                "{} samples per session; need more than {need}",
                self.samples()
            )));
        }
        if self.levels.len() < 2 {
            return Err(Error::invalid("need at least two distinct levels"));
        }
        if self.channel_noise.len() != 1 && self.channel_noise.len() != self.n_channels {
            return Err(Error::invalid(
                "channel_noise needs one value or one per channel",
            ));
        }
        let non_negative = |v: f64| v >= 0.0 && v.is_finite();
        if !self.channel_noise.iter().all(|&v| non_negative(v))
            || !non_negative(self.noise_std)
            || !non_negative(self.process_noise_std)
            || !non_negative(self.content_offset)
            || !non_negative(self.switch_rate)
            || !non_negative(self.transition_s)
        {
            return Err(Error::invalid(
                "noise, offset, rate and transition values must be >= 0",
            ));
        }
        if !(self.teacher.feedback_gain >= 0.0 && self.teacher.feedback_gain < 1.0) {
            return Err(Error::invalid("teacher feedback_gain must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Generated sessions plus the model that produced their scores.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub sessions: Vec<SessionTrace>,
    pub teacher: NarxModel,
}

fn latent_levels(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = spec.samples();
    let p_switch = (spec.switch_rate * spec.target_dt).min(1.0);
    let alpha = if spec.transition_s > 0.0 {
        1.0 - (-spec.target_dt / spec.transition_s).exp()
    } else {
        1.0
    };
    let mut target = spec.levels[rng.random_range(0..spec.levels.len())];
    let mut x = target;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.random::<f64>() < p_switch {
            let others: Vec<f64> = spec
                .levels
                .iter()
                .copied()
                .filter(|&l| l != target)
                .collect();
            target = others[rng.random_range(0..others.len())];
        }
        x += alpha * (target - x);
        out.push(x);
    }
    out
}

fn pooled_stats(name: &str, series: &[&[f64]]) -> ChannelStats {
    let n: usize = series.iter().map(|s| s.len()).sum();
    let mean = series.iter().flat_map(|s| s.iter()).sum::<f64>() / n as f64;
    let var = series
        .iter()
        .flat_map(|s| s.iter())
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    ChannelStats {
        name: name.to_string(),
        mean,
        std: var.sqrt(),
    }
}

/// Gives every feedback path a positive sign and scales the paths so their
/// summed absolute gain is `gain`. Positive feedback makes the score a
/// smoothed, lagging response to quality changes.
fn make_contractive(weights: &mut NarxWeights, config: &NarxConfig, gain: f64) {
    let r = config.regressor_dim();
    for h in 0..config.hidden {
        for k in 1..=config.d_y {
            let w = &mut weights.w1[h * r + config.feedback_column(k)];
            *w = w.abs().copysign(weights.w2[h]);
        }
    }
    let mut total = 0.0;
    for h in 0..config.hidden {
        for k in 1..=config.d_y {
            total += (weights.w2[h] * weights.w1[h * r + config.feedback_column(k)]).abs();
        }
    }
    if total == 0.0 {
        return;
    }
    let scale = gain / total;
    for h in 0..config.hidden {
        for k in 1..=config.d_y {
            weights.w1[h * r + config.feedback_column(k)] *= scale;
        }
    }
}

/// Re-expresses the network so its output `y` becomes `(y - m) / s`,
/// leaving the dynamics unchanged.
fn standardize_output(weights: &mut NarxWeights, config: &NarxConfig, m: f64, s: f64) {
    let r = config.regressor_dim();
    for h in 0..config.hidden {
        let mut fb_sum = 0.0;
        for k in 1..=config.d_y {
            let w = &mut weights.w1[h * r + config.feedback_column(k)];
            fb_sum += *w;
            *w *= s;
        }
        weights.b1[h] += m * fb_sum;
        weights.w2[h] /= s;
    }
    weights.b2 = (weights.b2 - m) / s;
}

fn rollouts(
    weights: &NarxWeights,
    config: &NarxConfig,
    inputs: &[NormalizedInputs],
) -> Vec<Vec<f64>> {
    let warm = vec![0.0; config.t_min()];
    inputs
        .iter()
        .map(|i| rollout_normalized(weights, config, i, &warm, Feedback::Own))
        .collect()
}

/// Closed-loop rollout from a zero warm-up with `innovations[t]` added to
/// each output before it is fed back.
fn rollout_with_innovations(
    weights: &NarxWeights,
    config: &NarxConfig,
    inputs: &NormalizedInputs,
    innovations: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; config.t_min()];
    let mut row = vec![0.0; config.regressor_dim()];
    let mut act = vec![0.0; config.hidden];
    for t in config.t_min()..inputs.len {
        inputs.fill_row(config, t, &out, &mut row);
        out.push(weights.eval_into(&row, &mut act) + innovations[t]);
    }
    out
}

/// Generates sessions and teacher in memory.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let config = spec.teacher_config()?;
    let names = spec.channel_names();
    let n_sessions = spec.n_contents * spec.sessions_per_content;

    let mut raw = Vec::with_capacity(n_sessions);
    let mut rngs = Vec::with_capacity(n_sessions);
    for content in 0..spec.n_contents {
        let mut offset_rng =
            ChaCha8Rng::seed_from_u64(keyed_u64(spec.seed, u64::MAX - content as u64));
        let offsets: Vec<f64> = (0..spec.n_channels)
            .map(|_| offset_rng.random_range(-1.0..=1.0) * spec.content_offset)
            .collect();
        for k in 0..spec.sessions_per_content {
            let index = content * spec.sessions_per_content + k;
            let mut rng = ChaCha8Rng::seed_from_u64(keyed_u64(spec.seed, index as u64));
            let latent = latent_levels(spec, &mut rng);
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            let channels: Vec<(String, TimeSeries)> = (0..spec.n_channels)
                .map(|c| {
                    let sd = spec.channel_noise(c);
                    let v = latent
                        .iter()
                        .map(|x| x + offsets[c] + sd * unit.sample(&mut rng))
                        .collect();
                    Ok((names[c].clone(), TimeSeries::new(v, spec.target_dt, 0.0)?))
                })
                .collect::<Result<_>>()?;
            raw.push(SessionTrace::new(
                format!("c{content}s{k}"),
                format!("c{content}"),
                channels,
                None,
            )?);
            rngs.push(rng);
        }
    }

    let channel_stats: Vec<ChannelStats> = names
        .iter()
        .map(|name| {
            let series: Vec<&[f64]> = raw
                .iter()
                .map(|s| s.channel(name).expect("generated").values())
                .collect();
            pooled_stats(name, &series)
        })
        .collect();
    let output = ChannelStats {
        name: "subjective".into(),
        mean: TEACHER_OUTPUT_MEAN,
        std: TEACHER_OUTPUT_STD,
    };
    let normalizer = Normalizer::new(channel_stats, output)?;
    let inputs: Vec<NormalizedInputs> = raw
        .iter()
        .map(|s| NormalizedInputs::new(s, &normalizer))
        .collect::<Result<_>>()?;

    let mut weights = init_weights(&config, spec.teacher.seed);
    make_contractive(&mut weights, &config, spec.teacher.feedback_gain);
    let first = rollouts(&weights, &config, &inputs);
    let tails: Vec<&[f64]> = first.iter().map(|y| &y[config.t_min()..]).collect();
    let stats = pooled_stats("y", &tails);
    if !(stats.std > 1e-9) || !stats.mean.is_finite() {
        return Err(Error::NonFinite {
            what: "teacher output".into(),
        });
    }
    standardize_output(&mut weights, &config, stats.mean, stats.std);
    let outputs: Vec<Vec<f64>> = if spec.process_noise_std > 0.0 {
        let sd = spec.process_noise_std / TEACHER_OUTPUT_STD;
        let noise = Normal::new(0.0, sd).expect("positive sd");
        inputs
            .iter()
            .zip(rngs.iter_mut())
            .map(|(i, rng)| {
                let e: Vec<f64> = (0..i.len).map(|_| noise.sample(rng)).collect();
                rollout_with_innovations(&weights, &config, i, &e)
            })
            .collect()
    } else {
        rollouts(&weights, &config, &inputs)
    };

    let mut sessions = Vec::with_capacity(n_sessions);
    for ((session, y_norm), mut rng) in raw.into_iter().zip(outputs).zip(rngs) {
        let noise = Normal::new(0.0, 1.0).expect("unit normal");
        let y: Vec<f64> = y_norm
            .iter()
            .map(|&z| {
                let clean = normalizer.denormalize_output(z);
                if spec.noise_std > 0.0 {
                    clean + spec.noise_std * noise.sample(&mut rng)
                } else {
                    clean
                }
            })
            .collect();
        let subjective = TimeSeries::new(y, spec.target_dt, 0.0)?;
        subjective.check_finite("synthetic subjective")?;
        sessions.push(SessionTrace {
            subjective: Some(subjective),
            ..session
        });
    }
    let teacher = NarxModel::new(config, weights, normalizer, Some(spec.teacher.seed))?;
    Ok(SynthData { sessions, teacher })
}

/// Generates a dataset under `out_dir`: trace CSVs in `traces/`, the
/// teacher as `teacher.json` and `manifest.toml`.
pub fn synth_generate(spec: &SynthSpec, out_dir: &Path) -> Result<Manifest> {
    let data = generate(spec)?;
    let traces = out_dir.join("traces");
    std::fs::create_dir_all(&traces).map_err(|e| Error::io(&traces, e))?;
    let mut manifest = Manifest::new("synth", spec.target_dt, out_dir);
    for s in &data.sessions {
        let mut channels = std::collections::BTreeMap::new();
        for (name, series) in &s.channels {
            let rel = PathBuf::from("traces").join(format!("{}_{name}.csv", s.id));
            save_trace(&out_dir.join(&rel), series)?;
            channels.insert(name.clone(), rel);
        }
        let rel = PathBuf::from("traces").join(format!("{}_subjective.csv", s.id));
        save_trace(&out_dir.join(&rel), s.subjective()?)?;
        manifest.sessions.push(SessionEntry {
            id: s.id.clone(),
            source_content: s.source_content.clone(),
            subjective: Some(rel),
            channels,
        });
    }
    save_model(&out_dir.join("teacher.json"), &data.teacher)?;
    manifest.save(&out_dir.join("manifest.toml"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narx::forward_closed_loop;

    fn small() -> SynthSpec {
        SynthSpec {
            n_contents: 2,
            sessions_per_content: 2,
            length_s: 80.0,
            noise_std: 0.0,
            process_noise_std: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn default_shape() {
        let spec = SynthSpec::default();
        assert_eq!(spec.n_contents * spec.sessions_per_content, 15);
        assert_eq!(spec.samples(), 300);
        let data = generate(&SynthSpec {
            length_s: 60.0,
            ..spec
        })
        .unwrap();
        assert_eq!(data.sessions.len(), 15);
        let contents: std::collections::BTreeSet<_> =
            data.sessions.iter().map(|s| &s.source_content).collect();
        assert_eq!(contents.len(), 3);
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.sessions, b.sessions);
        assert_eq!(a.teacher, b.teacher);
    }

    #[test]
    fn teacher_reproduces_noise_free_scores() {
        let data = generate(&small()).unwrap();
        for s in &data.sessions {
            let y = s.subjective().unwrap().values();
            let f = forward_closed_loop(&data.teacher, s, y).unwrap();
            let err = f
                .values
                .values()
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-9, "{err}");
        }
    }

    #[test]
    fn output_scale() {
        let data = generate(&SynthSpec {
            length_s: 300.0,
            ..small()
        })
        .unwrap();
        let all: Vec<f64> = data
            .sessions
            .iter()
            .flat_map(|s| s.subjective().unwrap().values().to_vec())
            .collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let sd = (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
        assert!((mean - 50.0).abs() < 3.0, "{mean}");
        assert!((sd - 10.0).abs() < 3.0, "{sd}");
    }

    #[test]
    fn standardization_keeps_dynamics() {
        let config = NarxConfig::new(1, 1, 2, 3).unwrap();
        let w = init_weights(&config, 5);
        let mut v = w.clone();
        standardize_output(&mut v, &config, 0.3, 2.5);
        let x = [0.2, -0.4, 0.7, 0.1];
        let y_std = [(x[2] - 0.3) / 2.5, (x[3] - 0.3) / 2.5];
        let xs = [x[0], x[1], y_std[0], y_std[1]];
        assert!(((w.eval(&x) - 0.3) / 2.5 - v.eval(&xs)).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_sessions() {
        assert!(SynthSpec {
            length_s: 40.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SynthSpec::from_toml_str("n_contents = 0").is_err());
        assert!(SynthSpec::from_toml_str("bogus = 1").is_err());
    }
}
