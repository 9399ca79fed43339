//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::DMatrix;
use qoe_narx::narx::{init_weights, NarxConfig, NarxWeights};
use qoe_narx::trace::{ChannelStats, Normalizer};
use qoe_narx::vqa::LumaFrame;
use qoe_narx::{SessionTrace, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference Jacobian of `f` at `theta`.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, theta: &[f64], h: f64) -> DMatrix<f64> {
    let n = f(theta).len();
    let mut j = DMatrix::zeros(n, theta.len());
    let mut p = theta.to_vec();
    for k in 0..theta.len() {
        p[k] = theta[k] + h;
        let plus = f(&p);
        p[k] = theta[k] - h;
        let minus = f(&p);
        p[k] = theta[k];
        for i in 0..n {
            j[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    j
}

/// Random network, one random session and a non-trivial normalizer.
pub struct Instance {
    pub config: NarxConfig,
    pub weights: NarxWeights,
    pub session: SessionTrace,
    pub normalizer: Normalizer,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = NarxConfig::new(
        rng.random_range(1..=3),
        rng.random_range(0..=3),
        rng.random_range(1..=3),
        rng.random_range(1..=5),
    )
    .unwrap();
    let len = rng.random_range(25..=45);
    let names: Vec<String> = (0..config.n_channels).map(|c| format!("u{c}")).collect();
    let channels = names
        .iter()
        .map(|n| {
            let v = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
            (n.clone(), TimeSeries::new(v, 1.0, 0.0).unwrap())
        })
        .collect();
    let y = (0..len).map(|_| rng.random_range(20.0..80.0)).collect();
    let session = SessionTrace::new(
        "s",
        "A",
        channels,
        Some(TimeSeries::new(y, 1.0, 0.0).unwrap()),
    )
    .unwrap();
    let normalizer = Normalizer::new(
        names
            .iter()
            .map(|n| ChannelStats {
                name: n.clone(),
                mean: rng.random_range(-0.5..0.5),
                std: rng.random_range(0.5..2.0),
            })
            .collect(),
        ChannelStats {
            name: "subjective".into(),
            mean: 50.0,
            std: 15.0,
        },
    )
    .unwrap();
    let weights = init_weights(&config, seed ^ 0x5eed);
    Instance {
        config,
        weights,
        session,
        normalizer,
    }
}

/// Ranks by counting: `1 + #smaller + (#equal - 1) / 2`.
pub fn counting_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Single-pass textbook Pearson formula; `None` for a zero denominator.
pub fn pearson_direct(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    (den > 0.0).then(|| (n * sxy - sx * sy) / den)
}

pub fn spearman_reference(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson_direct(&counting_ranks(x), &counting_ranks(y))
}

/// Straight-line GMSD: explicit 2x2 pooling, full 3x3 Prewitt kernels,
/// valid region, population standard deviation.
pub fn gmsd_reference(reference: &LumaFrame, distorted: &LumaFrame) -> f64 {
    let pool = |f: &LumaFrame| -> Vec<Vec<f64>> {
        (0..f.height() / 2)
            .map(|y| {
                (0..f.width() / 2)
                    .map(|x| {
                        let mut s = 0.0;
                        for dy in 0..2 {
                            for dx in 0..2 {
                                s += f64::from(f.get(2 * x + dx, 2 * y + dy));
                            }
                        }
                        s / 4.0
                    })
                    .collect()
            })
            .collect()
    };
    let grad = |p: &Vec<Vec<f64>>| -> Vec<f64> {
        let (h, w) = (p.len(), p[0].len());
        let mut out = Vec::new();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let mut gx = 0.0;
                let mut gy = 0.0;
                for k in 0..3 {
                    gx += (p[y + k - 1][x - 1] - p[y + k - 1][x + 1]) / 3.0;
                    gy += (p[y - 1][x + k - 1] - p[y + 1][x + k - 1]) / 3.0;
                }
                out.push((gx * gx + gy * gy).sqrt());
            }
        }
        out
    };
    let gr = grad(&pool(reference));
    let gd = grad(&pool(distorted));
    let c = 170.0;
    let map: Vec<f64> = gr
        .iter()
        .zip(&gd)
        .map(|(a, b)| (2.0 * a * b + c) / (a * a + b * b + c))
        .collect();
    let mean = map.iter().sum::<f64>() / map.len() as f64;
    (map.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / map.len() as f64).sqrt()
}

/// The fixed 64x64 pair: a curved ramp and its horizontal `[1 2 1]/4`
/// blur with clamped borders.
pub fn ramp_pair() -> (LumaFrame, LumaFrame) {
    let ramp = |x: usize, y: usize| ((x * x) / 17 + 2 * y).min(255) as u8;
    let reference = LumaFrame::from_fn(64, 64, ramp);
    let distorted = LumaFrame::from_fn(64, 64, |x, y| {
        let l = u32::from(ramp(x.saturating_sub(1), y));
        let c = u32::from(ramp(x, y));
        let r = u32::from(ramp((x + 1).min(63), y));
        ((l + 2 * c + r + 2) / 4) as u8
    });
    (reference, distorted)
}
