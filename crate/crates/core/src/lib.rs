//! Continuous-time QoE prediction from multiple video-quality traces.
//!
//! Quality traces (PSNR, SSIM, GMSD or any precomputed model) drive a NARX
//! network trained with Levenberg–Marquardt. A harness sweeps lag and width
//! configurations over several initializations and combines the resulting
//! forecasts by pointwise averaging.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::type_complexity,
    clippy::needless_range_loop
)]

pub mod app;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod lm;
pub mod manifest;
pub mod metrics;
pub mod narx;
pub mod rng;
pub mod synth;
pub mod trace;
pub mod vqa;

pub use error::{Error, ErrorClass, Result};
pub use forecast::{Forecast, LoopMode, Provenance};
pub use narx::{NarxConfig, NarxModel, NarxWeights};
pub use trace::{Normalizer, SessionTrace, TimeSeries};
