//! Built-in full-reference frame quality metrics on 8-bit luma planes.
//!
//! Other quality models enter the engine as precomputed trace CSVs.

mod extract;
mod gmsd;
mod psnr;
mod ssim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use extract::{extract_trace, read_luma_frames};
pub use gmsd::gmsd_frame;
pub use psnr::{psnr_frame, PSNR_CAP_DB};
pub use ssim::ssim_frame;

/// Smallest width and height accepted; the window metrics need spatial support.
pub const MIN_DIM: usize = 32;

/// One 8-bit luma plane, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LumaFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LumaFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{} bytes for a {width}x{height} plane",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Reference and distorted planes of identical size.
#[derive(Debug, Clone)]
pub struct FramePair {
    reference: LumaFrame,
    distorted: LumaFrame,
}

impl FramePair {
    pub fn new(reference: LumaFrame, distorted: LumaFrame) -> Result<Self> {
        if reference.width != distorted.width || reference.height != distorted.height {
            return Err(Error::InvalidFrame(format!(
                "reference is {}x{}, distorted is {}x{}",
                reference.width, reference.height, distorted.width, distorted.height
            )));
        }
        if reference.width < MIN_DIM || reference.height < MIN_DIM {
            return Err(Error::InvalidFrame(format!(
                "{}x{} is below the {MIN_DIM}x{MIN_DIM} minimum",
                reference.width, reference.height
            )));
        }
        Ok(Self {
            reference,
            distorted,
        })
    }

    pub fn reference(&self) -> &LumaFrame {
        &self.reference
    }

    pub fn distorted(&self) -> &LumaFrame {
        &self.distorted
    }

    pub fn width(&self) -> usize {
        self.reference.width
    }

    pub fn height(&self) -> usize {
        self.reference.height
    }
}

/// Frame metrics available for trace extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameMetric {
    Psnr,
    Ssim,
    Gmsd,
}

impl FrameMetric {
    pub fn name(self) -> &'static str {
        match self {
            FrameMetric::Psnr => "psnr",
            FrameMetric::Ssim => "ssim",
            FrameMetric::Gmsd => "gmsd",
        }
    }

    pub fn compute(self, pair: &FramePair) -> f64 {
        match self {
            FrameMetric::Psnr => psnr_frame(pair),
            FrameMetric::Ssim => ssim_frame(pair),
            FrameMetric::Gmsd => gmsd_frame(pair),
        }
    }
}

impl std::str::FromStr for FrameMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psnr" => Ok(FrameMetric::Psnr),
            "ssim" => Ok(FrameMetric::Ssim),
            "gmsd" => Ok(FrameMetric::Gmsd),
            other => Err(Error::invalid(format!("unknown frame metric `{other}`"))),
        }
    }
}

/// Valid-region 2-D correlation with a separable kernel.
///
/// Returns a `(width - k + 1) x (height - k + 1)` plane.
pub(crate) fn separable_valid(
    plane: &[f64],
    width: usize,
    height: usize,
    kx: &[f64],
    ky: &[f64],
) -> (Vec<f64>, usize, usize) {
    let ow = width + 1 - kx.len();
    let oh = height + 1 - ky.len();
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        let src = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = kx.iter().zip(&src[x..]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = ky
                .iter()
                .enumerate()
                .map(|(j, k)| k * rows[(y + j) * ow + x])
                .sum();
        }
    }
    (out, ow, oh)
}
