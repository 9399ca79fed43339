use std::path::Path;

use rayon::prelude::*;

use super::{FrameMetric, FramePair, LumaFrame};
use crate::error::{Error, Result};
use crate::trace::TimeSeries;

/// Per-frame metric trace, one sample per frame pair at `dt = 1/fps`.
pub fn extract_trace(
    reference: &[LumaFrame],
    distorted: &[LumaFrame],
    metric: FrameMetric,
    fps: f64,
) -> Result<TimeSeries> {
    if reference.len() != distorted.len() {
        return Err(Error::LengthMismatch(reference.len(), distorted.len()));
    }
    if reference.is_empty() {
        return Err(Error::Empty);
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::invalid(format!("fps must be > 0, got {fps}")));
    }
    let values = reference
        .par_iter()
        .zip(distorted.par_iter())
        .map(|(r, d)| Ok(metric.compute(&FramePair::new(r.clone(), d.clone())?)))
        .collect::<Result<Vec<f64>>>()?;
    TimeSeries::new(values, 1.0 / fps, 0.0)
}

/// Reads a headerless planar 8-bit luma file; frame `k` occupies bytes
/// `[k*W*H, (k+1)*W*H)`.
pub fn read_luma_frames(path: &Path, width: usize, height: usize) -> Result<Vec<LumaFrame>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let frame_len = width * height;
    if frame_len == 0 || bytes.is_empty() || bytes.len() % frame_len != 0 {
        return Err(Error::InvalidFrame(format!(
            "{}: {} bytes is not a whole number of {width}x{height} frames",
            path.display(),
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(frame_len)
        .map(|c| LumaFrame::new(width, height, c.to_vec()))
        .collect()
}
