use super::FramePair;

/// Value reported for identical frames, where the MSE is zero.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Peak signal-to-noise ratio in dB with peak 255.
pub fn psnr_frame(pair: &FramePair) -> f64 {
    let sse: u64 = pair
        .reference()
        .data()
        .iter()
        .zip(pair.distorted().data())
        .map(|(&a, &b)| {
            let d = i64::from(a) - i64::from(b);
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return PSNR_CAP_DB;
    }
    let mse = sse as f64 / pair.reference().data().len() as f64;
    (10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB)
}
