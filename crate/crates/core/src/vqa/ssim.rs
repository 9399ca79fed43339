use super::{separable_valid, FramePair};

const K1: f64 = 0.01;
const K2: f64 = 0.03;
const PEAK: f64 = 255.0;
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;

fn gaussian_kernel() -> Vec<f64> {
    let c = (WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..WINDOW)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SIGMA * SIGMA)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Local statistics over the valid Gaussian-window region.
pub(crate) struct SsimMaps {
    /// Luminance comparison term per window.
    pub luminance: Vec<f64>,
    /// Contrast-structure comparison term per window.
    pub contrast_structure: Vec<f64>,
    /// Full SSIM per window.
    pub ssim: Vec<f64>,
}

pub(crate) fn ssim_maps(pair: &FramePair) -> SsimMaps {
    let (w, h) = (pair.width(), pair.height());
    let x = pair.reference().to_f64();
    let y = pair.distorted().to_f64();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let k = gaussian_kernel();
    let filt = |p: &[f64]| separable_valid(p, w, h, &k, &k).0;
    let (mx, my) = (filt(&x), filt(&y));
    let (exx, eyy, exy) = (filt(&xx), filt(&yy), filt(&xy));

    let c1 = (K1 * PEAK).powi(2);
    let c2 = (K2 * PEAK).powi(2);
    let n = mx.len();
    let mut maps = SsimMaps {
        luminance: Vec::with_capacity(n),
        contrast_structure: Vec::with_capacity(n),
        ssim: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (ux, uy) = (mx[i], my[i]);
        let sxx = exx[i] - ux * ux;
        let syy = eyy[i] - uy * uy;
        let sxy = exy[i] - ux * uy;
        // 2*(a*b) and a*a + b*b coincide bit for bit when a == b.
        let lum_num = 2.0 * (ux * uy) + c1;
        let lum_den = ux * ux + uy * uy + c1;
        let cs_num = 2.0 * sxy + c2;
        let cs_den = sxx + syy + c2;
        maps.luminance.push(lum_num / lum_den);
        maps.contrast_structure.push(cs_num / cs_den);
        maps.ssim.push((lum_num * cs_num) / (lum_den * cs_den));
    }
    maps
}

/// Mean SSIM over the valid region (11x11 Gaussian window, sigma 1.5).
pub fn ssim_frame(pair: &FramePair) -> f64 {
    let map = ssim_maps(pair).ssim;
    map.iter().sum::<f64>() / map.len() as f64
}
