use super::{separable_valid, FramePair, LumaFrame};

/// Stability constant for 8-bit intensities.
const GMS_C: f64 = 170.0;

/// 2x2 block average; odd trailing rows/columns are dropped.
fn downsample(frame: &LumaFrame) -> (Vec<f64>, usize, usize) {
    let (w, h) = (frame.width() / 2, frame.height() / 2);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let s = u32::from(frame.get(2 * x, 2 * y))
                + u32::from(frame.get(2 * x + 1, 2 * y))
                + u32::from(frame.get(2 * x, 2 * y + 1))
                + u32::from(frame.get(2 * x + 1, 2 * y + 1));
            out.push(f64::from(s) / 4.0);
        }
    }
    (out, w, h)
}

fn gradient_magnitude(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let diff = [1.0 / 3.0, 0.0, -1.0 / 3.0];
    let sum = [1.0, 1.0, 1.0];
    let (gx, _, _) = separable_valid(plane, w, h, &diff, &sum);
    let (gy, _, _) = separable_valid(plane, w, h, &sum, &diff);
    gx.iter()
        .zip(&gy)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect()
}

/// Gradient magnitude similarity deviation. 0 means identical; larger is worse.
pub fn gmsd_frame(pair: &FramePair) -> f64 {
    let (r, w, h) = downsample(pair.reference());
    let (d, _, _) = downsample(pair.distorted());
    let gr = gradient_magnitude(&r, w, h);
    let gd = gradient_magnitude(&d, w, h);
    let gms: Vec<f64> = gr
        .iter()
        .zip(&gd)
        .map(|(a, b)| (2.0 * (a * b) + GMS_C) / (a * a + b * b + GMS_C))
        .collect();
    let n = gms.len() as f64;
    let mean = gms.iter().sum::<f64>() / n;
    (gms.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        let a = LumaFrame::from_fn(64, 48, |x, y| ((x * x + 3 * y) % 256) as u8);
        assert_eq!(gmsd_frame(&FramePair::new(a.clone(), a).unwrap()), 0.0);
    }

    #[test]
    fn bounded() {
        let a = LumaFrame::from_fn(
            64,
            64,
            |x, y| if (x / 4 + y / 4) % 2 == 0 { 0 } else { 255 },
        );
        let b = LumaFrame::from_fn(64, 64, |x, y| ((x * 37 + y * 11) % 256) as u8);
        let v = gmsd_frame(&FramePair::new(a, b).unwrap());
        assert!(v > 0.0 && v <= 0.5, "{v}");
    }

    #[test]
    fn downsample_averages_blocks() {
        let f = LumaFrame::from_fn(5, 3, |x, y| (x + 10 * y) as u8);
        let (d, w, h) = downsample(&f);
        assert_eq!((w, h), (2, 1));
        assert_eq!(d, vec![5.5, 7.5]);
    }
}
