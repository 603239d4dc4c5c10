//! Procedural test imagery: textured natural-looking scenes used by tests,
//! the bundled desk-scale image set and the browser demo.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::image::Image;
use crate::rng::{derive_seed, rng};

/// Textured scene: a smooth colour gradient, a sum of oriented gratings and a
/// handful of soft-edged coloured blobs, all derived from `seed`.
pub fn textured_image(width: usize, height: usize, channels: usize, seed: u64) -> Image {
    let mut r = rng(derive_seed(seed, &[0x7e47]));
    let gratings: Vec<(f64, f64, f64, [f64; 3], f64)> = (0..5)
        .map(|_| {
            let angle = r.random_range(0.0..PI);
            let period = r.random_range(3.0..14.0);
            let phase = r.random_range(0.0..2.0 * PI);
            let tint = [r.random_range(0.3..1.0), r.random_range(0.3..1.0), r.random_range(0.3..1.0)];
            let amp = r.random_range(0.03..0.09);
            (angle, period, phase, tint, amp)
        })
        .collect();
    let blobs: Vec<(f64, f64, f64, [f64; 3])> = (0..6)
        .map(|_| {
            let cx = r.random_range(0.0..width as f64);
            let cy = r.random_range(0.0..height as f64);
            let rad = r.random_range(0.08..0.25) * width.min(height) as f64;
            let color = [r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0)];
            (cx, cy, rad, color)
        })
        .collect();
    let base_a = [r.random_range(0.1..0.9), r.random_range(0.1..0.9), r.random_range(0.1..0.9)];
    let base_b = [r.random_range(0.1..0.9), r.random_range(0.1..0.9), r.random_range(0.1..0.9)];
    let grad_angle = r.random_range(0.0..2.0 * PI);

    let diag = ((width * width + height * height) as f64).sqrt().max(1.0);
    let mut rgb = vec![[0.0_f64; 3]; width * height];
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64, y as f64);
            let t = 0.5 + (xf * grad_angle.cos() + yf * grad_angle.sin()) / diag;
            let mut px = [0.0; 3];
            for c in 0..3 {
                px[c] = base_a[c] * (1.0 - t) + base_b[c] * t;
            }
            for (cx, cy, rad, color) in &blobs {
                let d = ((xf - cx).powi(2) + (yf - cy).powi(2)).sqrt();
                let alpha = 1.0 / (1.0 + ((d - rad) / 1.5).exp());
                for c in 0..3 {
                    px[c] = px[c] * (1.0 - alpha) + color[c] * alpha;
                }
            }
            for (angle, period, phase, tint, amp) in &gratings {
                let u = xf * angle.cos() + yf * angle.sin();
                let v = (2.0 * PI * u / period + phase).sin() * amp;
                for c in 0..3 {
                    px[c] += v * tint[c];
                }
            }
            rgb[y * width + x] = px;
        }
    }
    let data: Vec<f64> = match channels {
        1 => rgb
            .iter()
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect(),
        _ => rgb.iter().flat_map(|p| p.map(|v| v.clamp(0.0, 1.0))).collect(),
    };
    Image::from_raw(width, height, channels, data)
}

/// Deterministic set of `count` RGB textured scenes.
pub fn bundled_images(count: usize, size: usize) -> Vec<Image> {
    (0..count as u64)
        .map(|i| textured_image(size, size, 3, 1000 + i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = textured_image(32, 24, 3, 5);
        let b = textured_image(32, 24, 3, 5);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(a, textured_image(32, 24, 3, 6));
    }

    #[test]
    fn has_texture() {
        let img = textured_image(64, 64, 1, 3);
        let lum = img.luminance();
        let mean = lum.iter().sum::<f64>() / lum.len() as f64;
        let var = lum.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / lum.len() as f64;
        assert!(var > 1e-3);
    }
}
