//! SLIC superpixels in CIELAB space.
//!
//! Cluster centres are seeded on a regular grid, refined with Lloyd
//! iterations restricted to a `2S x 2S` window around each centre, and the
//! resulting label map is post-processed so that every label is a single
//! 4-connected region. The whole procedure is deterministic: no randomness is
//! consumed and ties resolve towards the lower cluster index.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::image::{Image, SuperpixelSegmentation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlicParams {
    pub n_segments: usize,
    pub compactness: f64,
    pub max_iters: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self { n_segments: 50, compactness: 10.0, max_iters: 10 }
    }
}

impl SlicParams {
    pub fn new(n_segments: usize) -> Self {
        Self { n_segments, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB in `[0, 1]` to CIELAB under D65.
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = (0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b) / 0.950_47;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = (0.019_333_9 * r + 0.119_192 * g + 0.950_304_1 * b) / 1.088_83;
    let (fx, fy, fz) = (lab_f(x), lab_f(y), lab_f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn to_lab_plane(image: &Image) -> Vec<[f64; 3]> {
    (0..image.n_pixels())
        .map(|p| {
            let px = image.pixel(p);
            if px.len() == 1 {
                // Gray inputs only carry lightness.
                [rgb_to_lab([px[0]; 3])[0], 0.0, 0.0]
            } else {
                rgb_to_lab([px[0], px[1], px[2]])
            }
        })
        .collect()
}

/// Grid of `nx * ny <= n_segments` cells approximating square cells of area
/// `w*h/n_segments`.
fn grid_shape(width: usize, height: usize, n_segments: usize) -> (usize, usize) {
    let step = ((width * height) as f64 / n_segments as f64).sqrt();
    let mut nx = ((width as f64 / step).round() as usize).clamp(1, width);
    let mut ny = ((height as f64 / step).round() as usize).clamp(1, height);
    while nx * ny > n_segments {
        if (nx > ny && nx > 1) || ny == 1 {
            nx -= 1;
        } else {
            ny -= 1;
        }
    }
    (nx, ny)
}

pub fn slic_segment(image: &Image, params: &SlicParams) -> Result<SuperpixelSegmentation> {
    let (w, h) = (image.width(), image.height());
    let n_pixels = w * h;
    if params.n_segments == 0 {
        return Err(param_err("n_segments must be at least 1"));
    }
    if params.n_segments > n_pixels {
        return Err(param_err(format!(
            "n_segments {} exceeds pixel count {n_pixels}",
            params.n_segments
        )));
    }
    if !(params.compactness.is_finite() && params.compactness >= 0.0) {
        return Err(param_err("compactness must be finite and non-negative"));
    }

    let lab = to_lab_plane(image);
    let (nx, ny) = grid_shape(w, h, params.n_segments);
    let cell_w = w as f64 / nx as f64;
    let cell_h = h as f64 / ny as f64;
    let step = ((n_pixels) as f64 / (nx * ny) as f64).sqrt();
    let spatial_weight = params.compactness / step;

    let mut centers: Vec<Center> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + 0.5) * cell_w - 0.5;
            let y = (j as f64 + 0.5) * cell_h - 0.5;
            let p = (y.round() as usize).min(h - 1) * w + (x.round() as usize).min(w - 1);
            centers.push(Center { lab: lab[p], x, y });
        }
    }

    // Initial assignment: the grid cell containing the pixel.
    let mut labels: Vec<usize> = (0..n_pixels)
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let i = ((x as f64 / cell_w) as usize).min(nx - 1);
            let j = ((y as f64 / cell_h) as usize).min(ny - 1);
            j * nx + i
        })
        .collect();

    let radius = step.ceil() as isize;
    let mut dist = vec![f64::INFINITY; n_pixels];
    for _ in 0..params.max_iters {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        let mut next = labels.clone();
        for (k, c) in centers.iter().enumerate() {
            let cx = c.x.round() as isize;
            let cy = c.y.round() as isize;
            if cx + radius < 0 || cy + radius < 0 {
                continue;
            }
            let x0 = (cx - radius).max(0) as usize;
            let x1 = ((cx + radius) as usize).min(w - 1);
            let y0 = (cy - radius).max(0) as usize;
            let y1 = ((cy + radius) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = y * w + x;
                    let l = &lab[p];
                    let d_lab = ((l[0] - c.lab[0]).powi(2)
                        + (l[1] - c.lab[1]).powi(2)
                        + (l[2] - c.lab[2]).powi(2))
                    .sqrt();
                    let d_xy = ((x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2)).sqrt();
                    let d = d_lab + spatial_weight * d_xy;
                    if d < dist[p] {
                        dist[p] = d;
                        next[p] = k;
                    }
                }
            }
        }

        let mut sums = vec![[0.0_f64; 5]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &k) in next.iter().enumerate() {
            let s = &mut sums[k];
            s[0] += lab[p][0];
            s[1] += lab[p][1];
            s[2] += lab[p][2];
            s[3] += (p % w) as f64;
            s[4] += (p / w) as f64;
            counts[k] += 1;
        }
        for ((c, s), &n) in centers.iter_mut().zip(&sums).zip(&counts) {
            if n > 0 {
                let n = n as f64;
                *c = Center { lab: [s[0] / n, s[1] / n, s[2] / n], x: s[3] / n, y: s[4] / n };
            }
        }

        let changed = next != labels;
        labels = next;
        if !changed {
            break;
        }
    }

    let labels = enforce_connectivity(&labels, w, h);
    SuperpixelSegmentation::from_labels(w, h, labels)
}

/// Splits every label into 4-connected components, keeps the largest
/// component of each label and merges the remaining (orphan) components
/// into the largest adjacent label. Output labels are compacted in order of
/// first appearance in scan order.
fn enforce_connectivity(labels: &[usize], w: usize, h: usize) -> Vec<u32> {
    let n = labels.len();
    const UNSET: usize = usize::MAX;
    let mut comp = vec![UNSET; n];
    let mut comp_label = Vec::new();
    let mut comp_size = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..n {
        if comp[start] != UNSET {
            continue;
        }
        let id = comp_label.len();
        let lab = labels[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            for q in neighbours4(p, w, h) {
                if comp[q] == UNSET && labels[q] == lab {
                    comp[q] = id;
                    queue.push_back(q);
                }
            }
        }
        comp_label.push(lab);
        comp_size.push(size);
    }

    // Largest component per label, first in scan order on ties.
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut keeper = vec![UNSET; n_labels];
    for (id, &lab) in comp_label.iter().enumerate() {
        if keeper[lab] == UNSET || comp_size[id] > comp_size[keeper[lab]] {
            keeper[lab] = id;
        }
    }

    // Component adjacency.
    let n_comps = comp_label.len();
    let mut adjacent: Vec<Vec<usize>> = vec![Vec::new(); n_comps];
    for p in 0..n {
        for q in neighbours4(p, w, h) {
            let (a, b) = (comp[p], comp[q]);
            if a != b && !adjacent[a].contains(&b) {
                adjacent[a].push(b);
            }
        }
    }

    // Resolved label per component; orphans start unresolved.
    let mut resolved: Vec<Option<usize>> = (0..n_comps)
        .map(|id| (keeper[comp_label[id]] == id).then_some(comp_label[id]))
        .collect();
    let mut label_size = vec![0usize; n_labels];
    for id in 0..n_comps {
        if let Some(l) = resolved[id] {
            label_size[l] += comp_size[id];
        }
    }
    loop {
        let mut progress = false;
        let mut pending = false;
        for id in 0..n_comps {
            if resolved[id].is_some() {
                continue;
            }
            let best = adjacent[id]
                .iter()
                .filter_map(|&nb| resolved[nb])
                .max_by(|&a, &b| label_size[a].cmp(&label_size[b]).then(b.cmp(&a)));
            match best {
                Some(l) => {
                    resolved[id] = Some(l);
                    label_size[l] += comp_size[id];
                    progress = true;
                }
                None => pending = true,
            }
        }
        if !pending {
            break;
        }
        // Every orphan touches at least one component, and keepers exist for
        // every label, so some orphan always borders a resolved component.
        debug_assert!(progress);
        if !progress {
            break;
        }
    }

    let mut remap = vec![UNSET; n_labels];
    let mut next_label = 0usize;
    let mut out = Vec::with_capacity(n);
    for p in 0..n {
        let l = resolved[comp[p]].unwrap_or(comp_label[comp[p]]);
        if remap[l] == UNSET {
            remap[l] = next_label;
            next_label += 1;
        }
        out.push(remap[l] as u32);
    }
    out
}

fn neighbours4(p: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (p % w, p / w);
    let left = (x > 0).then(|| p - 1);
    let right = (x + 1 < w).then(|| p + 1);
    let up = (y > 0).then(|| p - w);
    let down = (y + 1 < h).then(|| p + w);
    [left, right, up, down].into_iter().flatten()
}

/// Mean colour of each superpixel, indexed `[segment][channel]`.
pub fn segment_stats(seg: &SuperpixelSegmentation, image: &Image) -> Result<Vec<Vec<f64>>> {
    seg.check_image(image)?;
    let ch = image.channels();
    let mut sums = vec![vec![0.0; ch]; seg.n_segments()];
    let mut counts = vec![0usize; seg.n_segments()];
    for (p, &l) in seg.labels().iter().enumerate() {
        let l = l as usize;
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(image.pixel(p)) {
            *s += v;
        }
    }
    for (s, n) in sums.iter_mut().zip(counts) {
        s.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(sums)
}

/// 4-connected boundary pixels between different labels, for overlays.
pub fn boundary_mask(seg: &SuperpixelSegmentation) -> Vec<bool> {
    let (w, h) = (seg.width(), seg.height());
    let labels = seg.labels();
    (0..w * h)
        .map(|p| neighbours4(p, w, h).any(|q| labels[q] != labels[p]))
        .collect()
}

/// Source image with superpixel boundaries painted red.
pub fn boundary_overlay(image: &Image, seg: &SuperpixelSegmentation) -> Result<Image> {
    seg.check_image(image)?;
    let mask = boundary_mask(seg);
    let mut data = Vec::with_capacity(image.n_pixels() * 3);
    for (p, &edge) in mask.iter().enumerate() {
        if edge {
            data.extend_from_slice(&[1.0, 0.0, 0.0]);
        } else if image.channels() == 1 {
            data.extend_from_slice(&[image.pixel(p)[0]; 3]);
        } else {
            data.extend_from_slice(image.pixel(p));
        }
    }
    Image::new(image.width(), image.height(), 3, data)
}

/// Label map as an 8-bit gray image, labels spread over `[0, 1]`.
pub fn label_image(seg: &SuperpixelSegmentation) -> Image {
    let denom = (seg.n_segments().max(2) - 1) as f64;
    let data = seg.labels().iter().map(|&l| l as f64 / denom).collect();
    Image::from_raw(seg.width(), seg.height(), 1, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::textured_image;

    fn is_connected(seg: &SuperpixelSegmentation, label: u32) -> bool {
        let (w, h) = (seg.width(), seg.height());
        let labels = seg.labels();
        let start = labels.iter().position(|&l| l == label).unwrap();
        let mut seen = vec![false; w * h];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(p) = stack.pop() {
            count += 1;
            for q in neighbours4(p, w, h) {
                if !seen[q] && labels[q] == label {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        count == labels.iter().filter(|&&l| l == label).count()
    }

    #[test]
    fn single_pixel() {
        let img = Image::filled(1, 1, 3, 0.3).unwrap();
        let seg = slic_segment(&img, &SlicParams::new(1)).unwrap();
        assert_eq!(seg.labels(), &[0]);
        assert_eq!(seg.n_segments(), 1);
    }

    #[test]
    fn flat_image_gives_grid_blocks() {
        let img = Image::filled(8, 8, 3, 0.5).unwrap();
        let seg = slic_segment(&img, &SlicParams { n_segments: 4, compactness: 10.0, max_iters: 10 }).unwrap();
        assert_eq!(seg.n_segments(), 4);
        for y in 0..8 {
            for x in 0..8 {
                let expected = (y / 4) * 2 + x / 4;
                assert_eq!(seg.label(x, y), expected, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn too_many_segments_rejected() {
        let img = Image::filled(3, 3, 1, 0.5).unwrap();
        assert!(slic_segment(&img, &SlicParams::new(10)).is_err());
        assert!(slic_segment(&img, &SlicParams::new(0)).is_err());
    }

    #[test]
    fn textured_labels_contiguous_and_connected() {
        for (seed, channels) in [(1, 3), (2, 1), (3, 3)] {
            let img = textured_image(48, 40, channels, seed);
            let seg = slic_segment(&img, &SlicParams::new(30)).unwrap();
            assert!(seg.n_segments() <= 30);
            assert!(seg.segment_sizes().iter().all(|&n| n > 0));
            for l in 0..seg.n_segments() as u32 {
                assert!(is_connected(&seg, l), "label {l} disconnected");
            }
        }
    }

    #[test]
    fn deterministic() {
        let img = textured_image(40, 40, 3, 9);
        let a = slic_segment(&img, &SlicParams::new(25)).unwrap();
        let b = slic_segment(&img, &SlicParams::new(25)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn more_segments_never_fewer_labels_than_one() {
        let img = textured_image(32, 32, 3, 4);
        let one = slic_segment(&img, &SlicParams::new(1)).unwrap().n_segments();
        for n in [2, 5, 16, 40] {
            assert!(slic_segment(&img, &SlicParams::new(n)).unwrap().n_segments() >= one);
        }
    }

    #[test]
    fn stats_constant_image() {
        let img = Image::filled(6, 6, 3, 0.7).unwrap();
        let seg = slic_segment(&img, &SlicParams::new(4)).unwrap();
        for m in segment_stats(&seg, &img).unwrap() {
            assert!(m.iter().all(|v| (v - 0.7).abs() < 1e-12));
        }
    }

    #[test]
    fn stats_two_pixels() {
        let img = Image::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let seg = SuperpixelSegmentation::from_labels(2, 1, vec![0, 1]).unwrap();
        assert_eq!(segment_stats(&seg, &img).unwrap(), vec![vec![0.0], vec![1.0]]);
    }

    #[test]
    fn stats_single_segment_mean() {
        let img = Image::new(2, 2, 1, vec![0.0, 0.5, 0.5, 1.0]).unwrap();
        let seg = SuperpixelSegmentation::from_labels(2, 2, vec![0; 4]).unwrap();
        assert_eq!(segment_stats(&seg, &img).unwrap(), vec![vec![0.5]]);
    }

    #[test]
    fn stats_shape_mismatch() {
        let img = Image::filled(3, 2, 1, 0.1).unwrap();
        let seg = SuperpixelSegmentation::from_labels(2, 2, vec![0; 4]).unwrap();
        assert!(matches!(segment_stats(&seg, &img), Err(crate::Error::Dimension(_))));
    }

    #[test]
    fn orphans_merge_into_largest_neighbour() {
        // Label 1 has two components; the single pixel at (0,2) is the orphan,
        // bordered by label 0 (3 px) and label 2 (5 px).
        #[rustfmt::skip]
        let labels = vec![
            1, 1, 1,
            0, 0, 0,
            1, 2, 2,
            2, 2, 2,
        ];
        let out = enforce_connectivity(&labels, 3, 4);
        let seg = SuperpixelSegmentation::from_labels(3, 4, out).unwrap();
        assert_eq!(seg.n_segments(), 3);
        assert_eq!(seg.label(0, 2), seg.label(1, 2));
    }

    #[test]
    fn lab_reference_values() {
        let white = rgb_to_lab([1.0, 1.0, 1.0]);
        assert!((white[0] - 100.0).abs() < 1e-3 && white[1].abs() < 1e-2 && white[2].abs() < 1e-2);
        let black = rgb_to_lab([0.0, 0.0, 0.0]);
        assert!(black.iter().all(|v| v.abs() < 1e-9));
        // sRGB red: L=53.24, a=80.09, b=67.20
        let red = rgb_to_lab([1.0, 0.0, 0.0]);
        assert!((red[0] - 53.24).abs() < 0.05 && (red[1] - 80.09).abs() < 0.1 && (red[2] - 67.20).abs() < 0.1);
    }
}
