//! Neighbourhood generation: interpretable mask sampling and the image
//! realizations of a mask (zero / mean occlusion and the noise, blur and
//! contrast samplers), plus whole-image distortions.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::image::{Image, InterpretableMask, SuperpixelSegmentation};
use crate::rng::rng;
use crate::segment::segment_stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Zero,
    Mean,
    Noise,
    Blur,
    Contrast,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Zero => "zero",
            SamplerKind::Mean => "mean",
            SamplerKind::Noise => "noise",
            SamplerKind::Blur => "blur",
            SamplerKind::Contrast => "contrast",
        }
    }
}

/// How ablated superpixels are realized. `level` is the noise standard
/// deviation, the blur kernel size or the contrast factor; zero and mean
/// ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    #[serde(default)]
    pub level: f64,
}

/// Whole-image distortion; same parameterisation as a sampler.
pub type DistortionSpec = SamplerSpec;

impl SamplerSpec {
    pub fn zero() -> Self {
        Self { kind: SamplerKind::Zero, level: 0.0 }
    }

    pub fn mean() -> Self {
        Self { kind: SamplerKind::Mean, level: 0.0 }
    }

    pub fn noise(std: f64) -> Self {
        Self { kind: SamplerKind::Noise, level: std }
    }

    pub fn blur(ksize: usize) -> Self {
        Self { kind: SamplerKind::Blur, level: ksize as f64 }
    }

    pub fn contrast(factor: f64) -> Self {
        Self { kind: SamplerKind::Contrast, level: factor }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SamplerKind::Zero | SamplerKind::Mean => Ok(()),
            SamplerKind::Noise => {
                if self.level.is_finite() && self.level > 0.0 {
                    Ok(())
                } else {
                    Err(param_err(format!("noise std must be > 0, got {}", self.level)))
                }
            }
            SamplerKind::Blur => blur_ksize(self.level).map(|_| ()),
            SamplerKind::Contrast => {
                if (0.0..=1.0).contains(&self.level) {
                    Ok(())
                } else {
                    Err(param_err(format!("contrast factor must be in [0, 1], got {}", self.level)))
                }
            }
        }
    }
}

impl fmt::Display for SamplerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SamplerKind::Zero | SamplerKind::Mean => f.write_str(self.kind.name()),
            _ => write!(f, "{}@{}", self.kind.name(), self.level),
        }
    }
}

impl FromStr for SamplerSpec {
    type Err = Error;

    /// Parses `zero`, `mean`, `noise@0.05`, `blur@5` or `contrast@0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, level) = match s.split_once('@') {
            Some((k, l)) => {
                let level: f64 = l
                    .trim()
                    .parse()
                    .map_err(|_| param_err(format!("bad level in '{s}'")))?;
                (k.trim(), Some(level))
            }
            None => (s.trim(), None),
        };
        let kind = match kind {
            "zero" => SamplerKind::Zero,
            "mean" => SamplerKind::Mean,
            "noise" => SamplerKind::Noise,
            "blur" => SamplerKind::Blur,
            "contrast" => SamplerKind::Contrast,
            other => return Err(param_err(format!("unknown sampler kind '{other}'"))),
        };
        let needs_level = matches!(kind, SamplerKind::Noise | SamplerKind::Blur | SamplerKind::Contrast);
        let spec = match (needs_level, level) {
            (true, Some(level)) => SamplerSpec { kind, level },
            (true, None) => return Err(param_err(format!("'{s}' needs a level, e.g. {}@…", kind.name()))),
            (false, _) => SamplerSpec { kind, level: 0.0 },
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn blur_ksize(level: f64) -> Result<usize> {
    if level.fract() != 0.0 || level < 3.0 || (level as usize) % 2 == 0 {
        return Err(param_err(format!("blur kernel size must be odd and >= 3, got {level}")));
    }
    Ok(level as usize)
}

/// First mask is all ones; the rest have i.i.d. fair-coin bits.
pub fn sample_masks(n_samples: usize, n_segments: usize, seed: u64) -> Result<Vec<InterpretableMask>> {
    if n_segments == 0 {
        return Err(param_err("n_segments must be at least 1"));
    }
    if n_samples == 0 {
        return Err(param_err("n_samples must be at least 1"));
    }
    let mut r = rng(seed);
    let mut masks = Vec::with_capacity(n_samples);
    masks.push(InterpretableMask::all_ones(n_segments));
    for _ in 1..n_samples {
        let bits = (0..n_segments).map(|_| r.random_bool(0.5)).collect();
        masks.push(InterpretableMask::new(bits));
    }
    Ok(masks)
}

/// Normalized 1D Gaussian of odd length `ksize` with
/// `sigma = 0.3 * ((ksize - 1) / 2 - 1) + 0.8`.
pub fn gaussian_kernel(ksize: usize) -> Result<Vec<f64>> {
    if ksize < 3 || ksize % 2 == 0 {
        return Err(param_err(format!("blur kernel size must be odd and >= 3, got {ksize}")));
    }
    let sigma = 0.3 * ((ksize as f64 - 1.0) / 2.0 - 1.0) + 0.8;
    let half = (ksize / 2) as isize;
    let raw: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / sum).collect())
}

/// Separable Gaussian blur with clamp-to-edge padding.
pub fn gaussian_blur(image: &Image, ksize: usize) -> Result<Image> {
    let kernel = gaussian_kernel(ksize)?;
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    let half = (ksize / 2) as isize;
    let src = image.data();
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, wgt) in kernel.iter().enumerate() {
                    let xx = (x as isize + k as isize - half).clamp(0, w as isize - 1) as usize;
                    acc += wgt * src[(y * w + xx) * ch + c];
                }
                tmp[(y * w + x) * ch + c] = acc;
            }
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, wgt) in kernel.iter().enumerate() {
                    let yy = (y as isize + k as isize - half).clamp(0, h as isize - 1) as usize;
                    acc += wgt * tmp[(yy * w + x) * ch + c];
                }
                out[(y * w + x) * ch + c] = acc.clamp(0.0, 1.0);
            }
        }
    }
    Ok(Image::from_raw(w, h, ch, out))
}

/// `mean_c + factor * (pixel - mean_c)` with per-channel whole-image means,
/// clipped to `[0, 1]`. A factor of exactly 1 returns the image unchanged.
pub fn change_contrast(image: &Image, factor: f64) -> Image {
    if factor == 1.0 {
        return image.clone();
    }
    let means = image.channel_means();
    let ch = image.channels();
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let m = means[i % ch];
            (m + factor * (v - m)).clamp(0.0, 1.0)
        })
        .collect();
    Image::from_raw(image.width(), image.height(), ch, data)
}

/// Per-image state shared by every realization of a neighbourhood:
/// segment means, and the fully blurred or contrast-changed image, computed
/// once and composited under each mask.
#[derive(Debug, Clone)]
pub struct Realizer<'a> {
    image: &'a Image,
    seg: &'a SuperpixelSegmentation,
    spec: SamplerSpec,
    fill: Fill,
}

#[derive(Debug, Clone)]
enum Fill {
    Zero,
    SegmentMeans(Vec<Vec<f64>>),
    Noise(Normal<f64>),
    Image(Image),
}

impl<'a> Realizer<'a> {
    pub fn new(image: &'a Image, seg: &'a SuperpixelSegmentation, spec: SamplerSpec) -> Result<Self> {
        seg.check_image(image)?;
        spec.validate()?;
        let fill = match spec.kind {
            SamplerKind::Zero => Fill::Zero,
            SamplerKind::Mean => Fill::SegmentMeans(segment_stats(seg, image)?),
            SamplerKind::Noise => Fill::Noise(
                Normal::new(0.0, spec.level).map_err(|e| param_err(e.to_string()))?,
            ),
            SamplerKind::Blur => Fill::Image(gaussian_blur(image, blur_ksize(spec.level)?)?),
            SamplerKind::Contrast => Fill::Image(change_contrast(image, spec.level)),
        };
        Ok(Self { image, seg, spec, fill })
    }

    pub fn spec(&self) -> SamplerSpec {
        self.spec
    }

    /// Image for `mask`: kept superpixels are copied bit-for-bit, ablated ones
    /// are replaced according to the sampler. `rng_seed` only matters for
    /// the noise sampler.
    pub fn realize(&self, mask: &InterpretableMask, rng_seed: u64) -> Result<Image> {
        if mask.len() != self.seg.n_segments() {
            return Err(crate::error::dim_err(format!(
                "mask has {} bits for {} segments",
                mask.len(),
                self.seg.n_segments()
            )));
        }
        let ch = self.image.channels();
        let mut data = self.image.data().to_vec();
        let labels = self.seg.labels();
        if mask.count_ones() == mask.len() {
            return Ok(Image::from_raw(self.image.width(), self.image.height(), ch, data));
        }
        match &self.fill {
            Fill::Zero => {
                for (p, &l) in labels.iter().enumerate() {
                    if !mask.keeps(l as usize) {
                        data[p * ch..(p + 1) * ch].fill(0.0);
                    }
                }
            }
            Fill::SegmentMeans(means) => {
                for (p, &l) in labels.iter().enumerate() {
                    if !mask.keeps(l as usize) {
                        data[p * ch..(p + 1) * ch].copy_from_slice(&means[l as usize]);
                    }
                }
            }
            Fill::Noise(normal) => {
                let mut r = rng(rng_seed);
                for (p, &l) in labels.iter().enumerate() {
                    if !mask.keeps(l as usize) {
                        for v in &mut data[p * ch..(p + 1) * ch] {
                            *v = (*v + normal.sample(&mut r)).clamp(0.0, 1.0);
                        }
                    }
                }
            }
            Fill::Image(src) => {
                for (p, &l) in labels.iter().enumerate() {
                    if !mask.keeps(l as usize) {
                        data[p * ch..(p + 1) * ch].copy_from_slice(src.pixel(p));
                    }
                }
            }
        }
        Ok(Image::from_raw(self.image.width(), self.image.height(), ch, data))
    }
}

pub fn realize(
    image: &Image,
    seg: &SuperpixelSegmentation,
    mask: &InterpretableMask,
    spec: SamplerSpec,
    rng_seed: u64,
) -> Result<Image> {
    Realizer::new(image, seg, spec)?.realize(mask, rng_seed)
}

/// Applies a distortion to the whole image, i.e. a realization with every
/// pixel in one ablated segment.
pub fn distort(image: &Image, spec: DistortionSpec, rng_seed: u64) -> Result<Image> {
    let seg = SuperpixelSegmentation::from_labels(image.width(), image.height(), vec![0; image.n_pixels()])?;
    realize(image, &seg, &InterpretableMask::all_zeros(1), spec, rng_seed)
}
