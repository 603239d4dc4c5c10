//! Distances and kernels: cosine mask distance, MS-SSIM and the perceptual
//! distance built on it, the exponential kernel, the explanation distance
//! between relevance maps, and 1D / marginal Wasserstein distances.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, param_err, Result};
use crate::image::{Image, InterpretableMask, RelevanceMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    #[serde(alias = "cosine")]
    CosineMask,
    Msssim,
}

impl DistanceKind {
    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::CosineMask => "cosine",
            DistanceKind::Msssim => "msssim",
        }
    }
}

impl std::str::FromStr for DistanceKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" | "cosine_mask" => Ok(DistanceKind::CosineMask),
            "msssim" | "ms-ssim" => Ok(DistanceKind::Msssim),
            other => Err(param_err(format!("unknown distance '{other}'"))),
        }
    }
}

/// Exponential kernel width and the distance it is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub sigma: f64,
    pub distance_kind: DistanceKind,
    /// Feed raw MS-SSIM similarity into the kernel instead of `1 - MS-SSIM`.
    #[serde(default)]
    pub msssim_as_similarity: bool,
}

impl KernelConfig {
    pub fn cosine() -> Self {
        Self { sigma: 0.25, distance_kind: DistanceKind::CosineMask, msssim_as_similarity: false }
    }

    pub fn msssim() -> Self {
        Self { sigma: 0.25, distance_kind: DistanceKind::Msssim, msssim_as_similarity: false }
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self::cosine()
    }
}

/// `1 - cos(mask, 1)`, which reduces to `1 - sqrt(k / S)` for `k` kept
/// superpixels out of `S`. The all-zeros mask is at distance 1.
pub fn cosine_mask_distance(mask: &InterpretableMask) -> Result<f64> {
    if mask.is_empty() {
        return Err(param_err("mask must have at least one bit"));
    }
    let k = mask.count_ones() as f64;
    Ok(1.0 - (k / mask.len() as f64).sqrt())
}

/// `exp(-d^2 / sigma^2)`.
pub fn exponential_kernel(d: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(param_err(format!("kernel width must be > 0, got {sigma}")));
    }
    Ok((-(d * d) / (sigma * sigma)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsssimConfig {
    pub n_scales: usize,
    pub scale_weights: Vec<f64>,
    pub window_size: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

/// Wang et al. scale exponents. They sum to 1.0001 as published, so they are
/// renormalized before use.
pub const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

impl Default for MsssimConfig {
    fn default() -> Self {
        let total: f64 = MSSSIM_WEIGHTS.iter().sum();
        Self {
            n_scales: 5,
            scale_weights: MSSSIM_WEIGHTS.iter().map(|w| w / total).collect(),
            window_size: 11,
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl MsssimConfig {
    /// Default constants with as many scales (up to five) as an image with
    /// the given shorter side supports; the leading scale weights are
    /// renormalized to sum to one.
    pub fn for_min_side(min_side: usize) -> Result<Self> {
        let base = Self::default();
        let mut n = base.n_scales;
        while n > 1 && min_side < base.window_size << (n - 1) {
            n -= 1;
        }
        if min_side < base.window_size {
            return Err(param_err(format!(
                "image side {min_side} smaller than the {}-pixel window",
                base.window_size
            )));
        }
        let weights = &MSSSIM_WEIGHTS[..n];
        let total: f64 = weights.iter().sum();
        Ok(Self { n_scales: n, scale_weights: weights.iter().map(|w| w / total).collect(), ..base })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_scales == 0 || self.scale_weights.len() != self.n_scales {
            return Err(param_err("scale_weights must have n_scales entries"));
        }
        if (self.scale_weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(param_err("scale_weights must sum to 1"));
        }
        if self.window_size % 2 == 0 || self.window_size == 0 {
            return Err(param_err("window_size must be odd"));
        }
        if !(self.window_sigma > 0.0 && self.dynamic_range > 0.0) {
            return Err(param_err("window_sigma and dynamic_range must be positive"));
        }
        Ok(())
    }

    fn window(&self) -> Vec<f64> {
        let half = (self.window_size / 2) as isize;
        let raw: Vec<f64> = (-half..=half)
            .map(|i| (-((i * i) as f64) / (2.0 * self.window_sigma * self.window_sigma)).exp())
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    fn min_side(&self) -> usize {
        self.window_size << (self.n_scales - 1)
    }
}

#[derive(Debug, Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn downsample(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.w + 2 * x;
                data.push(0.25 * (self.data[i] + self.data[i + 1] + self.data[i + self.w] + self.data[i + self.w + 1]));
            }
        }
        Plane { w, h, data }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane { w: self.w, h: self.h, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Separable "valid" filtering with a symmetric window.
    fn filter_valid(&self, win: &[f64]) -> Plane {
        let k = win.len();
        let (ow, oh) = (self.w + 1 - k, self.h + 1 - k);
        let mut tmp = vec![0.0; ow * self.h];
        for y in 0..self.h {
            let row = &self.data[y * self.w..(y + 1) * self.w];
            for x in 0..ow {
                tmp[y * ow + x] = row[x..x + k].iter().zip(win).map(|(a, b)| a * b).sum();
            }
        }
        let mut out = vec![0.0; ow * oh];
        for y in 0..oh {
            for (i, wgt) in win.iter().enumerate() {
                let src = &tmp[(y + i) * ow..(y + i + 1) * ow];
                for (o, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                    *o += wgt * s;
                }
            }
        }
        Plane { w: ow, h: oh, data: out }
    }
}

/// Per-scale windowed statistics of one image.
#[derive(Debug, Clone)]
struct ScaleStats {
    plane: Plane,
    mu: Plane,
    sq: Plane,
}

/// MS-SSIM reference: the pyramid and local statistics of `x`, reused when
/// scoring many images against the same query.
#[derive(Debug, Clone)]
pub struct MsssimReference {
    cfg: MsssimConfig,
    window: Vec<f64>,
    width: usize,
    height: usize,
    scales: Vec<ScaleStats>,
}

impl MsssimReference {
    pub fn new(x: &Image, cfg: &MsssimConfig) -> Result<Self> {
        cfg.validate()?;
        let min_side = x.width().min(x.height());
        if min_side < cfg.min_side() {
            return Err(param_err(format!(
                "image side {min_side} too small for {} scales with a {}-pixel window (needs {})",
                cfg.n_scales,
                cfg.window_size,
                cfg.min_side()
            )));
        }
        let window = cfg.window();
        let scales = pyramid(x, cfg.n_scales)
            .into_iter()
            .map(|plane| {
                let mu = plane.filter_valid(&window);
                let sq = plane.map(|v| v * v).filter_valid(&window);
                ScaleStats { plane, mu, sq }
            })
            .collect();
        Ok(Self { cfg: cfg.clone(), window, width: x.width(), height: x.height(), scales })
    }

    pub fn config(&self) -> &MsssimConfig {
        &self.cfg
    }

    pub fn compare(&self, y: &Image) -> Result<f64> {
        if y.width() != self.width || y.height() != self.height {
            return Err(param_err(format!(
                "MS-SSIM needs equal sizes, got {}x{} and {}x{}",
                self.width,
                self.height,
                y.width(),
                y.height()
            )));
        }
        let c1 = (self.cfg.k1 * self.cfg.dynamic_range).powi(2);
        let c2 = (self.cfg.k2 * self.cfg.dynamic_range).powi(2);
        let last = self.cfg.n_scales - 1;
        let mut score = 1.0;
        for (j, (xs, yp)) in self.scales.iter().zip(pyramid(y, self.cfg.n_scales)).enumerate() {
            let mu_y = yp.filter_valid(&self.window);
            let sq_y = yp.map(|v| v * v).filter_valid(&self.window);
            let xy = Plane {
                w: yp.w,
                h: yp.h,
                data: xs.plane.data.iter().zip(&yp.data).map(|(a, b)| a * b).collect(),
            }
            .filter_valid(&self.window);
            let n = mu_y.data.len() as f64;
            let mut cs_sum = 0.0;
            let mut ssim_sum = 0.0;
            for i in 0..mu_y.data.len() {
                let (mx, my) = (xs.mu.data[i], mu_y.data[i]);
                let vx = xs.sq.data[i] - mx * mx;
                let vy = sq_y.data[i] - my * my;
                let cov = xy.data[i] - mx * my;
                let cs = (2.0 * cov + c2) / (vx + vy + c2);
                cs_sum += cs;
                if j == last {
                    ssim_sum += cs * (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
                }
            }
            // Negative correlation would make fractional powers undefined.
            let term = if j == last { ssim_sum / n } else { cs_sum / n }.max(0.0);
            score *= term.powf(self.cfg.scale_weights[j]);
        }
        Ok(score)
    }
}

fn pyramid(img: &Image, n_scales: usize) -> Vec<Plane> {
    let mut planes = Vec::with_capacity(n_scales);
    planes.push(Plane { w: img.width(), h: img.height(), data: img.luminance() });
    for _ in 1..n_scales {
        let next = planes.last().expect("non-empty").downsample();
        planes.push(next);
    }
    planes
}

/// Multi-scale structural similarity on luminance.
pub fn msssim(x: &Image, y: &Image, cfg: &MsssimConfig) -> Result<f64> {
    if x.width() != y.width() || x.height() != y.height() {
        return Err(param_err(format!(
            "MS-SSIM needs equal sizes, got {}x{} and {}x{}",
            x.width(),
            x.height(),
            y.width(),
            y.height()
        )));
    }
    MsssimReference::new(x, cfg)?.compare(y)
}

/// `1 - MS-SSIM`, clamped to `[0, 1]`.
pub fn perceptual_distance(x: &Image, y: &Image, cfg: &MsssimConfig) -> Result<f64> {
    Ok((1.0 - msssim(x, y, cfg)?).clamp(0.0, 1.0))
}

/// Mean over the K explained classes of `||E_k - E'_k||_F^2`.
pub fn explanation_distance(maps_a: &[RelevanceMap], maps_b: &[RelevanceMap]) -> Result<f64> {
    if maps_a.is_empty() || maps_a.len() != maps_b.len() {
        return Err(dim_err(format!(
            "explanation lists must be equal and non-empty, got {} and {}",
            maps_a.len(),
            maps_b.len()
        )));
    }
    let mut total = 0.0;
    for (k, (a, b)) in maps_a.iter().zip(maps_b).enumerate() {
        if a.width() != b.width() || a.height() != b.height() {
            return Err(dim_err(format!(
                "relevance map {k}: {}x{} vs {}x{}",
                a.width(),
                a.height(),
                b.width(),
                b.height()
            )));
        }
        total += a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
    }
    Ok(total / maps_a.len() as f64)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Exact W1 between two empirical distributions: the integral of
/// `|F_a - F_b|`, or the mean sorted-pair gap when the sizes agree.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(param_err("Wasserstein distance needs non-empty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(crate::Error::Numeric("wasserstein input"));
    }
    let (sa, sb) = (sorted(a), sorted(b));
    if sa.len() == sb.len() {
        let sum: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum();
        return Ok(sum / sa.len() as f64);
    }
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = sa[0].min(sb[0]);
    let mut total = 0.0;
    while i < sa.len() || j < sb.len() {
        let next = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (next - prev) * (i as f64 / na - j as f64 / nb).abs();
        while i < sa.len() && sa[i] == next {
            i += 1;
        }
        while j < sb.len() && sb[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

/// Mean over coordinates of the 1D Wasserstein distance between marginals.
pub fn marginal_wasserstein<P: AsRef<[f64]>>(a: &[P], b: &[P]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(param_err("Wasserstein distance needs non-empty samples"));
    }
    let d = a[0].as_ref().len();
    if d == 0 || a.iter().chain(b).any(|p| p.as_ref().len() != d) {
        return Err(param_err("point sets must share a non-zero dimension"));
    }
    let mut total = 0.0;
    for f in 0..d {
        let xa: Vec<f64> = a.iter().map(|p| p.as_ref()[f]).collect();
        let xb: Vec<f64> = b.iter().map(|p| p.as_ref()[f]).collect();
        total += wasserstein_1d(&xa, &xb)?;
    }
    Ok(total / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::{distort, SamplerSpec};
    use crate::synthetic::textured_image;

    #[test]
    fn cosine_distance_values() {
        assert_eq!(cosine_mask_distance(&InterpretableMask::all_ones(6)).unwrap(), 0.0);
        let one = InterpretableMask::new(vec![false, true, false, false]);
        assert!((cosine_mask_distance(&one).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(cosine_mask_distance(&InterpretableMask::all_zeros(4)).unwrap(), 1.0);
        assert!(cosine_mask_distance(&InterpretableMask::new(vec![])).is_err());
    }

    #[test]
    fn cosine_distance_ignores_positions() {
        let a = InterpretableMask::new(vec![true, true, false, false, false]);
        let b = InterpretableMask::new(vec![false, false, true, false, true]);
        assert_eq!(cosine_mask_distance(&a).unwrap(), cosine_mask_distance(&b).unwrap());
    }

    #[test]
    fn kernel_values() {
        assert_eq!(exponential_kernel(0.0, 0.3).unwrap(), 1.0);
        assert!((exponential_kernel(0.7, 0.7).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((exponential_kernel(0.5, 0.25).unwrap() - 0.018_315_638_888_734_18).abs() < 1e-15);
        assert_eq!(exponential_kernel(-0.4, 0.5).unwrap(), exponential_kernel(0.4, 0.5).unwrap());
        assert!(exponential_kernel(1.0, 0.0).is_err());
        assert!(exponential_kernel(1.0, -1.0).is_err());
        assert!(exponential_kernel(0.2, 0.5).unwrap() > exponential_kernel(0.3, 0.5).unwrap());
    }

    #[test]
    fn default_weights_sum_to_one() {
        MsssimConfig::default().validate().unwrap();
        let c = MsssimConfig::for_min_side(64).unwrap();
        assert_eq!(c.n_scales, 3);
        c.validate().unwrap();
        assert_eq!(MsssimConfig::for_min_side(224).unwrap().n_scales, 5);
        assert_eq!(MsssimConfig::for_min_side(128).unwrap().n_scales, 4);
        assert!(MsssimConfig::for_min_side(8).is_err());
    }

    #[test]
    fn self_similarity_is_one() {
        let img = textured_image(64, 64, 3, 1);
        let cfg = MsssimConfig::for_min_side(64).unwrap();
        assert!((msssim(&img, &img, &cfg).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(perceptual_distance(&img, &img, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn constant_images_equal() {
        let a = Image::filled(48, 48, 1, 0.3).unwrap();
        let cfg = MsssimConfig::for_min_side(48).unwrap();
        assert!((msssim(&a, &a.clone(), &cfg).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_or_mismatched() {
        let a = Image::filled(64, 64, 1, 0.3).unwrap();
        let b = Image::filled(64, 60, 1, 0.3).unwrap();
        assert!(msssim(&a, &b, &MsssimConfig::for_min_side(60).unwrap()).is_err());
        assert!(msssim(&a, &a, &MsssimConfig::default()).is_err());
    }

    #[test]
    fn monotone_in_noise() {
        let img = textured_image(64, 64, 3, 2);
        let cfg = MsssimConfig::for_min_side(64).unwrap();
        let weak = perceptual_distance(&img, &distort(&img, SamplerSpec::noise(0.01), 3).unwrap(), &cfg).unwrap();
        let strong = perceptual_distance(&img, &distort(&img, SamplerSpec::noise(0.1), 3).unwrap(), &cfg).unwrap();
        assert!(weak < strong, "{weak} vs {strong}");
        assert!((0.0..=1.0).contains(&strong));
    }

    #[test]
    fn explanation_distance_values() {
        let id = RelevanceMap::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let zero = RelevanceMap::new(2, 2, vec![0.0; 4]).unwrap();
        assert_eq!(explanation_distance(&[id.clone()], &[id.clone()]).unwrap(), 0.0);
        assert_eq!(explanation_distance(&[id.clone()], &[zero.clone()]).unwrap(), 2.0);
        let two = RelevanceMap::new(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        // per-map distances 2 and 4
        assert_eq!(explanation_distance(&[id.clone(), two], &[zero.clone(), zero.clone()]).unwrap(), 3.0);
        assert_eq!(explanation_distance(&[id.scaled(3.0)], &[zero.clone()]).unwrap(), 18.0);
    }

    #[test]
    fn explanation_distance_shape_errors() {
        let a = RelevanceMap::new(2, 2, vec![0.0; 4]).unwrap();
        let b = RelevanceMap::new(4, 1, vec![0.0; 4]).unwrap();
        assert!(explanation_distance(&[a.clone()], &[b]).is_err());
        assert!(explanation_distance(&[a.clone()], &[]).is_err());
        assert!(explanation_distance(&[], &[]).is_err());
    }

    #[test]
    fn wasserstein_values() {
        assert_eq!(wasserstein_1d(&[0.3, 0.1], &[0.1, 0.3]).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 0.5);
        assert!(wasserstein_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn wasserstein_unequal_sizes_match_replication() {
        // Replicating each sample to a common size leaves the distribution
        // unchanged and reduces to the sorted-pairing formula.
        let a = [0.0, 2.0, 5.0];
        let b = [1.0, 4.0];
        let a6: Vec<f64> = a.iter().flat_map(|&v| [v, v]).collect();
        let b6: Vec<f64> = b.iter().flat_map(|&v| [v, v, v]).collect();
        let direct = wasserstein_1d(&a, &b).unwrap();
        let replicated = wasserstein_1d(&a6, &b6).unwrap();
        assert!((direct - replicated).abs() < 1e-12, "{direct} vs {replicated}");
    }

    #[test]
    fn marginal_values() {
        let a = vec![[0.0, 0.0]];
        let b = vec![[1.0, 2.0]];
        assert_eq!(marginal_wasserstein(&a, &b).unwrap(), 1.5);
        let pts = vec![[0.1, 0.5], [0.7, -0.2], [1.3, 0.4]];
        let shifted: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] + 0.25, p[1] + 0.25]).collect();
        assert!((marginal_wasserstein(&pts, &shifted).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(marginal_wasserstein(&pts, &pts).unwrap(), 0.0);
        let three = vec![vec![0.0, 0.0, 0.0]];
        let two = vec![vec![0.0, 0.0]];
        assert!(marginal_wasserstein(&three, &two).is_err());
    }
}
