//! Locally weighted ridge surrogates and the end-to-end explanation
//! pipelines for images and 2D points.

use serde::{Deserialize, Serialize};

use crate::blackbox::{argmax, validate_probs, BlackBox};
use crate::error::{dim_err, param_err, Error, Result};
use crate::image::{Explanation, Image, InterpretableMask, Neighbourhood, SuperpixelSegmentation};
use crate::metrics::{cosine_mask_distance, exponential_kernel, DistanceKind, KernelConfig, MsssimConfig, MsssimReference};
use crate::perturb::{sample_masks, Realizer, SamplerSpec};
use crate::segment::{slic_segment, SlicParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeConfig {
    pub alpha: f64,
    pub fit_intercept: bool,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self { alpha: 1.0, fit_intercept: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl RidgeFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// In-place Cholesky factorisation `A = L L^T` of a dense SPD matrix stored
/// row-major; the lower triangle is overwritten with `L`.
fn cholesky(a: &mut [f64], d: usize) -> Result<()> {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::Numeric("normal equations (matrix not positive definite)"));
        }
        let l_jj = diag.sqrt();
        a[j * d + j] = l_jj;
        for i in (j + 1)..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = s / l_jj;
        }
    }
    Ok(())
}

fn cholesky_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in (i + 1)..d {
            s -= l[k * d + i] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

/// Minimises `sum_i w_i (y_i - b.x_i - c)^2 + alpha ||b||^2` with an
/// unpenalised intercept `c`: weighted centering followed by a Cholesky solve
/// of `(X'WX + alpha I) b = X'Wy`.
pub fn fit_weighted_ridge<R: AsRef<[f64]>>(x: &[R], y: &[f64], w: &[f64], cfg: &RidgeConfig) -> Result<RidgeFit> {
    let n = x.len();
    if n == 0 {
        return Err(param_err("ridge fit needs at least one sample"));
    }
    if y.len() != n || w.len() != n {
        return Err(dim_err(format!("{n} rows, {} targets, {} weights", y.len(), w.len())));
    }
    let d = x[0].as_ref().len();
    if x.iter().any(|r| r.as_ref().len() != d) {
        return Err(dim_err("design matrix rows differ in length"));
    }
    if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) {
        return Err(param_err(format!("alpha must be >= 0, got {}", cfg.alpha)));
    }
    if x.iter().flat_map(|r| r.as_ref()).chain(y).chain(w).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("ridge inputs"));
    }
    if w.iter().any(|v| *v < 0.0) {
        return Err(param_err("weights must be non-negative"));
    }
    let w_sum: f64 = w.iter().sum();
    if w_sum <= 0.0 {
        return Err(Error::DegenerateWeights);
    }

    let (x_mean, y_mean) = if cfg.fit_intercept {
        let mut xm = vec![0.0; d];
        let mut ym = 0.0;
        for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
            for (m, v) in xm.iter_mut().zip(row.as_ref()) {
                *m += wi * v;
            }
            ym += wi * yi;
        }
        xm.iter_mut().for_each(|m| *m /= w_sum);
        (xm, ym / w_sum)
    } else {
        (vec![0.0; d], 0.0)
    };

    if d == 0 {
        return Ok(RidgeFit { coefficients: vec![], intercept: y_mean });
    }

    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centred = vec![0.0; d];
    for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
        if wi == 0.0 {
            continue;
        }
        for (c, (v, m)) in centred.iter_mut().zip(row.as_ref().iter().zip(&x_mean)) {
            *c = v - m;
        }
        let yc = yi - y_mean;
        for i in 0..d {
            let wci = wi * centred[i];
            rhs[i] += wci * yc;
            for j in 0..=i {
                gram[i * d + j] += wci * centred[j];
            }
        }
    }
    for i in 0..d {
        gram[i * d + i] += cfg.alpha;
        for j in 0..i {
            gram[j * d + i] = gram[i * d + j];
        }
    }
    cholesky(&mut gram, d)?;
    cholesky_solve(&gram, d, &mut rhs);
    let intercept = y_mean - rhs.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    if rhs.iter().any(|v| !v.is_finite()) || !intercept.is_finite() {
        return Err(Error::Numeric("ridge solution"));
    }
    Ok(RidgeFit { coefficients: rhs, intercept })
}

/// Full configuration of an image explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub n_samples: usize,
    pub sampler: SamplerSpec,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub ridge: RidgeConfig,
    #[serde(default)]
    pub segments: SlicParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// MS-SSIM constants; when absent they are fitted to the image size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msssim: Option<MsssimConfig>,
}

fn default_batch_size() -> usize {
    32
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            sampler: SamplerSpec::mean(),
            kernel: KernelConfig::cosine(),
            ridge: RidgeConfig::default(),
            segments: SlicParams::default(),
            seed: 0,
            batch_size: default_batch_size(),
            msssim: None,
        }
    }
}

impl ExplainConfig {
    /// Classic LIME setup: mean-colour occlusion weighted by cosine distance.
    pub fn default_lime() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(param_err("n_samples must be at least 2"));
        }
        if self.batch_size == 0 {
            return Err(param_err("batch_size must be at least 1"));
        }
        if !(self.kernel.sigma > 0.0) {
            return Err(param_err("kernel sigma must be > 0"));
        }
        self.sampler.validate()
    }

    /// Identifier of the sampler, distance, seed and sample count.
    pub fn digest(&self) -> String {
        format!(
            "{}|{}|seed={}|n={}",
            self.sampler,
            self.kernel.distance_kind.name(),
            self.seed,
            self.n_samples
        )
    }

    /// `sampler/distance` label used to key results.
    pub fn label(&self) -> String {
        format!("{}/{}", self.sampler, self.kernel.distance_kind.name())
    }
}

#[derive(Debug, Clone)]
pub struct ImageExplanation {
    pub explanation: Explanation,
    pub neighbourhood: Neighbourhood,
    pub segmentation: SuperpixelSegmentation,
}

struct BatchOut {
    probs: Vec<Vec<f64>>,
    similarity: Vec<Option<f64>>,
}

/// Segments the image, samples masks, realizes and scores them with the
/// black-box, weights them with the exponential kernel and fits a ridge
/// surrogate for the class the black-box assigns to the unperturbed image.
pub fn explain_image(image: &Image, blackbox: &dyn BlackBox<Image>, cfg: &ExplainConfig) -> Result<ImageExplanation> {
    cfg.validate()?;
    let segmentation = slic_segment(image, &cfg.segments)?;
    explain_with_segmentation(image, segmentation, blackbox, cfg)
}

/// As [`explain_image`] with a precomputed segmentation.
pub fn explain_with_segmentation(
    image: &Image,
    segmentation: SuperpixelSegmentation,
    blackbox: &dyn BlackBox<Image>,
    cfg: &ExplainConfig,
) -> Result<ImageExplanation> {
    cfg.validate()?;
    segmentation.check_image(image)?;
    let s = segmentation.n_segments();
    if s == 1 {
        log::warn!("segmentation produced a single superpixel; explanation has one coefficient");
    }
    let masks = sample_masks(cfg.n_samples, s, cfg.seed)?;
    let realizer = Realizer::new(image, &segmentation, cfg.sampler)?;
    let reference = match cfg.kernel.distance_kind {
        DistanceKind::Msssim => {
            let mcfg = match &cfg.msssim {
                Some(c) => c.clone(),
                None => MsssimConfig::for_min_side(image.width().min(image.height()))?,
            };
            Some(MsssimReference::new(image, &mcfg)?)
        }
        DistanceKind::CosineMask => None,
    };

    let run_batch = |start: usize, batch: &[InterpretableMask]| -> Result<BatchOut> {
        let images = batch
            .iter()
            .enumerate()
            .map(|(k, m)| realizer.realize(m, cfg.seed ^ (start + k) as u64))
            .collect::<Result<Vec<_>>>()?;
        let probs = blackbox
            .predict_batch(&images)
            .map_err(|e| Error::BlackBox { index: start, source: Box::new(e) })?;
        if probs.len() != images.len() {
            return Err(Error::BlackBox {
                index: start,
                source: Box::new(param_err(format!("{} outputs for {} inputs", probs.len(), images.len()))),
            });
        }
        for (k, p) in probs.iter().enumerate() {
            validate_probs(p, blackbox.n_classes())
                .map_err(|e| Error::BlackBox { index: start + k, source: Box::new(e) })?;
        }
        let similarity = match &reference {
            Some(r) => images.iter().map(|z| r.compare(z).map(Some)).collect::<Result<Vec<_>>>()?,
            None => vec![None; images.len()],
        };
        Ok(BatchOut { probs, similarity })
    };

    let chunks: Vec<(usize, &[InterpretableMask])> = masks
        .chunks(cfg.batch_size)
        .enumerate()
        .map(|(i, c)| (i * cfg.batch_size, c))
        .collect();
    #[cfg(feature = "parallel")]
    let outs: Vec<Result<BatchOut>> = {
        use rayon::prelude::*;
        chunks.par_iter().map(|(start, c)| run_batch(*start, c)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outs: Vec<Result<BatchOut>> = chunks.iter().map(|(start, c)| run_batch(*start, c)).collect();

    let mut probs = Vec::with_capacity(masks.len());
    let mut similarity = Vec::with_capacity(masks.len());
    for out in outs {
        let out = out?;
        probs.extend(out.probs);
        similarity.extend(out.similarity);
    }

    let class_id = argmax(&probs[0]);
    let targets: Vec<f64> = probs.iter().map(|p| p[class_id]).collect();
    let distances = masks
        .iter()
        .zip(&similarity)
        .map(|(m, sim)| match sim {
            None => cosine_mask_distance(m),
            Some(v) if cfg.kernel.msssim_as_similarity => Ok(*v),
            Some(v) => Ok((1.0 - v).clamp(0.0, 1.0)),
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = distances
        .iter()
        .map(|d| exponential_kernel(*d, cfg.kernel.sigma))
        .collect::<Result<Vec<_>>>()?;

    let design: Vec<Vec<f64>> = masks.iter().map(InterpretableMask::as_features).collect();
    let fit = fit_weighted_ridge(&design, &targets, &weights, &cfg.ridge)?;
    let explanation = Explanation {
        class_id,
        intercept: fit.intercept,
        coefficients: fit.coefficients,
        config_digest: cfg.digest(),
    };
    Ok(ImageExplanation {
        explanation,
        neighbourhood: Neighbourhood { masks, targets, distances, weights },
        segmentation,
    })
}

/// Linear surrogate of a 2D classifier around a query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Explanation2D {
    pub class_id: usize,
    pub coefficients: [f64; 2],
    pub intercept: f64,
}

/// Uniformly weighted ridge fit of the probability of the query's predicted
/// class against the raw sample coordinates.
pub fn explain_point2d(
    query: [f64; 2],
    samples: &[[f64; 2]],
    blackbox: &dyn BlackBox<[f64; 2]>,
    cfg: &RidgeConfig,
) -> Result<Explanation2D> {
    if samples.len() < 3 {
        return Err(param_err(format!("need at least 3 samples, got {}", samples.len())));
    }
    let class_id = argmax(&blackbox.predict(&query)?);
    let targets: Vec<f64> = blackbox
        .predict_batch(samples)?
        .into_iter()
        .map(|p| p[class_id])
        .collect();
    let weights = vec![1.0; samples.len()];
    let fit = fit_weighted_ridge(samples, &targets, &weights, cfg)?;
    Ok(Explanation2D {
        class_id,
        coefficients: [fit.coefficients[0], fit.coefficients[1]],
        intercept: fit.intercept,
    })
}

/// Euclidean distance between coefficient vectors; the intercept is left out.
pub fn surrogate_param_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(dim_err(format!("{} vs {} coefficients", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::{ConstantBlackBox, FnBlackBox, QuadrantClassifier};
    use crate::synthetic::textured_image;
    use rand::Rng as _;

    fn fit(x: &[Vec<f64>], y: &[f64], w: &[f64], alpha: f64) -> RidgeFit {
        fit_weighted_ridge(x, y, w, &RidgeConfig { alpha, fit_intercept: true }).unwrap()
    }

    #[test]
    fn constant_targets() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let f = fit(&x, &[0.4; 6], &[1.0; 6], 1.0);
        assert!(f.coefficients.iter().all(|c| c.abs() < 1e-12));
        assert!((f.intercept - 0.4).abs() < 1e-12);
    }

    #[test]
    fn exact_linear_recovery() {
        let x: Vec<Vec<f64>> = [-1.0, 0.0, 0.5, 2.0, 3.0].iter().map(|&v| vec![v]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let f = fit(&x, &y, &[1.0, 0.5, 2.0, 1.0, 3.0], 0.0);
        assert!((f.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((f.intercept - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicated_row_equals_doubled_weight() {
        let mut r = crate::rng::rng(4);
        let x: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..8).map(|_| r.random_range(0.0..1.0)).collect();
        let w: Vec<f64> = (0..8).map(|_| r.random_range(0.1..1.0)).collect();
        let mut w2 = w.clone();
        w2[3] *= 2.0;
        let doubled = fit(&x, &y, &w2, 0.7);
        let mut xd = x.clone();
        xd.push(x[3].clone());
        let mut yd = y.clone();
        yd.push(y[3]);
        let mut wd = w.clone();
        wd.push(w[3]);
        let dup = fit(&xd, &yd, &wd, 0.7);
        for (a, b) in doubled.coefficients.iter().zip(&dup.coefficients) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((doubled.intercept - dup.intercept).abs() < 1e-9);
    }

    #[test]
    fn ridge_shrinks_with_alpha() {
        let mut r = crate::rng::rng(9);
        let x: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|row| row[0] - 2.0 * row[2] + r.random_range(-0.1..0.1)).collect();
        let w = vec![1.0; 30];
        let norm = |a: f64| fit(&x, &y, &w, a).coefficients.iter().map(|c| c * c).sum::<f64>();
        let mut prev = norm(0.0);
        for a in [0.1, 1.0, 5.0, 50.0] {
            let cur = norm(a);
            assert!(cur <= prev + 1e-15);
            prev = cur;
        }
    }

    #[test]
    fn ridge_errors() {
        let x = vec![vec![1.0], vec![2.0]];
        let cfg = RidgeConfig::default();
        assert!(matches!(fit_weighted_ridge(&x, &[1.0, 2.0], &[0.0, 0.0], &cfg), Err(Error::DegenerateWeights)));
        assert!(matches!(fit_weighted_ridge(&x, &[1.0, f64::NAN], &[1.0, 1.0], &cfg), Err(Error::Numeric(_))));
        assert!(fit_weighted_ridge(&x, &[1.0], &[1.0, 1.0], &cfg).is_err());
        assert!(fit_weighted_ridge(&x, &[1.0, 2.0], &[1.0, 1.0], &RidgeConfig { alpha: -1.0, fit_intercept: true }).is_err());
    }

    #[test]
    fn no_intercept_fit() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let f = fit_weighted_ridge(&x, &[2.0, 4.0, 6.0], &[1.0; 3], &RidgeConfig { alpha: 0.0, fit_intercept: false }).unwrap();
        assert_eq!(f.intercept, 0.0);
        assert!((f.coefficients[0] - 2.0).abs() < 1e-12);
    }

    fn small_cfg(sampler: SamplerSpec, kernel: KernelConfig) -> ExplainConfig {
        ExplainConfig {
            n_samples: 64,
            sampler,
            kernel,
            segments: SlicParams::new(12),
            seed: 3,
            ..ExplainConfig::default()
        }
    }

    #[test]
    fn constant_blackbox_zero_coefficients() {
        let img = textured_image(48, 48, 3, 1);
        let bb = ConstantBlackBox::new(vec![0.2, 0.8]).unwrap();
        let out = explain_image(&img, &bb, &small_cfg(SamplerSpec::mean(), KernelConfig::cosine())).unwrap();
        assert!(out.explanation.coefficients.iter().all(|c| c.abs() < 1e-9));
        assert!((out.explanation.intercept - 0.8).abs() < 1e-9);
        assert_eq!(out.explanation.class_id, 1);
    }

    #[test]
    fn linear_blackbox_recovers_equal_coefficients() {
        let img = textured_image(48, 48, 3, 2);
        let mut cfg = small_cfg(SamplerSpec::zero(), KernelConfig::cosine());
        cfg.n_samples = 300;
        cfg.ridge.alpha = 1e-9;
        let seg = slic_segment(&img, &cfg.segments).unwrap();
        let s = seg.n_segments();
        let reference = img.clone();
        let seg_for_bb = seg.clone();
        // Reports the fraction of superpixels left untouched.
        let bb = FnBlackBox::new(2, move |z: &Image| {
            let mut kept = vec![true; seg_for_bb.n_segments()];
            for (p, &l) in seg_for_bb.labels().iter().enumerate() {
                if z.pixel(p) != reference.pixel(p) {
                    kept[l as usize] = false;
                }
            }
            let frac = kept.iter().filter(|k| **k).count() as f64 / kept.len() as f64;
            vec![frac, 1.0 - frac]
        });
        let out = explain_with_segmentation(&img, seg, &bb, &cfg).unwrap();
        assert_eq!(out.explanation.class_id, 0);
        for c in &out.explanation.coefficients {
            assert!((c - 1.0 / s as f64).abs() < 1e-6, "{c} vs {}", 1.0 / s as f64);
        }
        // Surrogate evaluated at the query reproduces f(x) = 1.
        let at_query = out.explanation.intercept + out.explanation.coefficients.iter().sum::<f64>();
        assert!((at_query - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_explanations() {
        let img = textured_image(48, 48, 3, 5);
        for kernel in [KernelConfig::cosine(), KernelConfig::msssim()] {
            let cfg = small_cfg(SamplerSpec::noise(0.05), kernel);
            let a = explain_image(&img, &QuadrantClassifier, &cfg).unwrap();
            let b = explain_image(&img, &QuadrantClassifier, &cfg).unwrap();
            assert_eq!(a.explanation, b.explanation);
            assert_eq!(a.neighbourhood, b.neighbourhood);
        }
    }

    #[test]
    fn neighbourhood_invariants() {
        let img = textured_image(48, 48, 3, 6);
        let cfg = small_cfg(SamplerSpec::blur(5), KernelConfig::msssim());
        let out = explain_image(&img, &QuadrantClassifier, &cfg).unwrap();
        let nb = &out.neighbourhood;
        assert_eq!(nb.len(), 64);
        assert_eq!(nb.masks[0], InterpretableMask::all_ones(out.segmentation.n_segments()));
        assert_eq!(nb.weights[0], 1.0);
        assert!(nb.weights.iter().all(|w| *w > 0.0 && *w <= 1.0));
        assert_eq!(out.explanation.coefficients.len(), out.segmentation.n_segments());
        assert_eq!(out.explanation.config_digest, "blur@5|msssim|seed=3|n=64");
    }

    #[test]
    fn blackbox_failure_carries_index() {
        struct Failing;
        impl BlackBox<Image> for Failing {
            fn n_classes(&self) -> usize {
                2
            }
            fn predict_batch(&self, _: &[Image]) -> Result<Vec<Vec<f64>>> {
                Err(param_err("boom"))
            }
        }
        let img = textured_image(32, 32, 3, 1);
        let err = explain_image(&img, &Failing, &small_cfg(SamplerSpec::mean(), KernelConfig::cosine())).unwrap_err();
        assert!(matches!(err, Error::BlackBox { index: 0, .. }), "{err}");
    }

    #[test]
    fn point2d_linear_recovery() {
        let bb = FnBlackBox::new(2, |x: &[f64; 2]| {
            let p = (0.5 + 0.3 * x[0]).clamp(0.0, 1.0);
            vec![p, 1.0 - p]
        });
        let samples: Vec<[f64; 2]> = (0..41)
            .flat_map(|i| (0..5).map(move |j| [-1.0 + i as f64 * 0.05, j as f64 * 0.3 - 0.6]))
            .collect();
        let e = explain_point2d([0.5, 0.0], &samples, &bb, &RidgeConfig { alpha: 1e-10, fit_intercept: true }).unwrap();
        assert_eq!(e.class_id, 0);
        assert!((e.coefficients[0] - 0.3).abs() < 1e-8);
        assert!(e.coefficients[1].abs() < 1e-8);
    }

    #[test]
    fn point2d_constant_and_errors() {
        let bb = ConstantBlackBox::new(vec![0.6, 0.4]).unwrap();
        let samples = [[0.0, 0.0], [1.0, 0.5], [0.3, -0.2], [0.9, 0.9]];
        let e = explain_point2d([0.0, 0.0], &samples, &bb, &RidgeConfig::default()).unwrap();
        assert_eq!(e.coefficients, [0.0, 0.0]);
        assert!(explain_point2d([0.0, 0.0], &samples[..2], &bb, &RidgeConfig::default()).is_err());
    }

    #[test]
    fn point2d_duplicate_equals_weight() {
        let bb = FnBlackBox::new(2, |x: &[f64; 2]| {
            let p = 1.0 / (1.0 + (-(x[0] * 2.0 - x[1])).exp());
            vec![p, 1.0 - p]
        });
        let samples = vec![[0.1, 0.2], [0.5, -0.3], [0.9, 0.4], [-0.2, 0.8], [0.3, 0.3]];
        let cfg = RidgeConfig::default();
        let mut dup = samples.clone();
        dup.push(samples[2]);
        let a = explain_point2d([0.2, 0.1], &dup, &bb, &cfg).unwrap();
        let class = a.class_id;
        let y: Vec<f64> = samples.iter().map(|s| bb.predict(s).unwrap()[class]).collect();
        let mut w = vec![1.0; samples.len()];
        w[2] = 2.0;
        let b = fit_weighted_ridge(&samples, &y, &w, &cfg).unwrap();
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!((a.intercept - b.intercept).abs() < 1e-9);
    }

    #[test]
    fn param_distance() {
        assert_eq!(surrogate_param_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((surrogate_param_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(surrogate_param_distance(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(surrogate_param_distance(&[1.0], &[1.0, 2.0]).is_err());
    }
}
