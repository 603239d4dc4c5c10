//! Explanation robustness: explain clean and distorted versions of the same
//! image under one (sampler, distance) configuration and measure how far the
//! two relevance maps drift apart.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBox;
use crate::error::{dim_err, Error, Result};
use crate::image::{project_explanation, Image, RelevanceMap};
use crate::metrics::{explanation_distance, DistanceKind, KernelConfig};
use crate::perturb::{distort, DistortionSpec, SamplerKind, SamplerSpec};
use crate::rng::derive_seed;
use crate::surrogate::{explain_image, ExplainConfig};
use crate::synth2d::csv_err;

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub reference: Image,
    pub distorted: Image,
    pub distortion: DistortionSpec,
    pub source_id: String,
}

/// Pairs every image with every distortion. Distortion `j` of image `i` is
/// seeded with `derive_seed(seed, [i, j])`.
pub fn pairs_from_images(
    images: &[(String, Image)],
    distortions: &[DistortionSpec],
    seed: u64,
) -> Result<Vec<PairRecord>> {
    let mut pairs = Vec::with_capacity(images.len() * distortions.len());
    for (i, (id, img)) in images.iter().enumerate() {
        for (j, d) in distortions.iter().enumerate() {
            pairs.push(PairRecord {
                reference: img.clone(),
                distorted: distort(img, *d, derive_seed(seed, &[i as u64, j as u64]))?,
                distortion: *d,
                source_id: id.clone(),
            });
        }
    }
    Ok(pairs)
}

/// Loads every decodable image in `dir` (sorted by file name), resizes it to
/// `resize_to` square and pairs it with each distortion. Unreadable files are
/// skipped with a warning.
pub fn build_pairs(
    dir: impl AsRef<Path>,
    distortions: &[DistortionSpec],
    resize_to: usize,
    seed: u64,
) -> Result<Vec<PairRecord>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut images = Vec::new();
    for path in paths {
        match Image::load(&path) {
            Ok(img) => {
                let img = img.resize_bilinear(resize_to, resize_to)?;
                let id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                images.push((id, img));
            }
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if images.is_empty() {
        return Err(Error::Config(format!("no decodable images in {}", dir.display())));
    }
    pairs_from_images(&images, distortions, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub sampler: String,
    pub distance: String,
    pub distortion: String,
    pub mean_dexp: f64,
    pub count: usize,
    /// `mean_dexp` over the baseline's mean for the same distortion; NaN when
    /// that baseline mean is zero.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDivergence {
    pub source_id: String,
    pub distortion: String,
    pub config: String,
    pub seed: u64,
    pub reference_class: usize,
    pub distorted_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFailure {
    pub source_id: String,
    pub distortion: String,
    pub config: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_pairs: usize,
    pub n_configs: usize,
    pub seeds: Vec<u64>,
    pub class_divergence: Vec<ClassDivergence>,
    pub failures: Vec<PairFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessResult {
    pub rows: Vec<RobustnessRow>,
    pub diagnostics: Diagnostics,
}

impl RobustnessResult {
    pub fn row(&self, sampler: &str, distance: &str, distortion: &str) -> Option<&RobustnessRow> {
        self.rows
            .iter()
            .find(|r| r.sampler == sampler && r.distance == distance && r.distortion == distortion)
    }

    /// `sampler,distance,distortion,mean_dexp,count`.
    pub fn results_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sampler", "distance", "distortion", "mean_dexp", "count"]).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.sampler.clone(),
                r.distance.clone(),
                r.distortion.clone(),
                r.mean_dexp.to_string(),
                r.count.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }

    /// `sampler,distance,distortion,normalized`.
    pub fn normalized_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sampler", "distance", "distortion", "normalized"]).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([r.sampler.clone(), r.distance.clone(), r.distortion.clone(), r.normalized.to_string()])
                .map_err(csv_err)?;
        }
        finish_csv(w)
    }

    pub fn diagnostics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.diagnostics)?)
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn is_baseline(cfg: &ExplainConfig) -> bool {
    cfg.sampler.kind == SamplerKind::Mean && cfg.kernel.distance_kind == DistanceKind::CosineMask
}

struct Explained {
    class_id: usize,
    map: RelevanceMap,
}

fn explain_to_map(image: &Image, bb: &dyn BlackBox<Image>, cfg: &ExplainConfig) -> Result<Explained> {
    let e = explain_image(image, bb, cfg)?;
    let map = project_explanation(&e.explanation, &e.segmentation)?;
    Ok(Explained { class_id: e.explanation.class_id, map })
}

/// Explains both images of every pair under every configuration and seed and
/// averages `D_exp` (K = 1) per (configuration, distortion). Both images of a
/// pair share the explanation seed `derive_seed(seed, [reference index])`,
/// so an unchanged image yields `D_exp = 0`. The mean-occlusion / cosine
/// configuration must be present; it is the normalisation baseline.
pub fn run_robustness(
    pairs: &[PairRecord],
    configs: &[ExplainConfig],
    blackbox: &dyn BlackBox<Image>,
    seeds: &[u64],
) -> Result<RobustnessResult> {
    let baseline = configs
        .iter()
        .position(is_baseline)
        .ok_or_else(|| Error::Config("configs must include the mean-occlusion / cosine baseline".into()))?;
    if pairs.is_empty() || seeds.is_empty() {
        return Err(Error::Config("need at least one pair and one seed".into()));
    }
    let (w, h) = (pairs[0].reference.width(), pairs[0].reference.height());
    for p in pairs {
        for img in [&p.reference, &p.distorted] {
            if img.width() != w || img.height() != h {
                return Err(dim_err(format!("pair {} is not {w}x{h}", p.source_id)));
            }
        }
    }
    for c in configs {
        c.validate()?;
    }

    // Each distinct reference is explained once per (config, seed).
    let mut refs: Vec<usize> = Vec::new();
    let mut ref_of_pair = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let found = refs
            .iter()
            .position(|&r| pairs[r].source_id == p.source_id && pairs[r].reference == p.reference);
        ref_of_pair.push(match found {
            Some(k) => k,
            None => {
                refs.push(i);
                refs.len() - 1
            }
        });
    }

    enum Unit {
        Reference(usize),
        Distorted(usize),
    }
    let mut units = Vec::new();
    for (si, _) in seeds.iter().enumerate() {
        for ci in 0..configs.len() {
            for r in 0..refs.len() {
                units.push((si, ci, Unit::Reference(r)));
            }
            for p in 0..pairs.len() {
                units.push((si, ci, Unit::Distorted(p)));
            }
        }
    }
    let run = |(si, ci, unit): &(usize, usize, Unit)| -> Result<Explained> {
        let ref_index = match unit {
            Unit::Reference(r) => *r,
            Unit::Distorted(p) => ref_of_pair[*p],
        };
        let cfg = ExplainConfig { seed: derive_seed(seeds[*si], &[ref_index as u64]), ..configs[*ci].clone() };
        let image = match unit {
            Unit::Reference(r) => &pairs[refs[*r]].reference,
            Unit::Distorted(p) => &pairs[*p].distorted,
        };
        explain_to_map(image, blackbox, &cfg)
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<Explained>> = {
        use rayon::prelude::*;
        units.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<Explained>> = units.iter().map(run).collect();

    let per_block = refs.len() + pairs.len();
    let mut diagnostics = Diagnostics {
        n_pairs: pairs.len(),
        n_configs: configs.len(),
        seeds: seeds.to_vec(),
        ..Default::default()
    };
    // (config, distortion label) -> (sum, count), distortions in first-seen order
    let mut distortion_order: Vec<String> = Vec::new();
    for p in pairs {
        let label = p.distortion.to_string();
        if !distortion_order.contains(&label) {
            distortion_order.push(label);
        }
    }
    let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for (si, &seed) in seeds.iter().enumerate() {
        for (ci, cfg) in configs.iter().enumerate() {
            let block = &outcomes[(si * configs.len() + ci) * per_block..][..per_block];
            for (pi, pair) in pairs.iter().enumerate() {
                let distortion = pair.distortion.to_string();
                let fail = |e: &Error| PairFailure {
                    source_id: pair.source_id.clone(),
                    distortion: distortion.clone(),
                    config: cfg.label(),
                    seed,
                    error: e.to_string(),
                };
                let (a, b) = match (&block[ref_of_pair[pi]], &block[refs.len() + pi]) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => {
                        diagnostics.failures.push(fail(e));
                        continue;
                    }
                };
                if a.class_id != b.class_id {
                    diagnostics.class_divergence.push(ClassDivergence {
                        source_id: pair.source_id.clone(),
                        distortion: distortion.clone(),
                        config: cfg.label(),
                        seed,
                        reference_class: a.class_id,
                        distorted_class: b.class_id,
                    });
                }
                match explanation_distance(std::slice::from_ref(&a.map), std::slice::from_ref(&b.map)) {
                    Ok(d) => {
                        let di = distortion_order.iter().position(|l| *l == distortion).expect("seen");
                        let e = sums.entry((ci, di)).or_insert((0.0, 0));
                        e.0 += d;
                        e.1 += 1;
                    }
                    Err(e) => diagnostics.failures.push(fail(&e)),
                }
            }
        }
    }

    let mut rows = Vec::new();
    for (ci, cfg) in configs.iter().enumerate() {
        for (di, distortion) in distortion_order.iter().enumerate() {
            let Some(&(sum, count)) = sums.get(&(ci, di)) else { continue };
            let mean = sum / count as f64;
            let base = sums.get(&(baseline, di)).map(|&(s, c)| s / c as f64);
            let normalized = match base {
                Some(b) if b > 0.0 => mean / b,
                _ => f64::NAN,
            };
            rows.push(RobustnessRow {
                sampler: cfg.sampler.to_string(),
                distance: cfg.kernel.distance_kind.name().to_string(),
                distortion: distortion.clone(),
                mean_dexp: mean,
                count,
                normalized,
            });
        }
    }
    Ok(RobustnessResult { rows, diagnostics })
}

/// Blends the image with a diverging overlay: alpha is `0.5 * |v| / max|v|`,
/// positive relevance tints green and negative red. Gray inputs are promoted
/// to RGB.
pub fn render_heatmap(image: &Image, map: &RelevanceMap) -> Result<Image> {
    if image.width() != map.width() || image.height() != map.height() {
        return Err(dim_err(format!(
            "image is {}x{}, relevance map {}x{}",
            image.width(),
            image.height(),
            map.width(),
            map.height()
        )));
    }
    let max = map.max_abs();
    let mut data = Vec::with_capacity(image.n_pixels() * 3);
    for (p, &v) in map.values().iter().enumerate() {
        let px = image.pixel(p);
        let rgb = if px.len() == 3 { [px[0], px[1], px[2]] } else { [px[0]; 3] };
        let alpha = if max > 0.0 { 0.5 * v.abs() / max } else { 0.0 };
        let tint = if v >= 0.0 { [0.0, 1.0, 0.0] } else { [1.0, 0.0, 0.0] };
        for c in 0..3 {
            data.push((1.0 - alpha) * rgb[c] + alpha * tint[c]);
        }
    }
    Image::new(image.width(), image.height(), 3, data)
}

pub fn save_heatmap(image: &Image, map: &RelevanceMap, path: impl AsRef<Path>) -> Result<()> {
    render_heatmap(image, map)?.save(path)
}

/// Samplers of the full grid: zero, mean, noise 0.01/0.05/0.1, blur 3/5/11
/// and contrast 0.5.
pub fn default_samplers() -> Vec<SamplerSpec> {
    vec![
        SamplerSpec::zero(),
        SamplerSpec::mean(),
        SamplerSpec::noise(0.01),
        SamplerSpec::noise(0.05),
        SamplerSpec::noise(0.1),
        SamplerSpec::blur(3),
        SamplerSpec::blur(5),
        SamplerSpec::blur(11),
        SamplerSpec::contrast(0.5),
    ]
}

pub fn default_distortions() -> Vec<DistortionSpec> {
    vec![SamplerSpec::noise(0.05), SamplerSpec::blur(5), SamplerSpec::contrast(0.5)]
}

/// Every sampler crossed with cosine and MS-SSIM weighting, sharing the rest
/// of `base`.
pub fn config_grid(base: &ExplainConfig, samplers: &[SamplerSpec]) -> Vec<ExplainConfig> {
    let mut out = Vec::with_capacity(samplers.len() * 2);
    for s in samplers {
        for kind in [DistanceKind::CosineMask, DistanceKind::Msssim] {
            out.push(ExplainConfig {
                sampler: *s,
                kernel: KernelConfig { distance_kind: kind, ..base.kernel },
                ..base.clone()
            });
        }
    }
    out
}

/// Settings of the robustness experiment as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessConfig {
    pub explain: ExplainConfig,
    pub samplers: Vec<SamplerSpec>,
    pub distortions: Vec<DistortionSpec>,
    pub resize_to: usize,
    pub seeds: Vec<u64>,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            explain: ExplainConfig::default(),
            samplers: default_samplers(),
            distortions: default_distortions(),
            resize_to: 224,
            seeds: vec![0],
        }
    }
}

impl RobustnessConfig {
    pub fn configs(&self) -> Vec<ExplainConfig> {
        config_grid(&self.explain, &self.samplers)
    }
}
