//! Two-moons sampling study: quantile uniformisation, neighbourhoods drawn
//! in the uniformised space and mapped back through the inverse transform,
//! and their comparison against samples from the true distribution.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBox;
use crate::error::{dim_err, param_err, Error, Result};
use crate::forest::{train_forest, Forest, ForestConfig};
use crate::image::Image;
use crate::metrics::marginal_wasserstein;
use crate::rng::{derive_seed, rng, Rng};
use crate::surrogate::{explain_point2d, surrogate_param_distance, Explanation2D, RidgeConfig};

const STREAM_TRAIN: u64 = 1;
const STREAM_FOREST: u64 = 2;
const STREAM_TEST: u64 = 3;
const STREAM_NEIGHBOURHOOD: u64 = 4;
const STREAM_TRUTH: u64 = 5;

/// Draw budget for rejection sampling from the true distribution.
pub const REJECTION_BUDGET: u64 = 10_000_000;

/// `n` two-moons points: `n - n/2` on the upper moon `(cos t, sin t)` and
/// `n/2` on the lower moon `(1 - cos t, 0.5 - sin t)`, with `t` on an even
/// grid over `[0, pi]`, plus Gaussian noise per coordinate. Labels are the
/// moon index.
pub fn two_moons(n: usize, noise_std: f64, seed: u64) -> Result<(Vec<[f64; 2]>, Vec<usize>)> {
    if n < 2 {
        return Err(param_err(format!("two_moons needs n >= 2, got {n}")));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(param_err("noise_std must be finite and >= 0"));
    }
    let n_lower = n / 2;
    let n_upper = n - n_lower;
    let grid = |k: usize, count: usize| if count > 1 { PI * k as f64 / (count - 1) as f64 } else { 0.0 };
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n_upper {
        let t = grid(k, n_upper);
        points.push([t.cos(), t.sin()]);
        labels.push(0);
    }
    for k in 0..n_lower {
        let t = grid(k, n_lower);
        points.push([1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    if noise_std > 0.0 {
        let mut r = rng(seed);
        let normal = Normal::new(0.0, noise_std).map_err(|e| param_err(e.to_string()))?;
        for p in &mut points {
            p[0] += normal.sample(&mut r);
            p[1] += normal.sample(&mut r);
        }
    }
    Ok((points, labels))
}

/// One i.i.d. draw from the two-moons distribution (random moon, uniform
/// angle).
fn draw_moon_point(r: &mut Rng, normal: &Normal<f64>) -> [f64; 2] {
    let t = r.random_range(0.0..=PI);
    let base = if r.random_bool(0.5) { [t.cos(), t.sin()] } else { [1.0 - t.cos(), 0.5 - t.sin()] };
    [base[0] + normal.sample(r), base[1] + normal.sample(r)]
}

/// Random i.i.d. two-moons points (as opposed to the angle grid of
/// [`two_moons`]).
pub fn sample_two_moons(n: usize, noise_std: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    let normal = Normal::new(0.0, noise_std).map_err(|e| param_err(e.to_string()))?;
    let mut r = rng(seed);
    Ok((0..n).map(|_| draw_moon_point(&mut r, &normal)).collect())
}

/// Per-feature empirical quantiles at levels `i / (m - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTransform {
    pub n_quantiles: usize,
    pub quantiles: Vec<Vec<f64>>,
}

fn linear_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit_quantile_transform<P: AsRef<[f64]>>(x: &[P], n_quantiles: usize) -> Result<QuantileTransform> {
    if n_quantiles < 2 {
        return Err(param_err(format!("n_quantiles must be >= 2, got {n_quantiles}")));
    }
    if x.len() < 2 {
        return Err(param_err("quantile transform needs at least two rows"));
    }
    let d = x[0].as_ref().len();
    if d == 0 || x.iter().any(|r| r.as_ref().len() != d) {
        return Err(dim_err("rows must share a non-zero dimension"));
    }
    let mut quantiles = Vec::with_capacity(d);
    for f in 0..d {
        let mut col: Vec<f64> = x.iter().map(|r| r.as_ref()[f]).collect();
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("quantile transform input"));
        }
        col.sort_by(f64::total_cmp);
        let q: Vec<f64> = (0..n_quantiles)
            .map(|i| linear_quantile(&col, i as f64 / (n_quantiles - 1) as f64))
            .collect();
        quantiles.push(q);
    }
    Ok(QuantileTransform { n_quantiles, quantiles })
}

/// Piecewise-linear interpolation through `(xs[i], ys[i])`, `xs`
/// non-decreasing, picking the leftmost (`left = true`) or rightmost
/// segment at repeated knots.
fn interp(x: f64, xs: &[f64], ys: &[f64], left: bool) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return if left || xs[0] < xs[n - 1] || x < xs[0] { ys[0] } else { ys[n - 1] };
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = if left { xs.partition_point(|&v| v < x) } else { xs.partition_point(|&v| v <= x) };
    let (x0, x1) = (xs[i - 1], xs[i]);
    let (y0, y1) = (ys[i - 1], ys[i]);
    if x1 == x0 {
        return if left { y0 } else { y1 };
    }
    y0 + (x - x0) * (y1 - y0) / (x1 - x0)
}

impl QuantileTransform {
    fn levels(&self) -> Vec<f64> {
        (0..self.n_quantiles).map(|i| i as f64 / (self.n_quantiles - 1) as f64).collect()
    }

    pub fn dim(&self) -> usize {
        self.quantiles.len()
    }

    /// Empirical CDF value of each coordinate; inputs outside the fitted
    /// range are clipped to it. Repeated knots resolve to the midpoint of
    /// the flat run.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(dim_err(format!("expected {} coordinates, got {}", self.dim(), x.len())));
        }
        let levels = self.levels();
        Ok(x.iter()
            .zip(&self.quantiles)
            .map(|(&v, q)| {
                let v = v.clamp(q[0], q[q.len() - 1]);
                let u = 0.5 * (interp(v, q, &levels, true) + interp(v, q, &levels, false));
                u.clamp(0.0, 1.0)
            })
            .collect())
    }

    pub fn inverse(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dim() {
            return Err(dim_err(format!("expected {} coordinates, got {}", self.dim(), u.len())));
        }
        if let Some(bad) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(param_err(format!("uniform coordinate {bad} outside [0, 1]")));
        }
        let levels = self.levels();
        Ok(u.iter().zip(&self.quantiles).map(|(&p, q)| interp(p, &levels, q, true)).collect())
    }
}

/// Uniform draws in the box `forward(query) ± halfwidth` (clipped to the
/// unit square) mapped back through the inverse transform.
pub fn sample_neighbourhood_2d(
    qt: &QuantileTransform,
    query: [f64; 2],
    halfwidth: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; 2]>> {
    if qt.dim() != 2 {
        return Err(dim_err("transform must be two-dimensional"));
    }
    if !(halfwidth >= 0.0 && halfwidth.is_finite()) {
        return Err(param_err("halfwidth must be finite and >= 0"));
    }
    let center = qt.forward(&query)?;
    let lo: Vec<f64> = center.iter().map(|c| (c - halfwidth).max(0.0)).collect();
    let hi: Vec<f64> = center.iter().map(|c| (c + halfwidth).min(1.0)).collect();
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let u: Vec<f64> = (0..2)
                .map(|k| if hi[k] > lo[k] { r.random_range(lo[k]..=hi[k]) } else { lo[k] })
                .collect();
            let x = qt.inverse(&u)?;
            Ok([x[0], x[1]])
        })
        .collect()
}

/// Axis-aligned data-space box `[[x_lo, x_hi], [y_lo, y_hi]]`.
pub type BBox = [[f64; 2]; 2];

pub fn bounding_box(points: &[[f64; 2]]) -> BBox {
    let mut b = [[f64::INFINITY, f64::NEG_INFINITY]; 2];
    for p in points {
        for k in 0..2 {
            b[k][0] = b[k][0].min(p[k]);
            b[k][1] = b[k][1].max(p[k]);
        }
    }
    b
}

fn inside(b: &BBox, p: &[f64; 2]) -> bool {
    (0..2).all(|k| p[k] >= b[k][0] && p[k] <= b[k][1])
}

/// Rejection-samples `n` two-moons points falling inside `bbox`.
pub fn true_local_samples(noise_std: f64, bbox: &BBox, n: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
    true_local_samples_with_budget(noise_std, bbox, n, seed, REJECTION_BUDGET)
}

pub fn true_local_samples_with_budget(
    noise_std: f64,
    bbox: &BBox,
    n: usize,
    seed: u64,
    budget: u64,
) -> Result<Vec<[f64; 2]>> {
    let normal = Normal::new(0.0, noise_std).map_err(|e| param_err(e.to_string()))?;
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(n);
    let mut draws = 0u64;
    while out.len() < n {
        if draws >= budget {
            return Err(Error::EmptyRegion { draws });
        }
        draws += 1;
        let p = draw_moon_point(&mut r, &normal);
        if inside(bbox, &p) {
            out.push(p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Synth2DConfig {
    pub n_train: usize,
    pub noise_std: f64,
    pub n_queries: usize,
    pub halfwidth: f64,
    pub quantile_grid: Vec<usize>,
    pub n_neighbourhood: usize,
    pub seed: u64,
    pub forest: ForestConfig,
    pub ridge: RidgeConfig,
}

impl Default for Synth2DConfig {
    fn default() -> Self {
        Self {
            n_train: 2000,
            noise_std: 0.35,
            n_queries: 50,
            halfwidth: 0.2,
            quantile_grid: vec![2, 5, 10, 20, 50, 100],
            n_neighbourhood: 500,
            seed: 0,
            forest: ForestConfig::default(),
            ridge: RidgeConfig::default(),
        }
    }
}

impl Synth2DConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.halfwidth > 0.0) {
            return Err(param_err("halfwidth must be > 0"));
        }
        if self.quantile_grid.is_empty() || self.quantile_grid.iter().any(|&m| m < 2) {
            return Err(param_err("quantile counts must be >= 2"));
        }
        if self.n_queries == 0 || self.n_neighbourhood < 3 || self.n_train < 2 {
            return Err(param_err("n_queries >= 1, n_neighbourhood >= 3 and n_train >= 2 required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRow {
    pub n_quantiles: usize,
    pub mean_wasserstein: f64,
    pub mean_param_distance: f64,
    pub n_effective_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthResult {
    pub rows: Vec<SynthRow>,
    /// `(n_quantiles, query index, reason)` for every skipped evaluation.
    pub skipped: Vec<(usize, usize, String)>,
}

impl SynthResult {
    /// `n_quantiles,mean_wasserstein,mean_param_distance,n_effective_queries`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n_quantiles", "mean_wasserstein", "mean_param_distance", "n_effective_queries"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.n_quantiles.to_string(),
                r.mean_wasserstein.to_string(),
                r.mean_param_distance.to_string(),
                r.n_effective_queries.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Trained state shared by every (query, quantile) evaluation.
#[derive(Debug, Clone)]
pub struct SynthSetup {
    pub train_x: Vec<[f64; 2]>,
    pub train_y: Vec<usize>,
    pub forest: Forest,
    pub queries: Vec<[f64; 2]>,
}

pub fn prepare_setup(cfg: &Synth2DConfig) -> Result<SynthSetup> {
    cfg.validate()?;
    let (train_x, train_y) = two_moons(cfg.n_train, cfg.noise_std, derive_seed(cfg.seed, &[STREAM_TRAIN]))?;
    let rows: Vec<Vec<f64>> = train_x.iter().map(|p| p.to_vec()).collect();
    let forest_cfg = ForestConfig { seed: derive_seed(cfg.seed, &[STREAM_FOREST]), ..cfg.forest };
    let forest = train_forest(&rows, &train_y, &forest_cfg)?;
    let queries = sample_two_moons(cfg.n_queries, cfg.noise_std, derive_seed(cfg.seed, &[STREAM_TEST]))?;
    Ok(SynthSetup { train_x, train_y, forest, queries })
}

/// One query evaluated at one quantile count.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub sampled: Vec<[f64; 2]>,
    pub truth: Vec<[f64; 2]>,
    pub sampled_surrogate: Explanation2D,
    pub true_surrogate: Explanation2D,
    pub wasserstein: f64,
    pub param_distance: f64,
}

/// Neighbourhood draws share a seed across quantile counts for a given
/// query, so the quantile count is the only thing that varies between rows.
pub fn evaluate_query(
    cfg: &Synth2DConfig,
    setup: &SynthSetup,
    qt: &QuantileTransform,
    query_index: usize,
) -> Result<QueryOutcome> {
    let query = setup.queries[query_index];
    let sampled = sample_neighbourhood_2d(
        qt,
        query,
        cfg.halfwidth,
        cfg.n_neighbourhood,
        derive_seed(cfg.seed, &[STREAM_NEIGHBOURHOOD, query_index as u64]),
    )?;
    let bbox = bounding_box(&sampled);
    let truth = true_local_samples(
        cfg.noise_std,
        &bbox,
        cfg.n_neighbourhood,
        derive_seed(cfg.seed, &[STREAM_TRUTH, query_index as u64]),
    )?;
    let wasserstein = marginal_wasserstein(&sampled, &truth)?;
    let bb: &dyn BlackBox<[f64; 2]> = &setup.forest;
    let sampled_surrogate = explain_point2d(query, &sampled, bb, &cfg.ridge)?;
    let true_surrogate = explain_point2d(query, &truth, bb, &cfg.ridge)?;
    let param_distance = surrogate_param_distance(&sampled_surrogate.coefficients, &true_surrogate.coefficients)?;
    Ok(QueryOutcome { sampled, truth, sampled_surrogate, true_surrogate, wasserstein, param_distance })
}

/// Mean Wasserstein and surrogate-parameter distance per quantile count.
pub fn run_synth_experiment(cfg: &Synth2DConfig) -> Result<SynthResult> {
    let setup = prepare_setup(cfg)?;
    run_with_setup(cfg, &setup)
}

pub fn run_with_setup(cfg: &Synth2DConfig, setup: &SynthSetup) -> Result<SynthResult> {
    let mut rows = Vec::with_capacity(cfg.quantile_grid.len());
    let mut skipped = Vec::new();
    for &m in &cfg.quantile_grid {
        let qt = fit_quantile_transform(&setup.train_x, m)?;
        let eval = |qi: usize| evaluate_query(cfg, setup, &qt, qi).map(|o| (o.wasserstein, o.param_distance));
        #[cfg(feature = "parallel")]
        let outcomes: Vec<Result<(f64, f64)>> = {
            use rayon::prelude::*;
            (0..setup.queries.len()).into_par_iter().map(eval).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let outcomes: Vec<Result<(f64, f64)>> = (0..setup.queries.len()).map(eval).collect();

        let (mut w_sum, mut d_sum, mut count) = (0.0, 0.0, 0usize);
        for (qi, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok((w, d)) => {
                    w_sum += w;
                    d_sum += d;
                    count += 1;
                }
                Err(e @ Error::EmptyRegion { .. }) => skipped.push((m, qi, e.to_string())),
                Err(e) => return Err(e),
            }
        }
        let mean = |s: f64| if count > 0 { s / count as f64 } else { f64::NAN };
        rows.push(SynthRow {
            n_quantiles: m,
            mean_wasserstein: mean(w_sum),
            mean_param_distance: mean(d_sum),
            n_effective_queries: count,
        });
    }
    Ok(SynthResult { rows, skipped })
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(dim_err("spearman needs two equal-length series of length >= 2"));
    }
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    Ok(cov / (va * vb).sqrt())
}

/// Scatter plot of one neighbourhood over the forest's probability field:
/// class-0 probability shades the background, training points are dim dots,
/// sampled points dark, the query red, and the surrogate's 0.5 level line
/// blue.
pub fn plot_neighbourhood(
    setup: &SynthSetup,
    outcome: &QueryOutcome,
    query: [f64; 2],
    size: usize,
) -> Result<Image> {
    let (x0, x1, y0, y1) = (-2.0, 3.0, -1.75, 2.25);
    let to_px = |p: [f64; 2]| -> Option<(usize, usize)> {
        let fx = (p[0] - x0) / (x1 - x0) * size as f64;
        let fy = (y1 - p[1]) / (y1 - y0) * size as f64;
        (fx >= 0.0 && fy >= 0.0 && fx < size as f64 && fy < size as f64).then(|| (fx as usize, fy as usize))
    };
    let mut data = vec![0.0; size * size * 3];
    for py in 0..size {
        for px in 0..size {
            let p = [
                x0 + (px as f64 + 0.5) / size as f64 * (x1 - x0),
                y1 - (py as f64 + 0.5) / size as f64 * (y1 - y0),
            ];
            let prob = setup.forest.predict_proba(&p)?[0];
            let i = (py * size + px) * 3;
            data[i] = 0.75 + 0.2 * prob;
            data[i + 1] = 0.85;
            data[i + 2] = 0.95 - 0.2 * prob;
            let e = &outcome.sampled_surrogate;
            let level = e.intercept + e.coefficients[0] * p[0] + e.coefficients[1] * p[1] - 0.5;
            let grad = (e.coefficients[0].powi(2) + e.coefficients[1].powi(2)).sqrt();
            if grad > 0.0 && (level / grad).abs() < 0.6 * (x1 - x0) / size as f64 {
                data[i..i + 3].copy_from_slice(&[0.1, 0.2, 0.9]);
            }
        }
    }
    let mut dot = |p: [f64; 2], color: [f64; 3], radius: isize| {
        if let Some((cx, cy)) = to_px(p) {
            for dy in -radius..=radius {
                for dx in -radius..=radius {
                    let (x, y) = (cx as isize + dx, cy as isize + dy);
                    if x >= 0 && y >= 0 && (x as usize) < size && (y as usize) < size {
                        let i = (y as usize * size + x as usize) * 3;
                        data[i..i + 3].copy_from_slice(&color);
                    }
                }
            }
        }
    };
    for p in &setup.train_x {
        dot(*p, [0.6, 0.6, 0.6], 0);
    }
    for p in &outcome.sampled {
        dot(*p, [0.1, 0.1, 0.1], 0);
    }
    dot(query, [0.9, 0.1, 0.1], 2);
    Image::new(size, size, 3, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moon_endpoints_without_noise() {
        let (pts, labels) = two_moons(10, 0.0, 1).unwrap();
        assert_eq!(pts[0], [1.0, 0.0]);
        assert_eq!(labels[0], 0);
        assert_eq!(pts[5], [0.0, 0.5]);
        assert_eq!(labels[5], 1);
        assert!(pts[..5].iter().all(|p| p[1] >= 0.0));
        assert!(two_moons(1, 0.1, 0).is_err());
    }

    #[test]
    fn moons_deterministic() {
        assert_eq!(two_moons(50, 0.35, 3).unwrap(), two_moons(50, 0.35, 3).unwrap());
    }

    #[test]
    fn two_quantiles_are_extremes() {
        let x = vec![[3.0, -1.0], [0.5, 2.0], [1.0, 0.0]];
        let qt = fit_quantile_transform(&x, 2).unwrap();
        assert_eq!(qt.quantiles, vec![vec![0.5, 3.0], vec![-1.0, 2.0]]);
        assert_eq!(qt.inverse(&[0.5, 0.5]).unwrap(), vec![1.75, 0.5]);
        assert_eq!(qt.forward(&[0.5 + 2.5 * 0.2, 2.0]).unwrap(), vec![0.2, 1.0]);
    }

    #[test]
    fn median_quantile() {
        let x: Vec<[f64; 1]> = (0..5).map(|v| [v as f64]).collect();
        let qt = fit_quantile_transform(&x, 3).unwrap();
        assert_eq!(qt.quantiles[0], vec![0.0, 2.0, 4.0]);
        assert!(fit_quantile_transform(&x, 1).is_err());
    }

    #[test]
    fn inverse_endpoints_and_range() {
        let (pts, _) = two_moons(200, 0.35, 2).unwrap();
        let qt = fit_quantile_transform(&pts, 20).unwrap();
        for f in 0..2 {
            let q = &qt.quantiles[f];
            assert!(q.windows(2).all(|w| w[0] <= w[1]));
        }
        let lo = qt.inverse(&[0.0, 0.0]).unwrap();
        let hi = qt.inverse(&[1.0, 1.0]).unwrap();
        assert_eq!(lo, vec![qt.quantiles[0][0], qt.quantiles[1][0]]);
        assert_eq!(hi, vec![qt.quantiles[0][19], qt.quantiles[1][19]]);
        assert!(qt.inverse(&[1.2, 0.5]).is_err());
        assert!(qt.inverse(&[-0.1, 0.5]).is_err());
    }

    #[test]
    fn forward_clips_outside_range() {
        let x = vec![[0.0], [1.0], [2.0]];
        let qt = fit_quantile_transform(&x, 3).unwrap();
        assert_eq!(qt.forward(&[-5.0]).unwrap(), vec![0.0]);
        assert_eq!(qt.forward(&[9.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn forward_handles_repeated_knots() {
        let x = vec![[0.0], [1.0], [1.0], [1.0], [2.0]];
        let qt = fit_quantile_transform(&x, 5).unwrap();
        // knots [0, 1, 1, 1, 2]: the flat run at 1 maps to its middle level
        assert_eq!(qt.forward(&[1.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn round_trip_at_training_points() {
        let (pts, _) = two_moons(300, 0.35, 5).unwrap();
        for m in [2, 7, 50, 300] {
            let qt = fit_quantile_transform(&pts, m).unwrap();
            for p in &pts {
                let back = qt.inverse(&qt.forward(p).unwrap()).unwrap();
                assert!((back[0] - p[0]).abs() < 1e-9 && (back[1] - p[1]).abs() < 1e-9, "m={m}");
            }
        }
    }

    #[test]
    fn degenerate_box_returns_query() {
        let (pts, _) = two_moons(300, 0.35, 5).unwrap();
        let qt = fit_quantile_transform(&pts, 30).unwrap();
        let q = [0.3, 0.2];
        let s = sample_neighbourhood_2d(&qt, q, 0.0, 20, 1).unwrap();
        assert!(s.iter().all(|p| (p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9));
    }

    #[test]
    fn minmax_neighbourhood_is_a_box() {
        let (pts, _) = two_moons(300, 0.35, 5).unwrap();
        let qt = fit_quantile_transform(&pts, 2).unwrap();
        let q = [0.5, 0.25];
        let u = qt.forward(&q).unwrap();
        let s = sample_neighbourhood_2d(&qt, q, 0.1, 500, 3).unwrap();
        for k in 0..2 {
            let (lo, hi) = (qt.quantiles[k][0], qt.quantiles[k][1]);
            let box_lo = lo + (u[k] - 0.1).max(0.0) * (hi - lo);
            let box_hi = lo + (u[k] + 0.1).min(1.0) * (hi - lo);
            assert!(s.iter().all(|p| p[k] >= box_lo - 1e-12 && p[k] <= box_hi + 1e-12));
        }
    }

    #[test]
    fn true_samples_inside_box() {
        let b = [[0.0, 0.5], [0.0, 0.5]];
        let s = true_local_samples(0.35, &b, 100, 4).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.iter().all(|p| inside(&b, p)));
        let far = [[50.0, 51.0], [50.0, 51.0]];
        assert!(matches!(
            true_local_samples_with_budget(0.35, &far, 10, 1, 10_000),
            Err(Error::EmptyRegion { .. })
        ));
    }

    #[test]
    fn spearman_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-12);
        // one adjacent swap over six points: 1 - 6*2/(6*35)
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[6.0, 5.0, 3.0, 4.0, 2.0, 1.0]).unwrap();
        assert!((r + (1.0 - 12.0 / 210.0)).abs() < 1e-12);
    }

    #[test]
    fn small_experiment_deterministic() {
        let cfg = Synth2DConfig {
            n_train: 300,
            n_queries: 4,
            n_neighbourhood: 60,
            quantile_grid: vec![2, 10],
            forest: ForestConfig { n_trees: 10, ..Default::default() },
            seed: 3,
            ..Default::default()
        };
        let a = run_synth_experiment(&cfg).unwrap();
        let b = run_synth_experiment(&cfg).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.rows.len(), 2);
        let csv = a.to_csv().unwrap();
        assert!(csv.starts_with("n_quantiles,mean_wasserstein,mean_param_distance,n_effective_queries\n"));
    }

    #[test]
    fn self_comparison_control() {
        let cfg = Synth2DConfig { n_train: 300, n_queries: 2, forest: ForestConfig { n_trees: 5, ..Default::default() }, ..Default::default() };
        let setup = prepare_setup(&cfg).unwrap();
        let truth = true_local_samples(0.35, &[[-0.5, 1.0], [-0.5, 1.0]], 200, 9).unwrap();
        let q = setup.queries[0];
        let a = explain_point2d(q, &truth, &setup.forest, &cfg.ridge).unwrap();
        let b = explain_point2d(q, &truth, &setup.forest, &cfg.ridge).unwrap();
        assert_eq!(surrogate_param_distance(&a.coefficients, &b.coefficients).unwrap(), 0.0);
        assert_eq!(marginal_wasserstein(&truth, &truth).unwrap(), 0.0);
    }
}
