//! WebAssembly bindings behind `www/index.html`. Images cross the boundary
//! as RGBA bytes, the layout of `ImageData`.

use alignex::blackbox::QuadrantClassifier;
use alignex::forest::{train_forest, ForestConfig};
use alignex::image::{project_explanation, Image};
use alignex::imagexp::render_heatmap;
use alignex::metrics::{DistanceKind, KernelConfig};
use alignex::perturb::{sample_masks, Realizer, SamplerSpec};
use alignex::segment::{boundary_overlay, slic_segment, SlicParams};
use alignex::surrogate::{explain_image, ExplainConfig};
use alignex::synth2d::{
    evaluate_query, fit_quantile_transform, plot_neighbourhood, sample_two_moons, two_moons, Synth2DConfig,
    SynthSetup,
};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn from_rgba(rgba: &[u8], width: usize, height: usize) -> Result<Image, JsError> {
    if rgba.len() != width * height * 4 {
        return Err(JsError::new("RGBA buffer does not match the image size"));
    }
    let data = rgba
        .chunks_exact(4)
        .flat_map(|px| px[..3].iter().map(|&v| v as f64 / 255.0))
        .collect();
    Image::new(width, height, 3, data).map_err(js_err)
}

fn to_rgba(image: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(image.n_pixels() * 4);
    for p in 0..image.n_pixels() {
        let px = image.pixel(p);
        let rgb = if px.len() == 3 { [px[0], px[1], px[2]] } else { [px[0]; 3] };
        out.extend(rgb.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out.push(255);
    }
    out
}

/// A synthetic textured scene to play with when no image is loaded.
#[wasm_bindgen]
pub fn demo_image(size: usize, seed: u64) -> Vec<u8> {
    to_rgba(&alignex::synthetic::textured_image(size, size, 3, seed))
}

/// One random neighbour of the image: about half of the SLIC superpixels are
/// ablated with `sampler` (e.g. `mean`, `blur@5`), boundaries drawn in red.
#[wasm_bindgen]
pub fn sample_preview(
    rgba: &[u8],
    width: usize,
    height: usize,
    n_segments: usize,
    sampler: &str,
    seed: u64,
) -> Result<Vec<u8>, JsError> {
    let image = from_rgba(rgba, width, height)?;
    let spec: SamplerSpec = sampler.parse().map_err(js_err)?;
    let seg = slic_segment(&image, &SlicParams::new(n_segments)).map_err(js_err)?;
    // index 0 is the all-ones mask, so take the next draw
    let masks = sample_masks(2, seg.n_segments(), seed).map_err(js_err)?;
    let realized = Realizer::new(&image, &seg, spec).map_err(js_err)?.realize(&masks[1], seed).map_err(js_err)?;
    Ok(to_rgba(&boundary_overlay(&realized, &seg).map_err(js_err)?))
}

/// Explanation heatmap of the built-in quadrant classifier.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn explain_heatmap(
    rgba: &[u8],
    width: usize,
    height: usize,
    n_segments: usize,
    n_samples: usize,
    sampler: &str,
    distance: &str,
    seed: u64,
) -> Result<Vec<u8>, JsError> {
    let image = from_rgba(rgba, width, height)?;
    let distance_kind: DistanceKind = distance.parse().map_err(js_err)?;
    let cfg = ExplainConfig {
        n_samples,
        sampler: sampler.parse().map_err(js_err)?,
        kernel: KernelConfig { distance_kind, ..KernelConfig::cosine() },
        segments: SlicParams::new(n_segments),
        seed,
        ..Default::default()
    };
    let e = explain_image(&image, &QuadrantClassifier, &cfg).map_err(js_err)?;
    let map = project_explanation(&e.explanation, &e.segmentation).map_err(js_err)?;
    Ok(to_rgba(&render_heatmap(&image, &map).map_err(js_err)?))
}

/// Two-moons plot of one query's neighbourhood drawn through a quantile
/// transform with `n_quantiles` knots, over a small forest's probability
/// field, with the fitted surrogate's 0.5 level line.
#[wasm_bindgen]
pub fn quantile_neighbourhood(n_quantiles: usize, query_index: usize, size: usize, seed: u64) -> Result<Vec<u8>, JsError> {
    let cfg = Synth2DConfig {
        n_train: 600,
        n_queries: query_index + 1,
        n_neighbourhood: 300,
        quantile_grid: vec![n_quantiles],
        forest: ForestConfig { n_trees: 25, seed, ..Default::default() },
        seed,
        ..Default::default()
    };
    cfg.validate().map_err(js_err)?;
    let (train_x, train_y) = two_moons(cfg.n_train, cfg.noise_std, seed).map_err(js_err)?;
    let rows: Vec<Vec<f64>> = train_x.iter().map(|p| p.to_vec()).collect();
    let forest = train_forest(&rows, &train_y, &cfg.forest).map_err(js_err)?;
    let queries = sample_two_moons(cfg.n_queries, cfg.noise_std, seed ^ 0x9e37).map_err(js_err)?;
    let setup = SynthSetup { train_x, train_y, forest, queries };
    let qt = fit_quantile_transform(&setup.train_x, n_quantiles).map_err(js_err)?;
    let outcome = evaluate_query(&cfg, &setup, &qt, query_index).map_err(js_err)?;
    let plot = plot_neighbourhood(&setup, &outcome, setup.queries[query_index], size).map_err(js_err)?;
    Ok(to_rgba(&plot))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgba_round_trip() {
        let rgba = demo_image(16, 3);
        assert_eq!(rgba.len(), 16 * 16 * 4);
        let img = from_rgba(&rgba, 16, 16).unwrap();
        assert_eq!(to_rgba(&img), rgba);
    }

    #[test]
    fn operations_return_full_frames() {
        let rgba = demo_image(32, 1);
        assert_eq!(sample_preview(&rgba, 32, 32, 9, "blur@5", 2).unwrap().len(), 32 * 32 * 4);
        assert_eq!(explain_heatmap(&rgba, 32, 32, 9, 40, "mean", "msssim", 2).unwrap().len(), 32 * 32 * 4);
        assert_eq!(quantile_neighbourhood(10, 0, 64, 1).unwrap().len(), 64 * 64 * 4);
    }

    #[test]
    fn deterministic_preview() {
        let rgba = demo_image(32, 1);
        assert_eq!(
            sample_preview(&rgba, 32, 32, 9, "noise@0.05", 7).unwrap(),
            sample_preview(&rgba, 32, 32, 9, "noise@0.05", 7).unwrap()
        );
    }
}
