use std::time::Duration;

use alignex::blackbox::{BlackBox, BlackBoxSpec, InputKind, QuadrantClassifier, SubprocessAdapter, WireImage};
use alignex::error::{AdapterPhase, Error};
use alignex::image::Image;
use alignex::rng::rng;
use alignex::surrogate::{explain_image, explain_point2d, ExplainConfig, RidgeConfig};
use alignex::segment::SlicParams;
use rand::Rng;

fn stub(args: &[&str]) -> Vec<String> {
    std::iter::once(env!("CARGO_BIN_EXE_alignex-stub").to_string())
        .chain(args.iter().map(|s| s.to_string()))
        .collect()
}

fn image_adapter(args: &[&str]) -> SubprocessAdapter {
    SubprocessAdapter::spawn(&stub(args), InputKind::Image).unwrap()
}

/// Images whose values survive the f32 wire encoding exactly.
fn wire_exact_image(r: &mut impl Rng, w: usize, h: usize) -> Image {
    let data = (0..w * h * 3).map(|_| r.random_range(0..=255) as f64 / 255.0).map(|v| v as f32 as f64).collect();
    Image::new(w, h, 3, data).unwrap()
}

#[test]
fn recorded_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("transcript.txt");
    let adapter = image_adapter(&["--record", path.to_str().unwrap(), "constant:0.7,0.3"]);
    assert_eq!(adapter.handshake().n_classes, 2);
    let mut r = rng(1);
    let batches: Vec<Vec<Image>> =
        [1usize, 5, 2].iter().map(|&n| (0..n).map(|_| wire_exact_image(&mut r, 6, 4)).collect()).collect();
    for batch in &batches {
        let probs = adapter.predict_batch(batch).unwrap();
        assert_eq!(probs.len(), batch.len());
        for row in probs {
            assert_eq!(row, vec![0.7, 0.3]);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
    drop(adapter);
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    let hello: serde_json::Value = serde_json::from_str(lines[0].strip_prefix("> ").unwrap()).unwrap();
    assert_eq!(hello, serde_json::json!({"protocol_version": 1, "n_classes": 2, "input_kind": "image"}));
    for (k, n) in [1usize, 5, 2].iter().enumerate() {
        let req: serde_json::Value = serde_json::from_str(lines[1 + 2 * k].strip_prefix("< ").unwrap()).unwrap();
        let resp: serde_json::Value = serde_json::from_str(lines[2 + 2 * k].strip_prefix("> ").unwrap()).unwrap();
        assert_eq!(req["id"], k as u64);
        assert_eq!(resp["id"], k as u64);
        let inputs = req["inputs"].as_array().unwrap();
        assert_eq!(inputs.len(), *n);
        let wire: WireImage = serde_json::from_value(inputs[0].clone()).unwrap();
        assert_eq!(wire.decode().unwrap(), batches[k][0]);
    }
}

#[test]
fn quadrant_stub_matches_builtin_bit_for_bit() {
    let adapter = image_adapter(&["quadrant"]);
    let mut r = rng(2);
    let images: Vec<Image> = (0..10).map(|_| wire_exact_image(&mut r, 16, 12)).collect();
    let remote = adapter.predict_batch(&images).unwrap();
    for (img, row) in images.iter().zip(remote) {
        let local = QuadrantClassifier.probabilities(img).unwrap();
        assert_eq!(row.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), local.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn mean_stub_sees_decoded_pixels() {
    let adapter = image_adapter(&["mean"]);
    let img = Image::new(2, 2, 1, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
    assert_eq!(WireImage::encode(&img).decode_f32().unwrap(), vec![0.0, 0.25, 0.5, 1.0]);
    let p = adapter.predict(&img).unwrap();
    let e = 0.4375f64.exp();
    assert!((p[1] - e / (1.0 + e)).abs() < 1e-15);
}

#[test]
fn explanation_through_adapter_equals_builtin() {
    let mut r = rng(3);
    let img = wire_exact_image(&mut r, 32, 32);
    let cfg = ExplainConfig { n_samples: 60, segments: SlicParams::new(9), sampler: "blur@3".parse().unwrap(), ..Default::default() };
    let adapter = image_adapter(&["quadrant"]);
    let a = explain_image(&img, &adapter, &cfg).unwrap();
    let b = explain_image(&img, &QuadrantClassifier, &cfg).unwrap();
    // realized neighbours are not f32-exact, so agreement is to f32 precision
    assert_eq!(a.explanation.class_id, b.explanation.class_id);
    for (x, y) in a.explanation.coefficients.iter().zip(&b.explanation.coefficients) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn point_adapter_linear_recovery() {
    let adapter = SubprocessAdapter::spawn(&stub(&["linear"]), InputKind::Point2d).unwrap();
    let samples: Vec<[f64; 2]> = (0..40).map(|i| [-1.0 + i as f64 / 20.0, (i % 7) as f64 * 0.1]).collect();
    let e = explain_point2d([0.2, 0.1], &samples, &adapter, &RidgeConfig { alpha: 1e-9, fit_intercept: true }).unwrap();
    assert_eq!(e.class_id, 1);
    assert!((e.coefficients[0] - 0.3).abs() < 1e-9 && e.coefficients[1].abs() < 1e-9);
}

fn adapter_phase(err: Error) -> AdapterPhase {
    match err {
        Error::Adapter { phase, .. } => phase,
        Error::BlackBox { source, .. } => adapter_phase(*source),
        other => panic!("expected adapter error, got {other}"),
    }
}

#[test]
fn version_mismatch_rejected() {
    let err = SubprocessAdapter::spawn(&stub(&["--version", "2", "quadrant"]), InputKind::Image).unwrap_err();
    assert_eq!(adapter_phase(err), AdapterPhase::Handshake);
}

#[test]
fn input_kind_mismatch_rejected() {
    let err = SubprocessAdapter::spawn(&stub(&["quadrant"]), InputKind::Point2d).unwrap_err();
    assert_eq!(adapter_phase(err), AdapterPhase::Handshake);
}

#[test]
fn unnormalized_probabilities_rejected() {
    let adapter = image_adapter(&["--bad-sum", "constant:0.7,0.3"]);
    let err = adapter.predict_batch(&[Image::filled(2, 2, 3, 0.5).unwrap()]).unwrap_err();
    assert_eq!(adapter_phase(err), AdapterPhase::Validation);
}

#[test]
fn child_error_line_surfaces_and_adapter_continues() {
    let adapter = image_adapter(&["--fail-id", "0", "constant:0.5,0.5"]);
    let img = Image::filled(2, 2, 3, 0.5).unwrap();
    assert_eq!(adapter_phase(adapter.predict_batch(std::slice::from_ref(&img)).unwrap_err()), AdapterPhase::Response);
    assert_eq!(adapter.predict_batch(&[img]).unwrap(), vec![vec![0.5, 0.5]]);
}

#[test]
fn slow_child_times_out() {
    let adapter = SubprocessAdapter::spawn_with_timeout(
        &stub(&["--sleep-ms", "2000", "constant:0.5,0.5"]),
        InputKind::Image,
        Duration::from_millis(200),
    )
    .unwrap();
    let err = adapter.predict_batch(&[Image::filled(2, 2, 3, 0.5).unwrap()]).unwrap_err();
    assert!(matches!(err, Error::Timeout { id: 0, .. }), "{err}");
}

#[test]
fn missing_program_is_spawn_error() {
    let err = SubprocessAdapter::spawn(&["/nonexistent/program".to_string()], InputKind::Image).unwrap_err();
    assert_eq!(adapter_phase(err), AdapterPhase::Spawn);
}

#[test]
fn spec_string_opens_child() {
    let cmd = format!("cmd:\"{} constant:0.25,0.75\"", env!("CARGO_BIN_EXE_alignex-stub"));
    let spec: BlackBoxSpec = cmd.parse().unwrap();
    let bb = spec.open_image().unwrap();
    assert_eq!(bb.n_classes(), 2);
    assert_eq!(bb.predict_batch(&[Image::filled(3, 3, 1, 0.1).unwrap()]).unwrap(), vec![vec![0.25, 0.75]]);
}
