//! The black-box interface `f`, analytic classifiers for tests and the
//! subprocess adapter that attaches an external model over a line-delimited
//! JSON protocol.
//!
//! # Wire protocol (version 1)
//!
//! One UTF-8 JSON document per line.
//!
//! * child → parent on start: `{"protocol_version":1,"n_classes":N,"input_kind":"image"}`
//! * parent → child: `{"id":k,"inputs":[...]}` where an image input is
//!   `{"w":W,"h":H,"c":C,"data_b64":"..."}` (base64 of little-endian `f32`,
//!   row-major, channel-interleaved) and a 2D input is `{"x":[x1,x2]}`
//! * child → parent: `{"id":k,"probs":[[...],...]}` in input order, or
//!   `{"id":k,"error":"..."}`
//!
//! Children that are not deterministic break run reproducibility.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, AdapterPhase, Error, Result};
use crate::image::Image;

/// A classifier exposing only class probabilities.
pub trait BlackBox<I>: Send + Sync {
    fn n_classes(&self) -> usize;

    /// One probability vector per input, in input order.
    fn predict_batch(&self, inputs: &[I]) -> Result<Vec<Vec<f64>>>;

    fn predict(&self, input: &I) -> Result<Vec<f64>>
    where
        I: Clone,
    {
        self.predict_batch(std::slice::from_ref(input))?
            .pop()
            .ok_or_else(|| param_err("black-box returned no prediction"))
    }
}

/// Checks length, non-negativity and normalization (within `1e-6`).
pub fn validate_probs(probs: &[f64], n_classes: usize) -> Result<()> {
    if probs.len() != n_classes {
        return Err(param_err(format!("expected {n_classes} probabilities, got {}", probs.len())));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(param_err(format!("invalid probability in {probs:?}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(param_err(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Four-class image classifier: logits are `4 * mean luminance` of the
/// top-left, top-right, bottom-left and bottom-right quadrants.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadrantClassifier;

impl QuadrantClassifier {
    pub fn probabilities(&self, image: &Image) -> Result<Vec<f64>> {
        let (w, h) = (image.width(), image.height());
        if w < 2 || h < 2 {
            return Err(param_err("quadrant classifier needs images of at least 2x2"));
        }
        let lum = image.luminance();
        let (hw, hh) = (w / 2, h / 2);
        let mut sums = [0.0; 4];
        let mut counts = [0usize; 4];
        for y in 0..h {
            for x in 0..w {
                let q = usize::from(x >= hw) + 2 * usize::from(y >= hh);
                sums[q] += lum[y * w + x];
                counts[q] += 1;
            }
        }
        let logits: Vec<f64> = sums.iter().zip(counts).map(|(s, n)| 4.0 * s / n as f64).collect();
        Ok(softmax(&logits))
    }
}

impl BlackBox<Image> for QuadrantClassifier {
    fn n_classes(&self) -> usize {
        4
    }

    fn predict_batch(&self, inputs: &[Image]) -> Result<Vec<Vec<f64>>> {
        inputs.iter().map(|img| self.probabilities(img)).collect()
    }
}

/// Returns the same probability vector for every input.
#[derive(Debug, Clone)]
pub struct ConstantBlackBox {
    probs: Vec<f64>,
}

impl ConstantBlackBox {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_probs(&probs, probs.len())?;
        Ok(Self { probs })
    }
}

impl<I> BlackBox<I> for ConstantBlackBox {
    fn n_classes(&self) -> usize {
        self.probs.len()
    }

    fn predict_batch(&self, inputs: &[I]) -> Result<Vec<Vec<f64>>> {
        Ok(vec![self.probs.clone(); inputs.len()])
    }
}

/// Adapts a per-input closure.
pub struct FnBlackBox<F> {
    n_classes: usize,
    f: F,
}

impl<F> FnBlackBox<F> {
    pub fn new(n_classes: usize, f: F) -> Self {
        Self { n_classes, f }
    }
}

impl<I, F> BlackBox<I> for FnBlackBox<F>
where
    F: Fn(&I) -> Vec<f64> + Send + Sync,
{
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_batch(&self, inputs: &[I]) -> Result<Vec<Vec<f64>>> {
        Ok(inputs.iter().map(&self.f).collect())
    }
}

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Image,
    Point2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterHandshake {
    pub protocol_version: u32,
    pub n_classes: usize,
    pub input_kind: InputKind,
}

/// Wire form of one image input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireImage {
    pub w: usize,
    pub h: usize,
    pub c: usize,
    pub data_b64: String,
}

impl WireImage {
    pub fn encode(image: &Image) -> Self {
        let mut bytes = Vec::with_capacity(image.data().len() * 4);
        for v in image.data() {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        Self { w: image.width(), h: image.height(), c: image.channels(), data_b64: B64.encode(bytes) }
    }

    pub fn decode_f32(&self) -> Result<Vec<f32>> {
        let bytes = B64
            .decode(&self.data_b64)
            .map_err(|e| param_err(format!("bad base64 payload: {e}")))?;
        if bytes.len() != self.w * self.h * self.c * 4 {
            return Err(param_err(format!(
                "payload has {} bytes for a {}x{}x{} image",
                bytes.len(),
                self.w,
                self.h,
                self.c
            )));
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }

    pub fn decode(&self) -> Result<Image> {
        let data = self.decode_f32()?.into_iter().map(f64::from).collect();
        Image::new(self.w, self.h, self.c, data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirePoint {
    pub x: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WireRequest<T> {
    pub id: u64,
    pub inputs: Vec<T>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn adapter_err(phase: AdapterPhase, message: impl Into<String>) -> Error {
    Error::Adapter { phase, message: message.into() }
}

struct AdapterState {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

/// Black-box backed by a child process speaking the line protocol. Requests
/// are serialized on the child.
pub struct SubprocessAdapter {
    handshake: AdapterHandshake,
    timeout: Duration,
    state: Mutex<AdapterState>,
}

impl std::fmt::Debug for SubprocessAdapter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubprocessAdapter")
            .field("handshake", &self.handshake)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl SubprocessAdapter {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

    pub fn spawn(command: &[String], input_kind: InputKind) -> Result<Self> {
        Self::spawn_with_timeout(command, input_kind, Self::DEFAULT_TIMEOUT)
    }

    pub fn spawn_with_timeout(command: &[String], input_kind: InputKind, timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| adapter_err(AdapterPhase::Spawn, "empty command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| adapter_err(AdapterPhase::Spawn, format!("{program}: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut state = AdapterState { child, stdin, lines: rx, next_id: 0 };

        let line = read_line(&mut state, timeout, AdapterPhase::Handshake, 0)?;
        let handshake: AdapterHandshake = serde_json::from_str(&line)
            .map_err(|e| adapter_err(AdapterPhase::Handshake, format!("malformed handshake '{line}': {e}")))?;
        if handshake.protocol_version != PROTOCOL_VERSION {
            return Err(adapter_err(
                AdapterPhase::Handshake,
                format!("protocol version {} (expected {PROTOCOL_VERSION})", handshake.protocol_version),
            ));
        }
        if handshake.input_kind != input_kind {
            return Err(adapter_err(
                AdapterPhase::Handshake,
                format!("child serves {:?} inputs, expected {input_kind:?}", handshake.input_kind),
            ));
        }
        if handshake.n_classes == 0 {
            return Err(adapter_err(AdapterPhase::Handshake, "n_classes must be positive"));
        }
        Ok(Self { handshake, timeout, state: Mutex::new(state) })
    }

    pub fn handshake(&self) -> &AdapterHandshake {
        &self.handshake
    }

    fn round_trip<T: Serialize>(&self, inputs: Vec<T>) -> Result<Vec<Vec<f64>>> {
        let n = inputs.len();
        let mut state = self.state.lock().map_err(|_| adapter_err(AdapterPhase::Request, "adapter poisoned"))?;
        let id = state.next_id;
        state.next_id += 1;
        let mut line = serde_json::to_string(&WireRequest { id, inputs })?;
        line.push('\n');
        let stdin = state
            .stdin
            .as_mut()
            .ok_or_else(|| adapter_err(AdapterPhase::Request, "stdin closed"))?;
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| adapter_err(AdapterPhase::Request, format!("write failed: {e}")))?;

        let reply = read_line(&mut state, self.timeout, AdapterPhase::Response, id)?;
        let resp: WireResponse = serde_json::from_str(&reply)
            .map_err(|e| adapter_err(AdapterPhase::Response, format!("malformed response: {e}")))?;
        if resp.id != id {
            return Err(adapter_err(AdapterPhase::Response, format!("response id {} for request {id}", resp.id)));
        }
        if let Some(msg) = resp.error {
            return Err(adapter_err(AdapterPhase::Response, format!("child reported: {msg}")));
        }
        let probs = resp
            .probs
            .ok_or_else(|| adapter_err(AdapterPhase::Response, "response has neither probs nor error"))?;
        if probs.len() != n {
            return Err(adapter_err(
                AdapterPhase::Validation,
                format!("{} probability rows for {n} inputs", probs.len()),
            ));
        }
        for (i, row) in probs.iter().enumerate() {
            validate_probs(row, self.handshake.n_classes)
                .map_err(|e| adapter_err(AdapterPhase::Validation, format!("row {i}: {e}")))?;
        }
        Ok(probs)
    }
}

fn read_line(state: &mut AdapterState, timeout: Duration, phase: AdapterPhase, id: u64) -> Result<String> {
    let deadline = Instant::now() + timeout;
    loop {
        let remaining = deadline.saturating_duration_since(Instant::now());
        match state.lines.recv_timeout(remaining) {
            Ok(Ok(line)) if line.trim().is_empty() => continue,
            Ok(Ok(line)) => return Ok(line),
            Ok(Err(e)) => return Err(adapter_err(phase, format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::Timeout { id, seconds: timeout.as_secs() });
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = state
                    .child
                    .try_wait()
                    .ok()
                    .flatten()
                    .map_or_else(|| "closed stdout".to_string(), |s| format!("exited with {s}"));
                return Err(adapter_err(phase, format!("child {status}")));
            }
        }
    }
}

impl Drop for SubprocessAdapter {
    fn drop(&mut self) {
        if let Ok(state) = self.state.get_mut() {
            state.stdin.take();
            let deadline = Instant::now() + Duration::from_secs(2);
            loop {
                match state.child.try_wait() {
                    Ok(Some(_)) | Err(_) => break,
                    Ok(None) if Instant::now() >= deadline => {
                        let _ = state.child.kill();
                        let _ = state.child.wait();
                        break;
                    }
                    Ok(None) => thread::sleep(Duration::from_millis(5)),
                }
            }
        }
    }
}

impl BlackBox<Image> for SubprocessAdapter {
    fn n_classes(&self) -> usize {
        self.handshake.n_classes
    }

    fn predict_batch(&self, inputs: &[Image]) -> Result<Vec<Vec<f64>>> {
        if self.handshake.input_kind != InputKind::Image {
            return Err(adapter_err(AdapterPhase::Request, "adapter serves point2d inputs"));
        }
        self.round_trip(inputs.iter().map(WireImage::encode).collect())
    }
}

impl BlackBox<[f64; 2]> for SubprocessAdapter {
    fn n_classes(&self) -> usize {
        self.handshake.n_classes
    }

    fn predict_batch(&self, inputs: &[[f64; 2]]) -> Result<Vec<Vec<f64>>> {
        if self.handshake.input_kind != InputKind::Point2d {
            return Err(adapter_err(AdapterPhase::Request, "adapter serves image inputs"));
        }
        self.round_trip(inputs.iter().map(|&x| WirePoint { x }).collect())
    }
}

/// Black-box selector as given on the command line: `builtin:quadrant` or
/// `cmd:"program arg ..."`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlackBoxSpec {
    Quadrant,
    Command(Vec<String>),
}

impl std::str::FromStr for BlackBoxSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "builtin:quadrant" {
            return Ok(BlackBoxSpec::Quadrant);
        }
        if let Some(cmd) = s.strip_prefix("cmd:") {
            let cmd = cmd.trim().trim_matches('"');
            let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if parts.is_empty() {
                return Err(param_err("empty black-box command"));
            }
            return Ok(BlackBoxSpec::Command(parts));
        }
        Err(param_err(format!("unknown black-box '{s}' (use builtin:quadrant or cmd:\"...\")")))
    }
}

impl BlackBoxSpec {
    pub fn open_image(&self) -> Result<Box<dyn BlackBox<Image>>> {
        Ok(match self {
            BlackBoxSpec::Quadrant => Box::new(QuadrantClassifier),
            BlackBoxSpec::Command(cmd) => Box::new(SubprocessAdapter::spawn(cmd, InputKind::Image)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrant_black_is_uniform() {
        let img = Image::filled(8, 8, 3, 0.0).unwrap();
        let p = QuadrantClassifier.probabilities(&img).unwrap();
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn quadrant_top_left_wins() {
        let img = Image::from_fn(8, 8, 1, |x, y, _| if x < 4 && y < 4 { 1.0 } else { 0.0 }).unwrap();
        let p = QuadrantClassifier.probabilities(&img).unwrap();
        assert_eq!(argmax(&p), 0);
        // logits [4,0,0,0]
        let e4 = 4f64.exp();
        assert!((p[0] - e4 / (e4 + 3.0)).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probability_validation() {
        assert!(validate_probs(&[0.7, 0.3], 2).is_ok());
        assert!(validate_probs(&[0.6, 0.3], 2).is_err());
        assert!(validate_probs(&[1.2, -0.2], 2).is_err());
        assert!(validate_probs(&[1.0], 2).is_err());
    }

    #[test]
    fn wire_image_round_trip() {
        let img = Image::new(2, 2, 1, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let wire = WireImage::encode(&img);
        assert_eq!(wire.decode_f32().unwrap(), vec![0.0f32, 0.25, 0.5, 1.0]);
        let json = serde_json::to_string(&wire).unwrap();
        assert!(json.starts_with(r#"{"w":2,"h":2,"c":1,"data_b64":""#));
    }

    #[test]
    fn request_and_handshake_wire_format() {
        let req = WireRequest { id: 3, inputs: vec![WirePoint { x: [0.5, -1.0] }] };
        assert_eq!(serde_json::to_string(&req).unwrap(), r#"{"id":3,"inputs":[{"x":[0.5,-1.0]}]}"#);
        let hs: AdapterHandshake =
            serde_json::from_str(r#"{"protocol_version":1,"n_classes":4,"input_kind":"image"}"#).unwrap();
        assert_eq!(hs.input_kind, InputKind::Image);
        assert_eq!(
            serde_json::to_string(&hs).unwrap(),
            r#"{"protocol_version":1,"n_classes":4,"input_kind":"image"}"#
        );
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("builtin:quadrant".parse::<BlackBoxSpec>().unwrap(), BlackBoxSpec::Quadrant);
        assert_eq!(
            r#"cmd:"python3 serve.py --stub""#.parse::<BlackBoxSpec>().unwrap(),
            BlackBoxSpec::Command(vec!["python3".into(), "serve.py".into(), "--stub".into()])
        );
        assert!("vit".parse::<BlackBoxSpec>().is_err());
    }

    #[test]
    fn spawn_failure_names_phase() {
        let err = SubprocessAdapter::spawn(&["/nonexistent/definitely-not-here".into()], InputKind::Image).unwrap_err();
        assert!(matches!(err, Error::Adapter { phase: AdapterPhase::Spawn, .. }), "{err}");
    }
}
