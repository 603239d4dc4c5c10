//! Deterministic black-box child for exercising the adapter protocol.
//!
//! ```text
//! alignex-stub [--version N] [--input image|point2d] [--record PATH]
//!              [--sleep-ms N] [--bad-sum] [--fail-id K] MODE
//! MODE: constant:P0,P1,...  |  quadrant  |  mean  |  linear
//! ```
//!
//! `mean` answers `softmax([0, mean pixel])`; `linear` (point inputs)
//! answers `[1 - p, p]` with `p = clamp(0.5 + 0.3 x1)`.

use std::fs::File;
use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::time::Duration;

use alignex::blackbox::{
    softmax, AdapterHandshake, InputKind, QuadrantClassifier, WireImage, WirePoint, WireRequest, WireResponse,
    PROTOCOL_VERSION,
};

enum Mode {
    Constant(Vec<f64>),
    Quadrant,
    Mean,
    Linear,
}

struct Options {
    version: u32,
    input: InputKind,
    record: Option<String>,
    sleep: Option<Duration>,
    bad_sum: bool,
    fail_id: Option<u64>,
    mode: Mode,
}

fn parse_args() -> Result<Options, String> {
    let mut args = std::env::args().skip(1);
    let mut o = Options {
        version: PROTOCOL_VERSION,
        input: InputKind::Image,
        record: None,
        sleep: None,
        bad_sum: false,
        fail_id: None,
        mode: Mode::Quadrant,
    };
    let value = |flag: &str, args: &mut dyn Iterator<Item = String>| {
        args.next().ok_or_else(|| format!("{flag} needs a value"))
    };
    while let Some(a) = args.next() {
        match a.as_str() {
            "--version" => o.version = value(&a, &mut args)?.parse().map_err(|e| format!("{e}"))?,
            "--input" => {
                o.input = match value(&a, &mut args)?.as_str() {
                    "image" => InputKind::Image,
                    "point2d" => InputKind::Point2d,
                    other => return Err(format!("unknown input kind {other}")),
                }
            }
            "--record" => o.record = Some(value(&a, &mut args)?),
            "--sleep-ms" => {
                o.sleep = Some(Duration::from_millis(value(&a, &mut args)?.parse().map_err(|e| format!("{e}"))?))
            }
            "--bad-sum" => o.bad_sum = true,
            "--fail-id" => o.fail_id = Some(value(&a, &mut args)?.parse().map_err(|e| format!("{e}"))?),
            "quadrant" => o.mode = Mode::Quadrant,
            "mean" => o.mode = Mode::Mean,
            "linear" => {
                o.mode = Mode::Linear;
                o.input = InputKind::Point2d;
            }
            m if m.starts_with("constant:") => {
                let probs = m["constant:".len()..]
                    .split(',')
                    .map(|v| v.parse::<f64>().map_err(|e| format!("{e}")))
                    .collect::<Result<Vec<_>, _>>()?;
                o.mode = Mode::Constant(probs);
            }
            other => return Err(format!("unknown argument {other}")),
        }
    }
    Ok(o)
}

fn n_classes(mode: &Mode) -> usize {
    match mode {
        Mode::Constant(p) => p.len(),
        Mode::Quadrant => 4,
        Mode::Mean | Mode::Linear => 2,
    }
}

fn answer(o: &Options, line: &str) -> Result<Vec<Vec<f64>>, String> {
    let rows = match o.input {
        InputKind::Image => {
            let req: WireRequest<WireImage> = serde_json::from_str(line).map_err(|e| e.to_string())?;
            req.inputs
                .iter()
                .map(|w| {
                    let img = w.decode().map_err(|e| e.to_string())?;
                    Ok(match &o.mode {
                        Mode::Constant(p) => p.clone(),
                        Mode::Quadrant => QuadrantClassifier.probabilities(&img).map_err(|e| e.to_string())?,
                        Mode::Mean => {
                            let mean = img.data().iter().sum::<f64>() / img.data().len() as f64;
                            softmax(&[0.0, mean])
                        }
                        Mode::Linear => return Err("linear mode takes point inputs".to_string()),
                    })
                })
                .collect::<Result<Vec<_>, String>>()?
        }
        InputKind::Point2d => {
            let req: WireRequest<WirePoint> = serde_json::from_str(line).map_err(|e| e.to_string())?;
            req.inputs
                .iter()
                .map(|p| match &o.mode {
                    Mode::Constant(probs) => probs.clone(),
                    _ => {
                        let v = (0.5 + 0.3 * p.x[0]).clamp(0.0, 1.0);
                        vec![1.0 - v, v]
                    }
                })
                .collect()
        }
    };
    Ok(rows)
}

fn request_id(line: &str) -> u64 {
    serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v.get("id").and_then(|id| id.as_u64()))
        .unwrap_or(0)
}

fn main() -> ExitCode {
    let o = match parse_args() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("alignex-stub: {e}");
            return ExitCode::from(1);
        }
    };
    let mut record = match o.record.as_deref().map(File::create).transpose() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("alignex-stub: {e}");
            return ExitCode::from(1);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut emit = |line: String, record: &mut Option<File>| -> io::Result<()> {
        if let Some(f) = record {
            writeln!(f, "> {line}")?;
        }
        writeln!(out, "{line}")?;
        out.flush()
    };
    let hello = AdapterHandshake { protocol_version: o.version, n_classes: n_classes(&o.mode), input_kind: o.input };
    if emit(serde_json::to_string(&hello).expect("handshake serializes"), &mut record).is_err() {
        return ExitCode::from(2);
    }
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if let Some(f) = &mut record {
            let _ = writeln!(f, "< {line}");
        }
        if let Some(d) = o.sleep {
            std::thread::sleep(d);
        }
        let id = request_id(&line);
        let resp = match answer(&o, &line) {
            _ if o.fail_id == Some(id) => WireResponse { id, probs: None, error: Some("requested failure".into()) },
            Ok(mut probs) => {
                if o.bad_sum {
                    probs.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v *= 0.5));
                }
                WireResponse { id, probs: Some(probs), error: None }
            }
            Err(e) => WireResponse { id, probs: None, error: Some(e) },
        };
        if emit(serde_json::to_string(&resp).expect("response serializes"), &mut record).is_err() {
            return ExitCode::from(2);
        }
    }
    ExitCode::SUCCESS
}
