use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alignex::blackbox::BlackBoxSpec;
use alignex::image::{project_explanation, Image};
use alignex::imagexp::{build_pairs, run_robustness, save_heatmap, RobustnessConfig};
use alignex::metrics::{msssim, DistanceKind, MsssimConfig};
use alignex::perturb::{distort, SamplerSpec};
use alignex::segment::{boundary_overlay, label_image, slic_segment, SlicParams};
use alignex::surrogate::{explain_image, ExplainConfig};
use alignex::synth2d::{evaluate_query, fit_quantile_transform, plot_neighbourhood, prepare_setup, run_with_setup, Synth2DConfig};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "alignex", version, about = "Surrogate explanations with image-aligned sampling")]
struct Cli {
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with the typed configuration of the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explain one image; writes explanation.json and heatmap.png to --out.
    Explain(ExplainArgs),
    /// Clean/distorted explanation robustness over a directory of images.
    Robustness(RobustnessArgs),
    /// Two-moons quantile-transform sampling study; writes a CSV to --out.
    Synth2d(Synth2dArgs),
    /// Apply a whole-image distortion such as noise@0.05, blur@5 or contrast@0.5.
    Distort {
        image: PathBuf,
        #[arg(long)]
        spec: SamplerSpec,
    },
    /// MS-SSIM and perceptual distance between two images as JSON.
    Metric { a: PathBuf, b: PathBuf },
    /// SLIC superpixels; writes a boundary overlay to --out.
    Segment {
        image: PathBuf,
        #[arg(long)]
        segments: Option<usize>,
        #[arg(long)]
        compactness: Option<f64>,
        /// Also write the label map as a grayscale image.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ExplainOverrides {
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    sampler: Option<SamplerSpec>,
    #[arg(long)]
    distance: Option<DistanceKind>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    image: PathBuf,
    #[arg(long, default_value = "builtin:quadrant")]
    blackbox: String,
    #[command(flatten)]
    overrides: ExplainOverrides,
}

#[derive(Debug, Args)]
struct RobustnessArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long, default_value = "builtin:quadrant")]
    blackbox: String,
    #[arg(long)]
    resize: Option<usize>,
    /// Comma-separated seeds averaged over; the first defaults to --seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Write reference/distorted heatmaps for every pair (first config, first seed).
    #[arg(long)]
    heatmaps: bool,
    #[command(flatten)]
    overrides: ExplainOverrides,
}

#[derive(Debug, Args)]
struct Synth2dArgs {
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    neighbourhood: Option<usize>,
    #[arg(long)]
    train: Option<usize>,
    /// Scatter/surrogate plot of the first query for every quantile count.
    #[arg(long)]
    plots: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<alignex::Error> for Failure {
    fn from(e: alignex::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        }
    }
}

fn write_sidecar<T: Serialize>(path: &Path, config: &T) -> Result<(), Failure> {
    fs::write(path, serde_json::to_string_pretty(config)? + "\n")?;
    log::info!("resolved configuration written to {}", path.display());
    Ok(())
}

/// `<file>.config.json` next to a file output.
fn sidecar_for(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".config.json");
    file.with_file_name(name)
}

fn apply_overrides(cfg: &mut ExplainConfig, o: &ExplainOverrides, seed: Option<u64>) {
    if let Some(n) = o.samples {
        cfg.n_samples = n;
    }
    if let Some(s) = o.sampler {
        cfg.sampler = s;
    }
    if let Some(d) = o.distance {
        cfg.kernel.distance_kind = d;
    }
    if let Some(n) = o.segments {
        cfg.segments.n_segments = n;
    }
    if let Some(s) = o.sigma {
        cfg.kernel.sigma = s;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
}

fn out_dir(cli: &Cli) -> Result<PathBuf, Failure> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn explain(cli: &Cli, args: &ExplainArgs) -> Result<(), Failure> {
    let mut cfg: ExplainConfig = load_config(cli.config.as_deref())?;
    apply_overrides(&mut cfg, &args.overrides, cli.seed);
    cfg.validate()?;
    let spec: BlackBoxSpec = args.blackbox.parse().map_err(|e: alignex::Error| Failure::Usage(e.to_string()))?;
    let image = Image::load(&args.image)?;
    let bb = spec.open_image()?;
    let dir = out_dir(cli)?;
    write_sidecar(&dir.join("config.resolved.json"), &cfg)?;
    let e = explain_image(&image, bb.as_ref(), &cfg)?;
    fs::write(dir.join("explanation.json"), e.explanation.to_json()? + "\n")?;
    let map = project_explanation(&e.explanation, &e.segmentation)?;
    save_heatmap(&image, &map, dir.join("heatmap.png"))?;
    println!("class {} with {} superpixels; wrote {}", e.explanation.class_id, e.segmentation.n_segments(), dir.display());
    Ok(())
}

fn robustness(cli: &Cli, args: &RobustnessArgs) -> Result<(), Failure> {
    let mut cfg: RobustnessConfig = load_config(cli.config.as_deref())?;
    apply_overrides(&mut cfg.explain, &args.overrides, None);
    if let Some(r) = args.resize {
        cfg.resize_to = r;
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = s.clone();
    } else if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    let spec: BlackBoxSpec = args.blackbox.parse().map_err(|e: alignex::Error| Failure::Usage(e.to_string()))?;
    let bb = spec.open_image()?;
    let base_seed = cfg.seeds.first().copied().unwrap_or(0);
    let pairs = build_pairs(&args.images, &cfg.distortions, cfg.resize_to, base_seed)?;
    let configs = cfg.configs();
    let dir = out_dir(cli)?;
    write_sidecar(&dir.join("config.resolved.json"), &cfg)?;
    let res = run_robustness(&pairs, &configs, bb.as_ref(), &cfg.seeds)?;
    fs::write(dir.join("results.csv"), res.results_csv()?)?;
    fs::write(dir.join("normalized.csv"), res.normalized_csv()?)?;
    fs::write(dir.join("diagnostics.json"), res.diagnostics_json()? + "\n")?;
    if args.heatmaps {
        let hdir = dir.join("heatmaps");
        fs::create_dir_all(&hdir)?;
        let cfg0 = ExplainConfig { seed: base_seed, ..configs[0].clone() };
        for (i, p) in pairs.iter().enumerate() {
            for (tag, img) in [("reference", &p.reference), ("distorted", &p.distorted)] {
                let e = explain_image(img, bb.as_ref(), &cfg0)?;
                let map = project_explanation(&e.explanation, &e.segmentation)?;
                save_heatmap(img, &map, hdir.join(format!("pair{i:03}_{}_{tag}.png", p.distortion)))?;
            }
        }
    }
    println!(
        "{} pairs x {} configs x {} seeds; {} failures, {} class divergences; wrote {}",
        pairs.len(),
        configs.len(),
        cfg.seeds.len(),
        res.diagnostics.failures.len(),
        res.diagnostics.class_divergence.len(),
        dir.display()
    );
    Ok(())
}

fn synth2d(cli: &Cli, args: &Synth2dArgs) -> Result<(), Failure> {
    let mut cfg: Synth2DConfig = load_config(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.queries {
        cfg.n_queries = n;
    }
    if let Some(n) = args.neighbourhood {
        cfg.n_neighbourhood = n;
    }
    if let Some(n) = args.train {
        cfg.n_train = n;
    }
    cfg.validate()?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("synth2d.csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_sidecar(&sidecar_for(&out), &cfg)?;
    let setup = prepare_setup(&cfg)?;
    let res = run_with_setup(&cfg, &setup)?;
    fs::write(&out, res.to_csv()?)?;
    if !res.skipped.is_empty() {
        log::warn!("{} query evaluations skipped (empty true-distribution region)", res.skipped.len());
    }
    if args.plots {
        let stem = out.with_extension("");
        for &m in &cfg.quantile_grid {
            let qt = fit_quantile_transform(&setup.train_x, m)?;
            match evaluate_query(&cfg, &setup, &qt, 0) {
                Ok(o) => {
                    let path = PathBuf::from(format!("{}_m{m}.png", stem.display()));
                    plot_neighbourhood(&setup, &o, setup.queries[0], 256)?.save(path)?;
                }
                Err(e) => log::warn!("no plot for m={m}: {e}"),
            }
        }
    }
    for r in &res.rows {
        println!(
            "m={:>3}  wasserstein={:.4}  param_distance={:.4}  queries={}",
            r.n_quantiles, r.mean_wasserstein, r.mean_param_distance, r.n_effective_queries
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct DistortRecord<'a> {
    image: &'a Path,
    spec: SamplerSpec,
    seed: u64,
}

#[derive(Serialize)]
struct MetricReport {
    msssim: f64,
    perceptual_distance: f64,
    config: MsssimConfig,
}

#[derive(Serialize)]
struct SegmentRecord<'a> {
    image: &'a Path,
    params: &'a SlicParams,
    n_segments_found: usize,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Explain(a) => explain(cli, a),
        Command::Robustness(a) => robustness(cli, a),
        Command::Synth2d(a) => synth2d(cli, a),
        Command::Distort { image, spec } => {
            spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let out = cli.out.clone().ok_or_else(|| Failure::Usage("distort needs --out".into()))?;
            let seed = cli.seed.unwrap_or(0);
            let img = Image::load(image)?;
            distort(&img, *spec, seed)?.save(&out)?;
            write_sidecar(&sidecar_for(&out), &DistortRecord { image, spec: *spec, seed })
        }
        Command::Metric { a, b } => {
            let (x, y) = (Image::load(a)?, Image::load(b)?);
            let cfg = match cli.config.as_deref() {
                Some(p) => load_config(Some(p))?,
                None => MsssimConfig::for_min_side(x.width().min(x.height()))?,
            };
            let s = msssim(&x, &y, &cfg)?;
            let report = MetricReport { msssim: s, perceptual_distance: (1.0 - s).clamp(0.0, 1.0), config: cfg };
            let text = serde_json::to_string_pretty(&report)?;
            match &cli.out {
                Some(p) => fs::write(p, text + "\n")?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::Segment { image, segments, compactness, labels } => {
            let out = cli.out.clone().ok_or_else(|| Failure::Usage("segment needs --out".into()))?;
            let mut params: SlicParams = load_config(cli.config.as_deref())?;
            if let Some(n) = segments {
                params.n_segments = *n;
            }
            if let Some(c) = compactness {
                params.compactness = *c;
            }
            let img = Image::load(image)?;
            let seg = slic_segment(&img, &params)?;
            boundary_overlay(&img, &seg)?.save(&out)?;
            if let Some(l) = labels {
                label_image(&seg).save(l)?;
            }
            println!("{} superpixels", seg.n_segments());
            write_sidecar(&sidecar_for(&out), &SegmentRecord { image, params: &params, n_segments_found: seg.n_segments() })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
