//! Command-line driver: experiment, spectrum, predict, fit, collapse.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use patchkern::config::RunConfig;
use patchkern::error::{Error, Result};
use patchkern::harness::{
    self, collapse_check, fit_exponent, theory_report_for_curve, CurvePoint, LearningCurve,
};
use patchkern::kernels::CompositeKind;
use patchkern::spectral::{
    self, predicted_beta, PredictionInput, RidgePolicy, SpectralDescriptor,
};

const LONG_ABOUT: &str = "\
Teacher-student kernel regression with convolutional and local kernels.

Run configuration is a TOML file (see --help of `experiment`); flags override
file keys. Config keys by section:
  [teacher]/[student]: kind (conv|local), constituent (laplacian|relu_ntk|\
rf_ntk|spectral), d, s, overlap (true|false), alpha, mass, H, seed
  [sampling]: domain (cube|sphere|torus), P_grid, P_test, realizations, \
base_seed
  [ridge]: ridge_mode (ridgeless|fixed|decaying), lambda0, gamma
  [fit]: window = [low, high]
  [spectrum]: k_max

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.";

#[derive(Parser)]
#[command(name = "patchkern", version, about = "Convolutional/local kernel regression laboratory", long_about = LONG_ABOUT)]
struct Cli {
    /// TOML run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts (default: patchkern-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the config's base_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

const CONFIG_KEYS: &str = "\
Config keys (TOML sections):
  [teacher]/[student]: kind (conv|local), constituent (laplacian|relu_ntk|rf_ntk|spectral),
                       d, s, overlap (true|false), alpha, mass, H, seed
  [sampling]:          domain (cube|sphere|torus), P_grid, P_test, realizations, base_seed
  [ridge]:             ridge_mode (ridgeless|fixed|decaying), lambda0, gamma
  [fit]:               window = [low, high]
  [spectrum]:          k_max";

#[derive(Subcommand)]
enum Cmd {
    /// Run a learning-curve sweep; writes curve.csv, raw.csv, report.json
    /// and manifest.json under the output directory.
    #[command(after_help = CONFIG_KEYS)]
    Experiment,
    /// Enumerate a composite-kernel spectrum (CSV: n_1..n_s, k, u, lambda,
    /// Lambda, degeneracy, target_var).
    #[command(after_help = CONFIG_KEYS)]
    Spectrum(SpectrumArgs),
    /// Closed-form learning-curve exponent and validity flags (JSON).
    #[command(after_help = CONFIG_KEYS)]
    Predict(PredictArgs),
    /// Fit a power-law exponent to a curve file (columns P, error or a
    /// curve.csv written by `experiment`).
    #[command(after_help = CONFIG_KEYS)]
    Fit(FitArgs),
    /// Weight-sharing rescale check between a local and a convolutional
    /// curve file.
    #[command(after_help = CONFIG_KEYS)]
    Collapse(CollapseArgs),
}

#[derive(Args)]
struct SpectrumArgs {
    /// Student filter size (ignored with --config).
    #[arg(long, default_value_t = 2)]
    s: usize,
    /// Input dimension.
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Student kind: conv | local.
    #[arg(long, default_value = "conv")]
    kind: String,
    /// Overlapping patches.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    overlap: bool,
    /// Student smoothness exponent.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Teacher filter size (defaults to s).
    #[arg(long)]
    t: Option<usize>,
    /// Teacher smoothness exponent (defaults to alpha).
    #[arg(long)]
    alpha_t: Option<f64>,
    /// Wavevector cutoff (default: enough for 100000 modes).
    #[arg(long)]
    k_max: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha_t: f64,
    /// Teacher filter size (defaults to s).
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    alpha_s: f64,
    #[arg(long)]
    s: usize,
    /// Student kind: conv | local.
    #[arg(long, default_value = "conv")]
    student: String,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    overlap: bool,
    /// ridgeless | fixed | decaying.
    #[arg(long, default_value = "ridgeless")]
    ridge_mode: String,
    #[arg(long, default_value_t = 0.0)]
    lambda0: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
}

#[derive(Args)]
struct FitArgs {
    /// Curve file: `P,error` pairs or a curve.csv with named columns.
    file: PathBuf,
    /// Fit window as `low,high` (default: last decade).
    #[arg(long)]
    window: Option<String>,
}

#[derive(Args)]
struct CollapseArgs {
    /// Curve file of the local student.
    #[arg(long)]
    local: PathBuf,
    /// Curve file of the convolutional student.
    #[arg(long)]
    conv: PathBuf,
    /// Number of patches used in the P rescale.
    #[arg(long)]
    patches: usize,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    created_utc: String,
    package_version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    base_seed: u64,
    seed_derivation: &'static str,
    outputs: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore the error if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    patchkern::linalg::init_blas();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Experiment => cmd_experiment(cli),
        Cmd::Spectrum(args) => cmd_spectrum(cli, args),
        Cmd::Predict(args) => cmd_predict(cli, args),
        Cmd::Fit(args) => cmd_fit(args),
        Cmd::Collapse(args) => cmd_collapse(args),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("config", "this subcommand needs --config FILE"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.sampling.base_seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("patchkern-out"))
}

fn cmd_experiment(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let exp = cfg.experiment()?;
    let dir = out_dir(cli);
    std::fs::create_dir_all(&dir)?;

    // Manifest goes first: enough to reproduce the run exactly.
    let manifest = RunManifest {
        created_utc: chrono::Utc::now().to_rfc3339(),
        package_version: env!("CARGO_PKG_VERSION"),
        command: "experiment",
        config: &cfg,
        base_seed: exp.base_seed,
        seed_derivation: "per (P, r): stream = splitmix64(base_seed ^ splitmix64(P) ^ \
                          splitmix64(r + 0x5851f42d4c957f2d)); substreams 1 = points, 2 = field; \
                          one retry with splitmix64(stream ^ 0x9e6c63d0876a68e5)",
        outputs: vec![
            "curve.csv".into(),
            "raw.csv".into(),
            "report.json".into(),
        ],
    };
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    let start = std::time::Instant::now();
    let curve = harness::run_learning_curve(&exp)?;
    let runtime = start.elapsed().as_secs_f64();

    write_curve_csv(&dir.join("curve.csv"), &curve.points)?;
    let mut raw = csv::Writer::from_path(dir.join("raw.csv"))?;
    raw.write_record(["P", "realization", "error"])?;
    for (p, r, e) in &curve.raw {
        raw.write_record(&[p.to_string(), r.to_string(), format!("{e:.17e}")])?;
    }
    raw.flush()?;

    let report = theory_report_for_curve(&exp, &curve, runtime);
    std::fs::write(dir.join("report.json"), report.to_json()?)?;
    println!(
        "fitted beta = {:.4} +- {:.4} (window {:?}); predicted: {}",
        curve.beta,
        curve.beta_stderr,
        curve.fit_window,
        report
            .predicted
            .beta()
            .map(|b| format!("{b:.4}"))
            .unwrap_or_else(|| "plateau".into())
    );
    Ok(())
}

fn write_curve_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["P", "mean_err", "std_err", "sem", "n"])?;
    for c in points {
        w.write_record(&[
            c.p.to_string(),
            format!("{:.17e}", c.mean_err),
            format!("{:.17e}", c.std_err),
            format!("{:.17e}", c.sem),
            c.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_spectrum(cli: &Cli, args: &SpectrumArgs) -> Result<()> {
    let (student, teacher, k_max) = if cli.config.is_some() {
        let cfg = load_config(cli)?;
        (
            cfg.student.spectral_descriptor()?,
            cfg.teacher.spectral_descriptor()?,
            cfg.spectrum.k_max.filter(|k| *k > 0.0),
        )
    } else {
        let kind = match args.kind.as_str() {
            "conv" => CompositeKind::Convolutional,
            "local" => CompositeKind::Local,
            other => {
                return Err(Error::config(
                    "kind",
                    format!("expected conv|local, got `{other}`"),
                ))
            }
        };
        let overlap = if args.overlap {
            patchkern::kernels::Overlap::Overlapping
        } else {
            patchkern::kernels::Overlap::NonOverlapping
        };
        let student =
            SpectralDescriptor::power_law(kind, args.s, args.d, overlap, args.alpha, 1.0)?;
        let teacher = SpectralDescriptor::power_law(
            kind,
            args.t.unwrap_or(args.s),
            args.d,
            overlap,
            args.alpha_t.unwrap_or(args.alpha),
            1.0,
        )?;
        (student, teacher, args.k_max)
    };
    let k_max = k_max.unwrap_or_else(|| spectral::k_max_for_modes(&student, 100_000));
    let spectrum = spectral::enumerate_spectrum(&student, k_max)?;
    let coeffs = spectral::target_coefficients(&teacher, &spectrum)?;

    let mut header: Vec<String> = (1..=student.s).map(|i| format!("n_{i}")).collect();
    header.extend(
        ["k", "u", "lambda", "Lambda", "degeneracy", "target_var"]
            .iter()
            .map(|s| s.to_string()),
    );
    let write_to = |w: &mut csv::Writer<Box<dyn std::io::Write>>| -> Result<()> {
        w.write_record(&header)?;
        for (entry, var) in spectrum.entries().iter().zip(coeffs.variances.iter()) {
            let mut rec: Vec<String> = entry
                .wavevector
                .components()
                .iter()
                .map(|c| c.to_string())
                .collect();
            rec.push(format!("{:.12e}", entry.wavevector.modulus()));
            rec.push(entry.wavevector.class_u().to_string());
            rec.push(format!("{:.12e}", entry.lambda));
            rec.push(format!("{:.12e}", entry.big_lambda));
            rec.push(entry.degeneracy.to_string());
            rec.push(format!("{:.12e}", var));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    };
    let sink: Box<dyn std::io::Write> = match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Box::new(std::fs::File::create(dir.join("spectrum.csv"))?)
        }
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    write_to(&mut w)?;
    if let Some(dir) = &cli.out {
        eprintln!("wrote {}", dir.join("spectrum.csv").display());
    }
    Ok(())
}

fn cmd_predict(cli: &Cli, args: &PredictArgs) -> Result<()> {
    let student_kind = match args.student.as_str() {
        "conv" => CompositeKind::Convolutional,
        "local" => CompositeKind::Local,
        other => {
            return Err(Error::config(
                "student",
                format!("expected conv|local, got `{other}`"),
            ))
        }
    };
    let ridge = match args.ridge_mode.as_str() {
        "ridgeless" => RidgePolicy::Ridgeless,
        "fixed" => RidgePolicy::Fixed {
            lambda0: args.lambda0,
        },
        "decaying" => RidgePolicy::Decaying {
            lambda0: if args.lambda0 > 0.0 { args.lambda0 } else { 1.0 },
            gamma: args.gamma,
        },
        other => {
            return Err(Error::config(
                "ridge_mode",
                format!("expected ridgeless|fixed|decaying, got `{other}`"),
            ))
        }
    };
    let overlap = if args.overlap {
        patchkern::kernels::Overlap::Overlapping
    } else {
        patchkern::kernels::Overlap::NonOverlapping
    };
    let prediction = predicted_beta(PredictionInput {
        alpha_t: args.alpha_t,
        t: args.t.unwrap_or(args.s),
        alpha_s: args.alpha_s,
        s: args.s,
        student_kind,
        overlap,
        ridge,
    });
    let json = serde_json::to_string_pretty(&prediction)?;
    println!("{json}");
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("predict.json"), &json)?;
    }
    Ok(())
}

/// Parse a curve file: either `P,error` rows or an `experiment` curve.csv.
fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut err_col = 1usize;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if i == 0 && fields[0].parse::<f64>().is_err() {
            // Header row: find the error column by name.
            if let Some(pos) = fields.iter().position(|f| *f == "mean_err" || *f == "error")
            {
                err_col = pos;
            }
            continue;
        }
        if fields.len() <= err_col {
            return Err(Error::Fit(format!(
                "line {} of {} has {} fields, need at least {}",
                i + 1,
                path.display(),
                fields.len(),
                err_col + 1
            )));
        }
        let p: f64 = fields[0]
            .parse()
            .map_err(|_| Error::Fit(format!("bad P value `{}`", fields[0])))?;
        let e: f64 = fields[err_col]
            .parse()
            .map_err(|_| Error::Fit(format!("bad error value `{}`", fields[err_col])))?;
        out.push((p, e));
    }
    if out.is_empty() {
        return Err(Error::Fit(format!("{} contains no data rows", path.display())));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

fn parse_window(spec: &Option<String>, points: &[(f64, f64)]) -> Result<(usize, usize)> {
    match spec {
        Some(text) => {
            let parts: Vec<&str> = text.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::config("window", "expected `low,high`"));
            }
            let lo = parts[0]
                .trim()
                .parse()
                .map_err(|_| Error::config("window", "bad low bound"))?;
            let hi = parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::config("window", "bad high bound"))?;
            Ok((lo, hi))
        }
        None => {
            let hi = points.last().unwrap().0 as usize;
            Ok((hi / 10, hi))
        }
    }
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let points = read_curve(&args.file)?;
    let window = parse_window(&args.window, &points)?;
    let (beta, stderr) = fit_exponent(&points, window)?;
    let out = serde_json::json!({
        "beta": beta,
        "stderr": stderr,
        "window": [window.0, window.1],
        "n_points": points.iter().filter(|(p, _)| *p >= window.0 as f64 && *p <= window.1 as f64).count(),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn curve_from_points(points: Vec<(f64, f64)>) -> LearningCurve {
    LearningCurve {
        points: points
            .iter()
            .map(|&(p, e)| CurvePoint {
                p: p as usize,
                mean_err: e,
                std_err: 0.0,
                sem: 0.0,
                n: 1,
            })
            .collect(),
        raw: Vec::new(),
        beta: 0.0,
        beta_stderr: 0.0,
        fit_window: (points[0].0 as usize, points[points.len() - 1].0 as usize),
    }
}

fn cmd_collapse(args: &CollapseArgs) -> Result<()> {
    let local = curve_from_points(read_curve(&args.local)?);
    let conv = curve_from_points(read_curve(&args.conv)?);
    let report = collapse_check(&local, &conv, args.patches)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
