//! The `bandforge` command line.
//!
//! Failures print one line `error kind=<kind> code=<code> reason=<text>` on
//! stderr and exit with 2 (malformed input), 3 (degenerate fit) or 4 (invalid
//! configuration). Other I/O failures exit with 1.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bandforge_core::bandwidth::{cv_bandwidth_with, plug_in_bandwidth};
use bandforge_core::calibration::{
    calibrate, final_band, final_hetero_band, make_hetero_bootstrap_with, make_residual_bootstrap_with,
};
use bandforge_core::data::{uniform_grid, Dataset};
use bandforge_core::density::{density_band_calibrate_with, density_naive_band, DensityCalibrationConfig};
use bandforge_core::error::Error;
use bandforge_core::estimator::{fit_curve, local_linear_fit, silverman_bandwidth, FitConfig, VarianceEstimator};
use bandforge_core::kernel::Kernel;
use bandforge_core::naive::{build_hetero_band, build_naive_band};
use bandforge_core::percentile::{double_bootstrap_calibrate_with, DoubleBootstrapConfig, DEFAULT_MAX_COST};
use bandforge_core::sim::{run_study_with, MethodKind};
use bandforge_core::variance::{hetero_scale, Residuals};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::parse_simulate_config;
use crate::exec::{resolve_threads, Rayon};
use crate::io::{self, IoError};
use crate::manifest::{RunManifest, Stopwatch, MANIFEST_SCHEMA, MANIFEST_VERSION};

/// Studies per setting under `--full-scale`.
pub const FULL_SCALE_SIMS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "bandforge", version, about = "Bootstrap-calibrated pointwise confidence bands")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Confidence band for a regression mean from an `x,y` CSV.
    Band(BandArgs),
    /// Confidence band for a density from an `x` CSV.
    DensityBand(DensityArgs),
    /// Monte Carlo coverage study described by a JSON config.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Target non-coverage level α₀.
    #[arg(long, default_value_t = 0.05)]
    pub alpha0: f64,
    /// Fraction ξ of the region allowed to undercover.
    #[arg(long, default_value_t = 0.1)]
    pub xi: f64,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 999)]
    pub boot: usize,
    /// Evaluation region; defaults to the range of the data.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub region: Option<Vec<f64>>,
    /// Number of grid points.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Seed for all randomness; a random seed is drawn and printed when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to BANDFORGE_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Band CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest destination; defaults to `<out>.manifest.json` when `--out` is given.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandMethod {
    Calibrated,
    Naive,
    Percentile,
}

#[derive(Debug, Args)]
pub struct BandArgs {
    pub input: PathBuf,
    /// `plugin`, `cv`, or a positive number.
    #[arg(long, default_value = "plugin")]
    pub bandwidth: String,
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    /// Error variance estimator: `rice` or `residual`.
    #[arg(long, default_value = "rice")]
    pub variance: String,
    /// Allow the error variance to depend on x.
    #[arg(long)]
    pub hetero: bool,
    #[arg(long, value_enum, default_value_t = BandMethod::Calibrated)]
    pub method: BandMethod,
    /// Second-level replicates of the percentile method.
    #[arg(long, default_value_t = 199)]
    pub inner: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityMethod {
    Calibrated,
    Naive,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    pub input: PathBuf,
    /// `silverman` or a positive number.
    #[arg(long, default_value = "silverman")]
    pub bandwidth: String,
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    #[arg(long, value_enum, default_value_t = DensityMethod::Calibrated)]
    pub method: DensityMethod,
    /// Floor the lower envelope at zero.
    #[arg(long)]
    pub clamp_lower: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    /// Results CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Detailed JSON results (per-point coverage, calibrated levels, bandwidths).
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Overrides the seed of the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Run 1000 datasets per setting.
    #[arg(long)]
    pub full_scale: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub reason: String,
}

impl CliError {
    pub fn malformed(reason: impl ToString) -> Self {
        Self { code: 2, kind: "malformed_input", reason: reason.to_string() }
    }

    pub fn degenerate(reason: impl ToString) -> Self {
        Self { code: 3, kind: "degenerate_fit", reason: reason.to_string() }
    }

    pub fn config(reason: impl ToString) -> Self {
        Self { code: 4, kind: "invalid_config", reason: reason.to_string() }
    }

    pub fn io(reason: impl ToString) -> Self {
        Self { code: 1, kind: "io", reason: reason.to_string() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let reason: String = self.reason.chars().map(|c| if c == '\n' { ' ' } else { c }).collect();
        write!(f, "error kind={} code={} reason={}", self.kind, self.code, reason)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateWindow { .. }
            | Error::ZeroDensity { .. }
            | Error::AllDegenerate
            | Error::ZeroScale { .. } => CliError::degenerate(e),
            _ => CliError::config(e),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Write(_) => CliError::io(e),
            _ => CliError::malformed(e),
        }
    }
}

/// Parse `args`, run the command, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_owned();
            eprintln!("{}", CliError::config(first));
            return 4;
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.code
        }
    }
}

pub fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    match cli.command {
        Command::Band(a) => cmd_band(&a, argv),
        Command::DensityBand(a) => cmd_density_band(&a, argv),
        Command::Simulate(a) => cmd_simulate(&a, argv),
    }
}

fn resolve_seed(flag: Option<u64>) -> (u64, &'static str) {
    match flag {
        Some(s) => (s, "flag"),
        None => {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            (s, "random")
        }
    }
}

fn executor(threads: Option<usize>) -> Result<Rayon, CliError> {
    let threads = resolve_threads(threads).map_err(CliError::config)?;
    Rayon::new(threads).map_err(CliError::config)
}

fn parse_kernel(name: &str) -> Result<Kernel, CliError> {
    name.parse().map_err(|e: Error| CliError::config(e))
}

fn check_common(c: &CommonArgs) -> Result<(), CliError> {
    if !(c.alpha0 > 0.0 && c.alpha0 < 1.0) {
        return Err(CliError::config(format!("--alpha0 must lie in (0, 1), got {}", c.alpha0)));
    }
    if !(c.xi > 0.0 && c.xi <= 0.5) {
        return Err(CliError::config(format!("--xi must lie in (0, 0.5], got {}", c.xi)));
    }
    if c.boot == 0 {
        return Err(CliError::config("--boot must be positive"));
    }
    if c.grid < 2 {
        return Err(CliError::config("--grid must be at least 2"));
    }
    Ok(())
}

fn grid_for(c: &CommonArgs, range: (f64, f64)) -> Result<Vec<f64>, CliError> {
    let (a, b) = match &c.region {
        Some(r) => (r[0], r[1]),
        None => range,
    };
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(CliError::config(format!("--region must satisfy a < b, got [{a}, {b}]")));
    }
    uniform_grid(a, b, c.grid).map_err(CliError::config)
}

fn positive(value: &str, flag: &str) -> Result<f64, CliError> {
    match value.parse::<f64>() {
        Ok(h) if h > 0.0 && h.is_finite() => Ok(h),
        _ => Err(CliError::config(format!("{flag} must be a known rule or a positive number, got '{value}'"))),
    }
}

/// Geometric candidates from twice the largest design gap up to the design range.
fn cv_candidates(data: &Dataset) -> Vec<f64> {
    let mut xs = data.x().to_vec();
    xs.sort_by(f64::total_cmp);
    let range = xs[xs.len() - 1] - xs[0];
    let gap = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let lo = (2.0 * gap).min(range);
    let m = 30;
    (0..m).map(|k| lo * (range / lo).powf(k as f64 / (m - 1) as f64)).collect()
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::io(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn manifest_path(explicit: Option<&Path>, out: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| {
        out.map(|o| {
            let mut s = o.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

#[allow(clippy::too_many_arguments)]
fn write_manifest(
    path: Option<PathBuf>,
    command: &str,
    argv: &[String],
    config: serde_json::Value,
    seed: (u64, &str),
    threads: usize,
    watch: Stopwatch,
    outputs: Vec<String>,
    results: serde_json::Value,
) -> Result<(), CliError> {
    let Some(path) = path else { return Ok(()) };
    let (wall, timings) = watch.finish();
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.to_owned(),
        schema_version: MANIFEST_VERSION,
        command: command.to_owned(),
        argv: argv.to_vec(),
        config,
        seed: seed.0,
        seed_source: seed.1.to_owned(),
        software_version: env!("CARGO_PKG_VERSION").to_owned(),
        threads,
        wall_time_seconds: wall,
        timings,
        outputs,
        results,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(CliError::io)?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn path_list(p: &[Option<&Path>]) -> Vec<String> {
    p.iter().flatten().map(|p| p.display().to_string()).collect()
}

fn cmd_band(args: &BandArgs, argv: &[String]) -> Result<(), CliError> {
    let mut watch = Stopwatch::new();
    let c = &args.common;
    check_common(c)?;
    let kernel = parse_kernel(&args.kernel)?;
    let variance: VarianceEstimator = args.variance.parse().map_err(|e: Error| CliError::config(e))?;
    if args.hetero && args.method == BandMethod::Percentile {
        return Err(CliError::config("--hetero is not available with --method percentile"));
    }
    if args.method == BandMethod::Percentile && args.inner == 0 {
        return Err(CliError::config("--inner must be positive"));
    }
    let data = io::read_xy_path(&args.input)?;
    let grid = grid_for(c, data.x_range())?;
    let exec = executor(c.threads)?;
    let seed = resolve_seed(c.seed);
    watch.lap("read");

    let h = match args.bandwidth.as_str() {
        "plugin" => plug_in_bandwidth(&data, kernel)?.h,
        "cv" => cv_bandwidth_with(&exec, &data, kernel, &cv_candidates(&data))?.h,
        v => positive(v, "--bandwidth")?,
    };
    watch.lap("bandwidth");
    let fit = FitConfig { variance, ..FitConfig::new(kernel, h) };
    let est = fit_curve(&data, &fit, &grid)?;
    let sigma_scales = if args.hetero {
        let fitted = local_linear_fit(&data, h, kernel, data.x())?;
        let resid = Residuals::new(data.y(), &fitted);
        Some((hetero_scale(&data, &resid, h, kernel, data.x())?, hetero_scale(&data, &resid, h, kernel, &grid)?))
    } else {
        None
    };
    watch.lap("fit");

    let mut alpha_hat = None;
    let band = match (args.method, &sigma_scales) {
        (BandMethod::Naive, None) => build_naive_band(&est, c.alpha0)?,
        (BandMethod::Naive, Some((_, sg))) => build_hetero_band(&est, sg, c.alpha0)?,
        (BandMethod::Calibrated, None) => {
            let ens = make_residual_bootstrap_with(&exec, &data, &fit, &est, c.boot, seed.0)?;
            let profile = calibrate(&ens, c.alpha0, c.xi)?;
            alpha_hat = Some(profile.alpha_hat_xi);
            final_band(&est, &profile)?
        }
        (BandMethod::Calibrated, Some((sd, sg))) => {
            let ens = make_hetero_bootstrap_with(&exec, &data, &fit, &est, sd, c.boot, seed.0)?;
            let profile = calibrate(&ens, c.alpha0, c.xi)?;
            alpha_hat = Some(profile.alpha_hat_xi);
            final_hetero_band(&est, sg, &profile)?
        }
        (BandMethod::Percentile, _) => {
            let settings = DoubleBootstrapConfig {
                outer: c.boot,
                inner: args.inner,
                alpha0: c.alpha0,
                xi: c.xi,
                seed: seed.0,
                max_cost: DEFAULT_MAX_COST,
            };
            let r = double_bootstrap_calibrate_with(&exec, &data, &fit, &est, &settings)?;
            alpha_hat = Some(r.profile.alpha_hat_xi);
            r.band.band
        }
    };
    watch.lap("band");

    let mut out = open_out(c.out.as_deref())?;
    io::write_band(&mut out, &band)?;
    out.flush().map_err(CliError::io)?;
    drop(out);
    watch.lap("write");

    let config = json!({
        "input": args.input.display().to_string(),
        "alpha0": c.alpha0,
        "xi": c.xi,
        "boot": c.boot,
        "inner": args.inner,
        "region": [grid[0], grid[grid.len() - 1]],
        "grid": c.grid,
        "bandwidth": args.bandwidth,
        "kernel": kernel.name(),
        "variance": variance.name(),
        "hetero": args.hetero,
        "method": format!("{:?}", args.method).to_lowercase(),
    });
    let results = json!({ "bandwidth": h, "sigma2_hat": est.sigma2hat, "alpha_hat": alpha_hat });
    let mpath = manifest_path(c.manifest.as_deref(), c.out.as_deref());
    let outputs = path_list(&[c.out.as_deref(), mpath.as_deref()]);
    write_manifest(mpath, "band", argv, config, seed, exec.threads(), watch, outputs, results)
}

fn cmd_density_band(args: &DensityArgs, argv: &[String]) -> Result<(), CliError> {
    let mut watch = Stopwatch::new();
    let c = &args.common;
    check_common(c)?;
    let kernel = parse_kernel(&args.kernel)?;
    let sample = io::read_x_path(&args.input)?;
    let lo = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) && c.region.is_none() {
        return Err(CliError::config("sample has no spread; give --region"));
    }
    let grid = grid_for(c, (lo, hi))?;
    let exec = executor(c.threads)?;
    let seed = resolve_seed(c.seed);
    watch.lap("read");
    let h = match args.bandwidth.as_str() {
        "silverman" => silverman_bandwidth(&sample),
        v => positive(v, "--bandwidth")?,
    };
    watch.lap("bandwidth");
    let (band, alpha_hat) = match args.method {
        DensityMethod::Naive => (density_naive_band(&sample, h, kernel, &grid, c.alpha0, args.clamp_lower)?, None),
        DensityMethod::Calibrated => {
            let settings = DensityCalibrationConfig {
                h,
                kernel,
                alpha0: c.alpha0,
                xi: c.xi,
                replicates: c.boot,
                seed: seed.0,
                clamp_lower: args.clamp_lower,
            };
            let r = density_band_calibrate_with(&exec, &sample, &grid, &settings)?;
            (r.band, Some(r.profile.alpha_hat_xi))
        }
    };
    watch.lap("band");
    let mut out = open_out(c.out.as_deref())?;
    io::write_density_band(&mut out, &band)?;
    out.flush().map_err(CliError::io)?;
    drop(out);
    watch.lap("write");

    let config = json!({
        "input": args.input.display().to_string(),
        "alpha0": c.alpha0,
        "xi": c.xi,
        "boot": c.boot,
        "region": [grid[0], grid[grid.len() - 1]],
        "grid": c.grid,
        "bandwidth": args.bandwidth,
        "kernel": kernel.name(),
        "clamp_lower": args.clamp_lower,
        "method": format!("{:?}", args.method).to_lowercase(),
    });
    let results = json!({ "bandwidth": h, "alpha_hat": alpha_hat });
    let mpath = manifest_path(c.manifest.as_deref(), c.out.as_deref());
    let outputs = path_list(&[c.out.as_deref(), mpath.as_deref()]);
    write_manifest(mpath, "density-band", argv, config, seed, exec.threads(), watch, outputs, results)
}

fn cmd_simulate(args: &SimulateArgs, argv: &[String]) -> Result<(), CliError> {
    let mut watch = Stopwatch::new();
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::malformed(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = parse_simulate_config(&text).map_err(CliError::config)?;
    if args.full_scale {
        eprintln!("warning: --full-scale runs {FULL_SCALE_SIMS} datasets per setting; expect a long run");
        cfg.n_sims = FULL_SCALE_SIMS;
    }
    let seed = match args.seed.or(cfg.seed) {
        Some(s) => (s, "flag"),
        None => resolve_seed(None),
    };
    cfg.seed = Some(seed.0);
    let studies = cfg.studies(seed.0).map_err(CliError::config)?;
    let exec = executor(args.threads)?;
    watch.lap("config");

    let mut rows = Vec::new();
    let mut details = Vec::new();
    for study in &studies {
        let result = run_study_with(&exec, study)?;
        for r in result.results.iter().filter(|r| r.aborted.is_some()) {
            eprintln!(
                "warning: sigma={} g_index={} method={} setting={:?}: {}",
                study.sigma,
                study.curve.index(),
                r.kind.name(),
                r.setting,
                r.aborted.as_ref().map(ToString::to_string).unwrap_or_default()
            );
        }
        rows.extend(io::study_rows(&result, study.sigma, study.curve.index()));
        let best = |k: MethodKind| result.best(k).and_then(|r| r.setting);
        details.push(json!({
            "sigma": study.sigma,
            "g_index": study.curve.index(),
            "grid": result.grid,
            "truth": result.truth,
            "methods": result.results.iter().map(|r| json!({
                "method": r.kind.name(),
                "factor_or_xi": r.setting,
                "coverage": r.coverage,
                "covered_proportion": r.covered_proportion,
                "avg_abs_cov_error": r.avg_abs_cov_error,
                "avg_width": r.avg_width,
                "completed": r.completed,
                "failed": r.failed,
                "widened": r.widened,
                "aborted": r.aborted.is_some(),
            })).collect::<Vec<_>>(),
            "best_undersmooth": best(MethodKind::Undersmooth),
            "best_bias_correct": best(MethodKind::BiasCorrect),
            "xi_list": study.xi_list,
            "alpha_hat": result.alpha_hat,
            "bandwidths": result.bandwidths,
            "widened_bandwidths": result.widened,
        }));
        watch.lap(&format!("study sigma={} g={}", study.sigma, study.curve.index()));
    }

    let mut out = open_out(args.out.as_deref())?;
    io::write_study_rows(&mut out, &rows)?;
    out.flush().map_err(CliError::io)?;
    drop(out);
    if let Some(path) = &args.json {
        let doc = json!({
            "schema": "bandforge.study-results",
            "schema_version": 1,
            "rows": rows,
            "studies": details,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(CliError::io)?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    }
    watch.lap("write");
    let config = serde_json::to_value(&cfg).map_err(CliError::io)?;
    let mpath = manifest_path(args.manifest.as_deref(), args.out.as_deref());
    let outputs = path_list(&[args.out.as_deref(), args.json.as_deref(), mpath.as_deref()]);
    let results = json!({ "studies": studies.len(), "rows": rows.len() });
    write_manifest(mpath, "simulate", argv, config, seed, exec.threads(), watch, outputs, results)
}
