//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimator::{fit, FitOptions, PostProcess, Rescale, RescaleMap, ThresholdRule};
use crate::harness::{emit_report, read_config_file, run_experiment, ExperimentConfig, Mode};
use crate::meyer::{build_band_table, BasisSpec};
use crate::spectral::{deconvolution_weights, NoiseModel};
use crate::threshold::{coarse_level, select_hyperparams_direct};
use crate::truth::{DensityKind, OracleQuantities, TruthModel};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MEYER_DENSITY_THREADS";

#[derive(Debug, Parser)]
#[command(name = "meyer-density", version, about = "Meyer wavelet density estimation and deconvolution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a density from direct observations.
    Estimate(EstimateArgs),
    /// Estimate a density from observations contaminated by additive noise.
    Deconvolve(DeconvolveArgs),
    /// Run a Monte Carlo risk-ratio experiment.
    Simulate(SimulateArgs),
    /// Tabulate true coefficients, their standard deviations and the oracle mask.
    Oracle(OracleArgs),
    /// Dump the Fourier coefficients of the periodized basis.
    Basis(BasisArgs),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto<T> {
    Auto,
    Value(T),
}

impl<T> Auto<T> {
    fn value(self) -> Option<T> {
        match self {
            Auto::Auto => None,
            Auto::Value(v) => Some(v),
        }
    }
}

fn parse_auto<T: std::str::FromStr>(s: &str) -> std::result::Result<Auto<T>, String> {
    if s == "auto" {
        return Ok(Auto::Auto);
    }
    s.parse()
        .map(Auto::Value)
        .map_err(|_| format!("expected 'auto' or a number, got '{s}'"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PostArg {
    Raw,
    Clip,
    ClipRenorm,
}

impl From<PostArg> for PostProcess {
    fn from(p: PostArg) -> Self {
        match p {
            PostArg::Raw => PostProcess::Raw,
            PostArg::Clip => PostProcess::Clip,
            PostArg::ClipRenorm => PostProcess::ClipRenormalize,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// One sample per line; lines starting with '#' are ignored.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Evaluation grid size (power of two, at least 2^J) [default: 512 or 2^J if larger]
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value = "auto", value_parser = parse_auto::<u32>)]
    pub j1: Auto<u32>,
    #[arg(long, default_value = "auto", value_parser = parse_auto::<f64>)]
    pub delta: Auto<f64>,
    /// Level-selection exponent [default: 0 for estimate, 0.5 for deconvolve]
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub j0: Option<u32>,
    /// Finest level J; the basis has 2^J coefficients.
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long, value_enum, default_value = "raw")]
    pub post: PostArg,
    /// Use the samples as given; they must lie in [0, 1].
    #[arg(long)]
    pub no_rescale: bool,
    #[arg(long, value_enum, default_value = "random")]
    pub rule: RuleArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    /// Variance-adaptive thresholds.
    Random,
    /// delta * sqrt(j / n).
    Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    None,
    Laplace,
}

#[derive(Debug, Args)]
pub struct DeconvolveArgs {
    #[command(flatten)]
    pub common: EstimateArgs,
    #[arg(long, value_enum, default_value = "laplace")]
    pub noise: NoiseArg,
    /// Noise standard deviation in data units.
    #[arg(long, conflicts_with = "s2n")]
    pub sigma_eps: Option<f64>,
    /// Root signal-to-noise ratio sigma_X / sigma_eps.
    #[arg(long)]
    pub s2n: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub density: Option<DensityKind>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// `start:step:stop` or a single value.
    #[arg(long)]
    pub delta: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    pub j1: Option<String>,
    #[arg(long, conflicts_with = "s2n")]
    pub sigma_eps: Option<f64>,
    #[arg(long)]
    pub s2n: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub j0: Option<u32>,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Keep per-replicate ratios in the JSON output.
    #[arg(long)]
    pub keep_raw: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub density: DensityKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub j0: Option<u32>,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long, value_enum, default_value = "none")]
    pub noise: NoiseArg,
    #[arg(long, conflicts_with = "s2n")]
    pub sigma_eps: Option<f64>,
    #[arg(long)]
    pub s2n: Option<f64>,
    /// Defaults to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    /// Level to dump; all levels when omitted.
    #[arg(long)]
    pub j: Option<u32>,
    #[arg(long, default_value_t = 3)]
    pub j0: u32,
    #[arg(long)]
    pub depth: Option<u32>,
    /// Defaults to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Quotes an argument only when the shell would split or expand it.
fn shell_word(s: &str) -> String {
    let plain = !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.,:/=+@%".contains(c));
    if plain {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

fn invocation(args: &[OsString]) -> String {
    std::iter::once("meyer-density".to_string())
        .chain(
            args.iter()
                .skip(1)
                .map(|a| shell_word(&a.to_string_lossy())),
        )
        .collect::<Vec<_>>()
        .join(" ")
}

fn header(out: &mut dyn Write, invocation: &str, seed: Option<u64>) -> io::Result<()> {
    writeln!(out, "# meyer-density {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "# invocation: {invocation}")?;
    match seed {
        Some(s) => writeln!(out, "# seed: {s}"),
        None => writeln!(out, "# seed: none"),
    }
}

/// Writes to `path`, or standard output when `None`.
fn with_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = fs::File::create(p).map_err(|e| Error::io(p, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            match body(&mut w).and_then(|_| w.flush()) {
                // a closed downstream pipe is not an error
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(|e| Error::io("<stdout>", e)),
            }
        }
    }
}

/// Reads one number per line, skipping blanks and `#` comments.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected one number, found '{line}'"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("sample '{line}' is not finite"),
            });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(out)
}

fn fit_options(a: &EstimateArgs) -> FitOptions {
    FitOptions {
        j0: a.j0,
        j1: a.j1.value(),
        delta: a.delta.value(),
        alpha: a.alpha,
        depth: a.depth,
        grid: a.grid,
        rescale: if a.no_rescale {
            Rescale::Fixed(RescaleMap::identity())
        } else {
            Rescale::default()
        },
        post: a.post.into(),
        rule: match a.rule {
            RuleArg::Random => ThresholdRule::Random,
            RuleArg::Level => ThresholdRule::Level,
        },
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Noise from flags. With `s2n`, `sigma_eps` is derived from `sd_x`.
fn noise_from_flags(kind: NoiseArg, sigma_eps: Option<f64>, s2n: Option<f64>, sd_x: impl FnOnce() -> f64) -> Result<NoiseModel> {
    match (kind, sigma_eps, s2n) {
        (NoiseArg::None, None, None) => Ok(NoiseModel::Identity),
        (NoiseArg::None, _, _) => Err(Error::InvalidConfig(
            "--sigma-eps/--s2n given with --noise none".into(),
        )),
        (NoiseArg::Laplace, Some(s), None) => NoiseModel::laplace(s),
        (NoiseArg::Laplace, None, Some(r)) if r.is_finite() && r > 0.0 => NoiseModel::laplace(sd_x() / r),
        (NoiseArg::Laplace, None, Some(r)) => {
            Err(Error::InvalidConfig(format!("--s2n must be positive, got {r}")))
        }
        (NoiseArg::Laplace, None, None) => Err(Error::MissingNoiseModel),
        (NoiseArg::Laplace, Some(_), Some(_)) => Err(Error::InvalidConfig(
            "give either --sigma-eps or --s2n, not both".into(),
        )),
    }
}

fn run_estimate(a: &EstimateArgs, mode: Mode, noise: Option<NoiseModel>, inv: &str) -> Result<()> {
    let samples = read_samples(&a.input)?;
    run_fit(a, &samples, mode, noise.as_ref(), inv)
}

fn run_fit(a: &EstimateArgs, samples: &[f64], mode: Mode, noise: Option<&NoiseModel>, inv: &str) -> Result<()> {
    let est = fit::<f64>(samples, mode, noise, &fit_options(a))?;
    with_output(Some(&a.output), |w| {
        header(w, inv, None)?;
        writeln!(
            w,
            "# n: {} j0: {} j1: {} delta: {:.16e} J: {} rule: {}",
            samples.len(),
            est.hyper.j0,
            est.hyper.j1,
            est.hyper.delta,
            est.spec.depth(),
            match a.rule {
                RuleArg::Random => "random",
                RuleArg::Level => "level",
            }
        )?;
        writeln!(
            w,
            "# rescale a: {:.16e} b: {:.16e}",
            est.map.offset(),
            est.map.scale()
        )?;
        if let NoiseModel::Laplace { sigma } = est.noise {
            writeln!(w, "# noise: laplace sigma_eps: {:.16e}", sigma * est.map.scale())?;
        }
        writeln!(w, "x,fhat")?;
        for (x, f) in est.x.iter().zip(&est.density) {
            writeln!(w, "{x:.16e},{f:.16e}")?;
        }
        Ok(())
    })
}

fn run_deconvolve(a: &DeconvolveArgs, inv: &str) -> Result<()> {
    let samples = read_samples(&a.common.input)?;
    // sigma_Y^2 = sigma_X^2 + sigma_eps^2 and sigma_X = s2n sigma_eps
    let noise = noise_from_flags(a.noise, a.sigma_eps, a.s2n, || {
        let r = a.s2n.unwrap_or(1.0);
        sample_std(&samples) * r / (1.0 + r * r).sqrt()
    })?;
    run_fit(&a.common, &samples, Mode::Deconvolve, Some(&noise), inv)
}

fn run_simulate(a: &SimulateArgs, inv: &str) -> Result<()> {
    let mut map: BTreeMap<String, String> = match &a.config {
        Some(p) => read_config_file(p)?,
        None => BTreeMap::new(),
    };
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    };
    set("density", a.density.map(|d| d.to_string()));
    set("mode", a.mode.clone());
    set("n", a.n.map(|v| v.to_string()));
    set("reps", a.reps.map(|v| v.to_string()));
    set("delta", a.delta.clone());
    set("j1", a.j1.clone());
    set("seed", a.seed.map(|v| v.to_string()));
    set("j0", a.j0.map(|v| v.to_string()));
    set("depth", a.depth.map(|v| v.to_string()));
    set("output", a.output.as_ref().map(|p| p.display().to_string()));
    set("json", a.json.as_ref().map(|p| p.display().to_string()));
    if a.keep_raw {
        set("keep_raw", Some("true".into()));
    }
    // a noise flag replaces whichever noise key the file had
    if a.sigma_eps.is_some() || a.s2n.is_some() {
        map.remove("sigma_eps");
        map.remove("s2n");
        if let Some(v) = a.sigma_eps {
            map.insert("sigma_eps".into(), v.to_string());
        }
        if let Some(v) = a.s2n {
            map.insert("s2n".into(), v.to_string());
        }
    }
    let cfg = ExperimentConfig::from_map(&map)?;
    let csv = cfg
        .output
        .clone()
        .ok_or_else(|| Error::InvalidConfig("simulate needs an output path".into()))?;
    let report = run_experiment(&cfg)?;
    emit_report(&report, inv, &csv, cfg.json.as_deref())?;
    Ok(())
}

fn run_oracle(a: &OracleArgs, inv: &str) -> Result<()> {
    let truth = TruthModel::new(a.density);
    let noise = noise_from_flags(a.noise, a.sigma_eps, a.s2n, || truth.std_dev())?;
    let j0 = a.j0.unwrap_or_else(|| coarse_level(a.n));
    let depth = a.depth.unwrap_or_else(|| BasisSpec::default_depth(a.n, j0));
    let j1 = select_hyperparams_direct(a.n, 0.0)?.j1.clamp(j0, depth.saturating_sub(1).max(j0));
    let spec = BasisSpec::new(j0, j1, depth)?;
    let table = build_band_table::<f64>(&spec)?;
    let weights = deconvolution_weights(&table, &noise)?;
    let oq = OracleQuantities::compute(&truth, &noise, &table, &weights, a.n)?;
    with_output(a.output.as_deref(), |w| {
        header(w, inv, None)?;
        write!(w, "# density: {} n: {} j0: {j0} J: {depth}", a.density, a.n)?;
        if let NoiseModel::Laplace { sigma } = noise {
            write!(w, " sigma_eps: {sigma:.16e}")?;
        }
        writeln!(w)?;
        oq.write_csv(w)
    })
}

fn run_basis(a: &BasisArgs, inv: &str) -> Result<()> {
    let top = a.j.unwrap_or(a.j0);
    let j0 = a.j0.min(top);
    let depth = a.depth.unwrap_or(8).max(top + 1);
    let spec = BasisSpec::new(j0, top.max(j0), depth)?;
    let table = build_band_table::<f64>(&spec)?;
    with_output(a.output.as_deref(), |w| {
        header(w, inv, None)?;
        writeln!(w, "# j0: {j0} J: {depth}")?;
        table.write_csv(w, a.j)
    })
}

fn configure_threads() {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(t) if t > 0 => {
            // a second initialisation (e.g. repeated in-process runs) is harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        _ => log::warn!("ignoring {THREADS_ENV}={v}: expected a positive integer"),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run(args: Vec<OsString>) -> std::result::Result<(), CliError> {
    let cli = Cli::try_parse_from(&args).map_err(CliError::Usage)?;
    configure_threads();
    let inv = invocation(&args);
    let r = match &cli.command {
        Command::Estimate(a) => run_estimate(a, Mode::Direct, None, &inv),
        Command::Deconvolve(a) => run_deconvolve(a, &inv),
        Command::Simulate(a) => run_simulate(a, &inv),
        Command::Oracle(a) => run_oracle(a, &inv),
        Command::Basis(a) => run_basis(a, &inv),
    };
    r.map_err(CliError::Run)
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, or a help/version request.
    Usage(clap::Error),
    Run(Error),
}
