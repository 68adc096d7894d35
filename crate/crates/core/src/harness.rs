//! Monte Carlo risk-ratio experiments.
//!
//! Each replicate draws one sample, computes the empirical coefficients and
//! variance bounds once, then scores every `(j1, delta)` pair for both the
//! random-threshold rule and the level-dependent rule `delta sqrt(j/n)`.
//! Ratios are taken against the exact oracle risk for the same `j1`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meyer::{build_band_table, BasisSpec};
use crate::spectral::{deconvolution_weights, EmpiricalFourier, NoiseModel};
use crate::threshold::{coarse_level, estimate_variance_with, level_threshold, ThresholdParams};
use crate::transform::{CoeffSet, FastTransform};
use crate::truth::{replicate_rng, DensityKind, OracleQuantities, TruthModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Deconvolve,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Direct => "direct",
            Mode::Deconvolve => "deconvolve",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Mode::Direct),
            "deconvolve" => Ok(Mode::Deconvolve),
            other => Err(Error::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

/// How the Laplace noise level is given in deconvolution experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    SigmaEps(f64),
    /// Root signal-to-noise ratio `sigma_X / sigma_eps`.
    S2n(f64),
}

impl NoiseLevel {
    pub fn sigma_eps(&self, truth: &TruthModel) -> f64 {
        match *self {
            NoiseLevel::SigmaEps(s) => s,
            NoiseLevel::S2n(r) => truth.std_dev() / r,
        }
    }
}

/// Parses `start:step:stop` (inclusive) or a single value.
pub fn parse_delta_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("bad delta grid '{s}', expected start:step:stop"));
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, h, b] => {
            let (a, h, b) = (num(a)?, num(h)?, num(b)?);
            if !(a.is_finite() && h.is_finite() && b.is_finite()) || h <= 0.0 || b < a {
                return Err(bad());
            }
            // tolerate rounding in (b - a) / h
            let count = ((b - a) / h + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| a + i as f64 * h).collect())
        }
        _ => Err(bad()),
    }
}

fn parse_j1_list(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidConfig(format!("bad j1 list '{s}'")))
        })
        .collect()
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub density: DensityKind,
    pub mode: Mode,
    pub n: usize,
    pub reps: usize,
    pub deltas: Vec<f64>,
    pub j1: Vec<u32>,
    pub noise: Option<NoiseLevel>,
    pub seed: u64,
    /// Defaults to `floor(log2(ln n)) + 1`.
    pub j0: Option<u32>,
    /// Defaults to `max(8, ceil(log2 n))`.
    pub depth: Option<u32>,
    pub output: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub keep_raw: bool,
}

/// Recognised keys of the flat config format.
pub const CONFIG_KEYS: [&str; 14] = [
    "density", "mode", "n", "reps", "delta", "j1", "sigma_eps", "s2n", "seed", "j0", "depth",
    "output", "json", "keep_raw",
];

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text, path)
}

pub fn parse_config_text(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err("expected key = value".into()))?;
        let key = key.trim().to_ascii_lowercase();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(parse_err(format!("unknown key '{key}'")));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(parse_err(format!("duplicate key '{key}'")));
        }
    }
    Ok(map)
}

impl ExperimentConfig {
    /// Builds a validated config from flat key/value pairs.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::InvalidConfig(format!("unknown key '{k}'")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let req = |k: &str| get(k).ok_or_else(|| Error::InvalidConfig(format!("missing '{k}'")));
        fn num<V: FromStr>(k: &str, v: &str) -> Result<V> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value '{v}' for '{k}'")))
        }
        let opt = |k: &str| -> Result<Option<f64>> { get(k).map(|v| num(k, v)).transpose() };
        let noise = match (opt("sigma_eps")?, opt("s2n")?) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "give either sigma_eps or s2n, not both".into(),
                ))
            }
            (Some(s), None) => Some(NoiseLevel::SigmaEps(s)),
            (None, Some(r)) => Some(NoiseLevel::S2n(r)),
            (None, None) => None,
        };
        let cfg = Self {
            density: req("density")?.parse()?,
            mode: get("mode").unwrap_or("direct").parse()?,
            n: num("n", req("n")?)?,
            reps: num("reps", req("reps")?)?,
            deltas: parse_delta_grid(req("delta")?)?,
            j1: parse_j1_list(req("j1")?)?,
            noise,
            seed: get("seed").map(|v| num("seed", v)).transpose()?.unwrap_or(0),
            j0: get("j0").map(|v| num("j0", v)).transpose()?,
            depth: get("depth").map(|v| num("depth", v)).transpose()?,
            output: get("output").map(PathBuf::from),
            json: get("json").map(PathBuf::from),
            keep_raw: get("keep_raw").map(|v| num("keep_raw", v)).transpose()?.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidConfig(m));
        if self.reps == 0 {
            return invalid("reps must be at least 1".into());
        }
        if self.n < 3 {
            return invalid(format!("n must be at least 3, got {}", self.n));
        }
        if self.deltas.is_empty() {
            return invalid("delta grid is empty".into());
        }
        if let Some(d) = self.deltas.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return invalid(format!("delta values must be finite and nonnegative, got {d}"));
        }
        if self.j1.is_empty() {
            return invalid("j1 list is empty".into());
        }
        let mut sorted = self.j1.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.j1.len() {
            return invalid("j1 list has duplicates".into());
        }
        match (self.mode, self.noise) {
            (Mode::Direct, Some(_)) => {
                return invalid("noise level given in direct mode".into());
            }
            (Mode::Deconvolve, None) => return Err(Error::MissingNoiseModel),
            (Mode::Deconvolve, Some(level)) => {
                let v = match level {
                    NoiseLevel::SigmaEps(v) | NoiseLevel::S2n(v) => v,
                };
                if !(v.is_finite() && v > 0.0) {
                    return invalid(format!("noise level must be positive, got {v}"));
                }
            }
            (Mode::Direct, None) => {}
        }
        self.basis_spec().map(|_| ())
    }

    pub fn coarse_level(&self) -> u32 {
        self.j0.unwrap_or_else(|| coarse_level(self.n))
    }

    /// Basis covering every requested `j1`.
    pub fn basis_spec(&self) -> Result<BasisSpec> {
        let j0 = self.coarse_level();
        let j1_max = self.j1.iter().copied().max().unwrap_or(j0);
        if let Some(j1) = self.j1.iter().find(|&&j| j < j0) {
            return Err(Error::InvalidConfig(format!("j1 = {j1} is below j0 = {j0}")));
        }
        let depth = match self.depth {
            Some(d) => d,
            None => BasisSpec::default_depth(self.n, 0).max(j1_max + 1),
        };
        BasisSpec::new(j0, j1_max, depth)
    }

    pub fn noise_model(&self, truth: &TruthModel) -> Result<NoiseModel> {
        match (self.mode, self.noise) {
            (Mode::Direct, _) => Ok(NoiseModel::Identity),
            (Mode::Deconvolve, Some(level)) => NoiseModel::laplace(level.sigma_eps(truth)),
            (Mode::Deconvolve, None) => Err(Error::MissingNoiseModel),
        }
    }
}

/// Aggregated ratios for one `(j1, delta)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskCell {
    pub j1: u32,
    pub delta: f64,
    pub mean_rn: f64,
    pub se_rn: f64,
    pub mean_rtilde: f64,
    pub se_rtilde: f64,
    pub oracle_risk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub config: ExperimentConfig,
    pub spec: BasisSpec,
    pub sigma_eps: Option<f64>,
    /// Ordered by `j1` as configured, then by `delta`.
    pub cells: Vec<RiskCell>,
    /// Total number of draws clamped into `[0, 1]`.
    pub clamped: usize,
    /// Per replicate `(R_n, Rtilde_n)` in cell order, when requested.
    pub raw: Option<Vec<Vec<(f64, f64)>>>,
}

impl RiskReport {
    pub fn cell(&self, j1: u32, delta: f64) -> Option<&RiskCell> {
        self.cells.iter().find(|c| c.j1 == j1 && c.delta == delta)
    }

    /// Cells for one `j1`, in grid order.
    pub fn curve(&self, j1: u32) -> Vec<&RiskCell> {
        self.cells.iter().filter(|c| c.j1 == j1).collect()
    }
}

/// Squared-error numerator of the risk ratio for one replicate.
///
/// `keep(j, k, betahat)` decides whether a coefficient at `j <= j1` survives.
pub fn risk_numerator(
    estimate: &CoeffSet<f64>,
    truth: &CoeffSet<f64>,
    j1: u32,
    mut keep: impl FnMut(u32, usize, f64) -> bool,
) -> f64 {
    let mut total: f64 = estimate
        .scaling()
        .iter()
        .zip(truth.scaling())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    for ((j, est), (_, tru)) in estimate.levels().zip(truth.levels()) {
        total += est
            .iter()
            .zip(tru)
            .enumerate()
            .map(|(k, (&bh, &b))| {
                if j <= j1 && keep(j, k, bh) {
                    (bh - b) * (bh - b)
                } else {
                    b * b
                }
            })
            .sum::<f64>();
    }
    total
}

struct Replicate {
    ratios: Vec<(f64, f64)>,
    clamped: usize,
}

/// Everything shared by the replicates of one experiment.
struct Setup {
    truth: TruthModel,
    noise: NoiseModel,
    weights: crate::spectral::WeightTable<f64>,
    plan: FastTransform<f64>,
    oracle: OracleQuantities,
    denominators: Vec<f64>,
}

fn setup(cfg: &ExperimentConfig, spec: &BasisSpec) -> Result<Setup> {
    let truth = TruthModel::new(cfg.density);
    let noise = cfg.noise_model(&truth)?;
    let table = build_band_table::<f64>(spec)?;
    let weights = deconvolution_weights(&table, &noise)?;
    let oracle = OracleQuantities::compute(&truth, &noise, &table, &weights, cfg.n)?;
    let denominators = cfg
        .j1
        .iter()
        .map(|&j1| {
            let r = oracle.risk(j1, spec.depth()).total();
            if r > 0.0 && r.is_finite() {
                Ok(r)
            } else {
                Err(Error::NonPositiveOracleRisk(r))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Setup {
        plan: FastTransform::new(spec),
        truth,
        noise,
        weights,
        oracle,
        denominators,
    })
}

fn replicate(cfg: &ExperimentConfig, s: &Setup, rep: u64) -> Result<Replicate> {
    let spec = s.plan.spec();
    let mut rng = replicate_rng(cfg.seed, rep);
    let draw = s.truth.sample(&mut rng, cfg.n);
    let (observed, fourier) = match cfg.mode {
        Mode::Direct => {
            let f = EmpiricalFourier::from_samples(&draw.values, spec.fourier_len())?;
            (draw.values, f)
        }
        Mode::Deconvolve => {
            let y: Vec<f64> = draw
                .values
                .iter()
                .map(|x| x + s.noise.sample(&mut rng).expect("Laplace noise has a sampler"))
                .collect();
            let f = EmpiricalFourier::from_observations(&y, spec.fourier_len())?;
            (y, f)
        }
    };
    let coeffs = s.plan.forward(&fourier, &s.weights)?;
    let vt = estimate_variance_with(&s.plan, &observed, &s.weights)?;
    let beta = s.oracle.true_coeffs();
    let mut ratios = Vec::with_capacity(cfg.j1.len() * cfg.deltas.len());
    for (&j1, &denom) in cfg.j1.iter().zip(&s.denominators) {
        for &delta in &cfg.deltas {
            let params = ThresholdParams::new(delta, cfg.n)?;
            let rn = risk_numerator(&coeffs, beta, j1, |j, k, bh| {
                let eta = vt.eta(j);
                bh.abs() >= params.tau(vt.vhat(j)[k], eta)
            });
            let rt = risk_numerator(&coeffs, beta, j1, |j, _, bh| {
                bh.abs() >= level_threshold(delta, cfg.n, j)
            });
            ratios.push((rn / denom, rt / denom));
        }
    }
    Ok(Replicate {
        ratios,
        clamped: draw.clamped,
    })
}

fn mean_se(sum: f64, sum_sq: f64, m: usize) -> (f64, f64) {
    let mf = m as f64;
    let mean = sum / mf;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - mf * mean * mean) / (mf - 1.0)).max(0.0);
    (mean, (var / mf).sqrt())
}

/// Runs every replicate in parallel and aggregates in replicate order, so the
/// report does not depend on the number of worker threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    cfg.validate()?;
    let spec = cfg.basis_spec()?;
    let s = setup(cfg, &spec)?;
    let reps: Vec<Replicate> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| replicate(cfg, &s, rep))
        .collect::<Result<_>>()?;

    let cells_per_rep = cfg.j1.len() * cfg.deltas.len();
    let mut acc = vec![[0.0f64; 4]; cells_per_rep];
    let mut clamped = 0;
    for r in &reps {
        clamped += r.clamped;
        for (a, &(rn, rt)) in acc.iter_mut().zip(&r.ratios) {
            a[0] += rn;
            a[1] += rn * rn;
            a[2] += rt;
            a[3] += rt * rt;
        }
    }
    if clamped > 0 {
        log::info!("{clamped} draws fell outside [0, 1] and were clamped");
    }

    let mut cells = Vec::with_capacity(cells_per_rep);
    let mut it = acc.iter();
    for (&j1, &denom) in cfg.j1.iter().zip(&s.denominators) {
        for &delta in &cfg.deltas {
            let a = it.next().expect("one accumulator per cell");
            let (mean_rn, se_rn) = mean_se(a[0], a[1], cfg.reps);
            let (mean_rtilde, se_rtilde) = mean_se(a[2], a[3], cfg.reps);
            cells.push(RiskCell {
                j1,
                delta,
                mean_rn,
                se_rn,
                mean_rtilde,
                se_rtilde,
                oracle_risk: denom,
            });
        }
    }
    let sigma_eps = match &s.noise {
        NoiseModel::Laplace { sigma } => Some(*sigma),
        _ => None,
    };
    Ok(RiskReport {
        config: cfg.clone(),
        spec,
        sigma_eps,
        cells,
        clamped,
        raw: cfg
            .keep_raw
            .then(|| reps.into_iter().map(|r| r.ratios).collect()),
    })
}

/// One row of the emitted report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub density: DensityKind,
    pub mode: Mode,
    pub n: usize,
    pub j1: u32,
    pub delta: f64,
    pub mean_rn: f64,
    pub se_rn: f64,
    pub mean_rtilde: f64,
    pub se_rtilde: f64,
    pub oracle_risk: f64,
    pub seed: u64,
    #[serde(rename = "M")]
    pub m: usize,
}

pub const CSV_COLUMNS: &str =
    "density,mode,n,j1,delta,mean_Rn,se_Rn,mean_Rtilde,se_Rtilde,oracle_risk,seed,M";

pub fn report_rows(report: &RiskReport) -> Vec<ReportRow> {
    let c = &report.config;
    report
        .cells
        .iter()
        .map(|cell| ReportRow {
            density: c.density,
            mode: c.mode,
            n: c.n,
            j1: cell.j1,
            delta: cell.delta,
            mean_rn: cell.mean_rn,
            se_rn: cell.se_rn,
            mean_rtilde: cell.mean_rtilde,
            se_rtilde: cell.se_rtilde,
            oracle_risk: cell.oracle_risk,
            seed: c.seed,
            m: c.reps,
        })
        .collect()
}

/// Header fields shared by every emitted file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub version: String,
    pub invocation: String,
    pub seed: u64,
    pub j0: u32,
    #[serde(rename = "J")]
    pub depth: u32,
    pub sigma_eps: Option<f64>,
    pub clamped: usize,
}

impl ReportMeta {
    pub fn new(report: &RiskReport, invocation: &str) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            invocation: invocation.to_string(),
            seed: report.config.seed,
            j0: report.spec.j0(),
            depth: report.spec.depth(),
            sigma_eps: report.sigma_eps,
            clamped: report.clamped,
        }
    }

    pub fn write_comment<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# meyer-density {}", self.version)?;
        writeln!(out, "# invocation: {}", self.invocation)?;
        writeln!(out, "# seed: {}", self.seed)?;
        write!(out, "# j0: {} J: {}", self.j0, self.depth)?;
        if let Some(s) = self.sigma_eps {
            write!(out, " sigma_eps: {s:.16e}")?;
        }
        writeln!(out, " clamped: {}", self.clamped)
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_csv<W: Write>(rows: &[ReportRow], meta: &ReportMeta, out: &mut W) -> std::io::Result<()> {
    meta.write_comment(out)?;
    writeln!(out, "{CSV_COLUMNS}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.density, r.mode, r.n, r.j1, r.delta, r.mean_rn, r.se_rn, r.mean_rtilde,
            r.se_rtilde, r.oracle_risk, r.seed, r.m
        )?;
    }
    Ok(())
}

/// Reads rows written by [`write_csv`], skipping `#` comments.
pub fn parse_csv<R: BufRead>(input: R, path: &Path) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != CSV_COLUMNS {
                return Err(err(format!("unexpected header '{line}'")));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(err(format!("expected 12 fields, found {}", f.len())));
        }
        fn p<V: FromStr>(s: &str, err: &dyn Fn(String) -> Error) -> Result<V> {
            s.parse().map_err(|_| err(format!("bad field '{s}'")))
        }
        rows.push(ReportRow {
            density: f[0].parse().map_err(|_| err(format!("bad density '{}'", f[0])))?,
            mode: f[1].parse().map_err(|_| err(format!("bad mode '{}'", f[1])))?,
            n: p(f[2], &err)?,
            j1: p(f[3], &err)?,
            delta: p(f[4], &err)?,
            mean_rn: p(f[5], &err)?,
            se_rn: p(f[6], &err)?,
            mean_rtilde: p(f[7], &err)?,
            se_rtilde: p(f[8], &err)?,
            oracle_risk: p(f[9], &err)?,
            seed: p(f[10], &err)?,
            m: p(f[11], &err)?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(BufReader::new(file), path)
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    meta: ReportMeta,
    rows: Vec<ReportRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    raw: Option<Vec<Vec<(f64, f64)>>>,
}

pub fn read_json(path: &Path) -> Result<(ReportMeta, Vec<ReportRow>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let r: JsonReport = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((r.meta, r.rows))
}

/// Path of the per-`j1` companion next to `csv`: `stem.j1-<j1>.csv`.
pub fn companion_path(csv: &Path, j1: u32) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    csv.with_file_name(format!("{stem}.j1-{j1}.csv"))
}

/// Writes the CSV report, one companion file per `j1`, and optionally the
/// JSON mirror. Returns every path written.
pub fn emit_report(
    report: &RiskReport,
    invocation: &str,
    csv: &Path,
    json: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let meta = ReportMeta::new(report, invocation);
    let rows = report_rows(report);
    let mut written = Vec::new();

    let mut out = create(csv)?;
    write_csv(&rows, &meta, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(csv, e))?;
    written.push(csv.to_path_buf());

    for &j1 in &report.config.j1 {
        let path = companion_path(csv, j1);
        let mut out = create(&path)?;
        let body = (|| -> std::io::Result<()> {
            meta.write_comment(&mut out)?;
            writeln!(out, "delta,mean_Rn,mean_Rtilde")?;
            for c in report.curve(j1) {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", c.delta, c.mean_rn, c.mean_rtilde)?;
            }
            out.flush()
        })();
        body.map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    if let Some(path) = json {
        let doc = JsonReport {
            meta,
            rows,
            raw: report.raw.clone(),
        };
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &doc).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        writeln!(out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))?;
        written.push(path.to_path_buf());
    }
    Ok(written)
}
