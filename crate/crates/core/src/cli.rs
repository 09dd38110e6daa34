//! Command-line front end. Every command reads a JSON [`RunConfig`], applies
//! the `--seed` and `--out` overrides, writes its artifacts plus the
//! effective config into the output directory, and reports through the exit
//! code: 0 on success (for `verify` and `limit-study`, only when every check
//! passes), 1 when a check fails, 2 on errors.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::mc_stats::{self, EnsembleConfig, SimulationOptions, DEFAULT_MAX_TOTAL_NEURONS};
use crate::numeric::dot;
use crate::oracle;
use crate::process::{sample_realization, Realization};
use crate::quadrature::CylinderQuadrature;
use crate::verify::{self, random_rotation, Mutation, Suite, VerdictReport, VerifyConfig};
use crate::weight_laws::WeightLaw;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used when neither the config nor `--seed` gives one.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// `[lo, hi]`, applied to every axis.
    pub bounds: [f64; 2],
    /// Points per axis.
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub n: usize,
    /// Empty means `x = e_1 / 2`.
    pub eval_points: Vec<Vec<f64>>,
    pub frequencies: Option<Vec<Vec<f64>>>,
    pub write_samples: bool,
    pub max_total_neurons: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            n: 1000,
            eval_points: Vec::new(),
            frequencies: None,
            write_samples: false,
            max_total_neurons: DEFAULT_MAX_TOTAL_NEURONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    /// Empty `points` and `pairs` together mean `x = e_1` and `(e_1, e_1)`.
    pub points: Vec<Vec<f64>>,
    pub pairs: Vec<[Vec<f64>; 2]>,
    pub n_rotations: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            points: Vec::new(),
            pairs: Vec::new(),
            n_rotations: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

/// The JSON document every command reads. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    pub law: WeightLaw,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_ladder: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    pub ensemble: EnsembleSection,
    pub oracle: OracleSection,
    /// Suites run by `verify` when `--suite` is absent; empty means all.
    pub suites: Vec<Suite>,
    pub verify: VerifyConfig,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: Domain::Box { half_width: 1.0, d: 2 },
            law: WeightLaw::Gaussian { std: 1.0 },
            lambda: None,
            lambda_ladder: None,
            seed: None,
            grid: None,
            ensemble: EnsembleSection::default(),
            oracle: OracleSection::default(),
            suites: Vec::new(),
            verify: VerifyConfig::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.law.validate()?;
        if self.lambda.is_some() && self.lambda_ladder.is_some() {
            return Err(Error::Config("give either lambda or lambda_ladder, not both".into()));
        }
        for &l in self.lambdas().iter() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda must be positive, got {l}")));
            }
        }
        if let Some(ladder) = &self.lambda_ladder {
            if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("lambda_ladder must be non-empty and strictly ascending".into()));
            }
        }
        if let Some(g) = &self.grid {
            if !(g.bounds[0] < g.bounds[1]) || g.resolution == 0 {
                return Err(Error::Config("grid needs bounds lo < hi and a positive resolution".into()));
            }
        }
        let d = self.domain.dim();
        let dims = self
            .ensemble
            .eval_points
            .iter()
            .chain(&self.oracle.points)
            .chain(self.oracle.pairs.iter().flatten());
        for x in dims {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
        }
        Ok(())
    }

    /// Rates to run: the ladder, the single rate, or 1.
    pub fn lambdas(&self) -> Vec<f64> {
        match (&self.lambda_ladder, self.lambda) {
            (Some(ladder), _) => ladder.clone(),
            (None, Some(l)) => vec![l],
            (None, None) => vec![1.0],
        }
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Suite settings with the run-level seed and ladder applied.
    pub fn effective_verify(&self) -> VerifyConfig {
        let mut v = self.verify.clone();
        if let Some(seed) = self.seed {
            v.reseed(seed);
        }
        if let Some(ladder) = &self.lambda_ladder {
            v.gaussian_limit.lambdas = ladder.clone();
            v.stable_limit.lambdas = ladder.clone();
        }
        v
    }
}

#[derive(Debug, Parser)]
#[command(name = "reluproc", version, about = "Sample, predict and verify random ReLU networks driven by Poisson noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Suite to run; repeat for several. Defaults to the config's list.
    #[arg(long, value_parser = parse_suite)]
    pub suite: Vec<Suite>,
    /// Negative control: h1, directions, hurst or variance.
    #[arg(long, value_parser = parse_mutation)]
    pub mutate: Option<Mutation>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample realizations and optionally evaluate them on a grid.
    Sample(CommonArgs),
    /// Closed-form and quadrature predictions with agreement diagnostics.
    Oracle(CommonArgs),
    /// Monte Carlo ensemble summary per rate.
    Ensemble(CommonArgs),
    /// Run verification suites; exit code 0 iff all pass.
    Verify(VerifyArgs),
    /// Run the two limit suites along the rate ladder.
    LimitStudy(VerifyArgs),
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mutation(s: &str) -> std::result::Result<Mutation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("effective_config.json"), cfg)?;
    Ok(dir)
}

/// File stem suffix for one rate of a ladder; empty for a single rate.
fn rate_suffix(cfg: &RunConfig, lambda: f64) -> String {
    if cfg.lambda_ladder.is_some() {
        format!("_lambda{lambda}")
    } else {
        String::new()
    }
}

/// Grid points in row-major order: the first coordinate varies slowest.
pub fn grid_points(grid: &GridConfig, d: usize) -> Vec<Vec<f64>> {
    let [lo, hi] = grid.bounds;
    let r = grid.resolution;
    let coord = |i: usize| if r == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (r - 1) as f64 };
    let total = r.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for k in (0..d).rev() {
                x[k] = coord(idx % r);
                idx /= r;
            }
            x
        })
        .collect()
}

/// Writes `x1,...,xd,s,grad_norm` rows for every grid point.
pub fn write_grid_csv<W: Write>(r: &Realization, grid: &GridConfig, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let header: Vec<String> = (1..=r.d).map(|i| format!("x{i}")).collect();
    writeln!(out, "{},s,grad_norm", header.join(","))?;
    for x in grid_points(grid, r.d) {
        let s = r.evaluate(&x);
        let g = r.gradient(&x);
        let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{},{},{}", coords.join(","), s, dot(&g, &g).sqrt())?;
    }
    out.flush()?;
    Ok(())
}

pub fn cmd_sample(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = prepare_out(cfg)?;
    let mut written = Vec::new();
    for (i, lambda) in cfg.lambdas().into_iter().enumerate() {
        let seed = mc_stats::seed_for(cfg.seed(), i as u64);
        let r = sample_realization(lambda, &cfg.law, &cfg.domain, seed)?;
        let suffix = rate_suffix(cfg, lambda);
        let path = dir.join(format!("realization{suffix}.json"));
        fs::write(&path, r.to_json()? + "\n")?;
        written.push(path);
        if let Some(grid) = &cfg.grid {
            let path = dir.join(format!("grid{suffix}.csv"));
            write_grid_csv(&r, grid, fs::File::create(&path)?)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub closed: f64,
    pub quadrature: f64,
    pub relative_difference: f64,
}

impl OracleValue {
    fn new(closed: f64, quadrature: f64) -> Self {
        let relative_difference = if closed == quadrature {
            0.0
        } else {
            (closed - quadrature).abs() / closed.abs().max(quadrature.abs())
        };
        OracleValue {
            closed,
            quadrature,
            relative_difference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOracle {
    pub x: Vec<f64>,
    pub mean: OracleValue,
    /// Cumulants of orders 1..=4 that are finite for the law.
    pub cumulants: Vec<(u32, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stable_limit_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOracle {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub autocovariance: OracleValue,
    /// Closed form at `(Ux, Uy)` for each rotation `U`.
    pub rotated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub lambda: f64,
    pub law: WeightLaw,
    pub d: usize,
    pub coeff_a: f64,
    pub radon_normalization: f64,
    pub points: Vec<PointOracle>,
    pub pairs: Vec<PairOracle>,
    pub rotations: Vec<Vec<Vec<f64>>>,
}

pub fn oracle_report(cfg: &RunConfig, lambda: f64) -> Result<OracleReport> {
    let d = cfg.domain.dim();
    let quad = CylinderQuadrature::with_default(d)?;
    let law = cfg.law;
    let (oracle_points, oracle_pairs) = if cfg.oracle.points.is_empty() && cfg.oracle.pairs.is_empty() {
        let e1: Vec<f64> = (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        (vec![e1.clone()], vec![[e1.clone(), e1]])
    } else {
        (cfg.oracle.points.clone(), cfg.oracle.pairs.clone())
    };
    let points = oracle_points
        .iter()
        .map(|x| {
            let mean = OracleValue::new(
                oracle::mean_closed(x, lambda, law.moments().mean)?,
                oracle::mean_pointwise(x, lambda, &law, &quad)?,
            );
            let cumulants = (1..=4)
                .filter(|&n| law.finite_moment(n).is_ok())
                .map(|n| Ok((n, oracle::cumulant_pointwise(n, x, lambda, &law, &quad)?)))
                .collect::<Result<Vec<_>>>()?;
            let stable_limit_scale = match law {
                WeightLaw::SAlphaS { alpha, scale } => Some(oracle::stable_marginal_scale(x, alpha, scale, &quad)?),
                _ => None,
            };
            Ok(PointOracle {
                x: x.clone(),
                mean,
                cumulants,
                stable_limit_scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let rotations: Vec<_> = (0..cfg.oracle.n_rotations).map(|_| random_rotation(d, &mut rng)).collect();
    let rotate = |u: &nalgebra::DMatrix<f64>, x: &[f64]| -> Vec<f64> {
        (0..d).map(|i| (0..d).map(|j| u[(i, j)] * x[j]).sum()).collect()
    };
    let pairs = if oracle_pairs.is_empty() {
        Vec::new()
    } else {
        let second = law.finite_moment(2)?;
        oracle_pairs
            .iter()
            .map(|[x, y]| {
                let autocovariance = OracleValue::new(
                    oracle::autocov_closed(x, y, lambda, second)?,
                    oracle::autocov_quadrature(x, y, lambda, second, &quad)?,
                );
                let rotated = rotations
                    .iter()
                    .map(|u| oracle::autocov_closed(&rotate(u, x), &rotate(u, y), lambda, second))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PairOracle {
                    x: x.clone(),
                    y: y.clone(),
                    autocovariance,
                    rotated,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(OracleReport {
        lambda,
        law,
        d,
        coeff_a: oracle::coeff_a(d)?,
        radon_normalization: oracle::radon_normalization(d)?,
        points,
        pairs,
        rotations: rotations
            .iter()
            .map(|u| (0..d).map(|i| (0..d).map(|j| u[(i, j)]).collect()).collect())
            .collect(),
    })
}

pub fn cmd_oracle(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = prepare_out(cfg)?;
    let reports = cfg
        .lambdas()
        .into_iter()
        .map(|l| oracle_report(cfg, l))
        .collect::<Result<Vec<_>>>()?;
    let path = dir.join("oracle.json");
    write_json(&path, &reports)?;
    Ok(vec![path])
}

pub fn ensemble_config(cfg: &RunConfig, lambda: f64, index: usize) -> EnsembleConfig {
    EnsembleConfig {
        lambda,
        law: cfg.law,
        domain: cfg.domain,
        n_realizations: cfg.ensemble.n,
        eval_points: if cfg.ensemble.eval_points.is_empty() {
            let d = cfg.domain.dim();
            vec![(0..d).map(|i| if i == 0 { 0.5 } else { 0.0 }).collect()]
        } else {
            cfg.ensemble.eval_points.clone()
        },
        cf_frequencies: cfg.ensemble.frequencies.clone(),
        master_seed: mc_stats::seed_for(cfg.seed(), index as u64),
        max_total_neurons: cfg.ensemble.max_total_neurons,
    }
}

pub fn cmd_ensemble(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = prepare_out(cfg)?;
    let mut written = Vec::new();
    for (i, lambda) in cfg.lambdas().into_iter().enumerate() {
        let ecfg = ensemble_config(cfg, lambda, i);
        let samples = mc_stats::simulate(
            &ecfg,
            SimulationOptions {
                parallel: true,
                ..Default::default()
            },
        )?;
        let summary = mc_stats::summarize(&ecfg, &samples)?;
        let suffix = rate_suffix(cfg, lambda);
        let path = dir.join(format!("ensemble{suffix}.json"));
        fs::write(&path, summary.to_json()? + "\n")?;
        written.push(path);
        if cfg.ensemble.write_samples {
            let path = dir.join(format!("samples{suffix}.csv"));
            samples.write_csv(BufWriter::new(fs::File::create(&path)?))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Runs `suites` and writes their reports to `file_name`. Returns the
/// reports and whether all passed.
pub fn run_suites(
    cfg: &RunConfig,
    suites: &[Suite],
    mutation: Option<Mutation>,
    file_name: &str,
) -> Result<(Vec<VerdictReport>, bool)> {
    let dir = prepare_out(cfg)?;
    let vcfg = cfg.effective_verify();
    let reports = suites
        .iter()
        .map(|&s| verify::run_suite(s, &vcfg, mutation))
        .collect::<Result<Vec<_>>>()?;
    let pass = reports.iter().all(|r| r.pass);
    write_json(&dir.join(file_name), &reports)?;
    Ok((reports, pass))
}

fn report_lines(reports: &[VerdictReport]) {
    for r in reports {
        for line in r.summary_lines() {
            println!("{line}");
        }
        for note in &r.notes {
            println!("  note [{}]: {note}", r.suite);
        }
        println!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.suite);
    }
}

fn exit_for(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sample(args) => {
            for p in cmd_sample(&load_config(&args)?)? {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle(args) => {
            for p in cmd_oracle(&load_config(&args)?)? {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ensemble(args) => {
            for p in cmd_ensemble(&load_config(&args)?)? {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let cfg = load_config(&args.common)?;
            let suites = if !args.suite.is_empty() {
                args.suite.clone()
            } else if !cfg.suites.is_empty() {
                cfg.suites.clone()
            } else {
                Suite::ALL.to_vec()
            };
            let (reports, pass) = run_suites(&cfg, &suites, args.mutate, "verify_report.json")?;
            report_lines(&reports);
            Ok(exit_for(pass))
        }
        Command::LimitStudy(args) => {
            let cfg = load_config(&args.common)?;
            let suites = if args.suite.is_empty() {
                vec![Suite::GaussianLimit, Suite::StableLimit]
            } else {
                args.suite.clone()
            };
            let (reports, pass) = run_suites(&cfg, &suites, args.mutate, "limit_study.json")?;
            report_lines(&reports);
            Ok(exit_for(pass))
        }
    }
}

/// Parses `args` and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
