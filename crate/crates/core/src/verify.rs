//! Verification suites. Each suite samples an ensemble, compares it with the
//! oracles and returns a [`VerdictReport`] whose overall verdict is the
//! conjunction of its checks.
//!
//! Monte Carlo equalities are accepted within 5 standard errors and
//! goodness-of-fit tests at significance 1e-3. The limit suites look at
//! finite-dimensional marginals only, which is weaker than convergence of
//! the process as a random generalized function.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Discrete, Normal, Poisson};

use crate::error::{Error, Result};
use crate::geometry::{measure_z, Direction, DirectionSampler, Domain};
use crate::mc_stats::{
    empirical_cf, k_statistics, ks_critical_1pct, ks_distance, ks_standard_error, mean_estimate, seed_for, simulate,
    EnsembleConfig, Estimate, SampleMatrix, SimulationOptions, DEFAULT_MAX_TOTAL_NEURONS,
};
use crate::numeric::dot;
use crate::oracle;
use crate::process::{sample_realization_with, Kernel, Neuron, SamplerOptions};
use crate::quadrature::CylinderQuadrature;
use crate::weight_laws::WeightLaw;

/// Tolerance in standard errors for Monte Carlo equalities.
pub const Z_TOLERANCE: f64 = 5.0;
/// Significance level of goodness-of-fit tests.
pub const GOF_SIGNIFICANCE: f64 = 1e-3;
/// Hurst exponent of the process.
pub const HURST: f64 = 1.5;
/// Hurst exponent asserted under the `hurst` mutation.
pub const MUTATED_HURST: f64 = 1.4;
/// Relative tolerance of the boundary identities, in units of `sum |v_k|`.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Deliberate defects that negative controls inject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// Offset `h1` in the correction kernel.
    H1,
    /// Draw neuron directions from a skewed law.
    Directions,
    /// Assert self-similarity with the wrong Hurst exponent.
    Hurst,
    /// Leave the weight variance unscaled along the Gaussian ladder.
    Variance,
}

impl Mutation {
    pub const ALL: [Mutation; 4] = [Mutation::H1, Mutation::Directions, Mutation::Hurst, Mutation::Variance];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::H1 => "h1",
            Mutation::Directions => "directions",
            Mutation::Hurst => "hurst",
            Mutation::Variance => "variance",
        }
    }

    fn sampler(mutation: Option<Mutation>) -> SamplerOptions {
        SamplerOptions {
            directions: if mutation == Some(Mutation::Directions) {
                DirectionSampler::Skewed
            } else {
                DirectionSampler::Uniform
            },
        }
    }

    fn kernel(mutation: Option<Mutation>) -> Kernel {
        if mutation == Some(Mutation::H1) {
            Kernel::PerturbedH1
        } else {
            Kernel::Exact
        }
    }

    fn simulation(mutation: Option<Mutation>) -> SimulationOptions {
        SimulationOptions {
            sampler: Mutation::sampler(mutation),
            kernel: Mutation::kernel(mutation),
            parallel: true,
        }
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mutation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mutation::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mutation '{s}' (expected h1, directions, hurst or variance)")))
    }
}

/// The named suites, in their default run order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Boundary,
    Width,
    SecondOrder,
    Isotropy,
    SelfSimilarity,
    NonGaussian,
    GaussianLimit,
    StableLimit,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Boundary,
        Suite::Width,
        Suite::SecondOrder,
        Suite::Isotropy,
        Suite::SelfSimilarity,
        Suite::NonGaussian,
        Suite::GaussianLimit,
        Suite::StableLimit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Boundary => "boundary",
            Suite::Width => "width",
            Suite::SecondOrder => "second-order",
            Suite::Isotropy => "isotropy",
            Suite::SelfSimilarity => "self-similarity",
            Suite::NonGaussian => "non-gaussian",
            Suite::GaussianLimit => "gaussian-limit",
            Suite::StableLimit => "stable-limit",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

/// One pass/fail record: `statistic <= bound` or `statistic >= bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub description: String,
    pub statistic: f64,
    pub comparison: Comparison,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(description: impl Into<String>, statistic: f64, bound: f64) -> Self {
        Check {
            description: description.into(),
            statistic,
            comparison: Comparison::AtMost,
            bound,
            pass: statistic <= bound,
        }
    }

    pub fn at_least(description: impl Into<String>, statistic: f64, bound: f64) -> Self {
        Check {
            description: description.into(),
            statistic,
            comparison: Comparison::AtLeast,
            bound,
            pass: statistic >= bound,
        }
    }
}

/// A per-rate statistic of a limit suite, for convergence plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub lambda: f64,
    pub statistic: f64,
    pub se: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub suite: Suite,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<SeriesPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub mutation: Option<Mutation>,
    pub config: serde_json::Value,
}

impl VerdictReport {
    fn new<C: Serialize>(suite: Suite, config: &C, mutation: Option<Mutation>) -> Result<Self> {
        Ok(VerdictReport {
            suite,
            pass: true,
            checks: Vec::new(),
            series: Vec::new(),
            notes: Vec::new(),
            mutation,
            config: serde_json::to_value(config)?,
        })
    }

    fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    fn ignore_mutation(&mut self, mutation: Option<Mutation>, relevant: &[Mutation]) {
        if let Some(m) = mutation {
            if !relevant.contains(&m) {
                self.note(format!("mutation '{m}' does not affect this suite"));
            }
        }
    }

    /// One line per check, prefixed by PASS or FAIL.
    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let op = match c.comparison {
                    Comparison::AtMost => "<=",
                    Comparison::AtLeast => ">=",
                };
                format!(
                    "{} [{}] {}: {:.6e} {} {:.6e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    self.suite,
                    c.description,
                    c.statistic,
                    op,
                    c.bound
                )
            })
            .collect()
    }
}

fn unit_ball2() -> Domain {
    Domain::Ball { radius: 1.0, d: 2 }
}

fn two_point1() -> WeightLaw {
    WeightLaw::TwoPoint { value: 1.0 }
}

fn e1(d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = 1.0;
    x
}

/// Uniform point in the ball of the given radius.
fn random_point_in_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = dot(&g, &g).sqrt();
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    g.iter().map(|c| c * r / n).collect()
}

fn random_pairs(n: usize, d: usize, radius: f64, seed: u64) -> Vec<[Vec<f64>; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [random_point_in_ball(&mut rng, d, radius), random_point_in_ball(&mut rng, d, radius)])
        .collect()
}

/// Haar-distributed rotation of R^d (determinant +1) from the QR
/// decomposition of a Gaussian matrix.
pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

fn rotate(u: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..x.len()).map(|i| (0..x.len()).map(|j| u[(i, j)] * x[j]).sum()).collect()
}

fn ensemble(
    lambda: f64,
    law: WeightLaw,
    domain: Domain,
    n: usize,
    points: Vec<Vec<f64>>,
    master_seed: u64,
    mutation: Option<Mutation>,
) -> Result<SampleMatrix> {
    let cfg = EnsembleConfig {
        lambda,
        law,
        domain,
        n_realizations: n,
        eval_points: points,
        cf_frequencies: None,
        master_seed,
        max_total_neurons: DEFAULT_MAX_TOTAL_NEURONS,
    };
    simulate(&cfg, Mutation::simulation(mutation))
}

/// Mean of per-realization terms with its standard error; exact zero when
/// every term vanishes.
fn paired(terms: &[f64]) -> Result<Estimate> {
    mean_estimate(terms)
}

fn z_of(e: Estimate, target: f64) -> f64 {
    e.z_score(target)
}

fn centered_products(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let scale = n / (n - 1.0);
    a.iter().zip(b).map(|(x, y)| scale * (x - ma) * (y - mb)).collect()
}

// ---------------------------------------------------------------- boundary

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub n_realizations: usize,
    pub lambda: f64,
    pub law: WeightLaw,
    pub domain: Domain,
    /// Append a neuron whose threshold passes through the origin.
    pub inject_origin_threshold: bool,
    pub master_seed: u64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            n_realizations: 1000,
            lambda: 10.0,
            law: WeightLaw::Gaussian { std: 1.0 },
            domain: unit_ball2(),
            inject_origin_threshold: true,
            master_seed: 1,
        }
    }
}

/// `s(0) = 0` and `grad s(0) = 0` up to rounding, on every realization.
pub fn check_boundary(cfg: &BoundaryConfig, mutation: Option<Mutation>) -> Result<VerdictReport> {
    let mut report = VerdictReport::new(Suite::Boundary, cfg, mutation)?;
    report.ignore_mutation(mutation, &[Mutation::H1, Mutation::Directions]);
    let kernel = Mutation::kernel(mutation);
    let d = cfg.domain.dim();
    let origin = vec![0.0; d];
    let (mut worst_value, mut worst_grad) = (0.0f64, 0.0f64);
    for i in 0..cfg.n_realizations {
        let seed = seed_for(cfg.master_seed, i as u64);
        let mut r = sample_realization_with(cfg.lambda, &cfg.law, &cfg.domain, seed, Mutation::sampler(mutation))?;
        if cfg.inject_origin_threshold {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5A5A_5A5A_5A5A_5A5A);
            let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            r.neurons.push(Neuron {
                v: 1.0,
                u: Direction::new(&g)?,
                b: 0.0,
            });
        }
        let scale = r.abs_weight_sum();
        let ratio = |v: f64| {
            if v == 0.0 {
                0.0
            } else if scale == 0.0 {
                f64::INFINITY
            } else {
                v / scale
            }
        };
        worst_value = worst_value.max(ratio(r.evaluate_with(&origin, kernel).abs()));
        let g = r.gradient_with(&origin, kernel);
        worst_grad = worst_grad.max(ratio(dot(&g, &g).sqrt()));
    }
    report.push(Check::at_most("max |s(0)| / sum |v_k|", worst_value, BOUNDARY_TOLERANCE));
    report.push(Check::at_most("max |grad s(0)| / sum |v_k|", worst_grad, BOUNDARY_TOLERANCE));
    Ok(report)
}

// ---------------------------------------------------------------- width

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WidthConfig {
    pub n_realizations: usize,
    pub lambda: f64,
    pub domain: Domain,
    pub master_seed: u64,
}

impl Default for WidthConfig {
    fn default() -> Self {
        WidthConfig {
            n_realizations: 10_000,
            lambda: 100.0,
            domain: unit_ball2(),
            master_seed: 2,
        }
    }
}

/// Pearson statistic of `widths` against Poisson(`mean`) with bins of
/// expected count at least 5. Returns `(statistic, degrees of freedom)`.
pub fn poisson_chi_square(widths: &[usize], mean: f64) -> Result<(f64, usize)> {
    let pois = Poisson::new(mean).map_err(|e| Error::InvalidParameter(format!("Poisson mean {mean}: {e}")))?;
    let n = widths.len() as f64;
    // Upper edges (inclusive) of all bins but the last, which is open.
    let mut edges = Vec::new();
    let mut acc = 0.0;
    let mut k = 0u64;
    while n * pois.sf(k) >= 5.0 {
        acc += pois.pmf(k);
        if n * acc >= 5.0 {
            edges.push(k);
            acc = 0.0;
        }
        k += 1;
    }
    // The open tail holds fewer than 5 expected counts: merge it into the
    // last closed bin.
    edges.pop();
    let bins = edges.len() + 1;
    let mut observed = vec![0usize; bins];
    for &w in widths {
        let b = edges.partition_point(|&e| e < w as u64);
        observed[b] += 1;
    }
    let mut stat = 0.0;
    let mut lo = 0u64;
    for (b, &obs) in observed.iter().enumerate() {
        let p = if b < edges.len() {
            let hi = edges[b];
            let p = pois.cdf(hi) - if lo == 0 { 0.0 } else { pois.cdf(lo - 1) };
            lo = hi + 1;
            p
        } else if lo == 0 {
            1.0
        } else {
            pois.sf(lo - 1)
        };
        let e = n * p;
        stat += (obs as f64 - e).powi(2) / e;
    }
    Ok((stat, bins - 1))
}

/// Widths are Poisson with mean `lambda |Z|`.
pub fn check_width(cfg: &WidthConfig, mutation: Option<Mutation>) -> Result<VerdictReport> {
    let mut report = VerdictReport::new(Suite::Width, cfg, mutation)?;
    report.ignore_mutation(mutation, &[]);
    let d = cfg.domain.dim();
    let samples = ensemble(
        cfg.lambda,
        two_point1(),
        cfg.domain,
        cfg.n_realizations,
        vec![vec![0.0; d]],
        cfg.master_seed,
        None,
    )?;
    let mean = cfg.lambda * measure_z(&cfg.domain)?;
    let n = samples.widths.len() as f64;
    let observed_mean = samples.widths.iter().map(|&w| w as f64).sum::<f64>() / n;
    let sigma = (mean / n).sqrt();
    report.push(Check::at_most(
        format!("mean width {observed_mean:.4} vs {mean:.4}, |z|"),
        (observed_mean - mean).abs() / sigma,
        Z_TOLERANCE,
    ));
    let (stat, df) = poisson_chi_square(&samples.widths, mean)?;
    if df == 0 {
        report.note("all expected mass in one bin; chi-square test skipped");
    } else {
        let chi = ChiSquared::new(df as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let p = chi.sf(stat);
        report.push(Check::at_least(format!("chi-square p-value ({df} dof, statistic {stat:.3})"), p, GOF_SIGNIFICANCE));
    }
    let zeros = samples.widths.iter().filter(|&&w| w == 0).count();
    report.note(format!("{zeros} of {} realizations have width 0 (expected {:.3e})", samples.widths.len(), n * (-mean).exp()));
    Ok(report)
}

// ---------------------------------------------------------------- second order

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecondOrderConfig {
    pub n_realizations: usize,
    pub lambda: f64,
    pub law: WeightLaw,
    pub domain: Domain,
    pub pairs: Vec<[Vec<f64>; 2]>,
    pub master_seed: u64,
}

impl Default for SecondOrderConfig {
    fn default() -> Self {
        SecondOrderConfig {
            n_realizations: 100_000,
            lambda: 5.0,
            law: two_point1(),
            domain: unit_ball2(),
            pairs: random_pairs(10, 2, 1.0, 31),
            master_seed: 3,
        }
    }
}

/// Empirical covariances match the closed form, and the closed form matches
/// its quadrature.
pub fn check_second_order(cfg: &SecondOrderConfig, mutation: Option<Mutation>) -> Result<VerdictReport> {
    let mut report = VerdictReport::new(Suite::SecondOrder, cfg, mutation)?;
    report.ignore_mutation(mutation, &[Mutation::H1, Mutation::Directions]);
    let second = cfg.law.finite_moment(2)?;
    let quad = CylinderQuadrature::with_default(cfg.domain.dim())?;
    let points: Vec<Vec<f64>> = cfg.pairs.iter().flat_map(|p| p.iter().cloned()).collect();
    let samples = ensemble(cfg.lambda, cfg.law, cfg.domain, cfg.n_realizations, points, cfg.master_seed, mutation)?;
    for (i, [x, y]) in cfg.pairs.iter().enumerate() {
        let closed = oracle::autocov_closed(x, y, cfg.lambda, second)?;
        let quadrature = oracle::autocov_quadrature(x, y, cfg.lambda, second, &quad)?;
        let rel = if closed == quadrature { 0.0 } else { (closed - quadrature).abs() / closed.abs().max(quadrature.abs()) };
        report.push(Check::at_most(format!("pair {i}: closed form vs quadrature, relative"), rel, 1e-6));
        let prods = centered_products(&samples.column(2 * i), &samples.column(2 * i + 1));
        let emp = paired(&prods)?;
        report.push(Check::at_most(
            format!("pair {i}: empirical C = {:.6} vs {closed:.6}, |z|", emp.value),
            z_of(emp, closed),
            Z_TOLERANCE,
        ));
    }
    Ok(report)
}

// ---------------------------------------------------------------- isotropy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsotropyConfig {
    pub n_realizations: usize,
    pub lambda: f64,
    pub law: WeightLaw,
    pub domain: Domain,
    pub points: Vec<Vec<f64>>,
    pub n_rotations: usize,
    /// Joint frequencies, one entry per point each. Empty means
    /// `n_frequencies` random ones scaled by the predicted standard deviations.
    pub frequencies: Vec<Vec<f64>>,
    pub n_frequencies: usize,
    pub master_seed: u64,
}

impl Default for IsotropyConfig {
    fn default() -> Self {
        IsotropyConfig {
            n_realizations: 100_000,
            lambda: 5.0,
            law: two_point1(),
            domain: unit_ball2(),
            points: vec![vec![0.8, 0.1], vec![-0.2, 0.5], vec![0.3, -0.6]],
            n_rotations: 3,
            frequencies: Vec::new(),
            n_frequencies: 8,
            master_seed: 4,
        }
    }
}

fn isotropy_frequencies(cfg: &IsotropyConfig) -> Result<Vec<Vec<f64>>> {
    if !cfg.frequencies.is_empty() {
        return Ok(cfg.frequencies.clone());
    }
    let m = cfg.points.len();
    let sds: Vec<f64> = match cfg.law.finite_moment(2) {
        Ok(second) => cfg
            .points
            .iter()
            .map(|x| oracle::autocov_closed(x, x, cfg.lambda, second).map(|v| v.sqrt().max(1e-12)))
            .collect::<Result<_>>()?,
        Err(_) => vec![1.0; m],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed ^ 0xF00D);
    Ok((0..cfg.n_frequencies)
        .map(|_| {
            sds.iter()
                .map(|sd| rng.random_range(-1.5..1.5) / (sd * (m as f64).sqrt()))
                .collect()
        })
        .collect())
}

/// Checks isotropy against explicit rotation matrices.
pub fn check_isotropy_with(
    cfg: &IsotropyConfig,
    rotations: &[DMatrix<f64>],
    mutation: Option<Mutation>,
) -> Result<VerdictReport> {
    let mut report = VerdictReport::new(Suite::Isotropy, cfg, mutation)?;
    report.ignore_mutation(mutation, &[Mutation::Directions, Mutation::H1]);
    let d = cfg.domain.dim();
    let m = cfg.points.len();
    if m == 0 {
        return Err(Error::Config("isotropy needs at least one point".into()));
    }
    let freqs = isotropy_frequencies(cfg)?;
    let mut all_points = cfg.points.clone();
    for u in rotations {
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: u.nrows() });
        }
        all_points.extend(cfg.points.iter().map(|x| rotate(u, x)));
    }

    if let Ok(second) = cfg.law.finite_moment(2) {
        let mut worst = 0.0f64;
        for u in rotations {
            for x in &cfg.points {
                for y in &cfg.points {
                    let c = oracle::autocov_closed(x, y, cfg.lambda, second)?;
                    let cr = oracle::autocov_closed(&rotate(u, x), &rotate(u, y), cfg.lambda, second)?;
                    if c != cr {
                        worst = worst.max((c - cr).abs() / c.abs().max(cr.abs()));
                    }
                }
            }
        }
        report.push(Check::at_most("closed-form covariance under rotation, max relative change", worst, 1e-12));
    }

    let samples = ensemble(cfg.lambda, cfg.law, cfg.domain, cfg.n_realizations, all_points, cfg.master_seed, mutation)?;
    for (r, _) in rotations.iter().enumerate() {
        let off = (r + 1) * m;
        let mut worst = 0.0f64;
        for xi in &freqs {
            let (mut re, mut im) = (Vec::with_capacity(samples.n_realizations()), Vec::with_capacity(samples.n_realizations()));
            for row in samples.rows() {
                let a: f64 = dot(&row[..m], xi);
                let b: f64 = dot(&row[off..off + m], xi);
                re.push(a.cos() - b.cos());
                im.push(a.sin() - b.sin());
            }
            let (re, im) = (paired(&re)?, paired(&im)?);
            worst = worst.max(z_of(re, 0.0)).max(z_of(im, 0.0));
        }
        report.push(Check::at_most(
            format!("rotation {r}: joint CF difference over {} frequencies, max |z|", freqs.len()),
            worst,
            Z_TOLERANCE,
        ));
    }
    Ok(report)
}

/// Checks isotropy against `n_rotations` Haar-random rotations.
pub fn check_isotropy(cfg: &IsotropyConfig, mutation: Option<Mutation>) -> Result<VerdictReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed ^ 0xBEEF);
    let rotations: Vec<_> = (0..cfg.n_rotations).map(|_| random_rotation(cfg.domain.dim(), &mut rng)).collect();
    check_isotropy_with(cfg, &rotations, mutation)
}

// ---------------------------------------------------------------- self-similarity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfSimilarityConfig {
    pub n_realizations: usize,
    pub lambda: f64,
    pub law: WeightLaw,
    pub domain: Domain,
    pub pairs: Vec<[Vec<f64>; 2]>,
    pub scales: Vec<f64>,
    pub master_seed: u64,
}

impl Default for SelfSimilarityConfig {
    fn default() -> Self {
        SelfSimilarityConfig {
            n_realizations: 100_000,
            lambda: 5.0,
            law: two_point1(),
            domain: unit_ball2(),
            pairs: random_pairs(4, 2, 0.5, 51),
            scales: vec![0.5, 2.0, 10.0],
            master_seed: 5,
        }
    }
}

/// `a^{2H} C(x/a, y/a) = C(x, y)` with `H = 3/2`, in closed form and
/// empirically.
pub fn check_self_similarity(cfg: &SelfSimilarityConfig, mutation: Option<Mutation>) -> Result<VerdictReport> {
    let mut report = VerdictReport::new(Suite::SelfSimilarity, cfg, mutation)?;
    report.ignore_mutation(mutation, &[Mutation::Hurst, Mutation::H1, Mutation::Directions]);
    let moments = cfg.law.moments();
    if moments.mean != 0.0 || !moments.second.is_finite() {
        return Err(Error::InadmissibleLaw(format!(
            "self-similarity needs a zero-mean law with finite variance, got {}",
            cfg.law.name()
        )));
    }
    let hurst = if mutation == Some(Mutation::Hurst) { MUTATED_HURST } else { HURST };
    let second = moments.second;

    let mut points = Vec::new();
    for [x, y] in &cfg.pairs {
        points.push(x.clone());
        points.push(y.clone());
        for &a in &cfg.scales {
            points.push(x.iter().map(|c| c / a).collect());
            points.push(y.iter().map(|c| c / a).collect());
        }
    }
    let per_pair = 2 + 2 * cfg.scales.len();

    let mut worst = 0.0f64;
    for [x, y] in &cfg.pairs {
        let c = oracle::autocov_closed(x, y, cfg.lambda, second)?;
        for &a in &cfg.scales {
            let xa: Vec<f64> = x.iter().map(|v| v / a).collect();
            let ya: Vec<f64> = y.iter().map(|v| v / a).collect();
            let ca = a.powf(2.0 * hurst) * oracle::autocov_closed(&xa, &ya, cfg.lambda, second)?;
            if ca != c {
                worst = worst.max((ca - c).abs() / c.abs().max(ca.abs()));
            }
        }
    }
    report.push(Check::at_most(
        format!("closed form: a^{} C(x/a, y/a) vs C(x, y), max relative", 2.0 * hurst),
        worst,
        1e-12,
    ));

    let samples = ensemble(cfg.lambda, cfg.law, cfg.domain, cfg.n_realizations, points, cfg.master_seed, mutation)?;
    for (p, _) in cfg.pairs.iter().enumerate() {
        let base = p * per_pair;
        let c = centered_products(&samples.column(base), &samples.column(base + 1));
        for (k, &a) in cfg.scales.iter().enumerate() {
            let ca = centered_products(&samples.column(base + 2 + 2 * k), &samples.column(base + 3 + 2 * k));
            let w = a.powf(2.0 * hurst);
            let diff: Vec<f64> = ca.iter().zip(&c).map(|(s, t)| w * s - t).collect();
            let e = paired(&diff)?;
            report.push(Check::at_most(
                format!("pair {p}, a = {a}: empirical a^{} C(x/a, y/a) - C(x, y), |z|", 2.0 * hurst),
                z_of(e, 0.0),
                Z_TOLERANCE,
            ));
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------- non-Gaussianity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonGaussianConfig {
    pub n_realizations: usize,
    pub lambda: f64,
    pub law: WeightLaw,
    pub domain: Domain,
    pub point: Vec<f64>,
    pub master_seed: u64,
}

impl Default for NonGaussianConfig {
    fn default() -> Self {
        NonGaussianConfig {
            n_realizations: 1_000_000,
            lambda: 1.0,
            law: two_point1(),
            domain: unit_ball2(),
            point: e1(2),
            master_seed: 6,
        }
    }
}

/// The fourth cumulant of `s(x)` matches `lambda E[V^4] ∬ k^4` and is
/// distinguishable from the Gaussian value 0.
pub fn check_non_gaussian(cfg: &NonGaussianConfig, mutation: Option<Mutation>) -> Result<VerdictReport> {
    let mut report = VerdictReport::new(Suite::NonGaussian, cfg, mutation)?;
    report.ignore_mutation(mutation, &[Mutation::H1, Mutation::Directions]);
    let quad = CylinderQuadrature::with_default(cfg.domain.dim())?;
    let predicted = oracle::cumulant_pointwise(4, &cfg.point, cfg.lambda, &cfg.law, &quad)?;
    if cfg.point.iter().all(|&c| c == 0.0) {
        report.note("x = 0: s(x) = 0 and the fourth cumulant vanishes; point skipped");
        return Ok(report);
    }
    let samples = ensemble(
        cfg.lambda,
        cfg.law,
        cfg.domain,
        cfg.n_realizations,
        vec![cfg.point.clone()],
        cfg.master_seed,
        mutation,
    )?;
    let k = k_statistics(&samples.column(0))?;
    report.push(Check::at_most(
        format!("k4 = {:.6} vs predicted {predicted:.6}, |z|", k.k4.value),
        k.k4.z_score(predicted),
        Z_TOLERANCE,
    ));
    report.push(Check::at_least("k4 vs Gaussian value 0, |z|", k.k4.z_score(0.0), Z_TOLERANCE));
    let k2 = oracle::cumulant_pointwise(2, &cfg.point, cfg.lambda, &cfg.law, &quad)?;
    report.note(format!(
        "predicted k4 / k2^2 = {:.4e}; it scales like 1/lambda under variance-preserving rescaling",
        predicted / (k2 * k2)
    ));
    Ok(report)
}

// ---------------------------------------------------------------- Gaussian limit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianLimitConfig {
    pub n_realizations: usize,
    pub lambdas: Vec<f64>,
    /// Limit scale: weights are `SaS(2, b / sqrt(lambda))`.
    pub b: f64,
    pub domain: Domain,
    pub point: Vec<f64>,
    pub master_seed: u64,
}

impl Default for GaussianLimitConfig {
    fn default() -> Self {
        GaussianLimitConfig {
            n_realizations: 10_000,
            lambdas: vec![1.0, 10.0, 100.0, 1000.0],
            b: 1.0,
            domain: unit_ball2(),
            point: e1(2),
            master_seed: 7,
        }
    }
}

/// Along an ascending rate ladder with variance-preserving weights, the KS
/// distance of `s(x)` to the limiting normal law decreases and ends below
/// the 1% Kolmogorov threshold.
pub fn check_gaussian_limit(cfg: &GaussianLimitConfig, mutation: Option<Mutation>) -> Result<VerdictReport> {
    let mut report = VerdictReport::new(Suite::GaussianLimit, cfg, mutation)?;
    report.ignore_mutation(mutation, &[Mutation::Variance, Mutation::H1, Mutation::Directions]);
    if cfg.lambdas.is_empty() || cfg.lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("lambdas must be non-empty and strictly ascending".into()));
    }
    let quad = CylinderQuadrature::with_default(cfg.domain.dim())?;
    let scale = oracle::stable_marginal_scale(&cfg.point, 2.0, 1.0, &quad)?;
    let sd = (2.0f64).sqrt() * cfg.b * scale;
    let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let se = ks_standard_error(cfg.n_realizations);
    let threshold = ks_critical_1pct(cfg.n_realizations);
    let mut ks_values = Vec::new();
    for (i, &lambda) in cfg.lambdas.iter().enumerate() {
        let weight_scale = if mutation == Some(Mutation::Variance) { cfg.b } else { cfg.b / lambda.sqrt() };
        let law = WeightLaw::stable(2.0, weight_scale)?;
        let samples = ensemble(
            lambda,
            law,
            cfg.domain,
            cfg.n_realizations,
            vec![cfg.point.clone()],
            cfg.master_seed.wrapping_add(i as u64),
            mutation,
        )?;
        let ks = ks_distance(&samples.column(0), |v| normal.cdf(v));
        report.series.push(SeriesPoint {
            lambda,
            statistic: ks,
            se,
            threshold,
        });
        ks_values.push(ks);
    }
    for (w, l) in ks_values.windows(2).zip(cfg.lambdas.windows(2)) {
        report.push(Check::at_most(
            format!("KS increase from lambda = {} to {} (2 SE = {:.4})", l[0], l[1], 2.0 * se),
            w[1] - w[0],
            2.0 * se,
        ));
    }
    report.push(Check::at_most(
        format!("KS at lambda = {} vs 1% Kolmogorov threshold", cfg.lambdas.last().unwrap()),
        *ks_values.last().unwrap(),
        threshold,
    ));
    report.note(format!("predicted limit law N(0, {:.6})", sd * sd));
    report.note("convergence is checked for the marginal at one point only");
    Ok(report)
}

// ---------------------------------------------------------------- stable limit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StableLimitConfig {
    pub n_realizations: usize,
    pub alpha: f64,
    pub lambdas: Vec<f64>,
    /// Limit scale: weights are `SaS(alpha, b lambda^{-1/alpha})`.
    pub b: f64,
    pub domain: Domain,
    pub point: Vec<f64>,
    /// Second point for the joint check at the largest rate.
    pub joint_point: Vec<f64>,
    pub n_frequencies: usize,
    pub master_seed: u64,
}

impl Default for StableLimitConfig {
    fn default() -> Self {
        StableLimitConfig {
            n_realizations: 100_000,
            alpha: 1.25,
            lambdas: vec![1000.0],
            b: 1.0,
            domain: unit_ball2(),
            point: e1(2),
            joint_point: vec![0.0, 0.5],
            n_frequencies: 10,
            master_seed: 8,
        }
    }
}

/// Frequencies with `(scale * xi)^alpha` evenly spread over [0.1, 2].
fn stable_frequencies(scale: f64, alpha: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let y = if n == 1 { 1.0 } else { 0.1 + 1.9 * k as f64 / (n - 1) as f64 };
            y.powf(1.0 / alpha) / scale
        })
        .collect()
}

/// At the largest rate, the empirical CF of `s(x)` matches the stable limit:
/// the slope of `log |CF|` against `|xi|^alpha` is `-scale^alpha` within 5%,
/// the CF agrees at each frequency within 5 SE, and so does a two-point
/// joint CF.
pub fn check_stable_limit(cfg: &StableLimitConfig, mutation: Option<Mutation>) -> Result<VerdictReport> {
    let mut report = VerdictReport::new(Suite::StableLimit, cfg, mutation)?;
    report.ignore_mutation(mutation, &[Mutation::H1, Mutation::Directions]);
    if cfg.lambdas.is_empty() || cfg.lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("lambdas must be non-empty and strictly ascending".into()));
    }
    if cfg.n_frequencies < 2 {
        return Err(Error::Config("stable-limit needs at least two frequencies".into()));
    }
    let quad = CylinderQuadrature::with_default(cfg.domain.dim())?;
    let alpha = cfg.alpha;
    let scale = oracle::stable_marginal_scale(&cfg.point, alpha, cfg.b, &quad)?;
    let freqs = stable_frequencies(scale, alpha, cfg.n_frequencies);
    let predicted = |xi: f64| (-(scale * xi.abs()).powf(alpha)).exp();
    let pts = vec![cfg.point.clone(), cfg.joint_point.clone()];
    let joint_freqs: Vec<[f64; 2]> = vec![[0.5, 0.5], [1.0, -1.0], [-0.7, 1.5], [1.2, 2.0]];
    let joint_scale = oracle::stable_marginal_scale(&cfg.joint_point, alpha, cfg.b, &quad)?;
    let joint_freqs: Vec<[f64; 2]> = joint_freqs.iter().map(|f| [f[0] / scale, f[1] / joint_scale]).collect();

    let last = cfg.lambdas.len() - 1;
    for (i, &lambda) in cfg.lambdas.iter().enumerate() {
        let law = WeightLaw::stable(alpha, cfg.b * lambda.powf(-1.0 / alpha))?;
        let samples = ensemble(
            lambda,
            law,
            cfg.domain,
            cfg.n_realizations,
            pts.clone(),
            cfg.master_seed.wrapping_add(i as u64),
            mutation,
        )?;
        let marginal: Vec<[f64; 1]> = samples.column(0).iter().map(|&v| [v]).collect();
        let cfs = freqs
            .iter()
            .map(|&xi| empirical_cf(marginal.iter().map(|r| r.as_slice()), &[xi]))
            .collect::<Result<Vec<_>>>()?;
        let (dist, dist_se) = cfs
            .iter()
            .zip(&freqs)
            .map(|(c, &xi)| ((c.value - Complex64::new(predicted(xi), 0.0)).norm(), c.se()))
            .fold((0.0f64, 0.0f64), |(d, s), (di, si)| if di > d { (di, si) } else { (d, s) });
        report.series.push(SeriesPoint {
            lambda,
            statistic: dist,
            se: dist_se,
            threshold: Z_TOLERANCE * dist_se,
        });
        if i != last {
            continue;
        }

        // Least squares through the origin of log|CF| on |xi|^alpha.
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (c, &xi) in cfs.iter().zip(&freqs) {
            let x = xi.abs().powf(alpha);
            sxy += x * c.value.norm().ln();
            sxx += x * x;
        }
        let slope = sxy / sxx;
        let target = -scale.powf(alpha);
        report.push(Check::at_most(
            format!("log|CF| slope {slope:.6} vs {target:.6}, relative error"),
            (slope / target - 1.0).abs(),
            0.05,
        ));
        let worst = cfs
            .iter()
            .zip(&freqs)
            .map(|(c, &xi)| c.z_score(Complex64::new(predicted(xi), 0.0)))
            .fold(0.0, f64::max);
        report.push(Check::at_most(
            format!("marginal CF at {} frequencies, max |z|", freqs.len()),
            worst,
            Z_TOLERANCE,
        ));
        let mut worst_joint = 0.0f64;
        for xi in &joint_freqs {
            let want = oracle::stable_limit_cf(&pts, xi, alpha, cfg.b, &quad)?;
            let got = empirical_cf(samples.rows(), xi)?;
            worst_joint = worst_joint.max(got.z_score(Complex64::new(want, 0.0)));
        }
        report.push(Check::at_most(
            format!("two-point joint CF at {} frequencies, max |z|", joint_freqs.len()),
            worst_joint,
            Z_TOLERANCE,
        ));
    }
    report.note(format!("predicted limit scale at x: {scale:.6}"));
    report.note("convergence is checked for one- and two-point marginals only");
    Ok(report)
}

// ---------------------------------------------------------------- all suites

/// Settings for every suite; missing sections take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub boundary: BoundaryConfig,
    pub width: WidthConfig,
    pub second_order: SecondOrderConfig,
    pub isotropy: IsotropyConfig,
    pub self_similarity: SelfSimilarityConfig,
    pub non_gaussian: NonGaussianConfig,
    pub gaussian_limit: GaussianLimitConfig,
    pub stable_limit: StableLimitConfig,
}

impl VerifyConfig {
    /// Replaces every suite's master seed with one derived from `seed`.
    pub fn reseed(&mut self, seed: u64) {
        let s = |k: u64| seed_for(seed, k);
        self.boundary.master_seed = s(0);
        self.width.master_seed = s(1);
        self.second_order.master_seed = s(2);
        self.isotropy.master_seed = s(3);
        self.self_similarity.master_seed = s(4);
        self.non_gaussian.master_seed = s(5);
        self.gaussian_limit.master_seed = s(6);
        self.stable_limit.master_seed = s(7);
    }
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig, mutation: Option<Mutation>) -> Result<VerdictReport> {
    match suite {
        Suite::Boundary => check_boundary(&cfg.boundary, mutation),
        Suite::Width => check_width(&cfg.width, mutation),
        Suite::SecondOrder => check_second_order(&cfg.second_order, mutation),
        Suite::Isotropy => check_isotropy(&cfg.isotropy, mutation),
        Suite::SelfSimilarity => check_self_similarity(&cfg.self_similarity, mutation),
        Suite::NonGaussian => check_non_gaussian(&cfg.non_gaussian, mutation),
        Suite::GaussianLimit => check_gaussian_limit(&cfg.gaussian_limit, mutation),
        Suite::StableLimit => check_stable_limit(&cfg.stable_limit, mutation),
    }
}
