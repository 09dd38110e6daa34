//! Monte Carlo ensembles of realizations and the estimators run on them:
//! means and covariances with standard errors, empirical characteristic
//! functions, k-statistics with jackknife errors, and KS distances.
//!
//! Realization `i` of an ensemble is drawn from its own generator seeded with
//! [`seed_for`]`(master_seed, i)`, and every reduction runs over realizations
//! in index order, so parallel and serial runs agree bit for bit.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{measure_z, Domain};
use crate::numeric::CompensatedSum;
use crate::process::{sample_realization_with, Kernel, SamplerOptions};
use crate::weight_laws::WeightLaw;

/// Cap on the expected number of neurons an ensemble may sample.
pub const DEFAULT_MAX_TOTAL_NEURONS: u64 = 4_000_000_000;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 finalizer, a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `index`: `mix64(mix64(master) + (index + 1) * gamma)`.
/// Streams of different masters start at unrelated offsets of the same
/// Weyl sequence, so they only collide if two offsets differ by a multiple
/// of gamma that is smaller than the ensemble size.
pub fn seed_for(master: u64, index: u64) -> u64 {
    mix64(mix64(master).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

fn default_max_total_neurons() -> u64 {
    DEFAULT_MAX_TOTAL_NEURONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub lambda: f64,
    pub law: WeightLaw,
    pub domain: Domain,
    pub n_realizations: usize,
    pub eval_points: Vec<Vec<f64>>,
    /// Joint frequencies, one entry per eval point each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cf_frequencies: Option<Vec<Vec<f64>>>,
    pub master_seed: u64,
    #[serde(default = "default_max_total_neurons")]
    pub max_total_neurons: u64,
}

impl EnsembleConfig {
    pub fn new(lambda: f64, law: WeightLaw, domain: Domain, n_realizations: usize, eval_points: Vec<Vec<f64>>, master_seed: u64) -> Self {
        EnsembleConfig {
            lambda,
            law,
            domain,
            n_realizations,
            eval_points,
            cf_frequencies: None,
            master_seed,
            max_total_neurons: DEFAULT_MAX_TOTAL_NEURONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        self.domain.validate()?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.n_realizations < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: self.n_realizations,
            });
        }
        if self.eval_points.is_empty() {
            return Err(Error::InvalidParameter("eval_points must not be empty".into()));
        }
        let d = self.domain.dim();
        for x in &self.eval_points {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
            if !self.domain.contains(x) {
                return Err(Error::InvalidParameter(format!("eval point {x:?} lies outside the domain")));
            }
        }
        if let Some(freqs) = &self.cf_frequencies {
            for xi in freqs {
                if xi.len() != self.eval_points.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.eval_points.len(),
                        got: xi.len(),
                    });
                }
            }
        }
        let expected = self.lambda * measure_z(&self.domain)? * self.n_realizations as f64;
        if expected > self.max_total_neurons as f64 {
            return Err(Error::ResourceLimit(format!(
                "expected {expected:.3e} neurons in total exceeds the cap of {}",
                self.max_total_neurons
            )));
        }
        Ok(())
    }

    /// Hex SHA-256 of the config's JSON form.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&json)))
    }
}

/// Knobs that change how realizations are drawn or evaluated. Only the
/// defaults sample the process; the rest exist for negative controls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimulationOptions {
    pub sampler: SamplerOptions,
    pub kernel: Kernel,
    pub parallel: bool,
}

/// Values `s(x_j)` of every realization at every eval point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub n_points: usize,
    /// Row-major: realization `i`, point `j` at `i * n_points + j`.
    pub values: Vec<f64>,
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl SampleMatrix {
    pub fn n_realizations(&self) -> usize {
        self.widths.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_points..(i + 1) * self.n_points]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.n_points).copied().collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_points)
    }

    /// One row per realization: `seed,width,p1,...,pm`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.n_points).map(|j| format!("p{j}")).collect();
        writeln!(out, "seed,width,{}", header.join(","))?;
        for (i, row) in self.rows().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{}", self.seeds[i], self.widths[i], cells.join(","))?;
        }
        Ok(())
    }
}

/// Samples the ensemble and evaluates every realization at the eval points.
pub fn simulate(cfg: &EnsembleConfig, options: SimulationOptions) -> Result<SampleMatrix> {
    cfg.validate()?;
    let one = |i: usize| -> Result<(u64, usize, Vec<f64>)> {
        let seed = seed_for(cfg.master_seed, i as u64);
        let r = sample_realization_with(cfg.lambda, &cfg.law, &cfg.domain, seed, options.sampler)?;
        let vals = cfg.eval_points.iter().map(|x| r.evaluate_with(x, options.kernel)).collect();
        Ok((seed, r.width(), vals))
    };
    let rows: Vec<(u64, usize, Vec<f64>)> = if options.parallel {
        (0..cfg.n_realizations).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..cfg.n_realizations).map(one).collect::<Result<_>>()?
    };
    let m = cfg.eval_points.len();
    let mut values = Vec::with_capacity(rows.len() * m);
    let mut widths = Vec::with_capacity(rows.len());
    let mut seeds = Vec::with_capacity(rows.len());
    for (seed, width, vals) in rows {
        seeds.push(seed);
        widths.push(width);
        values.extend(vals);
    }
    Ok(SampleMatrix {
        n_points: m,
        values,
        widths,
        seeds,
    })
}

/// A real estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|value - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.se
        }
    }
}

fn mean_of(xs: impl IntoIterator<Item = f64>) -> (f64, usize) {
    let mut s = CompensatedSum::new();
    let mut n = 0;
    for x in xs {
        s.add(x);
        n += 1;
    }
    (s.value() / n as f64, n)
}

/// Sample mean with standard error `sd / sqrt(n)`.
pub fn mean_estimate(xs: &[f64]) -> Result<Estimate> {
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: xs.len() });
    }
    let (m, n) = mean_of(xs.iter().copied());
    let (ss, _) = mean_of(xs.iter().map(|x| (x - m) * (x - m)));
    let var = ss * n as f64 / (n - 1) as f64;
    Ok(Estimate {
        value: m,
        se: (var / n as f64).sqrt(),
    })
}

/// Sample covariance (divisor `n - 1`) with the standard error of the mean
/// of the centered products.
pub fn covariance_estimate(xs: &[f64], ys: &[f64]) -> Result<Estimate> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: xs.len() });
    }
    let (mx, n) = mean_of(xs.iter().copied());
    let (my, _) = mean_of(ys.iter().copied());
    let products: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let e = mean_estimate(&products)?;
    Ok(Estimate {
        value: e.value * n as f64 / (n - 1) as f64,
        se: e.se,
    })
}

/// Empirical characteristic function with separate errors on its real and
/// imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfEstimate {
    pub value: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

impl CfEstimate {
    pub fn se(&self) -> f64 {
        self.se_re.max(self.se_im)
    }

    /// Largest of the real and imaginary deviations from `target`, each in
    /// units of `se()`.
    pub fn z_score(&self, target: Complex64) -> f64 {
        let diff = (self.value.re - target.re).abs().max((self.value.im - target.im).abs());
        if diff == 0.0 {
            0.0
        } else {
            diff / self.se()
        }
    }
}

/// `(1/n) sum_i exp(i <sample_i, xi>)` over rows of `samples`.
pub fn empirical_cf<'a>(samples: impl IntoIterator<Item = &'a [f64]>, xi: &[f64]) -> Result<CfEstimate> {
    let terms: Vec<(f64, f64)> = samples
        .into_iter()
        .map(|row| {
            let phase: f64 = row.iter().zip(xi).map(|(a, b)| a * b).sum();
            (phase.cos(), phase.sin())
        })
        .collect();
    if terms.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: terms.len() });
    }
    let re: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let im: Vec<f64> = terms.iter().map(|t| t.1).collect();
    let (re, im) = (mean_estimate(&re)?, mean_estimate(&im)?);
    Ok(CfEstimate {
        value: Complex64::new(re.value, im.value),
        se_re: re.se,
        se_im: im.se,
    })
}

/// Unbiased k-statistics `k2`, `k4` with jackknife standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KStatistics {
    pub k2: Estimate,
    pub k4: Estimate,
}

fn k2_from_sums(n: f64, s1: f64, s2: f64) -> f64 {
    (n * s2 - s1 * s1) / (n * (n - 1.0))
}

fn k4_from_sums(n: f64, s1: f64, s2: f64, s3: f64, s4: f64) -> f64 {
    let num = -6.0 * s1.powi(4) + 12.0 * n * s1 * s1 * s2 - 3.0 * n * (n - 1.0) * s2 * s2 - 4.0 * n * (n + 1.0) * s1 * s3
        + n * n * (n + 1.0) * s4;
    num / (n * (n - 1.0) * (n - 2.0) * (n - 3.0))
}

/// k-statistics of `xs`. Values are centered at their mean first (the
/// statistics are shift invariant), and the leave-one-out values of the
/// jackknife come from downdated power sums.
pub fn k_statistics(xs: &[f64]) -> Result<KStatistics> {
    if xs.len() < 8 {
        return Err(Error::TooFewSamples { needed: 8, got: xs.len() });
    }
    let (m, n) = mean_of(xs.iter().copied());
    let c: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let mut sums = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
    for &x in &c {
        let mut p = x;
        for s in sums.iter_mut() {
            s.add(p);
            p *= x;
        }
    }
    let [s1, s2, s3, s4] = sums.map(|s| s.value());
    let nf = n as f64;
    let k2 = k2_from_sums(nf, s1, s2);
    let k4 = k4_from_sums(nf, s1, s2, s3, s4);

    let loo = |x: f64| {
        let (x2, x3, x4) = (x * x, x * x * x, x * x * x * x);
        (
            k2_from_sums(nf - 1.0, s1 - x, s2 - x2),
            k4_from_sums(nf - 1.0, s1 - x, s2 - x2, s3 - x3, s4 - x4),
        )
    };
    let (mean2, _) = mean_of(c.iter().map(|&x| loo(x).0));
    let (mean4, _) = mean_of(c.iter().map(|&x| loo(x).1));
    let (var2, _) = mean_of(c.iter().map(|&x| (loo(x).0 - mean2).powi(2)));
    let (var4, _) = mean_of(c.iter().map(|&x| (loo(x).1 - mean4).powi(2)));
    // Jackknife variance: (n-1)/n * sum (theta_i - mean)^2 = (n-1) * mean square.
    Ok(KStatistics {
        k2: Estimate {
            value: k2,
            se: ((nf - 1.0) * var2).sqrt(),
        },
        k4: Estimate {
            value: k4,
            se: ((nf - 1.0) * var4).sqrt(),
        },
    })
}

/// `sup_x |F_n(x) - F(x)|` between the empirical CDF of `xs` and `cdf`.
/// Returns 0 for an empty sample.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d.clamp(0.0, 1.0)
}

/// Asymptotic 1% critical value of the one-sample Kolmogorov statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Rough standard error of a KS distance from `n` samples, `0.5 / sqrt(n)`
/// (the standard deviation of a Brownian bridge at its midpoint).
pub fn ks_standard_error(n: usize) -> f64 {
    0.5 / (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEntry {
    pub i: usize,
    pub j: usize,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfEntry {
    pub frequency: Vec<f64>,
    pub estimate: CfEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
    pub seed_rule: String,
    pub seeds: Vec<u64>,
}

/// Everything [`run_ensemble`] reports. Moment-based fields are `None` when
/// the law has infinite variance; `k_statistics` is also `None` when the
/// fourth moment is infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub config: EnsembleConfig,
    pub means: Option<Vec<Estimate>>,
    pub covariances: Option<Vec<CovarianceEntry>>,
    pub k_statistics: Option<Vec<KStatistics>>,
    pub cf: Vec<CfEntry>,
    pub widths: Vec<usize>,
    pub provenance: Provenance,
}

impl EnsembleSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn covariance(&self, i: usize, j: usize) -> Option<Estimate> {
        let (i, j) = (i.min(j), i.max(j));
        self.covariances.as_ref()?.iter().find(|c| c.i == i && c.j == j).map(|c| c.estimate)
    }
}

pub fn summarize(cfg: &EnsembleConfig, samples: &SampleMatrix) -> Result<EnsembleSummary> {
    let m = samples.n_points;
    let columns: Vec<Vec<f64>> = (0..m).map(|j| samples.column(j)).collect();
    let finite_second = cfg.law.raw_moment(2).is_finite();
    let finite_fourth = cfg.law.raw_moment(4).is_finite();
    let means = if finite_second {
        Some(columns.iter().map(|c| mean_estimate(c)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let covariances = if finite_second {
        let mut out = Vec::new();
        for i in 0..m {
            for j in i..m {
                out.push(CovarianceEntry {
                    i,
                    j,
                    estimate: covariance_estimate(&columns[i], &columns[j])?,
                });
            }
        }
        Some(out)
    } else {
        None
    };
    let k_stats = if finite_fourth && samples.n_realizations() >= 8 {
        Some(columns.iter().map(|c| k_statistics(c)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let cf = cfg
        .cf_frequencies
        .iter()
        .flatten()
        .map(|xi| {
            Ok(CfEntry {
                frequency: xi.clone(),
                estimate: empirical_cf(samples.rows(), xi)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleSummary {
        config: cfg.clone(),
        means,
        covariances,
        k_statistics: k_stats,
        cf,
        widths: samples.widths.clone(),
        provenance: Provenance {
            config_hash: cfg.hash()?,
            master_seed: cfg.master_seed,
            seed_rule: "mix64(mix64(master) + (i + 1) * 0x9E3779B97F4A7C15)".into(),
            seeds: samples.seeds.clone(),
        },
    })
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    run_ensemble_with(
        cfg,
        SimulationOptions {
            parallel: true,
            ..Default::default()
        },
    )
}

pub fn run_ensemble_with(cfg: &EnsembleConfig, options: SimulationOptions) -> Result<EnsembleSummary> {
    let samples = simulate(cfg, options)?;
    summarize(cfg, &samples)
}
