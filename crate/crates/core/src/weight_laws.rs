//! Output-weight laws.
//!
//! A law is admissible when it puts no mass at zero and has a finite first
//! absolute moment. Stable laws use the convention `E[exp(i s V)] =
//! exp(-|scale * s|^alpha)`, so at `alpha = 2` the law is `N(0, 2 scale^2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightLaw {
    Gaussian { std: f64 },
    /// Symmetric alpha-stable, `alpha` in (1, 2].
    #[serde(rename = "stable")]
    SAlphaS { alpha: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    /// `+value` or `-value` with probability 1/2 each.
    TwoPoint { value: f64 },
}

/// Closed-form moments; `f64::INFINITY` marks a divergent moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub abs_mean: f64,
    pub second: f64,
    pub fourth: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InadmissibleLaw(format!("{name} must be positive and finite, got {v}")))
    }
}

impl WeightLaw {
    pub fn gaussian(std: f64) -> Result<Self> {
        let law = WeightLaw::Gaussian { std };
        law.validate()?;
        Ok(law)
    }

    pub fn stable(alpha: f64, scale: f64) -> Result<Self> {
        let law = WeightLaw::SAlphaS { alpha, scale };
        law.validate()?;
        Ok(law)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let law = WeightLaw::Uniform { lo, hi };
        law.validate()?;
        Ok(law)
    }

    pub fn two_point(value: f64) -> Result<Self> {
        let law = WeightLaw::TwoPoint { value };
        law.validate()?;
        Ok(law)
    }

    /// Admissibility: no atom at 0 and finite `E|V|`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightLaw::Gaussian { std } => positive("std", std),
            WeightLaw::SAlphaS { alpha, scale } => {
                if !(alpha > 1.0 && alpha <= 2.0) {
                    return Err(Error::InadmissibleLaw(format!(
                        "stable index must lie in (1, 2] for a finite first moment, got {alpha}"
                    )));
                }
                positive("scale", scale)
            }
            WeightLaw::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InadmissibleLaw(format!(
                        "uniform law needs finite lo < hi, got [{lo}, {hi}]"
                    )));
                }
                Ok(())
            }
            WeightLaw::TwoPoint { value } => {
                if value == 0.0 || !value.is_finite() {
                    return Err(Error::InadmissibleLaw(format!(
                        "two-point law needs a nonzero finite value, got {value}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> String {
        match *self {
            WeightLaw::Gaussian { std } => format!("Gaussian(std={std})"),
            WeightLaw::SAlphaS { alpha, scale } => format!("SaS(alpha={alpha}, scale={scale})"),
            WeightLaw::Uniform { lo, hi } => format!("Uniform[{lo}, {hi}]"),
            WeightLaw::TwoPoint { value } => format!("TwoPoint(+-{value})"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightLaw::Gaussian { std } => std * rng.sample::<f64, _>(StandardNormal),
            WeightLaw::SAlphaS { alpha, scale } => scale * standard_symmetric_stable(alpha, rng),
            WeightLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            WeightLaw::TwoPoint { value } => {
                if rng.random::<bool>() {
                    value
                } else {
                    -value
                }
            }
        }
    }

    /// `E[exp(i s V)]`.
    pub fn char_fn(&self, s: f64) -> Complex64 {
        self.char_fn_minus_one(s) + 1.0
    }

    /// `E[exp(i s V)] - 1`, evaluated without cancellation near `s = 0`.
    pub fn char_fn_minus_one(&self, s: f64) -> Complex64 {
        match *self {
            WeightLaw::Gaussian { std } => Complex64::new((-0.5 * (std * s).powi(2)).exp_m1(), 0.0),
            WeightLaw::SAlphaS { alpha, scale } => Complex64::new((-(scale * s).abs().powf(alpha)).exp_m1(), 0.0),
            WeightLaw::Uniform { lo, hi } => {
                // exp(i m s) sinc(w s / 2) - 1 with m the midpoint, w the width.
                let m = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo) * s;
                let sinc = if half.abs() < 1e-4 {
                    1.0 - half * half / 6.0 + half.powi(4) / 120.0
                } else {
                    half.sin() / half
                };
                let (sin_ms, cos_ms) = (m * s).sin_cos();
                // cos(ms) sinc - 1 = (sinc - 1) cos(ms) + (cos(ms) - 1)
                let re = (sinc - 1.0) * cos_ms - 2.0 * (0.5 * m * s).sin().powi(2);
                Complex64::new(re, sinc * sin_ms)
            }
            WeightLaw::TwoPoint { value } => Complex64::new(-2.0 * (0.5 * value * s).sin().powi(2), 0.0),
        }
    }

    /// `E[V^n]` for `n` in 0..=4; `INFINITY` when it diverges.
    pub fn raw_moment(&self, n: u32) -> f64 {
        if n == 0 {
            return 1.0;
        }
        match *self {
            WeightLaw::Gaussian { std } => match n {
                2 => std * std,
                4 => 3.0 * std.powi(4),
                _ if n % 2 == 1 => 0.0,
                _ => normal_even_moment(n) * std.powi(n as i32),
            },
            WeightLaw::SAlphaS { alpha, scale } => {
                if n % 2 == 1 && (n as f64) < alpha {
                    0.0
                } else if alpha == 2.0 {
                    // N(0, 2 scale^2)
                    let var = 2.0 * scale * scale;
                    if n % 2 == 1 {
                        0.0
                    } else {
                        normal_even_moment(n) * var.powi(n as i32 / 2)
                    }
                } else {
                    f64::INFINITY
                }
            }
            WeightLaw::Uniform { lo, hi } => {
                let k = n as i32 + 1;
                (hi.powi(k) - lo.powi(k)) / (k as f64 * (hi - lo))
            }
            WeightLaw::TwoPoint { value } => {
                if n % 2 == 1 {
                    0.0
                } else {
                    value.powi(n as i32)
                }
            }
        }
    }

    pub fn abs_mean(&self) -> f64 {
        match *self {
            WeightLaw::Gaussian { std } => std * (2.0 / PI).sqrt(),
            // E|X| = 2 Gamma(1 - 1/alpha) / pi for CF exp(-|s|^alpha).
            WeightLaw::SAlphaS { alpha, scale } => {
                scale * 2.0 * statrs::function::gamma::gamma(1.0 - 1.0 / alpha) / PI
            }
            WeightLaw::Uniform { lo, hi } => {
                if lo >= 0.0 {
                    0.5 * (lo + hi)
                } else if hi <= 0.0 {
                    -0.5 * (lo + hi)
                } else {
                    (hi * hi + lo * lo) / (2.0 * (hi - lo))
                }
            }
            WeightLaw::TwoPoint { value } => value.abs(),
        }
    }

    pub fn moments(&self) -> Moments {
        Moments {
            mean: self.raw_moment(1),
            abs_mean: self.abs_mean(),
            second: self.raw_moment(2),
            fourth: self.raw_moment(4),
        }
    }

    /// `E[V^n]`, or a typed error when it diverges.
    pub fn finite_moment(&self, n: u32) -> Result<f64> {
        let m = self.raw_moment(n);
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::InfiniteMoment {
                order: n,
                law: self.name(),
            })
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match *self {
            WeightLaw::Uniform { lo, hi } => lo == -hi,
            _ => true,
        }
    }
}

/// Lévy exponent of the compound Poisson construction, `lambda (chi_V(s) - 1)`.
pub fn levy_exponent(law: &WeightLaw, lambda: f64, s: f64) -> Complex64 {
    law.char_fn_minus_one(s) * lambda
}

fn normal_even_moment(n: u32) -> f64 {
    // (n - 1)!!
    (1..n).step_by(2).map(|k| k as f64).product()
}

/// Chambers–Mallows–Stuck draw with characteristic function `exp(-|s|^alpha)`.
fn standard_symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break PI * (u - 0.5);
        }
    };
    let w: f64 = rng.sample(Exp1);
    if alpha == 2.0 {
        return 2.0 * v.sin() * w.sqrt();
    }
    let cos_v = v.cos();
    (alpha * v).sin() / cos_v.powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}
