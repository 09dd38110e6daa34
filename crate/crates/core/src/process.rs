//! The correction kernel, the Poisson sampler, and evaluation of sampled
//! networks.
//!
//! A realization is `s(x) = sum_k v_k k_x(u_k, b_k)` where
//! `k_x(u, t) = ReLU(u.x - t) + (u.x) h1(t) + h2(t)`,
//! `h1(t) = (sgn t - 1) / 2` and `h2(t) = (t - |t|) / 2`. With the
//! middle-value convention (`sgn 0 = 0`, Heaviside(0) = 1/2) this gives
//! `s(0) = 0` and `grad s(0) = 0` exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::geometry::{measure_z, sample_threshold, CylinderPoint, Direction, DirectionSampler, Domain};
use crate::numeric::CompensatedSum;
use crate::weight_laws::WeightLaw;

/// Sign with `sgn(0) = 0`.
#[inline]
pub fn sgn(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Heaviside step with the middle value at the jump.
#[inline]
pub fn heaviside(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        0.0
    } else {
        0.5
    }
}

#[inline]
pub fn h1(t: f64) -> f64 {
    0.5 * (sgn(t) - 1.0)
}

#[inline]
pub fn h2(t: f64) -> f64 {
    0.5 * (t - t.abs())
}

#[inline]
fn relu(z: f64) -> f64 {
    z.max(0.0)
}

/// Offset added to `h1` by [`Kernel::PerturbedH1`].
pub const H1_PERTURBATION: f64 = 0.05;

/// Which correction kernel to use. `PerturbedH1` breaks the boundary
/// conditions on purpose and is only used as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    Exact,
    PerturbedH1,
}

impl Kernel {
    #[inline]
    fn h1(self, t: f64) -> f64 {
        match self {
            Kernel::Exact => h1(t),
            Kernel::PerturbedH1 => h1(t) + H1_PERTURBATION,
        }
    }

    /// `k_x(u, t)` from the projection `u.x`.
    #[inline]
    pub fn eval_projected(self, ux: f64, t: f64) -> f64 {
        relu(ux - t) + ux * self.h1(t) + h2(t)
    }

    /// Scalar factor `c` with `grad_x k_x(u, b) = c u`.
    #[inline]
    pub fn gradient_factor(self, ux: f64, b: f64) -> f64 {
        heaviside(ux - b) + self.h1(b)
    }
}

/// The correction kernel `k_x(u, t)`.
pub fn kernel_k(x: &[f64], p: &CylinderPoint) -> f64 {
    Kernel::Exact.eval_projected(p.u.dot(x), p.t)
}

/// Mollified kernel `k^eps_x(u, t)`: the sign and absolute value in the
/// corrections are convolved with a centered Gaussian of variance `eps`.
///
/// With `sigma = sqrt(eps)`:
/// `(g * |.|/2)(t) = (t erf(t / (sigma sqrt 2)) + 2 sigma phi(t / sigma)) / 2`,
/// `(g * sgn/2)(t) = erf(t / (sigma sqrt 2)) / 2`.
pub fn kernel_k_eps(x: &[f64], p: &CylinderPoint, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let ux = p.u.dot(x);
    let t = p.t;
    let (abs_conv, sgn_conv) = gaussian_smoothed_abs_sgn(t, eps);
    Ok(relu(ux - t) - 0.5 * (ux - t) - 0.5 * abs_conv + 0.5 * ux * sgn_conv)
}

/// `(E|t + Z|, E sgn(t + Z))` for `Z ~ N(0, eps)`.
pub(crate) fn gaussian_smoothed_abs_sgn(t: f64, eps: f64) -> (f64, f64) {
    let sigma = eps.sqrt();
    let z = t / sigma;
    let e = erf(z / std::f64::consts::SQRT_2);
    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (t * e + 2.0 * sigma * phi, e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Neuron {
    pub v: f64,
    pub u: Direction,
    pub b: f64,
}

impl Neuron {
    pub fn threshold(&self) -> CylinderPoint {
        CylinderPoint {
            u: self.u.clone(),
            t: self.b,
        }
    }
}

/// One sampled network restricted to a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Realization {
    pub d: usize,
    pub domain: Domain,
    pub lambda: f64,
    pub law: WeightLaw,
    pub seed: u64,
    pub neurons: Vec<Neuron>,
}

/// Affine skip term `w0.x + b0` of the restricted form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipAffine {
    pub w0: Vec<f64>,
    pub b0: f64,
}

impl SkipAffine {
    pub fn eval(&self, x: &[f64]) -> f64 {
        crate::numeric::dot(&self.w0, x) + self.b0
    }
}

/// Knobs of the sampler that only negative controls change.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SamplerOptions {
    pub directions: DirectionSampler,
}

/// Samples a realization: width `N ~ Poisson(lambda |Z|)`, then `N`
/// thresholds uniform on the threshold set, then `N` weights.
pub fn sample_realization(lambda: f64, law: &WeightLaw, domain: &Domain, seed: u64) -> Result<Realization> {
    sample_realization_with(lambda, law, domain, seed, SamplerOptions::default())
}

pub fn sample_realization_with(
    lambda: f64,
    law: &WeightLaw,
    domain: &Domain,
    seed: u64,
    options: SamplerOptions,
) -> Result<Realization> {
    law.validate()?;
    domain.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = sample_width(lambda * measure_z(domain)?, &mut rng)?;
    let mut neurons = Vec::with_capacity(width);
    for _ in 0..width {
        let p = sample_threshold(domain, &mut rng, options.directions)?;
        neurons.push(Neuron { v: 0.0, u: p.u, b: p.t });
    }
    for n in neurons.iter_mut() {
        n.v = law.sample(&mut rng);
    }
    Ok(Realization {
        d: domain.dim(),
        domain: *domain,
        lambda,
        law: *law,
        seed,
        neurons,
    })
}

fn sample_width(mean: f64, rng: &mut ChaCha8Rng) -> Result<usize> {
    let poisson = Poisson::new(mean)
        .map_err(|e| Error::InvalidParameter(format!("Poisson mean {mean}: {e}")))?;
    let n: f64 = poisson.sample(rng);
    Ok(n as usize)
}

impl Realization {
    pub fn width(&self) -> usize {
        self.neurons.len()
    }

    /// `s(x)`, summed in neuron order with compensation.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.evaluate_with(x, Kernel::Exact)
    }

    pub fn evaluate_with(&self, x: &[f64], kernel: Kernel) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        let mut acc = CompensatedSum::new();
        for n in &self.neurons {
            acc.add(n.v * kernel.eval_projected(n.u.dot(x), n.b));
        }
        acc.value()
    }

    /// `s(x)` plus whether `x` lies in the realization's domain; outside the
    /// domain the restricted network no longer matches the process.
    pub fn evaluate_flagged(&self, x: &[f64]) -> (f64, bool) {
        (self.evaluate(x), self.domain.contains(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_with(x, Kernel::Exact)
    }

    pub fn gradient_with(&self, x: &[f64], kernel: Kernel) -> Vec<f64> {
        let mut acc = vec![CompensatedSum::new(); self.d];
        for n in &self.neurons {
            let c = n.v * kernel.gradient_factor(n.u.dot(x), n.b);
            if c != 0.0 {
                for (a, &ui) in acc.iter_mut().zip(n.u.as_slice()) {
                    a.add(c * ui);
                }
            }
        }
        acc.iter().map(CompensatedSum::value).collect()
    }

    /// Sum of `|v_k|`; the natural scale for rounding error in `s` and `grad s`.
    pub fn abs_weight_sum(&self) -> f64 {
        self.neurons.iter().map(|n| n.v.abs()).sum()
    }

    /// Skip connection plus plain ReLU units:
    /// `s(x) = w0.x + b0 + sum_k v_k ReLU(u_k.x - b_k)`.
    pub fn restricted_form(&self) -> (SkipAffine, Vec<Neuron>) {
        let mut w0 = vec![CompensatedSum::new(); self.d];
        let mut b0 = CompensatedSum::new();
        for n in &self.neurons {
            let c = n.v * h1(n.b);
            for (a, &ui) in w0.iter_mut().zip(n.u.as_slice()) {
                a.add(c * ui);
            }
            b0.add(n.v * h2(n.b));
        }
        (
            SkipAffine {
                w0: w0.iter().map(CompensatedSum::value).collect(),
                b0: b0.value(),
            },
            self.neurons.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and checks a serialized realization.
    pub fn from_json(s: &str) -> Result<Self> {
        let r: Realization = serde_json::from_str(s)?;
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.law.validate()?;
        if self.d != self.domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain.dim(),
                got: self.d,
            });
        }
        let set = self.domain.threshold_set();
        for (k, n) in self.neurons.iter().enumerate() {
            if n.u.dim() != self.d {
                return Err(Error::DimensionMismatch {
                    expected: self.d,
                    got: n.u.dim(),
                });
            }
            Direction::from_unit(n.u.as_slice())?;
            if !set.contains(&n.threshold())? {
                return Err(Error::InvalidParameter(format!(
                    "neuron {k} has a threshold outside the domain's threshold set"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluates the restricted form directly; matches `Realization::evaluate`.
pub fn evaluate_restricted(skip: &SkipAffine, units: &[Neuron], x: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.add(skip.eval(x));
    for n in units {
        acc.add(n.v * relu(n.u.dot(x) - n.b));
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{norm, GaussLegendre};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn point(u: &[f64], t: f64) -> CylinderPoint {
        CylinderPoint {
            u: Direction::new(u).unwrap(),
            t,
        }
    }

    fn single(v: f64, u: &[f64], b: f64) -> Realization {
        let d = u.len();
        Realization {
            d,
            domain: Domain::ball(1.0, d).unwrap(),
            lambda: 1.0,
            law: WeightLaw::two_point(1.0).unwrap(),
            seed: 0,
            neurons: vec![Neuron {
                v,
                u: Direction::new(u).unwrap(),
                b,
            }],
        }
    }

    #[test]
    fn kernel_examples() {
        let p = point(&[0.6, 0.8], -0.3);
        assert_eq!(kernel_k(&[0.0, 0.0], &p), 0.0);
        // u.x = 1
        let x = [1.0, 0.0];
        assert_relative_eq!(kernel_k(&x, &point(&[1.0, 0.0], 0.25)), 0.75);
        assert_eq!(kernel_k(&x, &point(&[1.0, 0.0], -0.5)), 0.0);
        assert_eq!(kernel_k(&x, &point(&[1.0, 0.0], 1.5)), 0.0);
        // middle value at t = 0: |u.x| / 2
        assert_relative_eq!(kernel_k(&[-0.4], &point(&[1.0], 0.0)), 0.2);
        assert_relative_eq!(kernel_k(&[0.4], &point(&[1.0], 0.0)), 0.2);
    }

    #[test]
    fn kernel_vanishes_outside_its_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let ux: f64 = rng.random_range(-2.0..2.0);
            let t: f64 = rng.random_range(-3.0..3.0);
            let k = Kernel::Exact.eval_projected(ux, t);
            if t < ux.min(0.0) || t > ux.max(0.0) {
                assert!(k.abs() < 1e-15, "ux={ux} t={t} k={k}");
            } else {
                assert!(k >= -1e-15);
                assert!(k <= ux.abs() + 1e-15);
            }
        }
    }

    /// Oracle: the two Gaussian convolutions by direct Gauss–Legendre quadrature
    /// over ±12 sigma, split at the kink of |.| and sgn.
    fn mollified_by_quadrature(x: &[f64], p: &CylinderPoint, eps: f64) -> f64 {
        let sigma = eps.sqrt();
        let rule = GaussLegendre::new(80);
        let g = |s: f64| (-s * s / (2.0 * eps)).exp() / (2.0 * std::f64::consts::PI * eps).sqrt();
        let t = p.t;
        // (g * f)(t) = ∫ g(s) f(t - s) ds; kink at s = t.
        let lo = -12.0 * sigma;
        let hi = 12.0 * sigma;
        let conv = |f: &dyn Fn(f64) -> f64| -> f64 {
            let mid = t.clamp(lo, hi);
            let a: f64 = rule.integrate(lo, mid, |s| g(s) * f(t - s));
            let b: f64 = rule.integrate(mid, hi, |s| g(s) * f(t - s));
            a + b
        };
        let abs_half = conv(&|z: f64| z.abs() / 2.0);
        let sgn_half = conv(&|z: f64| sgn(z) / 2.0);
        let ux = p.u.dot(x);
        relu(ux - t) - (ux - t) / 2.0 - abs_half + ux * sgn_half
    }

    #[test]
    fn mollified_kernel_matches_numerical_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let eps = 10f64.powf(rng.random_range(-3.0..0.0));
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let p = point(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], rng.random_range(-1.0..1.0));
            let got = kernel_k_eps(&x, &p, eps).unwrap();
            let want = mollified_by_quadrature(&x, &p, eps);
            assert!((got - want).abs() < 1e-8, "eps={eps}: {got} vs {want}");
        }
        assert!(kernel_k_eps(&[0.0], &point(&[1.0], 0.0), 0.0).is_err());
    }

    #[test]
    fn mollified_kernel_examples() {
        let x = [0.3, -0.9];
        let eps = 1e-2;
        for &t in &[1.0, -1.0, 1.5, -2.0] {
            let p = point(&[0.8, 0.6], t);
            assert!((kernel_k_eps(&x, &p, eps).unwrap() - kernel_k(&x, &p)).abs() < 1e-8);
        }
        let origin = point(&[1.0, 0.0], 0.0);
        for &eps in &[1e-3, 0.1, 2.0] {
            let got = kernel_k_eps(&[0.0, 0.0], &origin, eps).unwrap();
            assert!(got < 0.0);
            assert!((got - mollified_by_quadrature(&[0.0, 0.0], &origin, eps)).abs() < 1e-8);
        }
    }

    #[test]
    fn mollified_kernel_converges_as_eps_shrinks() {
        let x = [0.7, 0.2];
        for &t in &[0.2, -0.25, 0.4] {
            let p = point(&[0.6, -0.8], t);
            let errs: Vec<f64> = [1e-1, 1e-2, 1e-3]
                .iter()
                .map(|&e| (kernel_k_eps(&x, &p, e).unwrap() - kernel_k(&x, &p)).abs())
                .collect();
            assert!(errs[0] > errs[1] && errs[1] > errs[2], "t={t}: {errs:?}");
        }
    }

    #[test]
    fn single_neuron_values() {
        let r = single(1.0, &[1.0, 0.0], 0.25);
        assert_relative_eq!(r.evaluate(&[1.0, 0.0]), 0.75);
        assert_eq!(r.evaluate(&[0.0, 0.0]), 0.0);
        // inactive neuron with positive threshold: zero gradient
        assert_eq!(r.gradient(&[0.1, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn restricted_form_examples() {
        let r = single(1.0, &[1.0, 0.0], -1.0);
        let (skip, _) = r.restricted_form();
        assert_eq!(skip.w0, vec![-1.0, 0.0]);
        assert_eq!(skip.b0, -1.0);
        let r = sample_realization(20.0, &WeightLaw::gaussian(1.0).unwrap(), &Domain::ball(1.0, 2).unwrap(), 3).unwrap();
        let mut positive = r.clone();
        positive.neurons.retain(|n| n.b > 0.0);
        let (skip, _) = positive.restricted_form();
        assert_eq!(skip.w0, vec![0.0, 0.0]);
        assert_eq!(skip.b0, 0.0);
    }

    #[test]
    fn restricted_form_matches_kernel_sum() {
        let dom = Domain::ball(1.0, 3).unwrap();
        let r = sample_realization(15.0, &WeightLaw::uniform(-1.0, 2.0).unwrap(), &dom, 4).unwrap();
        let (skip, units) = r.restricted_form();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.57..0.57)).collect();
            let a = r.evaluate(&x);
            let b = evaluate_restricted(&skip, &units, &x);
            let scale = r.abs_weight_sum() * norm(&x).max(1e-300);
            worst = worst.max((a - b).abs() / a.abs().max(scale * 1e-6));
        }
        assert!(worst <= 1e-10, "worst relative error {worst}");
    }

    #[test]
    fn boundary_conditions_hold_exactly() {
        let dom = Domain::cube(1.0, 2).unwrap();
        let law = WeightLaw::gaussian(1.0).unwrap();
        for seed in 0..200 {
            let mut r = sample_realization(10.0, &law, &dom, seed).unwrap();
            r.neurons.push(Neuron {
                v: 0.7,
                u: Direction::new(&[0.3, -0.4]).unwrap(),
                b: 0.0,
            });
            let tol = 1e-10 * r.abs_weight_sum();
            assert!(r.evaluate(&[0.0, 0.0]).abs() <= tol);
            assert!(norm(&r.gradient(&[0.0, 0.0])) <= tol);
        }
    }

    #[test]
    fn perturbed_h1_breaks_the_gradient_condition() {
        let r = single(1.0, &[1.0, 0.0], 0.3);
        let g = r.gradient_with(&[0.0, 0.0], Kernel::PerturbedH1);
        assert_relative_eq!(g[0], H1_PERTURBATION);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let dom = Domain::ball(1.0, 2).unwrap();
        let r = sample_realization(30.0, &WeightLaw::gaussian(1.0).unwrap(), &dom, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-7;
        let mut checked = 0;
        while checked < 50 {
            let x = [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
            // stay away from activation hyperplanes so the central difference is exact
            let min_gap = r.neurons.iter().map(|n| (n.u.dot(&x) - n.b).abs()).fold(f64::MAX, f64::min);
            if min_gap < 1e-4 {
                continue;
            }
            let g = r.gradient(&x);
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (r.evaluate(&xp) - r.evaluate(&xm)) / (2.0 * h);
                let scale = g[i].abs().max(1.0);
                assert!((fd - g[i]).abs() <= 1e-6 * scale, "fd {fd} vs {}", g[i]);
            }
            checked += 1;
        }
    }

    #[test]
    fn evaluation_is_piecewise_linear_along_segments() {
        let dom = Domain::ball(1.0, 2).unwrap();
        let r = sample_realization(8.0, &WeightLaw::two_point(1.0).unwrap(), &dom, 8).unwrap();
        let (a, b) = ([-0.6, -0.3], [0.5, 0.6]);
        let m = 400;
        let pt = |i: usize| {
            let s = i as f64 / m as f64;
            [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
        };
        let vals: Vec<f64> = (0..=m).map(|i| r.evaluate(&pt(i))).collect();
        // crossing parameters of every hyperplane along the segment
        let crossings: Vec<f64> = r
            .neurons
            .iter()
            .filter_map(|n| {
                let (ua, ub) = (n.u.dot(&a), n.u.dot(&b));
                let s = (n.b - ua) / (ub - ua);
                (0.0..=1.0).contains(&s).then_some(s * m as f64)
            })
            .collect();
        for i in 1..m {
            let near = crossings.iter().any(|&c| (c - i as f64).abs() < 1.0);
            let second = vals[i + 1] - 2.0 * vals[i] + vals[i - 1];
            if !near {
                assert!(second.abs() < 1e-12, "second difference {second} at {i}");
            }
        }
    }

    #[test]
    fn sampling_is_reproducible_and_respects_threshold_set() {
        let dom = Domain::cube(1.0, 2).unwrap();
        let law = WeightLaw::stable(1.25, 1.0).unwrap();
        let a = sample_realization(50.0, &law, &dom, 99).unwrap();
        let b = sample_realization(50.0, &law, &dom, 99).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        let c = sample_realization(50.0, &law, &dom, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_rate_gives_empty_network() {
        let dom = Domain::ball(1.0, 2).unwrap();
        let law = WeightLaw::gaussian(1.0).unwrap();
        let empty = (0..200)
            .map(|s| sample_realization(1e-4, &law, &dom, s).unwrap())
            .filter(|r| r.width() == 0)
            .inspect(|r| {
                assert_eq!(r.evaluate(&[0.3, 0.2]), 0.0);
                assert_eq!(r.gradient(&[0.3, 0.2]), vec![0.0, 0.0]);
            })
            .count();
        assert!(empty >= 195);
    }

    #[test]
    fn inadmissible_inputs_are_rejected() {
        let dom = Domain::ball(1.0, 2).unwrap();
        let bad = WeightLaw::SAlphaS { alpha: 0.9, scale: 1.0 };
        assert!(matches!(sample_realization(1.0, &bad, &dom, 0), Err(Error::InadmissibleLaw(_))));
        assert!(sample_realization(0.0, &WeightLaw::gaussian(1.0).unwrap(), &dom, 0).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let dom = Domain::ball(1.0, 3).unwrap();
        let r = sample_realization(5.0, &WeightLaw::stable(1.5, 0.3).unwrap(), &dom, 12).unwrap();
        let json = r.to_json().unwrap();
        let back = Realization::from_json(&json).unwrap();
        assert_eq!(back, r);
        for (a, b) in back.neurons.iter().zip(&r.neurons) {
            assert_eq!(a.v.to_bits(), b.v.to_bits());
            assert_eq!(a.b.to_bits(), b.b.to_bits());
        }
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["d", "domain", "lambda", "law", "seed", "neurons"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn from_json_rejects_thresholds_outside_the_domain() {
        let mut r = single(1.0, &[1.0, 0.0], 0.5);
        r.neurons[0].b = 1.5;
        assert!(Realization::from_json(&r.to_json().unwrap()).is_err());
    }
}
