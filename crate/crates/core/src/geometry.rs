//! Observation domains, the threshold set of hyperplanes that meet them, and
//! uniform sampling on that set.
//!
//! A threshold `(u, t)` lives on the cylinder `S^{d-1} x R`. For the
//! origin-symmetric domains supported here the hyperplane `{x : u.x = t}`
//! meets the domain iff `|t| <= h(u)`, where `h` is the support function.
//! On `S^0` the surface measure is counting measure, so `|S^0| = 2`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::numeric::{ball_volume, dot, norm, sphere_area};

/// Consecutive rejections after which the box sampler reports an error.
pub const REJECTION_FAILSAFE: u64 = 1_000_000;

/// A unit vector in R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Direction(SmallVec<[f64; 4]>);

impl Direction {
    /// Normalizes `coords`; fails on an empty or zero vector.
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let n = norm(coords);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cannot normalize direction with norm {n}"
            )));
        }
        Ok(Self(coords.iter().map(|c| c / n).collect()))
    }

    /// Wraps coordinates that are already unit norm (checked to 1e-12).
    pub fn from_unit(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let n = norm(coords);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "direction has norm {n}, expected 1"
            )));
        }
        Ok(Self(SmallVec::from_slice(coords)))
    }

    /// Standard basis vector `e_axis` in R^d.
    pub fn axis(d: usize, axis: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if axis >= d {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} out of range for d = {d}"
            )));
        }
        let mut c: SmallVec<[f64; 4]> = SmallVec::from_elem(0.0, d);
        c[axis] = 1.0;
        Ok(Self(c))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        dot(&self.0, x)
    }
}

/// Activation threshold `(u, t)`. `(u, t)` and `(-u, -t)` are distinct points.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderPoint {
    pub u: Direction,
    pub t: f64,
}

/// Compact, origin-symmetric observation domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Ball { radius: f64, d: usize },
    Box { half_width: f64, d: usize },
}

impl Domain {
    pub fn ball(radius: f64, d: usize) -> Result<Self> {
        let dom = Domain::Ball { radius, d };
        dom.validate()?;
        Ok(dom)
    }

    pub fn cube(half_width: f64, d: usize) -> Result<Self> {
        let dom = Domain::Box { half_width, d };
        dom.validate()?;
        Ok(dom)
    }

    pub fn validate(&self) -> Result<()> {
        let (scale, d) = match *self {
            Domain::Ball { radius, d } => (radius, d),
            Domain::Box { half_width, d } => (half_width, d),
        };
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match *self {
            Domain::Ball { d, .. } | Domain::Box { d, .. } => d,
        }
    }

    /// Largest value of the support function over the sphere.
    pub fn max_halfwidth(&self) -> f64 {
        match *self {
            Domain::Ball { radius, .. } => radius,
            Domain::Box { half_width, d } => half_width * (d as f64).sqrt(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match *self {
            Domain::Ball { radius, .. } => norm(x) <= radius,
            Domain::Box { half_width, .. } => x.iter().all(|c| c.abs() <= half_width),
        }
    }

    pub fn threshold_set(&self) -> ThresholdSet {
        ThresholdSet { domain: *self }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// The set of thresholds whose hyperplanes meet the domain. Derived from the
/// domain, never stored point by point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSet {
    pub domain: Domain,
}

impl ThresholdSet {
    pub fn contains(&self, p: &CylinderPoint) -> Result<bool> {
        let h = support_halfwidth(&self.domain, &p.u)?;
        Ok(p.t.abs() <= h)
    }

    pub fn measure(&self) -> Result<f64> {
        measure_z(&self.domain)
    }
}

/// How directions are drawn. Only `Uniform` produces the process; `Skewed`
/// exists to give the isotropy suite a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectionSampler {
    #[default]
    Uniform,
    /// Normalized `g + 2 e_1` with `g` standard normal: biased toward `+e_1`.
    Skewed,
}

/// Uniform direction on `S^{d-1}` via a normalized standard normal vector.
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Direction> {
    sample_direction(d, rng, DirectionSampler::Uniform)
}

pub fn sample_direction<R: Rng + ?Sized>(
    d: usize,
    rng: &mut R,
    sampler: DirectionSampler,
) -> Result<Direction> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    loop {
        let mut g: SmallVec<[f64; 4]> = SmallVec::from_elem(0.0, d);
        for c in g.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        if sampler == DirectionSampler::Skewed {
            g[0] += 2.0;
        }
        let n = norm(&g);
        if n > 0.0 && n.is_finite() {
            for c in g.iter_mut() {
                *c /= n;
            }
            return Ok(Direction(g));
        }
    }
}

/// Support function `h(u) = max_{x in domain} u.x`.
pub fn support_halfwidth(domain: &Domain, u: &Direction) -> Result<f64> {
    domain.check_dim(u.dim())?;
    Ok(match *domain {
        Domain::Ball { radius, .. } => radius,
        Domain::Box { half_width, .. } => half_width * u.as_slice().iter().map(|c| c.abs()).sum::<f64>(),
    })
}

/// Measure of the threshold set, `integral over S^{d-1} of 2 h(u) du`.
///
/// Ball: `2 r |S^{d-1}|`. Box: `2 a integral ||u||_1 du = 2 a d integral |u_1| du`,
/// and `integral |u_1| du = 2 |B^{d-1}|` (twice the projected volume).
pub fn measure_z(domain: &Domain) -> Result<f64> {
    domain.validate()?;
    Ok(match *domain {
        Domain::Ball { radius, d } => 2.0 * radius * sphere_area(d),
        Domain::Box { half_width, d } => 4.0 * half_width * d as f64 * ball_volume(d - 1),
    })
}

/// Threshold drawn uniformly (w.r.t. `du dt`) on the threshold set.
pub fn sample_threshold_uniform<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> Result<CylinderPoint> {
    sample_threshold(domain, rng, DirectionSampler::Uniform)
}

/// Like [`sample_threshold_uniform`] with a selectable direction sampler.
/// For boxes the direction is accepted with probability `h(u) / h_max`,
/// which tilts the uniform sphere law to density `∝ h(u)`.
pub fn sample_threshold<R: Rng + ?Sized>(
    domain: &Domain,
    rng: &mut R,
    sampler: DirectionSampler,
) -> Result<CylinderPoint> {
    sample_threshold_counted(domain, rng, sampler).map(|(p, _)| p)
}

/// Returns the threshold together with the number of direction proposals used.
pub(crate) fn sample_threshold_counted<R: Rng + ?Sized>(
    domain: &Domain,
    rng: &mut R,
    sampler: DirectionSampler,
) -> Result<(CylinderPoint, u64)> {
    domain.validate()?;
    let d = domain.dim();
    let mut proposals = 1u64;
    let u = match *domain {
        Domain::Ball { radius, .. } => {
            let u = sample_direction(d, rng, sampler)?;
            let t = radius * (2.0 * rng.random::<f64>() - 1.0);
            return Ok((CylinderPoint { u, t }, proposals));
        }
        Domain::Box { .. } => {
            let h_max = domain.max_halfwidth();
            loop {
                let u = sample_direction(d, rng, sampler)?;
                let h = support_halfwidth(domain, &u)?;
                if rng.random::<f64>() * h_max < h {
                    break u;
                }
                if proposals >= REJECTION_FAILSAFE {
                    return Err(Error::RejectionFailsafe(proposals));
                }
                proposals += 1;
            }
        }
    };
    let h = support_halfwidth(domain, &u)?;
    let t = h * (2.0 * rng.random::<f64>() - 1.0);
    Ok((CylinderPoint { u, t }, proposals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, SQRT_2};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(sample_unit_sphere(0, &mut rng(0)), Err(Error::InvalidDimension(0))));
        assert!(Domain::ball(1.0, 0).is_err());
        assert!(Domain::cube(-1.0, 2).is_err());
    }

    #[test]
    fn sampled_directions_are_unit() {
        let mut r = rng(1);
        for d in 1..6 {
            for _ in 0..1000 {
                let u = sample_unit_sphere(d, &mut r).unwrap();
                assert!((norm(u.as_slice()) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn s0_is_two_points_equally_likely() {
        let mut r = rng(2);
        let n = 100_000;
        let mut plus = 0usize;
        for _ in 0..n {
            let u = sample_unit_sphere(1, &mut r).unwrap();
            let c = u.as_slice()[0];
            assert!(c == 1.0 || c == -1.0);
            if c > 0.0 {
                plus += 1;
            }
        }
        let sigma = (0.25 / n as f64).sqrt();
        assert!((plus as f64 / n as f64 - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn circle_directions_have_zero_mean() {
        let mut r = rng(3);
        let n = 100_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let u = sample_unit_sphere(2, &mut r).unwrap();
            sx += u.as_slice()[0];
            sy += u.as_slice()[1];
        }
        // Var(cos θ) = 1/2.
        let sigma = (0.5 / n as f64).sqrt();
        assert!((sx / n as f64).abs() < 3.0 * sigma);
        assert!((sy / n as f64).abs() < 3.0 * sigma);
    }

    #[test]
    fn sphere_second_moment_matches_quadrature() {
        // Oracle: E[u_1^2] on S^2 by brute-force product quadrature in (θ, φ).
        let (nt, np) = (400, 400);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..nt {
            let th = PI * (i as f64 + 0.5) / nt as f64;
            for j in 0..np {
                let ph = 2.0 * PI * (j as f64 + 0.5) / np as f64;
                let w = th.sin();
                let u1 = th.sin() * ph.cos();
                num += u1 * u1 * w;
                den += w;
            }
        }
        let oracle = num / den;
        assert!((oracle - 1.0 / 3.0).abs() < 1e-5);

        let mut r = rng(4);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| sample_unit_sphere(3, &mut r).unwrap().as_slice()[0].powi(2))
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - oracle).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn support_function_examples() {
        let ball = Domain::ball(1.0, 3).unwrap();
        let u = Direction::new(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(support_halfwidth(&ball, &u).unwrap(), 1.0);

        let cube = Domain::cube(1.0, 2).unwrap();
        let e1 = Direction::axis(2, 0).unwrap();
        assert_eq!(support_halfwidth(&cube, &e1).unwrap(), 1.0);

        let diag = Direction::new(&[1.0, 1.0]).unwrap();
        let h = support_halfwidth(&cube, &diag).unwrap();
        // Oracle: brute-force max over the box corners.
        let corners = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let brute = corners.iter().map(|c| diag.dot(c)).fold(f64::MIN, f64::max);
        assert_relative_eq!(h, brute, epsilon = 1e-15);
        assert_relative_eq!(h, SQRT_2, epsilon = 1e-15);

        assert!(matches!(
            support_halfwidth(&cube, &Direction::axis(3, 0).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn measure_of_ball_threshold_sets() {
        assert_relative_eq!(measure_z(&Domain::ball(1.0, 2).unwrap()).unwrap(), 4.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(measure_z(&Domain::ball(1.0, 1).unwrap()).unwrap(), 4.0, epsilon = 1e-14);
        // Linear in the radius.
        let m1 = measure_z(&Domain::ball(1.0, 3).unwrap()).unwrap();
        let m3 = measure_z(&Domain::ball(3.0, 3).unwrap()).unwrap();
        assert_relative_eq!(m3, 3.0 * m1, epsilon = 1e-12);
    }

    #[test]
    fn ball_measure_matches_hit_rate_of_random_hyperplanes() {
        // Oracle: (u, t) uniform on S^1 x [-2, 2]; the hyperplane hits B_1^2 iff it
        // passes within distance 1 of a dense point cloud in the disc.
        let mut r = rng(5);
        let cloud: Vec<[f64; 2]> = (0..400)
            .map(|i| {
                let rad = ((i % 20) as f64 + 0.5) / 20.0;
                let ang = 2.0 * PI * (i / 20) as f64 / 20.0;
                [rad * ang.cos(), rad * ang.sin()]
            })
            .chain((0..360).map(|k| {
                let a = 2.0 * PI * k as f64 / 360.0;
                [a.cos(), a.sin()]
            }))
            .collect();
        let n = 20_000;
        let mut hits = 0;
        for _ in 0..n {
            let u = sample_unit_sphere(2, &mut r).unwrap();
            let t: f64 = 4.0 * r.random::<f64>() - 2.0;
            let (lo, hi) = cloud.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
                let s = u.dot(p);
                (lo.min(s), hi.max(s))
            });
            if t >= lo && t <= hi {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let est = p * 2.0 * PI * 4.0;
        let se = (p * (1.0 - p) / n as f64).sqrt() * 8.0 * PI;
        assert!((est - 4.0 * PI).abs() < 4.0 * se + 0.02, "est {est}");
    }

    #[test]
    fn measure_of_box_threshold_set_matches_angular_quadrature() {
        // Oracle: 2 ∫_0^{2π} (|cos θ| + |sin θ|) dθ by midpoint rule.
        let n = 200_000;
        let q: f64 = (0..n)
            .map(|i| {
                let th = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                th.cos().abs() + th.sin().abs()
            })
            .sum::<f64>()
            * 2.0 * PI
            / n as f64;
        assert_relative_eq!(2.0 * q, 16.0, epsilon = 1e-6);
        assert_relative_eq!(measure_z(&Domain::cube(1.0, 2).unwrap()).unwrap(), 16.0, epsilon = 1e-12);
        assert_relative_eq!(measure_z(&Domain::cube(1.0, 1).unwrap()).unwrap(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(measure_z(&Domain::cube(0.5, 3).unwrap()).unwrap(), 6.0 * PI, epsilon = 1e-12);
    }

    fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (x - lo) / (hi - lo);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn ball_offsets_are_uniform() {
        let dom = Domain::ball(1.0, 2).unwrap();
        let mut r = rng(6);
        let n = 100_000;
        let ts: Vec<f64> = (0..n).map(|_| sample_threshold_uniform(&dom, &mut r).unwrap().t).collect();
        // 1% critical value of the Kolmogorov distribution.
        assert!(ks_uniform(ts, -1.0, 1.0) < 1.63 / (n as f64).sqrt());
    }

    #[test]
    fn one_dimensional_ball_thresholds() {
        let dom = Domain::ball(1.0, 1).unwrap();
        let mut r = rng(7);
        let n = 50_000;
        let mut plus = 0;
        let mut ts = Vec::with_capacity(n);
        for _ in 0..n {
            let p = sample_threshold_uniform(&dom, &mut r).unwrap();
            if p.u.as_slice()[0] > 0.0 {
                plus += 1;
            }
            ts.push(p.t);
        }
        assert!((plus as f64 / n as f64 - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
        assert!(ks_uniform(ts, -1.0, 1.0) < 1.63 / (n as f64).sqrt());
    }

    #[test]
    fn box_direction_density_follows_l1_norm() {
        let dom = Domain::cube(1.0, 2).unwrap();
        let mut r = rng(8);
        let n = 1_000_000;
        let bins = 24;
        let mut counts = vec![0usize; bins];
        let set = dom.threshold_set();
        for _ in 0..n {
            let p = sample_threshold_uniform(&dom, &mut r).unwrap();
            assert!(set.contains(&p).unwrap());
            let th = p.u.as_slice()[1].atan2(p.u.as_slice()[0]).rem_euclid(2.0 * PI);
            counts[((th / (2.0 * PI) * bins as f64) as usize).min(bins - 1)] += 1;
        }
        // Oracle: bin mass of density (|cos θ| + |sin θ|) / 8, integrated numerically.
        for (b, &c) in counts.iter().enumerate() {
            let (a0, a1) = (2.0 * PI * b as f64 / bins as f64, 2.0 * PI * (b + 1) as f64 / bins as f64);
            let m = 2000;
            let mass: f64 = (0..m)
                .map(|i| {
                    let th = a0 + (a1 - a0) * (i as f64 + 0.5) / m as f64;
                    th.cos().abs() + th.sin().abs()
                })
                .sum::<f64>()
                * (a1 - a0)
                / m as f64
                / 8.0;
            let expected = mass * n as f64;
            let sigma = (expected * (1.0 - mass)).sqrt();
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "bin {b}: {c} vs {expected}");
        }
    }

    #[test]
    fn box_acceptance_rate_matches_measure_ratio() {
        let dom = Domain::cube(1.0, 3).unwrap();
        let mut r = rng(9);
        let n = 200_000u64;
        let proposals: u64 = (0..n)
            .map(|_| sample_threshold_counted(&dom, &mut r, DirectionSampler::Uniform).unwrap().1)
            .sum();
        let expected = measure_z(&dom).unwrap() / 2.0 / (dom.max_halfwidth() * sphere_area(3));
        let rate = n as f64 / proposals as f64;
        // Binomial error on the acceptance fraction over all proposals.
        let sigma = (expected * (1.0 - expected) / proposals as f64).sqrt();
        assert!((rate - expected).abs() < 3.0 * sigma, "{rate} vs {expected}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let dom = Domain::cube(0.7, 3).unwrap();
        let a: Vec<_> = {
            let mut r = rng(11);
            (0..100).map(|_| sample_threshold_uniform(&dom, &mut r).unwrap()).collect()
        };
        let b: Vec<_> = {
            let mut r = rng(11);
            (0..100).map(|_| sample_threshold_uniform(&dom, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
    }
}
