//! Deterministic quadrature on the cylinder `S^{d-1} x R` for integrands
//! built from correction kernels `k_{x_j}(u, t)`.
//!
//! For fixed `u` each kernel is piecewise linear in `t` with breakpoints at
//! `0` and `u.x_j`, and vanishes outside `[min(0, u.x_j), max(0, u.x_j)]`, so
//! the `t` integral is split into Gauss–Legendre panels at those points.
//! Along the sphere the integrand has kinks where some `u.x_j` or
//! `u.x_j - u.x_l` changes sign; those great circles become panel edges too.
//!
//! * d = 1: the two directions `±1`, weight 1 each.
//! * d = 2: Gauss–Legendre panels in the angle, split at the kink angles.
//! * d = 3: spherical coordinates whose polar axis is normal to the plane
//!   spanned by the points, so every kink circle is a meridian; Gauss–Legendre
//!   panels in longitude (split at the meridians) times two Gauss–Legendre
//!   panels in colatitude. Points that do not fit in one plane leave some
//!   kinks inside panels and convergence becomes algebraic.
//! * d >= 4: equal-weight quasi-Monte-Carlo nodes (Halton sequence pushed
//!   through the normal quantile and normalized). The error is that of a
//!   QMC rule for piecewise smooth integrands, roughly `O(log(M)^d / M)` with
//!   `M` nodes; compare two node counts for an estimate.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{AddAssign, Mul};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geometry::Direction;
use crate::numeric::{dot, norm, sphere_area, GaussLegendre};
use crate::process::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureResolution {
    /// Gauss–Legendre nodes per angular (longitude) panel.
    pub angular_nodes: usize,
    /// Angular panels are at most `2 pi / min_angular_panels` wide.
    pub min_angular_panels: usize,
    /// Gauss–Legendre nodes per colatitude half (d = 3).
    pub polar_nodes: usize,
    /// Gauss–Legendre nodes per `t` panel.
    pub t_nodes: usize,
    /// Number of QMC directions for d >= 4.
    pub qmc_nodes: usize,
}

impl Default for QuadratureResolution {
    fn default() -> Self {
        Self {
            angular_nodes: 20,
            min_angular_panels: 8,
            polar_nodes: 20,
            t_nodes: 24,
            qmc_nodes: 1 << 15,
        }
    }
}

impl QuadratureResolution {
    pub fn doubled(&self) -> Self {
        Self {
            angular_nodes: 2 * self.angular_nodes,
            min_angular_panels: 2 * self.min_angular_panels,
            polar_nodes: 2 * self.polar_nodes,
            t_nodes: 2 * self.t_nodes,
            qmc_nodes: 2 * self.qmc_nodes,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CylinderQuadrature {
    d: usize,
    resolution: QuadratureResolution,
    angular: GaussLegendre,
    polar: GaussLegendre,
    t_rule: GaussLegendre,
}

impl CylinderQuadrature {
    pub fn new(d: usize, resolution: QuadratureResolution) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let r = resolution;
        if r.angular_nodes == 0 || r.min_angular_panels == 0 || r.polar_nodes == 0 || r.t_nodes == 0 || r.qmc_nodes == 0 {
            return Err(Error::InvalidParameter("quadrature resolutions must be positive".into()));
        }
        Ok(Self {
            d,
            resolution,
            angular: GaussLegendre::new(r.angular_nodes),
            polar: GaussLegendre::new(r.polar_nodes),
            t_rule: GaussLegendre::new(r.t_nodes),
        })
    }

    pub fn with_default(d: usize) -> Result<Self> {
        Self::new(d, QuadratureResolution::default())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> QuadratureResolution {
        self.resolution
    }

    pub fn refined(&self) -> Self {
        Self::new(self.d, self.resolution.doubled()).expect("doubling keeps a valid resolution")
    }

    fn check_points(&self, points: &[Vec<f64>]) -> Result<()> {
        for p in points {
            if p.len() != self.d {
                return Err(Error::DimensionMismatch {
                    expected: self.d,
                    got: p.len(),
                });
            }
        }
        Ok(())
    }

    /// Sphere nodes and weights adapted to the kinks generated by `points`.
    /// Weights always sum to `|S^{d-1}|`.
    pub fn sphere_rule(&self, points: &[Vec<f64>]) -> Result<Vec<(Direction, f64)>> {
        self.check_points(points)?;
        match self.d {
            1 => Ok(vec![(Direction::axis(1, 0)?, 1.0), (Direction::new(&[-1.0])?, 1.0)]),
            2 => {
                let frame = [[1.0, 0.0], [0.0, 1.0]];
                let kinks = kink_angles(points, &frame);
                let mut rule = Vec::new();
                for (a, b) in self.angular_panels(kinks) {
                    for (phi, w) in self.angular.mapped(a, b) {
                        rule.push((Direction::new(&[phi.cos(), phi.sin()])?, w));
                    }
                }
                Ok(rule)
            }
            3 => self.sphere_rule_3d(points),
            d => self.qmc_rule(d),
        }
    }

    fn angular_panels(&self, mut cuts: Vec<f64>) -> Vec<(f64, f64)> {
        let m = self.resolution.min_angular_panels;
        cuts.extend((0..m).map(|i| 2.0 * PI * i as f64 / m as f64));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        let mut panels = Vec::with_capacity(cuts.len());
        for i in 0..cuts.len() {
            let a = cuts[i];
            let b = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + 2.0 * PI };
            if b - a > 1e-13 {
                panels.push((a, b));
            }
        }
        panels
    }

    fn sphere_rule_3d(&self, points: &[Vec<f64>]) -> Result<Vec<(Direction, f64)>> {
        let [e1, e2, e3] = adapted_frame(points);
        let kinks = kink_angles(points, &[&e1, &e2]);
        let mut rule = Vec::new();
        let polar_panels = [(0.0, FRAC_PI_2), (FRAC_PI_2, PI)];
        for (a, b) in self.angular_panels(kinks) {
            for (phi, wp) in self.angular.mapped(a, b) {
                let (sp, cp) = phi.sin_cos();
                for &(ta, tb) in &polar_panels {
                    for (theta, wt) in self.polar.mapped(ta, tb) {
                        let (st, ct) = theta.sin_cos();
                        let u: Vec<f64> = (0..3).map(|i| st * cp * e1[i] + st * sp * e2[i] + ct * e3[i]).collect();
                        rule.push((Direction::new(&u)?, wp * wt * st));
                    }
                }
            }
        }
        Ok(rule)
    }

    fn qmc_rule(&self, d: usize) -> Result<Vec<(Direction, f64)>> {
        let m = self.resolution.qmc_nodes;
        let normal = Normal::standard();
        let primes = first_primes(d);
        let w = sphere_area(d) / m as f64;
        (1..=m)
            .map(|i| {
                let g: Vec<f64> = primes
                    .iter()
                    .map(|&p| normal.inverse_cdf(radical_inverse(i as u64, p)))
                    .collect();
                Ok((Direction::new(&g)?, w))
            })
            .collect()
    }

    /// `∫_{S^{d-1}} ∫_R f(k_{x_1}(u,t), ..., k_{x_m}(u,t)) dt du`.
    ///
    /// `f` must vanish when all kernel values are zero; the `t` integral is
    /// truncated to the union of the kernels' supports.
    pub fn integrate<T, F>(&self, points: &[Vec<f64>], f: F) -> Result<T>
    where
        T: Copy + Default + AddAssign + Mul<f64, Output = T>,
        F: Fn(&[f64]) -> T,
    {
        self.integrate_with_kernel(points, Kernel::Exact, f)
    }

    pub(crate) fn integrate_with_kernel<T, F>(&self, points: &[Vec<f64>], kernel: Kernel, f: F) -> Result<T>
    where
        T: Copy + Default + AddAssign + Mul<f64, Output = T>,
        F: Fn(&[f64]) -> T,
    {
        let rule = self.sphere_rule(points)?;
        let m = points.len();
        let mut proj = vec![0.0; m];
        let mut kvals = vec![0.0; m];
        let mut cuts: Vec<f64> = Vec::with_capacity(m + 1);
        let mut total = T::default();
        for (u, wu) in &rule {
            for (p, x) in proj.iter_mut().zip(points) {
                *p = u.dot(x);
            }
            cuts.clear();
            cuts.push(0.0);
            cuts.extend_from_slice(&proj);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut inner = T::default();
            for w in cuts.windows(2) {
                for (t, wt) in self.t_rule.mapped(w[0], w[1]) {
                    for (k, &a) in kvals.iter_mut().zip(&proj) {
                        *k = kernel.eval_projected(a, t);
                    }
                    inner += f(&kvals) * wt;
                }
            }
            total += inner * *wu;
        }
        Ok(total)
    }

    /// `∫_{S^{d-1}} ∫_{-h}^{h} f(u, t) dt du` for an integrand smooth in `t`
    /// on each half-line.
    pub fn integrate_band<F>(&self, half_width: f64, f: F) -> Result<f64>
    where
        F: Fn(&Direction, f64) -> f64,
    {
        let rule = self.sphere_rule(&[])?;
        let mut total = 0.0;
        for (u, wu) in &rule {
            let a: f64 = self.t_rule.integrate(-half_width, 0.0, |t| f(u, t));
            let b: f64 = self.t_rule.integrate(0.0, half_width, |t| f(u, t));
            total += (a + b) * wu;
        }
        Ok(total)
    }
}

/// Angles (in the plane spanned by `frame`) of the great circles where some
/// `u.x_j` or `u.(x_j - x_l)` vanishes.
fn kink_angles(points: &[Vec<f64>], frame: &[impl AsRef<[f64]>; 2]) -> Vec<f64> {
    let mut normals: Vec<Vec<f64>> = points.to_vec();
    for (j, a) in points.iter().enumerate() {
        for b in &points[j + 1..] {
            normals.push(a.iter().zip(b).map(|(x, y)| x - y).collect());
        }
    }
    let mut angles = Vec::new();
    for v in normals {
        let (c1, c2) = (dot(&v, frame[0].as_ref()), dot(&v, frame[1].as_ref()));
        if c1.hypot(c2) <= 1e-14 * norm(&v).max(f64::MIN_POSITIVE) || c1.hypot(c2) == 0.0 {
            continue;
        }
        let psi = c2.atan2(c1);
        for shift in [FRAC_PI_2, -FRAC_PI_2] {
            angles.push((psi + shift).rem_euclid(2.0 * PI));
        }
    }
    angles
}

/// Orthonormal frame whose first two axes span the points (when they are
/// coplanar through the origin).
fn adapted_frame(points: &[Vec<f64>]) -> [Vec<f64>; 3] {
    let mut candidates: Vec<Vec<f64>> = points.iter().filter(|p| norm(p) > 0.0).cloned().collect();
    for (j, a) in points.iter().enumerate() {
        for b in &points[j + 1..] {
            let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            if norm(&diff) > 0.0 {
                candidates.push(diff);
            }
        }
    }
    let first = candidates
        .iter()
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .cloned()
        .unwrap_or_else(|| vec![1.0, 0.0, 0.0]);
    let e1 = scaled(&first, 1.0 / norm(&first));
    let orth = |v: &Vec<f64>| {
        let c = dot(v, &e1);
        v.iter().zip(&e1).map(|(a, b)| a - c * b).collect::<Vec<f64>>()
    };
    let second = candidates
        .iter()
        .map(orth)
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .filter(|v| norm(v) > 1e-12 * norm(&first))
        .unwrap_or_else(|| {
            // any vector orthogonal to e1
            let k = (0..3).min_by(|&i, &j| e1[i].abs().total_cmp(&e1[j].abs())).unwrap_or(0);
            let mut axis = vec![0.0; 3];
            axis[k] = 1.0;
            orth(&axis)
        });
    let e2 = scaled(&second, 1.0 / norm(&second));
    let e3 = vec![
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ];
    [e1, e2, e3]
}

fn scaled(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|x| x * c).collect()
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut k = 2u64;
    while primes.len() < n {
        if primes.iter().all(|p| k % p != 0) {
            primes.push(k);
        }
        k += 1;
    }
    primes
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_weights_sum_to_area() {
        let pts = vec![vec![0.3, -0.2, 0.5], vec![-0.1, 0.7, 0.0]];
        for d in 1..=5 {
            let q = CylinderQuadrature::with_default(d).unwrap();
            let sub: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().cycle().take(d).cloned().collect()).collect();
            for set in [vec![], sub] {
                let total: f64 = q.sphere_rule(&set).unwrap().iter().map(|(_, w)| w).sum();
                assert_relative_eq!(total, sphere_area(d), max_relative = 1e-10);
                let band = q.integrate_band(1.0, |_, _| 1.0).unwrap();
                assert_relative_eq!(band, 2.0 * sphere_area(d), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn sphere_rule_integrates_polynomials() {
        // ∫_{S^2} u_1^2 du = 4π/3, ∫_{S^1} u_1^4 du = 3π/4
        let q3 = CylinderQuadrature::with_default(3).unwrap();
        let got: f64 = q3
            .sphere_rule(&[vec![0.2, 0.5, -0.3]])
            .unwrap()
            .iter()
            .map(|(u, w)| u.as_slice()[0].powi(2) * w)
            .sum();
        assert_relative_eq!(got, 4.0 * PI / 3.0, max_relative = 1e-12);
        let q2 = CylinderQuadrature::with_default(2).unwrap();
        let got: f64 = q2.sphere_rule(&[]).unwrap().iter().map(|(u, w)| u.as_slice()[0].powi(4) * w).sum();
        assert_relative_eq!(got, 0.75 * PI, max_relative = 1e-12);
    }

    #[test]
    fn qmc_rule_is_roughly_uniform() {
        let q = CylinderQuadrature::with_default(4).unwrap();
        let got: f64 = q.sphere_rule(&[]).unwrap().iter().map(|(u, w)| u.as_slice()[2].powi(2) * w).sum();
        // ∫_{S^3} u_3^2 = |S^3| / 4
        assert_relative_eq!(got, sphere_area(4) / 4.0, max_relative = 1e-2);
    }

    #[test]
    fn kernel_integral_matches_closed_form() {
        // ∫ k_x dt = (u.x)^2 / 2, so ∬ k_x = |x|^2 |S^{d-1}| / (2d).
        for d in 1..=3 {
            let q = CylinderQuadrature::with_default(d).unwrap();
            let x: Vec<f64> = (0..d).map(|i| 0.3 + 0.2 * i as f64).collect();
            let got: f64 = q.integrate(&[x.clone()], |k| k[0]).unwrap();
            let want = dot(&x, &x) * sphere_area(d) / (2.0 * d as f64);
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let q = CylinderQuadrature::with_default(2).unwrap();
        assert!(matches!(
            q.integrate(&[vec![1.0, 2.0, 3.0]], |k| k[0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
