//! Predictions for the process: mean, autocovariance (closed form and as a
//! cylinder integral), pointwise cumulants, finite-dimensional characteristic
//! functions, and the scale of the stable wide-width limit.
//!
//! Cylinder integrals use the surface measure on `S^{d-1}` (counting measure
//! for d = 1), which is the measure the sampler draws thresholds from. The
//! closed-form autocovariance comes from the Riesz-potential identity, whose
//! Radon-domain normalization contributes the factor `2 (2 pi)^{d-1}`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{dot, norm, sphere_area};
use crate::quadrature::CylinderQuadrature;
use crate::weight_laws::{levy_exponent, WeightLaw};

/// `A = Gamma(-3/2) / (2^{d+3} pi^{d/2} Gamma((d+3)/2))`, the constant of
/// the radial Green's function `A |x|^3` of `(-Delta)^{(d+3)/2}`.
pub fn coeff_a(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let gamma_m32 = 4.0 * PI.sqrt() / 3.0;
    let df = d as f64;
    Ok(gamma_m32 / (2f64.powi(d as i32 + 3) * PI.powf(df / 2.0) * statrs::function::gamma::gamma((df + 3.0) / 2.0)))
}

/// `2 (2 pi)^{d-1}`: `R* R = 2 (2 pi)^{d-1} (-Delta)^{-(d-1)/2}` with the
/// unnormalized surface measure.
pub fn radon_normalization(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    Ok(2.0 * (2.0 * PI).powi(d as i32 - 1))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")))
    }
}

fn check_same_dim(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidDimension(0));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(())
}

fn check_second_moment(second_moment: f64) -> Result<()> {
    if second_moment.is_finite() && second_moment >= 0.0 {
        Ok(())
    } else {
        Err(Error::InfiniteMoment {
            order: 2,
            law: format!("law with E[V^2] = {second_moment}"),
        })
    }
}

/// `E[s(x)] = lambda E[V] ∬ k_x(u, t) du dt`, by quadrature.
pub fn mean_pointwise(x: &[f64], lambda: f64, law: &WeightLaw, quad: &CylinderQuadrature) -> Result<f64> {
    check_lambda(lambda)?;
    law.validate()?;
    let mean = law.moments().mean;
    let integral: f64 = quad.integrate(&[x.to_vec()], |k| k[0])?;
    Ok(lambda * mean * integral)
}

/// Closed form of [`mean_pointwise`]: `∫ k_x dt = (u.x)^2 / 2`, so
/// `E[s(x)] = lambda E[V] |x|^2 |S^{d-1}| / (2 d)`.
pub fn mean_closed(x: &[f64], lambda: f64, mean_v: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if x.is_empty() {
        return Err(Error::InvalidDimension(0));
    }
    let d = x.len();
    Ok(lambda * mean_v * dot(x, x) * sphere_area(d) / (2.0 * d as f64))
}

/// Closed-form autocovariance
/// `c_d A lambda E[V^2] (|x-y|^3 - |x|^3 - |y|^3 + 3 x.y (|x| + |y|))`
/// with `c_d = 2 (2 pi)^{d-1}`.
pub fn autocov_closed(x: &[f64], y: &[f64], lambda: f64, second_moment: f64) -> Result<f64> {
    check_same_dim(x, y)?;
    check_lambda(lambda)?;
    check_second_moment(second_moment)?;
    let d = x.len();
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let (nx, ny) = (norm(x), norm(y));
    let shape = norm(&diff).powi(3) - nx.powi(3) - ny.powi(3) + 3.0 * dot(x, y) * (nx + ny);
    Ok(radon_normalization(d)? * coeff_a(d)? * lambda * second_moment * shape)
}

/// Autocovariance as the cylinder integral
/// `lambda E[V^2] ∬ k_x(u,t) k_y(u,t) du dt`.
pub fn autocov_quadrature(
    x: &[f64],
    y: &[f64],
    lambda: f64,
    second_moment: f64,
    quad: &CylinderQuadrature,
) -> Result<f64> {
    check_same_dim(x, y)?;
    check_lambda(lambda)?;
    check_second_moment(second_moment)?;
    let integral: f64 = quad.integrate(&[x.to_vec(), y.to_vec()], |k| k[0] * k[1])?;
    Ok(lambda * second_moment * integral)
}

/// `n`-th cumulant of `s(x)`: `lambda E[V^n] ∬ k_x^n du dt` for `n` in 1..=4.
pub fn cumulant_pointwise(n: u32, x: &[f64], lambda: f64, law: &WeightLaw, quad: &CylinderQuadrature) -> Result<f64> {
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidParameter(format!("cumulant order must be in 1..=4, got {n}")));
    }
    check_lambda(lambda)?;
    law.validate()?;
    let moment = law.finite_moment(n)?;
    let integral: f64 = quad.integrate(&[x.to_vec()], |k| k[0].powi(n as i32))?;
    Ok(lambda * moment * integral)
}

/// Joint characteristic function of `(s(x_1), ..., s(x_m))` at `xi`:
/// `exp(∬ Psi(sum_j xi_j k_{x_j}(u,t)) du dt)` with the law's Lévy exponent.
pub fn cf_predict(
    points: &[Vec<f64>],
    xi: &[f64],
    lambda: f64,
    law: &WeightLaw,
    quad: &CylinderQuadrature,
) -> Result<Complex64> {
    if points.is_empty() || xi.is_empty() {
        return Err(Error::InvalidParameter("cf_predict needs at least one point".into()));
    }
    if points.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: xi.len(),
        });
    }
    check_lambda(lambda)?;
    law.validate()?;
    let exponent: Complex64 = quad.integrate(points, |k| {
        let s: f64 = k.iter().zip(xi).map(|(a, b)| a * b).sum();
        levy_exponent(law, lambda, s)
    })?;
    Ok(exponent.exp())
}

/// Scale of the symmetric `alpha`-stable limit marginal at `x`:
/// `b (∬ |k_x|^alpha du dt)^{1/alpha}`. At `alpha = 2` the limit is
/// Gaussian with variance `2 scale^2`.
pub fn stable_marginal_scale(x: &[f64], alpha: f64, b: f64, quad: &CylinderQuadrature) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (1, 2], got {alpha}")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("b must be positive, got {b}")));
    }
    let integral: f64 = quad.integrate(&[x.to_vec()], |k| k[0].abs().powf(alpha))?;
    Ok(b * integral.powf(1.0 / alpha))
}

/// Joint characteristic function of the stable wide-width limit at
/// `(x_1, ..., x_m)`: `exp(-b^alpha ∬ |sum_j xi_j k_{x_j}(u,t)|^alpha du dt)`.
pub fn stable_limit_cf(points: &[Vec<f64>], xi: &[f64], alpha: f64, b: f64, quad: &CylinderQuadrature) -> Result<f64> {
    if points.is_empty() || points.len() != xi.len() {
        return Err(Error::InvalidParameter("stable_limit_cf needs one frequency per point".into()));
    }
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (1, 2], got {alpha}")));
    }
    let integral: f64 = quad.integrate(points, |k| {
        let s: f64 = k.iter().zip(xi).map(|(a, b)| a * b).sum();
        s.abs().powf(alpha)
    })?;
    Ok((-b.powf(alpha) * integral).exp())
}
