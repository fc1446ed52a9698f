//! Free-space Stokes fundamental solution and its short-range mollification.

use std::f64::consts::PI;

use super::vec3::{Mat3, Vec3};
use crate::error::{Result, SedError};

const INV_8PI: f64 = 1.0 / (8.0 * PI);

/// Oseen tensor `(1/8π)(I/|x| + x⊗x/|x|³)`, with the zero matrix at the origin.
pub fn oseen_tensor(x: Vec3) -> Mat3 {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        return Mat3::ZERO;
    }
    let r = r2.sqrt();
    let a = INV_8PI / r;
    let b = INV_8PI / (r2 * r);
    oseen_from_coefficients(x, a, b)
}

/// Applies the Oseen tensor to `f` without forming the matrix.
#[inline]
pub fn oseen_apply(x: Vec3, f: Vec3) -> Vec3 {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        return Vec3::ZERO;
    }
    let r = r2.sqrt();
    (f * (1.0 / r) + x * (x.dot(f) / (r2 * r))) * INV_8PI
}

#[inline]
fn oseen_from_coefficients(x: Vec3, a: f64, b: f64) -> Mat3 {
    let v = x.to_array();
    let mut m = [[0.0; 3]; 3];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, e) in row.iter_mut().enumerate() {
            *e = b * (v[r] * v[c]);
        }
        row[r] += a;
    }
    Mat3(m)
}

/// Radius (in units of `eps`) beyond which the mollified tensor is exactly the Oseen tensor.
pub const BLOB_SUPPORT: f64 = 2.0;

/// Mollified Oseen tensor.
///
/// Inside `|x| < 2·eps` the tensor is `(1/8π)(ΔI − ∇∇)φ` for the even polynomial
/// `φ(r) = c₀ + c₁r² + c₂r⁴ + c₃r⁶` that matches `r` up to third derivatives at
/// `r = 2·eps`. Writing the Oseen tensor the same way with `φ = r` shows that the
/// blob is divergence-free, C² across the junction, and
/// `Φ_eps(0) = 15/(64π·eps)·I`.
pub fn oseen_regularized(x: Vec3, eps: f64) -> Result<Mat3> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(SedError::invalid(format!("regularization eps must be > 0, got {eps}")));
    }
    let b = BLOB_SUPPORT * eps;
    let r2 = x.norm_squared();
    if r2 >= b * b {
        return Ok(oseen_tensor(x));
    }
    let c1 = 15.0 / (16.0 * b);
    let c2 = -5.0 / (16.0 * b.powi(3));
    let c3 = 1.0 / (16.0 * b.powi(5));
    let iso = 4.0 * c1 + 16.0 * c2 * r2 + 36.0 * c3 * r2 * r2;
    let aniso = -8.0 * c2 - 24.0 * c3 * r2;
    Ok(oseen_from_coefficients(x, INV_8PI * iso, INV_8PI * aniso))
}
