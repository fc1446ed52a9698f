use crate::error::{Result, SedError};
use crate::kernels::{Boundary, GridSpec, Vec3};
use crate::kinetic::PhaseCloud;
use crate::macro_transport::steady_velocity_field;
use crate::macro_transport::SpatialCloud;

/// Transport plan as `(i, j, mass)` entries.
pub type Plan = Vec<(usize, usize, f64)>;

/// Modulated energies at one time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModulatedEnergies {
    pub t: f64,
    /// `½∫|v − g − w_λ|² df_λ`.
    pub s: f64,
    /// `½∫|X_λ − X*|² df⁰`.
    pub z: f64,
    /// `½∫|V₁ − V₂|² dγ₀`.
    pub e: f64,
    /// `½∫|X₁ − X₂|² dγ₀`.
    pub h: f64,
}

/// Pairs sample `i` with sample `i`, mass `1/n` each.
pub fn identity_plan(n: usize) -> Plan {
    (0..n).map(|i| (i, i, 1.0 / n as f64)).collect()
}

/// Pairs item `i < n` with samples `i, i + n, …, i + (m−1)n`, mass `1/(mn)` each.
pub fn replicated_plan(n: usize, m: usize) -> Plan {
    let w = 1.0 / (n * m) as f64;
    (0..m).flat_map(|r| (0..n).map(move |i| (i, i + r * n, w))).collect()
}

/// `½ ∑ γᵢⱼ |aᵢ − bⱼ|²`.
pub fn paired_energy(a: &[Vec3], b: &[Vec3], plan: &[(usize, usize, f64)]) -> Result<f64> {
    let mut s = 0.0;
    for &(i, j, w) in plan {
        let (Some(x), Some(y)) = (a.get(i), b.get(j)) else {
            return Err(SedError::invalid(format!("plan entry ({i}, {j}) out of range")));
        };
        s += w * (*x - *y).norm_squared();
    }
    Ok(0.5 * s)
}

/// `S = ½ ∑ wᵢ|vᵢ − g − w_λ(xᵢ)|²` with `w_λ = St⁻¹(ρ g)` of the cloud's own density.
pub fn s_energy(cloud: &PhaseCloud, spec: &GridSpec, boundary: Boundary) -> Result<f64> {
    let spatial = SpatialCloud { positions: cloud.positions.clone(), weights: cloud.weights.clone(), gravity: cloud.gravity, time: cloud.time };
    let field = steady_velocity_field(&spatial, spec)?.velocity;
    let mut s = 0.0;
    for ((x, v), w) in cloud.positions.iter().zip(&cloud.velocities).zip(&cloud.weights) {
        let u = crate::kernels::interpolate(&field, *x, boundary)?;
        s += w * (*v - cloud.gravity - u).norm_squared();
    }
    Ok(0.5 * s)
}
