use super::PhaseCloud;
use crate::error::Result;
use crate::kernels::{Boundary, GridSpec};

/// Default moment order `K` (must exceed 9).
pub const DEFAULT_K: f64 = 9.5;

pub const DEFAULT_K_SET: [f64; 6] = [0.0, 1.0, 2.0, 3.0, 9.0, DEFAULT_K];

/// Velocity moments and grid norms of the spatial density.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    /// `(k, M_k)` with `M_k = ∑ wᵢ|vᵢ|^k`.
    pub m: Vec<(f64, f64)>,
    /// `(p, ‖ρ‖_p)` for the deposited density.
    pub lp_rho: Vec<(f64, f64)>,
}

impl MomentReport {
    pub fn m(&self, k: f64) -> Option<f64> {
        self.m.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }

    pub fn lp(&self, p: f64) -> Option<f64> {
        self.lp_rho.iter().find(|(pp, _)| *pp == p).map(|(_, v)| *v)
    }
}

/// `M_k` for each `k` in `k_set` and `‖ρ‖_p` (grid quadrature) for each `p` in `p_set`.
pub fn moments(
    cloud: &PhaseCloud,
    k_set: &[f64],
    spec: &GridSpec,
    p_set: &[f64],
    boundary: Boundary,
) -> Result<MomentReport> {
    let m = k_set.iter().map(|k| (*k, cloud.velocity_moment(*k))).collect();
    let lp_rho = if p_set.is_empty() {
        Vec::new()
    } else {
        let (rho, _) = cloud.deposit(spec, boundary)?;
        p_set.iter().map(|p| (*p, rho.lp_norm(*p))).collect()
    };
    Ok(MomentReport { m, lp_rho })
}
