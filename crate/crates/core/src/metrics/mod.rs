//! Wasserstein distances, transport couplings and modulated energies.

mod assignment;
mod energies;
mod fit;
mod sinkhorn;

pub use energies::{identity_plan, paired_energy, replicated_plan, s_energy, ModulatedEnergies, Plan};
pub use fit::{rate_fit, FitModel, RateFit};
pub use sinkhorn::{wasserstein2_entropic, EntropicOptions};

use rayon::prelude::*;

use crate::error::{Result, SedError};
use crate::kernels::Vec3;

/// Default largest size of an exact assignment problem.
pub const EXACT_CAP: usize = 4096;

/// A support point with a squared Euclidean ground cost.
pub trait Point: Copy + Send + Sync {
    fn dist2(&self, other: &Self) -> f64;
}

impl Point for Vec3 {
    fn dist2(&self, other: &Self) -> f64 {
        (*self - *other).norm_squared()
    }
}

/// Phase-space point `(x, v)` with cost `|x₁ − x₂|² + |v₁ − v₂|²`.
impl Point for (Vec3, Vec3) {
    fn dist2(&self, other: &Self) -> f64 {
        (self.0 - other.0).norm_squared() + (self.1 - other.1).norm_squared()
    }
}

/// Zips positions and velocities into phase-space points.
pub fn phase_points(x: &[Vec3], v: &[Vec3]) -> Vec<(Vec3, Vec3)> {
    x.iter().copied().zip(v.iter().copied()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    Exact,
    Entropic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pairing {
    /// `b`-index of each `a` sample (equal sizes, equal weights).
    Permutation(Vec<usize>),
    /// `(i, j, mass)` entries.
    Sparse(Vec<(usize, usize, f64)>),
}

/// A transport plan between two weighted point sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportCoupling {
    pub pairing: Pairing,
    /// `∑ γᵢⱼ |aᵢ − bⱼ|²`.
    pub cost: f64,
    pub mode: CouplingMode,
    /// Estimate of `𝒲₂`: `√cost` for exact plans, the debiased entropic estimate otherwise.
    pub w2: f64,
    /// Final regularisation (entropic only).
    pub eps: Option<f64>,
    /// `‖γ1 − a‖₁ + ‖γᵀ1 − b‖₁`.
    pub marginal_violation: f64,
    /// `(ε, estimate)` after each annealing stage (entropic only).
    pub stages: Vec<(f64, f64)>,
}

impl TransportCoupling {
    /// Plan entries as `(i, j, mass)`, with mass `1/n` per pair for a permutation.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        match &self.pairing {
            Pairing::Permutation(p) => {
                let w = 1.0 / p.len() as f64;
                p.iter().enumerate().map(|(i, j)| (i, *j, w)).collect()
            }
            Pairing::Sparse(e) => e.clone(),
        }
    }
}

pub(crate) fn cost_matrix<P: Point>(a: &[P], b: &[P]) -> Vec<f64> {
    let m = b.len();
    let mut c = vec![0.0; a.len() * m];
    c.par_chunks_mut(m.max(1)).zip(a.par_iter()).for_each(|(row, p)| {
        for (cij, q) in row.iter_mut().zip(b) {
            *cij = p.dist2(q);
        }
    });
    c
}

/// Exact `𝒲₂` between two uniform empirical measures.
///
/// Sizes may differ when the larger is a multiple of the smaller; the smaller
/// set is then replicated and the plan is returned in sparse form.
pub fn wasserstein2_exact<P: Point>(a: &[P], b: &[P]) -> Result<TransportCoupling> {
    wasserstein2_exact_capped(a, b, EXACT_CAP)
}

pub fn wasserstein2_exact_capped<P: Point>(a: &[P], b: &[P], cap: usize) -> Result<TransportCoupling> {
    if a.is_empty() || b.is_empty() {
        return Err(SedError::invalid("empty point set"));
    }
    let (n, m) = (a.len(), b.len());
    let size = n.max(m);
    if size > cap {
        return Err(SedError::invalid(format!("{size} points exceed the exact-mode cap {cap}; use the entropic solver")));
    }
    if n == m {
        let cost = cost_matrix(a, b);
        let perm = assignment::solve(&cost, n);
        let total = perm.iter().enumerate().map(|(i, j)| cost[i * n + j]).sum::<f64>() / n as f64;
        return Ok(TransportCoupling {
            pairing: Pairing::Permutation(perm),
            cost: total,
            mode: CouplingMode::Exact,
            w2: total.max(0.0).sqrt(),
            eps: None,
            marginal_violation: 0.0,
            stages: Vec::new(),
        });
    }
    let (small, large, swapped) = if n < m { (a, b, false) } else { (b, a, true) };
    if large.len() % small.len() != 0 {
        return Err(SedError::invalid(format!("sizes {n} and {m} are not multiples; use the entropic solver")));
    }
    let reps = large.len() / small.len();
    let expanded: Vec<P> = small.iter().flat_map(|p| std::iter::repeat_n(*p, reps)).collect();
    let square = wasserstein2_exact_capped(&expanded, large, cap)?;
    let Pairing::Permutation(perm) = &square.pairing else { unreachable!() };
    let w = 1.0 / large.len() as f64;
    let entries = perm
        .iter()
        .enumerate()
        .map(|(r, j)| if swapped { (*j, r / reps, w) } else { (r / reps, *j, w) })
        .collect();
    Ok(TransportCoupling { pairing: Pairing::Sparse(entries), ..square })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect()
    }

    #[test]
    fn identical_and_single_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = cloud(&mut rng, 20);
        let c = wasserstein2_exact(&a, &a).unwrap();
        assert_eq!(c.cost, 0.0);
        assert_eq!(c.pairing, Pairing::Permutation((0..20).collect()));
        let (x, y) = (Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.5, 3.0));
        assert!((wasserstein2_exact(&[x], &[y]).unwrap().w2 - (x - y).norm()).abs() < 1e-15);
    }

    #[test]
    fn replicated_plan_has_correct_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = cloud(&mut rng, 5);
        let b = cloud(&mut rng, 15);
        for (p, q) in [(&a, &b), (&b, &a)] {
            let c = wasserstein2_exact(p, q).unwrap();
            let mut rows = vec![0.0; p.len()];
            let mut cols = vec![0.0; q.len()];
            let mut total = 0.0;
            for (i, j, w) in c.entries() {
                rows[i] += w;
                cols[j] += w;
                total += w * p[i].dist2(&q[j]);
            }
            assert!(rows.iter().all(|r| (r - 1.0 / p.len() as f64).abs() < 1e-12));
            assert!(cols.iter().all(|r| (r - 1.0 / q.len() as f64).abs() < 1e-12));
            assert!((total - c.cost).abs() < 1e-12);
        }
        assert!((wasserstein2_exact(&a, &b).unwrap().cost - wasserstein2_exact(&b, &a).unwrap().cost).abs() < 1e-12);
    }

    #[test]
    fn cap_and_size_errors() {
        let a = vec![Vec3::ZERO; 10];
        assert!(wasserstein2_exact_capped(&a, &a, 8).is_err());
        assert!(wasserstein2_exact(&a, &a[..3]).is_err());
    }
}
