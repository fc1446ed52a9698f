//! Microscopic N-particle sedimentation with the point-particle Oseen closure.

mod closure;
mod io;
mod stats;

use std::f64::consts::PI;

pub use closure::{ClosureOptions, ClosureSolution};
pub use stats::{check_assumptions, stats, AssumptionReport, EnsembleStats, DEFAULT_BETAS};

use closure::{solve_closure, PairTensors};

use crate::error::{Result, SedError};
use crate::kernels::Vec3;

/// State of N rigid spheres: positions, velocities, radius `R`, drag stiffness `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub radius: f64,
    pub lambda: f64,
    pub gravity: Vec3,
    pub time: f64,
    /// Seed of the sampler that produced the initial data (checkpoint metadata).
    pub seed: u64,
}

/// Radius fixed by `N·R = 1/(6π)`.
pub fn h1_radius(n: usize) -> f64 {
    1.0 / (6.0 * PI * n as f64)
}

impl ParticleEnsemble {
    /// Ensemble with the radius coupled to `N` by `N·R = 1/(6π)`.
    pub fn new(positions: Vec<Vec3>, velocities: Vec<Vec3>, lambda: f64, gravity: Vec3) -> Result<Self> {
        let r = h1_radius(positions.len().max(1));
        Self::with_radius(positions, velocities, r, lambda, gravity)
    }

    pub fn with_radius(
        positions: Vec<Vec3>,
        velocities: Vec<Vec3>,
        radius: f64,
        lambda: f64,
        gravity: Vec3,
    ) -> Result<Self> {
        if positions.len() != velocities.len() {
            return Err(SedError::invalid(format!(
                "{} positions but {} velocities",
                positions.len(),
                velocities.len()
            )));
        }
        if positions.is_empty() {
            return Err(SedError::invalid("ensemble needs at least one particle"));
        }
        if positions.iter().chain(&velocities).any(|x| !x.is_finite()) {
            return Err(SedError::invalid("non-finite particle state"));
        }
        if !(radius > 0.0) || !(lambda > 0.0) || !lambda.is_finite() {
            return Err(SedError::invalid(format!("need R > 0 and λ > 0, got R = {radius}, λ = {lambda}")));
        }
        if (gravity.norm() - 1.0).abs() > 1e-12 {
            return Err(SedError::invalid(format!("gravity must be a unit vector, |g| = {}", gravity.norm())));
        }
        let ens = ParticleEnsemble { positions, velocities, radius, lambda, gravity, time: 0.0, seed: 0 };
        if let Some((i, j, d)) = ens.closest_pair() {
            if d <= 2.0 * radius {
                return Err(SedError::Collision { i, j, distance: d, two_r: 2.0 * radius, time: 0.0, dump: None });
            }
        }
        Ok(ens)
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Whether `N·R = 1/(6π)` holds (to rounding).
    pub fn satisfies_h1(&self) -> bool {
        (self.radius * self.n() as f64 * 6.0 * PI - 1.0).abs() < 1e-12
    }

    /// Closest pair `(i, j, |Xᵢ − Xⱼ|)`; `None` for a single particle.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let n = self.n();
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let d2 = (self.positions[i] - self.positions[j]).norm_squared();
                if best.is_none_or(|b| d2 < b.2) {
                    best = Some((i, j, d2));
                }
            }
        }
        best.map(|(i, j, d2)| (i, j, d2.sqrt()))
    }

    /// Solves the closure for the current state.
    pub fn implicit_velocities(&self, opts: &ClosureOptions, warm: Option<&[Vec3]>) -> Result<ClosureSolution> {
        let pairs = PairTensors::new(&self.positions);
        solve_closure(&pairs, &self.velocities, opts, warm)
    }

    /// Forces `Fᵢ = 6πR(Vᵢ − wᵢ)`.
    pub fn forces(&self, w: &[Vec3]) -> Result<Vec<Vec3>> {
        if w.len() != self.n() {
            return Err(SedError::invalid(format!("{} closure velocities for {} particles", w.len(), self.n())));
        }
        let c = 6.0 * PI * self.radius;
        Ok(self.velocities.iter().zip(w).map(|(v, wi)| (*v - *wi) * c).collect())
    }

    /// Accelerations `λ(g + wᵢ − Vᵢ)`.
    pub fn accelerations(&self, w: &[Vec3]) -> Vec<Vec3> {
        self.velocities.iter().zip(w).map(|(v, wi)| (self.gravity + *wi - *v) * self.lambda).collect()
    }
}

/// Options of a microscopic time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroOptions {
    pub closure: ClosureOptions,
    /// With `false` the closure is skipped and `w ≡ 0`.
    pub interactions: bool,
}

impl Default for MicroOptions {
    fn default() -> Self {
        MicroOptions { closure: ClosureOptions::default(), interactions: true }
    }
}

/// Default time step `min(0.01, 1/(4λ))`.
pub fn default_dt(lambda: f64) -> f64 {
    0.01f64.min(0.25 / lambda)
}

/// Outcome of one step: the new state and the closure used over the step.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroStep {
    pub ensemble: ParticleEnsemble,
    pub w: Vec<Vec3>,
    pub closure_iterations: usize,
}

/// Exact update of `Ẋ = V`, `V̇ = λ(a − V)` for constant `a` over `dt`.
#[inline]
pub fn relax(x: Vec3, v: Vec3, a: Vec3, lambda: f64, dt: f64) -> (Vec3, Vec3) {
    let decay = (-lambda * dt).exp();
    let one_minus = -(-lambda * dt).exp_m1();
    let dv = v - a;
    (x + a * dt + dv * (one_minus / lambda), a + dv * decay)
}

/// Advances the ensemble by `dt` with `w` frozen over the step, then re-checks no-touch.
pub fn step(ens: &ParticleEnsemble, dt: f64, opts: &MicroOptions, warm: Option<&[Vec3]>) -> Result<MicroStep> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SedError::invalid(format!("dt must be > 0, got {dt}")));
    }
    let (w, closure_iterations) = if opts.interactions {
        let sol = ens.implicit_velocities(&opts.closure, warm)?;
        (sol.w, sol.iterations)
    } else {
        (vec![Vec3::ZERO; ens.n()], 0)
    };
    let mut next = ens.clone();
    for ((x, v), wi) in next.positions.iter_mut().zip(next.velocities.iter_mut()).zip(&w) {
        let (x1, v1) = relax(*x, *v, ens.gravity + *wi, ens.lambda, dt);
        *x = x1;
        *v = v1;
    }
    next.time = ens.time + dt;
    if let Some((i, j, d)) = next.closest_pair() {
        if d <= 2.0 * next.radius {
            return Err(SedError::Collision { i, j, distance: d, two_r: 2.0 * next.radius, time: next.time, dump: None });
        }
    }
    Ok(MicroStep { ensemble: next, w, closure_iterations })
}

impl ParticleEnsemble {
    /// One step with default options.
    pub fn step(&self, dt: f64) -> Result<ParticleEnsemble> {
        Ok(step(self, dt, &MicroOptions::default(), None)?.ensemble)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Vec3 {
        Vec3::new(0.0, 0.0, -1.0)
    }

    #[test]
    fn single_particle_closed_form() {
        let ens = ParticleEnsemble::new(vec![Vec3::ZERO], vec![Vec3::ZERO], 10.0, g()).unwrap();
        let next = ens.step(0.1).unwrap();
        let expect = -(1.0 - (-1.0f64).exp());
        assert!((next.velocities[0].z - expect).abs() < 1e-15);
        assert!((next.velocities[0].z + 0.63212).abs() < 1e-5);
        assert_eq!(next.time, 0.1);
    }

    #[test]
    fn stiff_limit_relaxes_instantly() {
        let ens = ParticleEnsemble::new(vec![Vec3::ZERO], vec![Vec3::new(5.0, 0.0, 0.0)], 1e6, g()).unwrap();
        let next = ens.step(0.1).unwrap();
        assert!((next.velocities[0] - g()).max_abs() < 1e-12);
    }

    #[test]
    fn forces_and_accelerations_agree() {
        let ens = ParticleEnsemble::new(
            vec![Vec3::ZERO, Vec3::new(0.3, 0.1, 0.0), Vec3::new(-0.2, 0.4, 0.1)],
            vec![Vec3::new(0.1, 0.0, -1.0), Vec3::ZERO, Vec3::new(0.0, 0.2, 0.3)],
            5.0,
            g(),
        )
        .unwrap();
        let w = ens.implicit_velocities(&ClosureOptions::default(), None).unwrap().w;
        let f = ens.forces(&w).unwrap();
        let a = ens.accelerations(&w);
        for i in 0..3 {
            // λ(g − F/(6πR)) = λ(g + w − V); with H1, N·F = V − w
            let lhs = (ens.gravity - f[i] * (1.0 / (6.0 * PI * ens.radius))) * ens.lambda;
            assert!((lhs - a[i]).max_abs() < 1e-12);
            assert!((f[i] * 3.0 - (ens.velocities[i] - w[i])).max_abs() < 1e-12);
        }
        assert!(ens.forces(&w[..2]).is_err());
        // force-free suspension
        let f0 = ens.forces(&ens.velocities).unwrap();
        assert!(f0.iter().all(|x| *x == Vec3::ZERO));
    }

    #[test]
    fn touching_initial_data_rejected() {
        let r = h1_radius(2);
        let err = ParticleEnsemble::new(vec![Vec3::ZERO, Vec3::new(1.9 * r, 0.0, 0.0)], vec![Vec3::ZERO; 2], 1.0, g());
        assert!(matches!(err, Err(SedError::Collision { .. })));
    }

    #[test]
    fn rejects_non_unit_gravity() {
        assert!(ParticleEnsemble::new(vec![Vec3::ZERO], vec![Vec3::ZERO], 1.0, Vec3::new(0.0, 0.0, 2.0)).is_err());
    }
}
