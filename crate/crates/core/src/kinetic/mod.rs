//! Particle method for the Vlasov–Stokes equation.

mod budget;
mod cloud;
mod jacobian;
mod moments;

pub use budget::{energy_budget, BudgetSeries, EnergyBudget};
pub use cloud::PhaseCloud;
pub(crate) use cloud::check_weights;
pub use jacobian::{jacobian_check, FieldHistory, FieldRecord, JacobianProbe, JacobianReport};
pub use moments::{moments, MomentReport, DEFAULT_K, DEFAULT_K_SET};

use rayon::prelude::*;

use crate::error::{Result, SedError};
use crate::kernels::{brinkman_solve_with, interpolate, Boundary, BrinkmanOptions, FluidState, GridSpec, Vec3, VectorGrid};
use crate::micro::relax;

/// Options of a kinetic time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticOptions {
    pub brinkman: BrinkmanOptions,
    /// With `false` the fluid is not solved and `u ≡ 0`.
    pub coupling: bool,
    pub boundary: Boundary,
    /// Recentre the grid on the cloud's centre of mass before each step.
    pub follow: bool,
}

impl Default for KineticOptions {
    fn default() -> Self {
        KineticOptions { brinkman: BrinkmanOptions::default(), coupling: true, boundary: Boundary::Strict, follow: true }
    }
}

/// Result of [`vlasov_step`]. `fluid` and `budget` refer to the state at the start of the step.
#[derive(Debug, Clone)]
pub struct KineticStep {
    pub cloud: PhaseCloud,
    pub fluid: FluidState,
    pub budget: EnergyBudget,
    /// `u` interpolated at each sample at the start of the step.
    pub sample_velocity: Vec<Vec3>,
}

/// Grid used for `cloud`: `spec` itself, or `spec` recentred on the centre of mass.
pub fn grid_for(cloud: &PhaseCloud, spec: &GridSpec, follow: bool) -> GridSpec {
    if follow {
        spec.recentered(cloud.center_of_mass())
    } else {
        *spec
    }
}

/// Deposits the cloud and solves the Brinkman problem for its moments.
pub fn fluid_for(
    cloud: &PhaseCloud,
    spec: &GridSpec,
    opts: &KineticOptions,
    warm: Option<&VectorGrid>,
) -> Result<FluidState> {
    if !opts.coupling {
        return Ok(FluidState::zero(*spec));
    }
    let (rho, j) = cloud.deposit(spec, opts.boundary)?;
    brinkman_solve_with(&rho, &j, &opts.brinkman, warm)
}

/// One step: deposit, Brinkman solve, exact drag relaxation of every sample in the frozen field.
pub fn vlasov_step(
    cloud: &PhaseCloud,
    spec: &GridSpec,
    dt: f64,
    opts: &KineticOptions,
    warm: Option<&VectorGrid>,
) -> Result<KineticStep> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SedError::invalid(format!("dt must be > 0, got {dt}")));
    }
    let spec = grid_for(cloud, spec, opts.follow);
    let fluid = fluid_for(cloud, &spec, opts, warm)?;
    let sample_velocity = sample_field(cloud, &fluid.velocity, opts)?;
    let (lambda, g) = (cloud.lambda, cloud.gravity);
    let pushed: Vec<(Vec3, Vec3)> = cloud
        .positions
        .par_iter()
        .zip(cloud.velocities.par_iter())
        .zip(sample_velocity.par_iter())
        .map(|((x, v), u)| relax(*x, *v, g + *u, lambda, dt))
        .collect();
    let mut next = cloud.clone();
    for ((x, v), (x1, v1)) in next.positions.iter_mut().zip(next.velocities.iter_mut()).zip(pushed) {
        *x = x1;
        *v = v1;
    }
    next.time = cloud.time + dt;
    let mut budget = energy_budget(cloud, &fluid, &sample_velocity);
    budget.set_derivative((next.velocity_moment(2.0) - budget.m2) / (2.0 * dt));
    Ok(KineticStep { cloud: next, fluid, budget, sample_velocity })
}

fn sample_field(cloud: &PhaseCloud, field: &VectorGrid, opts: &KineticOptions) -> Result<Vec<Vec3>> {
    if !opts.coupling {
        return Ok(vec![Vec3::ZERO; cloud.len()]);
    }
    cloud.positions.par_iter().map(|x| interpolate(field, *x, opts.boundary)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Vec3 {
        Vec3::new(0.0, 0.0, -1.0)
    }

    #[test]
    fn decoupled_step_relaxes_in_closed_form() {
        let v0 = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 1.0)];
        let cloud = PhaseCloud::uniform(vec![Vec3::ZERO, Vec3::new(0.5, 0.0, 0.0)], v0.clone(), 20.0, g()).unwrap();
        let spec = GridSpec::centered(Vec3::ZERO, 4.0, 16).unwrap();
        let opts = KineticOptions { coupling: false, ..KineticOptions::default() };
        let out = vlasov_step(&cloud, &spec, 0.05, &opts, None).unwrap();
        let decay = (-1.0f64).exp();
        for (v, v_init) in out.cloud.velocities.iter().zip(&v0) {
            assert!((*v - (g() + (*v_init - g()) * decay)).max_abs() < 1e-14);
        }
        assert_eq!(out.cloud.weights, cloud.weights);
    }

    #[test]
    fn resting_monokinetic_cloud_has_no_flow() {
        let xs: Vec<Vec3> = (0..20).map(|i| Vec3::new(0.05 * i as f64 - 0.5, 0.02 * i as f64, 0.0)).collect();
        let cloud = PhaseCloud::uniform(xs, vec![Vec3::ZERO; 20], 10.0, g()).unwrap();
        let spec = GridSpec::centered(Vec3::ZERO, 4.0, 16).unwrap();
        let out = vlasov_step(&cloud, &spec, 0.01, &KineticOptions::default(), None).unwrap();
        assert_eq!(out.fluid.velocity.max_norm(), 0.0);
        let b = out.budget;
        assert_eq!((b.m2, b.grad_term, b.friction_term, b.gravity_term), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn sample_leaving_grid_is_domain_exhaustion() {
        let cloud = PhaseCloud::uniform(vec![Vec3::ZERO, Vec3::new(3.0, 0.0, 0.0)], vec![g(); 2], 10.0, g()).unwrap();
        let spec = GridSpec::centered(Vec3::ZERO, 2.0, 8).unwrap();
        let err = vlasov_step(&cloud, &spec, 0.01, &KineticOptions::default(), None).unwrap_err();
        assert!(matches!(err, SedError::DomainExhausted(_)));
    }
}
