//! Brinkman solve `−Δu + ∇p = j − ρu` by damped fixed-point iteration on the Stokes operator.

use super::grid::{ScalarGrid, VectorGrid};
use super::stokes::{FluidState, StokesSolver};
use crate::error::{Result, SedError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrinkmanOptions {
    /// Stop when `‖u_{k+1} − u_k‖ / ‖u_k‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Damping `θ` in `u ← (1−θ)u + θ St⁻¹(j − ρu)`.
    pub damping: f64,
    /// Apply the divergence-cleaning projection in each Stokes solve.
    pub project: bool,
}

impl Default for BrinkmanOptions {
    fn default() -> Self {
        BrinkmanOptions { tol: 1e-8, max_iter: 500, damping: 0.5, project: false }
    }
}

/// Brinkman solve with default damping and a cold start.
pub fn brinkman_solve(rho: &ScalarGrid, j: &VectorGrid, tol: f64, max_iter: usize) -> Result<FluidState> {
    let opts = BrinkmanOptions { tol, max_iter, ..BrinkmanOptions::default() };
    brinkman_solve_with(rho, j, &opts, None)
}

/// Brinkman solve, optionally warm-started from `initial`.
///
/// The returned velocity is the undamped image `St⁻¹(j − ρu_k)` of the last iterate,
/// so it is exactly a Stokes field of the recorded force and its Dirichlet energy is
/// `h³⟨j − ρu_k, u⟩`. On non-convergence the last state is returned inside
/// [`SedError::BrinkmanNotConverged`].
pub fn brinkman_solve_with(
    rho: &ScalarGrid,
    j: &VectorGrid,
    opts: &BrinkmanOptions,
    initial: Option<&VectorGrid>,
) -> Result<FluidState> {
    if !(opts.tol > 0.0) {
        return Err(SedError::invalid(format!("tolerance must be > 0, got {}", opts.tol)));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(SedError::invalid(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    if !rho.spec.same_as(&j.spec) {
        return Err(SedError::invalid("density and momentum grids differ"));
    }
    if let Some(bad) = rho.values.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(SedError::invalid(format!("density must be finite and >= 0, found {bad}")));
    }
    let spec = j.spec;
    let solver = StokesSolver::cached(spec.n, spec.spacing(), opts.project)?;
    let theta = opts.damping;
    let mut u = match initial {
        Some(u0) if u0.spec.n == spec.n => VectorGrid { spec, values: u0.values.clone() },
        _ => VectorGrid::zeros(spec),
    };
    let mut force = VectorGrid::zeros(spec);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter.max(1) {
        for ((f, jv), (r, uv)) in force.values.iter_mut().zip(&j.values).zip(rho.values.iter().zip(&u.values)) {
            *f = *jv - *uv * *r;
        }
        let image = solver.apply(&force)?;
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for (uv, gv) in u.values.iter().zip(&image.values) {
            let next = *uv * (1.0 - theta) + *gv * theta;
            diff2 += (next - *uv).norm_squared();
            norm2 += uv.norm_squared();
        }
        residual = if diff2 == 0.0 {
            0.0
        } else if norm2 == 0.0 {
            f64::INFINITY
        } else {
            (diff2 / norm2).sqrt()
        };
        if residual <= opts.tol {
            return Ok(FluidState::from_velocity(image, &force, residual, it));
        }
        if it == opts.max_iter.max(1) {
            let state = FluidState::from_velocity(image, &force, residual, it);
            return Err(SedError::BrinkmanNotConverged(Box::new(state)));
        }
        for (uv, gv) in u.values.iter_mut().zip(&image.values) {
            *uv = *uv * (1.0 - theta) + *gv * theta;
        }
    }
    unreachable!("loop returns on its last iteration (residual {residual})")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::grid::GridSpec;
    use crate::kernels::stokes::stokes_solve;
    use crate::kernels::vec3::Vec3;

    fn bump(spec: GridSpec, sigma: f64) -> ScalarGrid {
        let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-1.5);
        ScalarGrid::from_fn(spec, |x| norm * (-x.norm_squared() / (2.0 * sigma * sigma)).exp())
    }

    #[test]
    fn vacuum_reduces_to_stokes() {
        let spec = GridSpec::centered(Vec3::ZERO, 4.0, 16).unwrap();
        let rho = ScalarGrid::zeros(spec);
        let j = VectorGrid::from_fn(spec, |x| Vec3::new(0.0, 0.0, -(-x.norm_squared()).exp()));
        let b = brinkman_solve(&rho, &j, 1e-12, 100).unwrap();
        let s = stokes_solve(&j).unwrap();
        assert_eq!(b.velocity, s.velocity);
    }

    #[test]
    fn converges_and_satisfies_fixed_point() {
        let spec = GridSpec::centered(Vec3::ZERO, 4.0, 16).unwrap();
        let rho = bump(spec, 0.4);
        let g = Vec3::new(0.0, 0.0, -1.0);
        let j = VectorGrid { spec, values: rho.values.iter().map(|r| g * *r).collect() };
        let st = brinkman_solve(&rho, &j, 1e-10, 200).unwrap();
        assert!(st.residual <= 1e-10);
        // u = St⁻¹(j − ρu) holds to the tolerance
        let force = VectorGrid {
            spec,
            values: j.values.iter().zip(&rho.values).zip(&st.velocity.values).map(|((jv, r), u)| *jv - *u * *r).collect(),
        };
        let again = stokes_solve(&force).unwrap().velocity;
        let err = again.sub(&st.velocity).l2_norm() / st.velocity.l2_norm();
        assert!(err < 1e-8, "err {err}");
        // drag slows the cloud: coercivity sign
        let lhs = j.inner(&VectorGrid { spec, values: vec![g; spec.len()] }) - j.inner(&st.velocity);
        assert!(lhs > 0.0);
    }

    #[test]
    fn reports_nonconvergence_with_state() {
        let spec = GridSpec::centered(Vec3::ZERO, 4.0, 16).unwrap();
        let rho = bump(spec, 0.4);
        let j = VectorGrid { spec, values: rho.values.iter().map(|r| Vec3::new(0.0, 0.0, *r)).collect() };
        match brinkman_solve(&rho, &j, 1e-14, 2) {
            Err(SedError::BrinkmanNotConverged(state)) => {
                assert_eq!(state.iterations, 2);
                assert!(state.residual > 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_density() {
        let spec = GridSpec::centered(Vec3::ZERO, 4.0, 8).unwrap();
        let mut rho = ScalarGrid::zeros(spec);
        rho.values[0] = -1.0;
        assert!(brinkman_solve(&rho, &VectorGrid::zeros(spec), 1e-8, 10).is_err());
    }
}
