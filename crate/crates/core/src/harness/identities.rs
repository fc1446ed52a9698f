//! Quick numerical self-checks run by the `check-identities` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::runs::{run_vlasov, Schedule, VlasovSettings, GRAVITY};
use super::sampling::{sample_initial, Family, InitialSpec, SampleRequest};
use crate::bounds::{envelope_a, GronwallEnvelope};
use crate::error::Result;
use crate::kernels::{
    brinkman_solve, deposit, interpolate, oseen_tensor, stokes_solve, Boundary, GridSpec, ScalarGrid, Vec3, VectorGrid,
};
use crate::micro::{ClosureOptions, ParticleEnsemble};

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &'static str, value: f64, tolerance: f64) -> IdentityCheck {
    IdentityCheck { name, value, tolerance, pass: value.is_finite() && value <= tolerance }
}

fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

/// Runs the identity checks with a fixed seed. Each value is an error measure compared
/// with its tolerance.
pub fn check_identities(seed: u64) -> Result<Vec<IdentityCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut sym: f64 = 0.0;
    for _ in 0..1000 {
        let x = random_vec(&mut rng, 3.0);
        if x.norm() < 1e-3 {
            continue;
        }
        let (a, s) = (oseen_tensor(x), rng.gen_range(0.1..10.0));
        let b = oseen_tensor(x * s).scale(s);
        for r in 0..3 {
            for c in 0..3 {
                let scale = a.frobenius();
                sym = sym.max((a.get(r, c) - a.get(c, r)).abs() / scale).max((a.get(r, c) - b.get(r, c)).abs() / scale);
            }
        }
    }
    out.push(check("oseen symmetry and homogeneity", sym, 1e-13));

    let spec = GridSpec::centered(Vec3::ZERO, 2.0, 16)?;
    let samples: Vec<(Vec3, Vec3, f64)> = (0..200).map(|_| (random_vec(&mut rng, 0.8), random_vec(&mut rng, 1.0), 1.0 / 200.0)).collect();
    let (_, j) = deposit(samples.iter().copied(), &spec, Boundary::Strict)?;
    let field = VectorGrid::from_fn(spec, |x| Vec3::new(x.y.sin(), x.z * x.x, (2.0 * x.x).cos()));
    let mut lhs = 0.0;
    for (x, v, w) in &samples {
        lhs += w * v.dot(interpolate(&field, *x, Boundary::Strict)?);
    }
    let rhs = j.inner(&field);
    out.push(check("deposit/interpolate adjointness", (lhs - rhs).abs() / rhs.abs().max(1e-300), 1e-12));

    let c1 = Vec3::new(0.2, -0.1, 0.3);
    let c2 = Vec3::new(-0.3, 0.25, -0.1);
    let f1 = VectorGrid::from_fn(spec, |x| Vec3::new(1.0, 0.5, -0.3) * (-4.0 * (x - c1).norm_squared()).exp());
    let f2 = VectorGrid::from_fn(spec, |x| Vec3::new(0.4, 1.0, 0.8) * (-3.0 * (x - c2).norm_squared()).exp());
    let (u1, u2) = (stokes_solve(&f1)?.velocity, stokes_solve(&f2)?.velocity);
    let (a, b) = (f2.inner(&u1), f1.inner(&u2));
    out.push(check("stokes operator symmetry", (a - b).abs() / a.abs().max(b.abs()), 1e-12));

    let rho_g = ScalarGrid::from_fn(spec, |x| 3.0 * (-(x.norm_squared()) * 6.0).exp());
    let j_g = VectorGrid { spec, values: rho_g.values.iter().map(|r| GRAVITY * *r).collect() };
    let fl = brinkman_solve(&rho_g, &j_g, 1e-12, 500)?;
    let force = VectorGrid { spec, values: j_g.values.iter().zip(&rho_g.values).zip(&fl.velocity.values).map(|((jv, r), u)| *jv - *u * *r).collect() };
    let image = stokes_solve(&force)?.velocity;
    out.push(check("brinkman fixed point", image.sub(&fl.velocity).l2_norm() / fl.velocity.l2_norm(), 1e-9));
    let vv = rho_g.values.iter().map(|r| r * GRAVITY.norm_squared()).sum::<f64>();
    let vu = rho_g.values.iter().zip(&fl.velocity.values).map(|(r, u)| r * GRAVITY.dot(*u)).sum::<f64>();
    // value is minus the coercivity ratio <V, V - u>_rho / |V|^2_rho
    out.push(check("brinkman coercivity", -(1.0 - vu / vv), 0.0));

    let positions: Vec<Vec3> = (0..40).map(|i| Vec3::new((i % 4) as f64, ((i / 4) % 5) as f64, (i / 20) as f64) * 0.3).collect();
    let velocities: Vec<Vec3> = (0..40).map(|_| random_vec(&mut rng, 1.0)).collect();
    let ens = ParticleEnsemble::new(positions, velocities, 10.0, GRAVITY)?;
    let opts = ClosureOptions::default();
    let sol = ens.implicit_velocities(&opts, None)?;
    let dense = ens.implicit_velocities(&ClosureOptions { max_iter: 0, ..opts }, None)?;
    let diff = sol.w.iter().zip(&dense.w).map(|(a, b)| (*a - *b).max_abs()).fold(0.0, f64::max);
    out.push(check("closure iterative vs dense", diff, 1e-10));

    let env = GronwallEnvelope::new(1.0, 1.0, 1.0, 0.0, 1.0, 0.0)?;
    out.push(check("envelope equality case", (envelope_a(&env, 1.0)? - std::f64::consts::E).abs(), 1e-12));

    let req = SampleRequest {
        n_particles: 0,
        n_samples: 2000,
        seed,
        lambda: 20.0,
        gravity: GRAVITY,
        grid: GridSpec::centered(Vec3::ZERO, 6.0, 32)?,
        c_v: 10.0,
        dmin_floor: 0.0,
        max_resamples: 0,
    };
    let init = sample_initial(&InitialSpec { family: Family::Gaussian, sigma_x: 0.5, sigma_v: 0.5 }, &req)?;
    let sched = Schedule::new(0.01, 0.1, 10)?;
    let run = run_vlasov(init.cloud, &req.grid, &sched, &VlasovSettings::default())?;
    out.push(check("kinetic energy budget", run.budget.max_relative_residual(), 0.02));
    Ok(out)
}
