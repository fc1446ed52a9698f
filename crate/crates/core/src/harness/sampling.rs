//! Seeded initial data: randomized Halton points mapped to the built-in families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SedError};
use crate::kernels::{interpolate, Boundary, GridSpec, Vec3};
use crate::kinetic::PhaseCloud;
use crate::macro_transport::{steady_velocity_field, SpatialCloud};
use crate::micro::{check_assumptions, h1_radius, AssumptionReport, ParticleEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Gaussian positions (std `sigma_x`) and velocities `g + N(0, sigma_v²)`, truncated at 3σ.
    Gaussian,
    /// Positions uniform in the ball of radius `sigma_x`, Gaussian velocities around `g`.
    UniformBall,
    /// Gaussian positions, velocities `g + u*(0, x)` plus jitter of std `sigma_v`.
    WellPrepared,
    /// Gaussian positions, every velocity equal to `g`.
    Monokinetic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub family: Family,
    pub sigma_x: f64,
    pub sigma_v: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec { family: Family::WellPrepared, sigma_x: 0.5, sigma_v: 0.1 }
    }
}

impl InitialSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_x > 0.0) || !(self.sigma_v >= 0.0) {
            return Err(SedError::invalid("initial data needs sigma_x > 0 and sigma_v >= 0"));
        }
        Ok(())
    }
}

/// What to sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRequest {
    /// Micro particles (0 for a kinetic-only draw). They are the first samples of the cloud.
    pub n_particles: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub lambda: f64,
    pub gravity: Vec3,
    /// Grid used to evaluate `u*(0)` for well-prepared data (recentred on the samples).
    pub grid: GridSpec,
    pub c_v: f64,
    pub dmin_floor: f64,
    pub max_resamples: usize,
}

/// Result of [`sample_initial`].
#[derive(Debug, Clone)]
pub struct InitialData {
    pub cloud: PhaseCloud,
    pub ensemble: Option<ParticleEnsemble>,
    pub report: Option<AssumptionReport>,
    /// Fraction of particles whose velocity was clipped for the relative-velocity condition.
    pub clipped_fraction: f64,
    pub attempts: usize,
}

const PRIMES: [u32; 6] = [2, 3, 5, 7, 11, 13];
const TRUNCATION: f64 = 3.0;
/// Largest fraction of particles that may be clipped before resampling.
pub const MAX_CLIPPED_FRACTION: f64 = 0.05;

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// `n` points of the six-dimensional Halton sequence under a seeded random shift modulo 1.
pub fn randomized_halton(n: usize, seed: u64) -> Vec<[f64; 6]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 6] = std::array::from_fn(|_| rng.gen::<f64>());
    (0..n)
        .map(|i| {
            std::array::from_fn(|d| {
                let u = radical_inverse(i as u64 + 1, PRIMES[d]) + shift[d];
                u - u.floor()
            })
        })
        .collect()
}

fn truncated_normal(normal: &Normal, u: f64) -> f64 {
    let lo = normal.cdf(-TRUNCATION);
    let hi = normal.cdf(TRUNCATION);
    normal.inverse_cdf(lo + u * (hi - lo))
}

fn map_point(spec: &InitialSpec, u: &[f64; 6], g: Vec3, normal: &Normal) -> (Vec3, Vec3) {
    let gauss = |k: usize| truncated_normal(normal, u[k]);
    let x = match spec.family {
        Family::UniformBall => {
            let r = spec.sigma_x * u[0].cbrt();
            let cos_t = 2.0 * u[1] - 1.0;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * u[2];
            Vec3::new(r * sin_t * phi.cos(), r * sin_t * phi.sin(), r * cos_t)
        }
        _ => Vec3::new(gauss(0), gauss(1), gauss(2)) * spec.sigma_x,
    };
    let jitter = Vec3::new(gauss(3), gauss(4), gauss(5)) * spec.sigma_v;
    let v = match spec.family {
        Family::Monokinetic => g,
        _ => g + jitter,
    };
    (x, v)
}

/// Enforces `|Vᵢ − Vⱼ| ≤ (λ/2)|Xᵢ − Xⱼ|` by pulling violating pairs towards their mean
/// velocity. Returns the number of particles touched, or `None` if the sweep does not settle.
pub fn clip_relative_velocities(x: &[Vec3], v: &mut [Vec3], lambda: f64) -> Option<usize> {
    let n = x.len();
    let mut touched = vec![false; n];
    let shrink = 1.0 - 1e-9;
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..n {
            for j in i + 1..n {
                let limit = 0.5 * lambda * (x[i] - x[j]).norm();
                let dv = v[i] - v[j];
                let len = dv.norm();
                if len > limit {
                    let mid = (v[i] + v[j]) * 0.5;
                    let half = dv * (0.5 * limit * shrink / len);
                    v[i] = mid + half;
                    v[j] = mid - half;
                    touched[i] = true;
                    touched[j] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return Some(touched.iter().filter(|t| **t).count());
        }
    }
    None
}

/// Draws a phase cloud and, when particles are requested, the matching micro ensemble
/// (its states are the first samples of the cloud).
pub fn sample_initial(spec: &InitialSpec, req: &SampleRequest) -> Result<InitialData> {
    spec.validate()?;
    if req.n_samples == 0 || req.n_particles > req.n_samples {
        return Err(SedError::invalid("need n_samples > 0 and n_particles <= n_samples"));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut last_reason = String::new();
    for attempt in 0..=req.max_resamples {
        let seed = req.seed.wrapping_add(attempt as u64 * 0x9E37_79B9_7F4A_7C15);
        let pts = randomized_halton(req.n_samples, seed);
        let (xs, mut vs): (Vec<Vec3>, Vec<Vec3>) = pts.iter().map(|u| map_point(spec, u, req.gravity, &normal)).unzip();
        if spec.family == Family::WellPrepared {
            let spatial = SpatialCloud::uniform(xs.clone(), req.gravity)?;
            let grid = req.grid.recentered(spatial.center_of_mass());
            let field = steady_velocity_field(&spatial, &grid)?.velocity;
            for (x, v) in xs.iter().zip(vs.iter_mut()) {
                *v += interpolate(&field, *x, Boundary::Strict)?;
            }
        }
        let mut ensemble = None;
        let mut report = None;
        let mut clipped_fraction = 0.0;
        if req.n_particles > 0 {
            let n = req.n_particles;
            let radius = h1_radius(n);
            let probe = ParticleEnsemble {
                positions: xs[..n].to_vec(),
                velocities: vs[..n].to_vec(),
                radius,
                lambda: req.lambda,
                gravity: req.gravity,
                time: 0.0,
                seed,
            };
            let d_min = probe.closest_pair().map_or(f64::INFINITY, |p| p.2);
            if d_min <= (2.0 * radius).max(req.dmin_floor) {
                last_reason = format!("d_min = {d_min:.3e} below floor");
                continue;
            }
            let Some(count) = clip_relative_velocities(&xs[..n], &mut vs[..n], req.lambda) else {
                last_reason = "velocity clipping did not settle".into();
                continue;
            };
            clipped_fraction = count as f64 / n as f64;
            if clipped_fraction > MAX_CLIPPED_FRACTION {
                last_reason = format!("clipping touched {:.1}% of particles", 100.0 * clipped_fraction);
                continue;
            }
            let mut ens = ParticleEnsemble::with_radius(xs[..n].to_vec(), vs[..n].to_vec(), radius, req.lambda, req.gravity)?;
            ens.seed = req.seed;
            let r = check_assumptions(&ens, req.c_v, None);
            if !r.h4 {
                last_reason = format!("moment condition fails: {:.3} > C_V = {}", r.h4_value, req.c_v);
                continue;
            }
            report = Some(r);
            ensemble = Some(ens);
        }
        let cloud = PhaseCloud::uniform(xs, vs, req.lambda, req.gravity)?;
        return Ok(InitialData { cloud, ensemble, report, clipped_fraction, attempts: attempt + 1 });
    }
    Err(SedError::Assumption(format!("initial data rejected after {} attempts: {last_reason}", req.max_resamples + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(n_particles: usize, n_samples: usize, lambda: f64) -> SampleRequest {
        SampleRequest {
            n_particles,
            n_samples,
            seed: 42,
            lambda,
            gravity: Vec3::new(0.0, 0.0, -1.0),
            grid: GridSpec::centered(Vec3::ZERO, 6.0, 16).unwrap(),
            c_v: 10.0,
            dmin_floor: 0.0,
            max_resamples: 5,
        }
    }

    #[test]
    fn halton_is_in_unit_cube_and_seeded() {
        let a = randomized_halton(100, 3);
        assert!(a.iter().flatten().all(|u| (0.0..1.0).contains(u)));
        assert_eq!(a, randomized_halton(100, 3));
        assert_ne!(a, randomized_halton(100, 4));
        assert!((radical_inverse(3, 2) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gaussian_draw_is_bit_reproducible() {
        let spec = InitialSpec { family: Family::Gaussian, sigma_x: 0.5, sigma_v: 0.2 };
        let a = sample_initial(&spec, &request(200, 200, 50.0)).unwrap();
        let b = sample_initial(&spec, &request(200, 200, 50.0)).unwrap();
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.ensemble, b.ensemble);
        let ens = a.ensemble.unwrap();
        assert!(ens.satisfies_h1());
        assert!(a.report.unwrap().h3);
        assert!(a.cloud.positions.iter().all(|x| x.max_abs() <= 1.5 + 1e-12));
    }

    #[test]
    fn monokinetic_needs_no_clipping() {
        let spec = InitialSpec { family: Family::Monokinetic, sigma_x: 0.5, sigma_v: 0.3 };
        let d = sample_initial(&spec, &request(100, 200, 5.0)).unwrap();
        assert_eq!(d.clipped_fraction, 0.0);
        assert!(d.cloud.velocities.iter().all(|v| *v == Vec3::new(0.0, 0.0, -1.0)));
        assert_eq!(d.cloud.positions[..100], d.ensemble.unwrap().positions[..]);
    }

    #[test]
    fn clipping_enforces_condition() {
        let x = vec![Vec3::ZERO, Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.0, 0.2, 0.0)];
        let mut v = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::ZERO, Vec3::new(0.0, -1.0, 0.0)];
        let count = clip_relative_velocities(&x, &mut v, 4.0).unwrap();
        assert!(count > 0);
        for i in 0..3 {
            for j in i + 1..3 {
                assert!((v[i] - v[j]).norm() <= 2.0 * (x[i] - x[j]).norm() + 1e-12);
            }
        }
    }

    #[test]
    fn well_prepared_starts_near_limit_velocity() {
        let spec = InitialSpec { family: Family::WellPrepared, sigma_x: 0.5, sigma_v: 0.05 };
        let d = sample_initial(&spec, &request(0, 2000, 20.0)).unwrap();
        let grid = GridSpec::centered(d.cloud.center_of_mass(), 6.0, 16).unwrap();
        let s = crate::metrics::s_energy(&d.cloud, &grid, Boundary::Strict).unwrap();
        assert!(s <= 1.5 * 0.05 * 0.05 * 1.1, "S(0) = {s}");
    }
}
