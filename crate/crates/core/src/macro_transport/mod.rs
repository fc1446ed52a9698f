//! Transport–Stokes equation: a spatial density falling under gravity and carried by
//! the Stokes flow it generates.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Result, SedError};
use crate::kernels::{deposit, interpolate, stokes_solve, Boundary, FluidState, GridSpec, ScalarGrid, Vec3, VectorGrid};
use crate::kinetic::check_weights;

/// Weighted spatial samples of a probability density.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCloud {
    pub positions: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub gravity: Vec3,
    pub time: f64,
}

impl SpatialCloud {
    pub fn new(positions: Vec<Vec3>, weights: Vec<f64>, gravity: Vec3) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(SedError::invalid("positions and weights differ in length"));
        }
        check_weights(&weights)?;
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(SedError::invalid("non-finite sample"));
        }
        if (gravity.norm() - 1.0).abs() > 1e-12 {
            return Err(SedError::invalid("gravity must be a unit vector"));
        }
        Ok(SpatialCloud { positions, weights, gravity, time: 0.0 })
    }

    /// Equal weights `1/M`.
    pub fn uniform(positions: Vec<Vec3>, gravity: Vec3) -> Result<Self> {
        let m = positions.len().max(1);
        let weights = vec![1.0 / m as f64; positions.len()];
        Self::new(positions, weights, gravity)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn center_of_mass(&self) -> Vec3 {
        self.positions.iter().zip(&self.weights).map(|(x, w)| *x * *w).sum::<Vec3>() * (1.0 / self.total_weight())
    }

    pub fn radius(&self) -> f64 {
        let c = self.center_of_mass();
        self.positions.iter().map(|x| (*x - c).norm()).fold(0.0, f64::max)
    }

    pub fn density(&self, spec: &GridSpec, boundary: Boundary) -> Result<ScalarGrid> {
        let (rho, _) = deposit(self.positions.iter().zip(&self.weights).map(|(x, w)| (*x, Vec3::ZERO, *w)), spec, boundary)?;
        Ok(rho)
    }

    /// Snapshot with columns `id,x,y,z,w`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record(["id", "x", "y", "z", "w"])?;
        for (i, (x, w)) in self.positions.iter().zip(&self.weights).enumerate() {
            out.write_record(&[i.to_string(), x.x.to_string(), x.y.to_string(), x.z.to_string(), w.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    pub boundary: Boundary,
    /// Recentre the grid on the centre of mass before each step.
    pub follow: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { boundary: Boundary::Strict, follow: true }
    }
}

/// `St⁻¹(ρ g)` for the deposited density of `cloud` on `spec`.
pub fn steady_velocity_field(cloud: &SpatialCloud, spec: &GridSpec) -> Result<FluidState> {
    steady_field_with(&cloud.positions, &cloud.weights, cloud.gravity, spec, Boundary::Strict)
}

fn steady_field_with(positions: &[Vec3], weights: &[f64], g: Vec3, spec: &GridSpec, boundary: Boundary) -> Result<FluidState> {
    let (rho, _) = deposit(positions.iter().zip(weights).map(|(x, w)| (*x, Vec3::ZERO, *w)), spec, boundary)?;
    let force = VectorGrid { spec: *spec, values: rho.values.iter().map(|r| g * *r).collect() };
    let fluid = stokes_solve(&force)?;
    if !fluid.velocity.is_finite() {
        return Err(SedError::invalid("Stokes field is not finite"));
    }
    Ok(fluid)
}

fn drift(positions: &[Vec3], field: &VectorGrid, g: Vec3, boundary: Boundary) -> Result<Vec<Vec3>> {
    positions.par_iter().map(|x| Ok(g + interpolate(field, *x, boundary)?)).collect()
}

/// One midpoint step of `Ẋ = g + u*(X)`. The returned state is the field at the start of the step.
pub fn transport_step(cloud: &SpatialCloud, spec: &GridSpec, dt: f64, opts: &TransportOptions) -> Result<(SpatialCloud, FluidState)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SedError::invalid(format!("dt must be > 0, got {dt}")));
    }
    let spec = if opts.follow { spec.recentered(cloud.center_of_mass()) } else { *spec };
    let g = cloud.gravity;
    let fluid = steady_field_with(&cloud.positions, &cloud.weights, g, &spec, opts.boundary)?;
    let k1 = drift(&cloud.positions, &fluid.velocity, g, opts.boundary)?;
    let half: Vec<Vec3> = cloud.positions.iter().zip(&k1).map(|(x, k)| *x + *k * (0.5 * dt)).collect();
    let mid = steady_field_with(&half, &cloud.weights, g, &spec, opts.boundary)?;
    let k2 = drift(&half, &mid.velocity, g, opts.boundary)?;
    let mut next = cloud.clone();
    for (x, k) in next.positions.iter_mut().zip(&k2) {
        *x += *k * dt;
    }
    next.time = cloud.time + dt;
    Ok((next, fluid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::interpolate;
    use std::f64::consts::PI;

    fn g() -> Vec3 {
        Vec3::new(0.0, 0.0, -1.0)
    }

    #[test]
    fn single_sample_falls_with_self_term() {
        let spec = GridSpec::centered(Vec3::ZERO, 2.0, 16).unwrap();
        let h = spec.spacing();
        let x0 = spec.cell_center(8, 8, 8);
        let cloud = SpatialCloud::uniform(vec![x0], g()).unwrap();
        let fluid = steady_velocity_field(&cloud, &spec).unwrap();
        let u0 = interpolate(&fluid.velocity, x0, Boundary::Strict).unwrap();
        let self_term = 15.0 / (64.0 * PI * h);
        assert!((u0 - g() * self_term).max_abs() < 1e-12 * self_term);
        let d = Vec3::new(0.3, 0.0, 0.1);
        let (plus, minus) = (
            interpolate(&fluid.velocity, x0 + Vec3::new(d.x, 0.0, 0.0), Boundary::Strict).unwrap(),
            interpolate(&fluid.velocity, x0 - Vec3::new(d.x, 0.0, 0.0), Boundary::Strict).unwrap(),
        );
        assert!((plus.x + minus.x).abs() < 1e-12);
        assert!((plus.z - minus.z).abs() < 1e-12);
    }

    #[test]
    fn mirror_symmetric_bumps() {
        let spec = GridSpec::centered(Vec3::ZERO, 2.0, 16).unwrap();
        let xs = vec![Vec3::new(0.1, 0.05, 0.4), Vec3::new(0.1, 0.05, -0.4)];
        let cloud = SpatialCloud::uniform(xs, g()).unwrap();
        let u = steady_velocity_field(&cloud, &spec).unwrap().velocity;
        let n = spec.n;
        let scale = u.max_norm();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = u.values[spec.index(i, j, k)];
                    let b = u.values[spec.index(i, j, n - 1 - k)];
                    assert!((a.x + b.x).abs() < 1e-12 * scale);
                    assert!((a.y + b.y).abs() < 1e-12 * scale);
                    assert!((a.z - b.z).abs() < 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn weights_unchanged_and_mass_conserved() {
        let xs: Vec<Vec3> = (0..40).map(|i| Vec3::new(0.3 * (i as f64).sin(), 0.3 * (i as f64 * 0.7).cos(), 0.01 * i as f64)).collect();
        let cloud = SpatialCloud::uniform(xs, g()).unwrap();
        let spec = GridSpec::centered(Vec3::ZERO, 4.0, 16).unwrap();
        let (next, fluid) = transport_step(&cloud, &spec, 0.01, &TransportOptions::default()).unwrap();
        assert_eq!(next.weights, cloud.weights);
        assert!(fluid.grad_sup_norm > 0.0);
        let rho = next.density(&spec.recentered(next.center_of_mass()), Boundary::Strict).unwrap();
        assert!((rho.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leaving_the_box_is_domain_exhaustion() {
        let cloud = SpatialCloud::uniform(vec![Vec3::ZERO, Vec3::new(0.0, 0.0, 3.0)], g()).unwrap();
        let spec = GridSpec::centered(Vec3::ZERO, 2.0, 8).unwrap();
        let opts = TransportOptions { follow: false, ..TransportOptions::default() };
        assert!(matches!(transport_step(&cloud, &spec, 0.01, &opts), Err(SedError::DomainExhausted(_))));
    }
}
