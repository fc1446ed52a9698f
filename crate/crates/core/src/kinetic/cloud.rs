use std::path::Path;

use crate::error::{Result, SedError};
use crate::kernels::{deposit, Boundary, GridSpec, ScalarGrid, Vec3, VectorGrid};

/// Weighted samples of a phase-space probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCloud {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub gravity: Vec3,
    pub time: f64,
}

pub(crate) fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(SedError::invalid("cloud needs at least one sample"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(SedError::invalid("weights must be finite and >= 0"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(SedError::invalid(format!("weights must sum to 1, got {total}")));
    }
    Ok(())
}

impl PhaseCloud {
    pub fn new(positions: Vec<Vec3>, velocities: Vec<Vec3>, weights: Vec<f64>, lambda: f64, gravity: Vec3) -> Result<Self> {
        if positions.len() != velocities.len() || positions.len() != weights.len() {
            return Err(SedError::invalid("positions, velocities and weights differ in length"));
        }
        check_weights(&weights)?;
        if positions.iter().chain(&velocities).any(|x| !x.is_finite()) {
            return Err(SedError::invalid("non-finite sample"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(SedError::invalid(format!("λ must be > 0, got {lambda}")));
        }
        if (gravity.norm() - 1.0).abs() > 1e-12 {
            return Err(SedError::invalid("gravity must be a unit vector"));
        }
        Ok(PhaseCloud { positions, velocities, weights, lambda, gravity, time: 0.0 })
    }

    /// Equal weights `1/M`.
    pub fn uniform(positions: Vec<Vec3>, velocities: Vec<Vec3>, lambda: f64, gravity: Vec3) -> Result<Self> {
        let m = positions.len().max(1);
        let weights = vec![1.0 / m as f64; positions.len()];
        Self::new(positions, velocities, weights, lambda, gravity)
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

    /// Largest distance of a sample from the centre of mass.
    pub fn radius(&self) -> f64 {
        let c = self.center_of_mass();
        self.positions.iter().map(|x| (*x - c).norm()).fold(0.0, f64::max)
    }

    pub fn deposit(&self, spec: &GridSpec, boundary: Boundary) -> Result<(ScalarGrid, VectorGrid)> {
        deposit(
            self.positions.iter().zip(&self.velocities).zip(&self.weights).map(|((x, v), w)| (*x, *v, *w)),
            spec,
            boundary,
        )
    }

    /// `∑ wᵢ |vᵢ|^k`.
    pub fn velocity_moment(&self, k: f64) -> f64 {
        self.velocities.iter().zip(&self.weights).map(|(v, w)| w * v.norm().powf(k)).sum()
    }

    /// Snapshot with columns `id,x,y,z,vx,vy,vz,w`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record(["id", "x", "y", "z", "vx", "vy", "vz", "w"])?;
        for (i, ((x, v), w)) in self.positions.iter().zip(&self.velocities).zip(&self.weights).enumerate() {
            out.write_record(&[
                i.to_string(),
                x.x.to_string(),
                x.y.to_string(),
                x.z.to_string(),
                v.x.to_string(),
                v.y.to_string(),
                v.z.to_string(),
                w.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_validated() {
        let g = Vec3::new(0.0, 0.0, -1.0);
        let x = vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)];
        assert!(PhaseCloud::new(x.clone(), x.clone(), vec![0.5, 0.6], 1.0, g).is_err());
        assert!(PhaseCloud::new(x.clone(), x.clone(), vec![1.5, -0.5], 1.0, g).is_err());
        let c = PhaseCloud::uniform(x.clone(), x, 1.0, g).unwrap();
        assert_eq!(c.center_of_mass(), Vec3::new(0.5, 0.0, 0.0));
        assert!((c.velocity_moment(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let g = Vec3::new(0.0, 0.0, -1.0);
        PhaseCloud::uniform(vec![Vec3::ZERO], vec![g], 2.0, g).unwrap().write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "id,x,y,z,vx,vy,vz,w\n0,0,0,0,0,0,-1,1\n");
    }
}
