use std::path::Path;

use super::PhaseCloud;
use crate::error::Result;
use crate::kernels::{FluidState, Vec3};

/// Terms of `½ dM₂/dt + λ‖∇u‖² + λ∫|u−v|² df = λ∫v·g df` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBudget {
    pub t: f64,
    pub m2: f64,
    /// Discrete `½ dM₂/dt`.
    pub half_dm2_dt: f64,
    /// `λ‖∇u‖²`.
    pub grad_term: f64,
    /// `λ∫|u − v|² df`.
    pub friction_term: f64,
    /// `λ∫v·g df`.
    pub gravity_term: f64,
    /// `half_dm2_dt + grad_term + friction_term − gravity_term`.
    pub residual: f64,
}

impl EnergyBudget {
    pub(crate) fn set_derivative(&mut self, half_dm2_dt: f64) {
        self.half_dm2_dt = half_dm2_dt;
        self.residual = half_dm2_dt + self.grad_term + self.friction_term - self.gravity_term;
    }

    /// Sum of the magnitudes of the four terms.
    pub fn scale(&self) -> f64 {
        self.half_dm2_dt.abs() + self.grad_term.abs() + self.friction_term.abs() + self.gravity_term.abs()
    }

    /// `|residual| / scale`, or 0 when every term vanishes.
    pub fn relative_residual(&self) -> f64 {
        let s = self.scale();
        if s == 0.0 {
            0.0
        } else {
            self.residual.abs() / s
        }
    }
}

/// The dissipation and gravity terms for a cloud and the field computed from it.
/// `sample_velocity` is `u` at each sample. The derivative is left at 0 until
/// a time difference is available.
pub fn energy_budget(cloud: &PhaseCloud, fluid: &FluidState, sample_velocity: &[Vec3]) -> EnergyBudget {
    let lambda = cloud.lambda;
    let mut m2 = 0.0;
    let mut friction = 0.0;
    let mut gravity = 0.0;
    for ((v, w), u) in cloud.velocities.iter().zip(&cloud.weights).zip(sample_velocity) {
        m2 += w * v.norm_squared();
        friction += w * (*u - *v).norm_squared();
        gravity += w * v.dot(cloud.gravity);
    }
    let mut b = EnergyBudget {
        t: cloud.time,
        m2,
        half_dm2_dt: 0.0,
        grad_term: lambda * fluid.dirichlet_energy,
        friction_term: lambda * friction,
        gravity_term: lambda * gravity,
        residual: 0.0,
    };
    b.set_derivative(0.0);
    b
}

/// Budgets of consecutive steps plus the final `M₂`, with second-order time differences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BudgetSeries {
    pub entries: Vec<EnergyBudget>,
    final_point: Option<(f64, f64)>,
}

fn lagrange_derivative(x: f64, nodes: [(f64, f64); 3]) -> f64 {
    let [(a, fa), (b, fb), (c, fc)] = nodes;
    fa * (2.0 * x - b - c) / ((a - b) * (a - c))
        + fb * (2.0 * x - a - c) / ((b - a) * (b - c))
        + fc * (2.0 * x - a - b) / ((c - a) * (c - b))
}

impl BudgetSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, b: EnergyBudget) {
        self.entries.push(b);
    }

    /// Records `M₂` at the end of the last step and recomputes every derivative with
    /// three-point differences (centred inside, one-sided at the ends).
    pub fn finish(&mut self, t: f64, m2: f64) {
        self.final_point = Some((t, m2));
        let pts: Vec<(f64, f64)> = self.entries.iter().map(|b| (b.t, b.m2)).chain([(t, m2)]).collect();
        if pts.len() < 3 {
            return;
        }
        let last = pts.len() - 1;
        for (k, b) in self.entries.iter_mut().enumerate() {
            let c = k.clamp(1, last - 1);
            let d = lagrange_derivative(pts[k].0, [pts[c - 1], pts[c], pts[c + 1]]);
            b.set_derivative(0.5 * d);
        }
    }

    pub fn max_relative_residual(&self) -> f64 {
        self.entries.iter().map(|b| b.relative_residual()).fold(0.0, f64::max)
    }

    /// CSV with columns `t,m2,grad_term,friction_term,gravity_term,residual,half_dm2_dt`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "m2", "grad_term", "friction_term", "gravity_term", "residual", "half_dm2_dt"])?;
        for b in &self.entries {
            w.write_record(
                [b.t, b.m2, b.grad_term, b.friction_term, b.gravity_term, b.residual, b.half_dm2_dt].map(|x| x.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(t: f64, m2: f64) -> EnergyBudget {
        EnergyBudget { t, m2, half_dm2_dt: 0.0, grad_term: 0.0, friction_term: 0.0, gravity_term: 0.0, residual: 0.0 }
    }

    #[test]
    fn three_point_differences_exact_for_quadratics() {
        let f = |t: f64| 1.0 + 2.0 * t - 3.0 * t * t;
        let ts = [0.0, 0.1, 0.25, 0.3, 0.5];
        let mut s = BudgetSeries::new();
        for t in &ts[..4] {
            s.push(entry(*t, f(*t)));
        }
        s.finish(0.5, f(0.5));
        for b in &s.entries {
            assert!((b.half_dm2_dt - 0.5 * (2.0 - 6.0 * b.t)).abs() < 1e-12);
        }
    }

    #[test]
    fn relative_residual_zero_for_empty_budget() {
        assert_eq!(entry(0.0, 0.0).relative_residual(), 0.0);
    }
}
