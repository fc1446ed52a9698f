//! Backward characteristics through a recorded field history and finite-difference
//! Jacobians of the velocity map `v ↦ V(0; t, x, v)`.

use super::KineticStep;
use crate::error::{Result, SedError};
use crate::kernels::{interpolate, Boundary, Mat3, Vec3, VectorGrid};

/// Field that was frozen over one step `[t, t + dt]`.
#[derive(Debug, Clone)]
pub struct FieldRecord {
    pub t: f64,
    pub dt: f64,
    /// `None` when the fluid was switched off (`u ≡ 0`).
    pub velocity: Option<VectorGrid>,
    pub grad_sup_norm: f64,
}

/// Sequence of frozen fields of a kinetic run.
#[derive(Debug, Clone)]
pub struct FieldHistory {
    pub lambda: f64,
    pub gravity: Vec3,
    pub boundary: Boundary,
    pub records: Vec<FieldRecord>,
}

impl FieldHistory {
    pub fn new(lambda: f64, gravity: Vec3, boundary: Boundary) -> Self {
        FieldHistory { lambda, gravity, boundary, records: Vec::new() }
    }

    /// Appends the field used by a completed step that started at `start_time`.
    pub fn push_step(&mut self, start_time: f64, dt: f64, step: &KineticStep, coupled: bool) {
        self.records.push(FieldRecord {
            t: start_time,
            dt,
            velocity: coupled.then(|| step.fluid.velocity.clone()),
            grad_sup_norm: if coupled { step.fluid.grad_sup_norm } else { 0.0 },
        });
    }

    /// `sup_s ‖∇u(s)‖∞` over the records that end by `t`.
    pub fn sup_grad(&self, t: f64) -> f64 {
        self.upto(t).iter().map(|r| r.grad_sup_norm).fold(0.0, f64::max)
    }

    /// `A_λ(t) = exp(∫₀ᵗ 2‖∇u(s)‖∞ ds)` with the field piecewise constant in time.
    pub fn a_lambda(&self, t: f64) -> f64 {
        self.upto(t).iter().map(|r| 2.0 * r.grad_sup_norm * r.dt).sum::<f64>().exp()
    }

    fn upto(&self, t: f64) -> &[FieldRecord] {
        let tol = 1e-9 * t.abs().max(1.0);
        let k = self.records.iter().take_while(|r| r.t + r.dt <= t + tol).count();
        &self.records[..k]
    }

    fn drift(&self, rec: &FieldRecord, x: Vec3) -> Result<Vec3> {
        Ok(match &rec.velocity {
            Some(u) => self.gravity + interpolate(u, x, self.boundary)?,
            None => self.gravity,
        })
    }

    /// Exact inverse of one discrete step: the state at `rec.t` that is mapped to `(x1, v1)`.
    fn step_back(&self, rec: &FieldRecord, x1: Vec3, v1: Vec3) -> Result<(Vec3, Vec3)> {
        let lambda = self.lambda;
        let grow = (lambda * rec.dt).exp();
        let grow_m1 = (lambda * rec.dt).exp_m1();
        let mut x = x1 - v1 * rec.dt;
        for _ in 0..100 {
            let a = self.drift(rec, x)?;
            let next = x1 - a * rec.dt - (v1 - a) * (grow_m1 / lambda);
            let change = (next - x).max_abs();
            x = next;
            if change <= 1e-15 * (1.0 + x.max_abs()) {
                break;
            }
        }
        let a = self.drift(rec, x)?;
        Ok((x, a + (v1 - a) * grow))
    }

    /// `(X(0; t, x, v), V(0; t, x, v))` through the recorded steps ending at `t`.
    pub fn backward(&self, t: f64, x: Vec3, v: Vec3) -> Result<(Vec3, Vec3)> {
        let mut state = (x, v);
        for rec in self.upto(t).iter().rev() {
            state = self.step_back(rec, state.0, state.1)?;
        }
        Ok(state)
    }
}

/// One probe point of [`jacobian_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianProbe {
    pub x: Vec3,
    pub v: Vec3,
    /// `|det ∇_w W(t, x, w)| = 1 / |det ∇_v V(0; t, x, v)|`.
    pub det_w: f64,
    /// `A_λ(t)³ e^{−3λt}`.
    pub det_bound: f64,
    /// Spectral norm of `∇_v V(0; t, x, v)`.
    pub lip_v: f64,
    /// `A_λ(t) e^{λt}`.
    pub lip_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    /// Whether `λ ≥ 4(1 + sup ‖∇u‖∞)` held along the history.
    pub applicable: bool,
    pub t: f64,
    pub sup_grad: f64,
    pub a_lambda: f64,
    pub probes: Vec<JacobianProbe>,
}

impl JacobianReport {
    /// Largest `det_w / det_bound` over probes.
    pub fn max_det_ratio(&self) -> f64 {
        self.probes.iter().map(|p| p.det_w / p.det_bound).fold(0.0, f64::max)
    }

    /// Largest `lip_v / lip_bound` over probes.
    pub fn max_lip_ratio(&self) -> f64 {
        self.probes.iter().map(|p| p.lip_v / p.lip_bound).fold(0.0, f64::max)
    }
}

/// Finite-difference Jacobian of the backward velocity map at each probe `(x, v)` at time `t`,
/// compared with the bounds `A_λ³e^{−3λt}` and `A_λe^{λt}`.
pub fn jacobian_check(history: &FieldHistory, t: f64, probes: &[(Vec3, Vec3)], fd_step: f64) -> Result<JacobianReport> {
    if !(fd_step > 0.0) {
        return Err(SedError::invalid("finite-difference step must be > 0"));
    }
    let lambda = history.lambda;
    let sup_grad = history.sup_grad(t);
    let a_lambda = history.a_lambda(t);
    let applicable = lambda >= 4.0 * (1.0 + sup_grad);
    let det_bound = a_lambda.powi(3) * (-3.0 * lambda * t).exp();
    let lip_bound = a_lambda * (lambda * t).exp();
    let mut out = Vec::with_capacity(probes.len());
    for &(x, v) in probes {
        let mut cols = [[0.0; 3]; 3];
        for (c, col) in cols.iter_mut().enumerate() {
            let mut e = [0.0; 3];
            e[c] = fd_step;
            let e = Vec3::from_array(e);
            let plus = history.backward(t, x, v + e)?.1;
            let minus = history.backward(t, x, v - e)?.1;
            *col = ((plus - minus) * (0.5 / fd_step)).to_array();
        }
        let mut jac = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                jac[r][c] = cols[c][r];
            }
        }
        let jac = Mat3(jac);
        out.push(JacobianProbe {
            x,
            v,
            det_w: 1.0 / jac.determinant().abs(),
            det_bound,
            lip_v: jac.spectral_norm(),
            lip_bound,
        });
    }
    Ok(JacobianReport { applicable, t, sup_grad, a_lambda, probes: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_equality() {
        let lambda = 20.0;
        let mut h = FieldHistory::new(lambda, Vec3::new(0.0, 0.0, -1.0), Boundary::Strict);
        for k in 0..10 {
            h.records.push(FieldRecord { t: 0.01 * k as f64, dt: 0.01, velocity: None, grad_sup_norm: 0.0 });
        }
        let t = 0.1;
        let rep = jacobian_check(&h, t, &[(Vec3::ZERO, Vec3::new(0.3, 0.1, -0.8))], 1e-3).unwrap();
        assert!(rep.applicable);
        assert_eq!(rep.a_lambda, 1.0);
        let p = rep.probes[0];
        let exact = (-3.0 * lambda * t).exp();
        assert!((p.det_w - exact).abs() < 1e-10 * exact);
        assert!((p.lip_v - (lambda * t).exp()).abs() < 1e-9 * p.lip_bound);
    }

    #[test]
    fn backward_inverts_forward_step() {
        use crate::kernels::GridSpec;
        use crate::micro::relax;
        let spec = GridSpec::centered(Vec3::ZERO, 2.0, 8).unwrap();
        let u = VectorGrid::from_fn(spec, |x| Vec3::new(0.3 * x.y, -0.2 * x.z, 0.1 * x.x * x.x));
        let g = Vec3::new(0.0, 0.0, -1.0);
        let rec = FieldRecord { t: 0.0, dt: 0.05, velocity: Some(u.clone()), grad_sup_norm: u.grad_sup_norm() };
        let h = FieldHistory { lambda: 10.0, gravity: g, boundary: Boundary::Strict, records: vec![rec] };
        let (x0, v0) = (Vec3::new(0.1, -0.2, 0.3), Vec3::new(0.5, 0.0, -0.3));
        let a = g + interpolate(&u, x0, Boundary::Strict).unwrap();
        let (x1, v1) = relax(x0, v0, a, 10.0, 0.05);
        let (xb, vb) = h.backward(0.05, x1, v1).unwrap();
        assert!((xb - x0).max_abs() < 1e-13);
        assert!((vb - v0).max_abs() < 1e-12);
    }
}
