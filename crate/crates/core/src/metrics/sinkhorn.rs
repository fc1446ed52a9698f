//! Debiased entropic transport in the log domain with ε-annealing.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{cost_matrix, CouplingMode, Pairing, Point, TransportCoupling};
use crate::error::{Result, SedError};

#[derive(Debug, Clone, PartialEq)]
pub struct EntropicOptions {
    /// Explicit ε values; when empty the schedule is geometric from
    /// `start_factor · median cost` to `end_factor · median cost` in `stages` steps.
    pub schedule: Vec<f64>,
    pub stages: usize,
    pub start_factor: f64,
    pub end_factor: f64,
    /// Target `L¹` marginal violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EntropicOptions {
    fn default() -> Self {
        EntropicOptions { schedule: Vec::new(), stages: 5, start_factor: 10.0, end_factor: 0.01, tol: 1e-6, max_iter: 20_000 }
    }
}

impl EntropicOptions {
    fn resolve(&self, median: f64) -> Result<Vec<f64>> {
        if !self.schedule.is_empty() {
            if self.schedule.iter().any(|e| !(*e > 0.0)) {
                return Err(SedError::invalid("ε schedule must be positive"));
            }
            return Ok(self.schedule.clone());
        }
        if self.stages == 0 || !(self.start_factor > 0.0) || !(self.end_factor > 0.0) {
            return Err(SedError::invalid("invalid ε schedule"));
        }
        let scale = if median > 0.0 { median } else { 1.0 };
        let (lo, hi) = (self.end_factor.ln(), self.start_factor.ln());
        let k = self.stages;
        Ok((0..k)
            .map(|s| {
                let f = if k == 1 { lo } else { hi + (lo - hi) * s as f64 / (k - 1) as f64 };
                scale * f.exp()
            })
            .collect())
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|x| (x - m).exp()).sum::<f64>().ln()
}

struct Problem<'a> {
    cost: &'a [f64],
    cost_t: Vec<f64>,
    n: usize,
    m: usize,
    la: Vec<f64>,
    lb: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(cost: &'a [f64], a: &[f64], b: &[f64]) -> Self {
        let (n, m) = (a.len(), b.len());
        let mut cost_t = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                cost_t[j * n + i] = cost[i * m + j];
            }
        }
        let ln = |w: &[f64]| w.iter().map(|x| if *x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect();
        Problem { cost, cost_t, n, m, la: ln(a), lb: ln(b) }
    }

    fn update_g(&self, f: &[f64], g: &mut [f64], eps: f64) {
        let n = self.n;
        g.par_iter_mut().enumerate().for_each(|(j, gj)| {
            let col = &self.cost_t[j * n..(j + 1) * n];
            *gj = -eps * log_sum_exp((0..n).map(|i| self.la[i] + (f[i] - col[i]) / eps));
        });
    }

    fn update_f(&self, f: &mut [f64], g: &[f64], eps: f64) {
        let m = self.m;
        f.par_iter_mut().enumerate().for_each(|(i, fi)| {
            let row = &self.cost[i * m..(i + 1) * m];
            *fi = -eps * log_sum_exp((0..m).map(|j| self.lb[j] + (g[j] - row[j]) / eps));
        });
    }

    fn plan(&self, f: &[f64], g: &[f64], eps: f64, i: usize, j: usize) -> f64 {
        (self.la[i] + self.lb[j] + (f[i] + g[j] - self.cost[i * self.m + j]) / eps).exp()
    }

    /// `L¹` violation of the column marginal (rows are exact after an `f` update).
    fn column_violation(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        (0..self.m)
            .into_par_iter()
            .map(|j| {
                let s: f64 = (0..self.n).map(|i| self.plan(f, g, eps, i, j)).sum();
                (s - self.lb[j].exp()).abs()
            })
            .sum()
    }

    fn row_violation(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let s: f64 = (0..self.m).map(|j| self.plan(f, g, eps, i, j)).sum();
                (s - self.la[i].exp()).abs()
            })
            .sum()
    }

    /// Alternating scaling iterations `f ← T g`, `g ← T f` at fixed ε, switching to
    /// Newton steps on `g` when the scaling iterations stall; returns the dual value
    /// `⟨f,a⟩ + ⟨g,b⟩`.
    fn solve(&self, f: &mut [f64], g: &mut [f64], eps: f64, tol: f64, max_iter: usize) -> Result<f64> {
        let newton = self.m <= NEWTON_MAX && self.la.iter().chain(&self.lb).all(|l| l.is_finite());
        let mut violation = f64::INFINITY;
        let mut it = 0;
        while it < max_iter {
            self.update_f(f, g, eps);
            self.update_g(f, g, eps);
            it += 1;
            if it % 5 == 0 || it == 1 {
                violation = self.row_violation(f, g, eps);
                if violation <= tol {
                    break;
                }
            }
            if newton && it == NEWTON_AFTER {
                violation = self.newton(f, g, eps, tol);
                if violation <= tol {
                    break;
                }
            }
        }
        if violation > tol {
            return Err(SedError::NotConverged { solver: "sinkhorn", iterations: it, residual: violation });
        }
        let dot = |p: &[f64], lw: &[f64]| -> f64 {
            p.iter().zip(lw).filter(|(_, l)| l.is_finite()).map(|(x, l)| x * l.exp()).sum()
        };
        Ok(dot(f, &self.la) + dot(g, &self.lb))
    }

    /// Newton iterations on the semi-dual in `g` (with `f = T g`), damped until the
    /// column violation decreases. Returns the final `L¹` column violation; `f` is exact.
    fn newton(&self, f: &mut [f64], g: &mut [f64], eps: f64, tol: f64) -> f64 {
        let (n, m) = (self.n, self.m);
        self.update_f(f, g, eps);
        let mut violation = self.column_violation(f, g, eps);
        for _ in 0..50 {
            if violation <= tol {
                break;
            }
            let mut p = DMatrix::<f64>::zeros(n, m);
            for i in 0..n {
                for j in 0..m {
                    p[(i, j)] = self.plan(f, g, eps, i, j);
                }
            }
            let c: Vec<f64> = (0..m).map(|j| p.column(j).sum()).collect();
            let mut scaled = p.clone();
            for i in 0..n {
                let inv = 1.0 / self.la[i].exp();
                scaled.row_mut(i).scale_mut(inv);
            }
            // diag(c) − Pᵀdiag(1/a)P has kernel 1; adding α11ᵀ fixes the gauge.
            let mut h = -(p.transpose() * scaled);
            let alpha = c.iter().sum::<f64>() / m as f64;
            for j in 0..m {
                h[(j, j)] += c[j];
            }
            h.add_scalar_mut(alpha);
            let rhs = DVector::from_iterator(m, (0..m).map(|j| self.lb[j].exp() - c[j]));
            let Some(step) = h.lu().solve(&rhs) else { break };
            let mut t = 1.0;
            let mut accepted = false;
            let g0 = g.to_vec();
            for _ in 0..30 {
                for j in 0..m {
                    g[j] = g0[j] + t * eps * step[j];
                }
                self.update_f(f, g, eps);
                let v = self.column_violation(f, g, eps);
                if v < violation {
                    violation = v;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                g.copy_from_slice(&g0);
                self.update_f(f, g, eps);
                break;
            }
        }
        violation
    }
}

/// Largest target size for which stalled scaling iterations switch to Newton steps.
const NEWTON_MAX: usize = 1024;
/// Scaling iterations before the switch.
const NEWTON_AFTER: usize = 200;

impl Problem<'_> {
    /// Symmetric problem (`a = b`, symmetric cost): averaged fixed point `f ← ½(f + T f)`.
    fn solve_symmetric(&self, f: &mut [f64], eps: f64, tol: f64, max_iter: usize) -> Result<f64> {
        let mut violation = f64::INFINITY;
        let mut it = 0;
        let mut t = vec![0.0; f.len()];
        while it < max_iter {
            self.update_f(&mut t, f, eps);
            for (x, y) in f.iter_mut().zip(&t) {
                *x = 0.5 * (*x + *y);
            }
            it += 1;
            if it % 5 == 0 || it == 1 {
                violation = self.row_violation(f, f, eps);
                if violation <= tol {
                    break;
                }
            }
        }
        if violation > tol {
            return Err(SedError::NotConverged { solver: "sinkhorn", iterations: it, residual: violation });
        }
        Ok(2.0 * f.iter().zip(&self.la).filter(|(_, l)| l.is_finite()).map(|(x, l)| x * l.exp()).sum::<f64>())
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    let mid = v.len() / 2;
    v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    v[mid]
}

/// Debiased entropic estimate of `𝒲₂` between weighted point sets, annealing ε along
/// the schedule with warm-started potentials. The plan of the final stage is returned
/// in sparse form (entries below `1e-15` dropped).
pub fn wasserstein2_entropic<P: Point>(a: &[P], wa: &[f64], b: &[P], wb: &[f64], opts: &EntropicOptions) -> Result<TransportCoupling> {
    for (pts, w) in [(a.len(), wa), (b.len(), wb)] {
        if pts == 0 || pts != w.len() {
            return Err(SedError::invalid("point and weight counts differ or are empty"));
        }
        if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SedError::invalid("weights must be a probability vector"));
        }
    }
    let cab = cost_matrix(a, b);
    let caa = cost_matrix(a, a);
    let cbb = cost_matrix(b, b);
    let schedule = opts.resolve(median(&cab))?;
    let pab = Problem::new(&cab, wa, wb);
    let paa = Problem::new(&caa, wa, wa);
    let pbb = Problem::new(&cbb, wb, wb);
    let (n, m) = (a.len(), b.len());
    let (mut fab, mut gab) = (vec![0.0; n], vec![0.0; m]);
    let mut faa = vec![0.0; n];
    let mut fbb = vec![0.0; m];
    let mut stages = Vec::with_capacity(schedule.len());
    let mut eps = schedule[0];
    for &e in &schedule {
        eps = e;
        let ab = pab.solve(&mut fab, &mut gab, eps, opts.tol, opts.max_iter)?;
        let aa = paa.solve_symmetric(&mut faa, eps, opts.tol, opts.max_iter)?;
        let bb = pbb.solve_symmetric(&mut fbb, eps, opts.tol, opts.max_iter)?;
        stages.push((eps, (ab - 0.5 * aa - 0.5 * bb).max(0.0).sqrt()));
    }
    let mut entries = Vec::new();
    let mut cost = 0.0;
    for i in 0..n {
        for j in 0..m {
            let p = pab.plan(&fab, &gab, eps, i, j);
            if p > 1e-15 {
                entries.push((i, j, p));
                cost += p * cab[i * m + j];
            }
        }
    }
    let marginal_violation = pab.row_violation(&fab, &gab, eps) + pab.column_violation(&fab, &gab, eps);
    Ok(TransportCoupling {
        pairing: Pairing::Sparse(entries),
        cost,
        mode: CouplingMode::Entropic,
        w2: stages.last().map(|s| s.1).unwrap_or(0.0),
        eps: Some(eps),
        marginal_violation,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Vec3;
    use crate::metrics::wasserstein2_exact;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn close_to_exact_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<Vec3> = (0..64).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let b: Vec<Vec3> = (0..64).map(|_| Vec3::new(rng.gen::<f64>() + 0.3, rng.gen(), rng.gen())).collect();
        let exact = wasserstein2_exact(&a, &b).unwrap().w2;
        let ent = wasserstein2_entropic(&a, &uniform(64), &b, &uniform(64), &EntropicOptions::default()).unwrap();
        assert!((ent.w2 - exact).abs() < 0.01 * exact, "{} vs {}", ent.w2, exact);
        assert!(ent.marginal_violation < 1e-6);
        let direct: f64 = ent.entries().iter().map(|(i, j, p)| p * a[*i].dist2(&b[*j])).sum();
        assert!((direct - ent.cost).abs() < 1e-12);
    }

    #[test]
    fn identical_clouds_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a: Vec<Vec3> = (0..32).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let ent = wasserstein2_entropic(&a, &uniform(32), &a, &uniform(32), &EntropicOptions::default()).unwrap();
        assert!(ent.w2 < 1e-6, "{}", ent.w2);
    }
}
