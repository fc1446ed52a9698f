//! Point-particle velocity closure `wᵢ = (1/N) ∑_{j≠i} Φ(Xᵢ−Xⱼ)(Vⱼ − wⱼ)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Result, SedError};
use crate::kernels::{oseen_tensor, Vec3};

/// Oseen tensors of all pairs `i < j`, packed row by row (6 symmetric entries each).
pub(crate) struct PairTensors {
    n: usize,
    data: Vec<[f64; 6]>,
}

impl PairTensors {
    pub fn new(positions: &[Vec3]) -> Self {
        let n = positions.len();
        let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let m = oseen_tensor(positions[i] - positions[j]).0;
                data.push([m[0][0], m[1][1], m[2][2], m[0][1], m[0][2], m[1][2]]);
            }
        }
        PairTensors { n, data }
    }

    #[inline]
    fn index(&self, a: usize, b: usize) -> usize {
        // a < b
        a * self.n - a * (a + 1) / 2 + (b - a - 1)
    }

    #[inline]
    fn apply(t: &[f64; 6], x: Vec3) -> Vec3 {
        Vec3::new(
            t[0] * x.x + t[3] * x.y + t[4] * x.z,
            t[3] * x.x + t[1] * x.y + t[5] * x.z,
            t[4] * x.x + t[5] * x.y + t[2] * x.z,
        )
    }

    /// `yᵢ = (1/N) ∑_{j≠i} Φ(Xᵢ−Xⱼ) xⱼ`.
    pub fn mul(&self, x: &[Vec3]) -> Vec<Vec3> {
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = Vec3::ZERO;
                for (j, xj) in x.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let t = if i < j { &self.data[self.index(i, j)] } else { &self.data[self.index(j, i)] };
                    s += Self::apply(t, *xj);
                }
                s * inv_n
            })
            .collect()
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        let mut m = DMatrix::zeros(3 * n, 3 * n);
        for i in 0..n {
            for j in i + 1..n {
                let t = &self.data[self.index(i, j)];
                let full = [[t[0], t[3], t[4]], [t[3], t[1], t[5]], [t[4], t[5], t[2]]];
                for r in 0..3 {
                    for c in 0..3 {
                        m[(3 * i + r, 3 * j + c)] = full[r][c] * inv_n;
                        m[(3 * j + r, 3 * i + c)] = full[r][c] * inv_n;
                    }
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureOptions {
    /// Stop when `maxᵢ |wᵢ − (M(V−w))ᵢ/N| ≤ tol·(1 + maxⱼ|Vⱼ|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Jacobi damping `ω` in `w ← (1−ω)w + ω M(V−w)/N`.
    pub damping: f64,
    /// Largest N for which a dense LU solve is attempted after the iteration stalls.
    pub dense_fallback_max: usize,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions { tol: 1e-12, max_iter: 500, damping: 0.7, dense_fallback_max: 512 }
    }
}

/// Result of a closure solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureSolution {
    pub w: Vec<Vec3>,
    pub iterations: usize,
    pub residual: f64,
    /// True when the dense fallback produced `w`.
    pub dense: bool,
}

fn residual(pairs: &PairTensors, v: &[Vec3], w: &[Vec3]) -> f64 {
    let diff: Vec<Vec3> = v.iter().zip(w).map(|(a, b)| *a - *b).collect();
    let image = pairs.mul(&diff);
    w.iter().zip(&image).map(|(a, b)| (*a - *b).max_abs()).fold(0.0, f64::max)
}

pub(crate) fn solve_closure(
    pairs: &PairTensors,
    v: &[Vec3],
    opts: &ClosureOptions,
    warm: Option<&[Vec3]>,
) -> Result<ClosureSolution> {
    let n = v.len();
    if !(opts.tol > 0.0) {
        return Err(SedError::invalid(format!("closure tolerance must be > 0, got {}", opts.tol)));
    }
    if n <= 1 {
        return Ok(ClosureSolution { w: vec![Vec3::ZERO; n], iterations: 0, residual: 0.0, dense: false });
    }
    let vmax = v.iter().map(|x| x.max_abs()).fold(0.0, f64::max);
    let target = opts.tol * (1.0 + vmax);
    let omega = opts.damping;
    let mut w: Vec<Vec3> = match warm {
        Some(w0) if w0.len() == n => w0.to_vec(),
        _ => vec![Vec3::ZERO; n],
    };
    let mut res = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let diff: Vec<Vec3> = v.iter().zip(&w).map(|(a, b)| *a - *b).collect();
        let image = pairs.mul(&diff);
        res = w.iter().zip(&image).map(|(a, b)| (*a - *b).max_abs()).fold(0.0, f64::max);
        if res <= target {
            return Ok(ClosureSolution { w, iterations: it - 1, residual: res, dense: false });
        }
        if !res.is_finite() {
            break;
        }
        for (wi, gi) in w.iter_mut().zip(&image) {
            *wi = *wi * (1.0 - omega) + *gi * omega;
        }
    }
    if n <= opts.dense_fallback_max {
        let w = dense_solve(pairs, v)?;
        let r = residual(pairs, v, &w);
        if r <= target {
            return Ok(ClosureSolution { w, iterations: opts.max_iter, residual: r, dense: true });
        }
        res = r;
    }
    Err(SedError::NotConverged { solver: "velocity closure", iterations: opts.max_iter, residual: res })
}

/// Direct solve of `(I + M/N) w = (M/N) V`.
fn dense_solve(pairs: &PairTensors, v: &[Vec3]) -> Result<Vec<Vec3>> {
    let n = v.len();
    let m = pairs.dense();
    let vv = DVector::from_iterator(3 * n, v.iter().flat_map(|x| x.to_array()));
    let rhs = &m * &vv;
    let a = DMatrix::identity(3 * n, 3 * n) + m;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or(SedError::NotConverged { solver: "velocity closure (dense)", iterations: 0, residual: f64::INFINITY })?;
    Ok((0..n).map(|i| Vec3::new(sol[3 * i], sol[3 * i + 1], sol[3 * i + 2])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_index_covers_all_pairs() {
        let pts: Vec<Vec3> = (0..7).map(|i| Vec3::new(i as f64, (i * i) as f64 * 0.1, 0.0)).collect();
        let p = PairTensors::new(&pts);
        let mut seen = vec![false; p.data.len()];
        for a in 0..7 {
            for b in a + 1..7 {
                let idx = p.index(a, b);
                assert!(!seen[idx]);
                seen[idx] = true;
                let m = oseen_tensor(pts[a] - pts[b]);
                assert_eq!(p.data[idx][0], m.get(0, 0));
                assert_eq!(p.data[idx][3], m.get(0, 1));
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn dense_fallback_used_when_iteration_capped() {
        let pts = vec![Vec3::ZERO, Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.0, 0.12, 0.0)];
        let v = vec![Vec3::new(0.0, 0.0, 1.0), Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)];
        let pairs = PairTensors::new(&pts);
        let opts = ClosureOptions { max_iter: 1, ..ClosureOptions::default() };
        let sol = solve_closure(&pairs, &v, &opts, None).unwrap();
        assert!(sol.dense);
        let strict = ClosureOptions { max_iter: 1, dense_fallback_max: 0, ..ClosureOptions::default() };
        assert!(matches!(solve_closure(&pairs, &v, &strict, None), Err(SedError::NotConverged { .. })));
    }
}
