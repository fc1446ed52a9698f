//! Free-space Stokes solve by zero-padded FFT convolution with the Oseen kernel.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;

use super::fft3::Fft3;
use super::grid::VectorGrid;
use super::oseen::{oseen_regularized, oseen_tensor};
use super::vec3::{Mat3, Vec3};
use crate::error::{Result, SedError};

/// A velocity field together with the diagnostics of the solve that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub velocity: VectorGrid,
    /// Relative fixed-point residual at termination (0 for a plain Stokes solve).
    pub residual: f64,
    pub iterations: usize,
    /// Discrete `sup |∇u|` (central differences, spectral norm).
    pub grad_sup_norm: f64,
    /// `h³ ∑ F·u` for the force density `F` that generated `u`; the discrete `‖∇u‖²`.
    pub dirichlet_energy: f64,
    /// Largest central-difference divergence over interior cells.
    pub max_divergence: f64,
}

impl FluidState {
    pub(crate) fn from_velocity(velocity: VectorGrid, force: &VectorGrid, residual: f64, iterations: usize) -> Self {
        FluidState {
            grad_sup_norm: velocity.grad_sup_norm(),
            max_divergence: velocity.max_divergence(),
            dirichlet_energy: force.inner(&velocity),
            velocity,
            residual,
            iterations,
        }
    }

    /// Zero field on the grid of `spec`.
    pub fn zero(spec: super::grid::GridSpec) -> Self {
        FluidState {
            velocity: VectorGrid::zeros(spec),
            residual: 0.0,
            iterations: 0,
            grad_sup_norm: 0.0,
            dirichlet_energy: 0.0,
            max_divergence: 0.0,
        }
    }
}

// symmetric components in storage order
const COMPONENTS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// Convolution operator `f ↦ h³ ∑ K(x − y) f(y)` for one grid size and spacing.
///
/// The kernel is the Oseen tensor at the lattice offsets, with the origin cell
/// replaced by the mollified tensor at `eps = h`. Its spectrum on the `(2n)³`
/// padded lattice is real, so it is stored as six real arrays.
pub struct StokesSolver {
    n: usize,
    h: f64,
    m: usize,
    fft: Fft3,
    spectrum: [Vec<f64>; 6],
    projected: bool,
}

impl StokesSolver {
    /// Builds the kernel spectrum. With `project`, the spectrum is conjugated by the
    /// Leray projector built from central-difference wavenumbers, so every output is
    /// divergence-free for the central-difference divergence. The projector acts on
    /// the whole padded lattice, including the wrapped region, so it perturbs the
    /// free-space result by a few percent in the far field.
    pub fn new(n: usize, h: f64, project: bool) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(SedError::invalid(format!("grid size must be a power of two >= 8, got {n}")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(SedError::invalid(format!("grid spacing must be > 0, got {h}")));
        }
        let m = 2 * n;
        let fft = Fft3::new(m);
        let len = fft.len();
        let offset = |q: usize| -> Option<f64> {
            match q.cmp(&n) {
                std::cmp::Ordering::Less => Some(q as f64),
                // offset ±n never pairs two cells of the live corner
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(q as f64 - m as f64),
            }
        };
        let self_term = oseen_regularized(Vec3::ZERO, h)?;
        let mut tensors = vec![Mat3::ZERO; len];
        for i in 0..m {
            let Some(di) = offset(i) else { continue };
            for j in 0..m {
                let Some(dj) = offset(j) else { continue };
                for k in 0..m {
                    let Some(dk) = offset(k) else { continue };
                    let idx = (i * m + j) * m + k;
                    tensors[idx] = if i == 0 && j == 0 && k == 0 {
                        self_term
                    } else {
                        oseen_tensor(Vec3::new(di * h, dj * h, dk * h))
                    };
                }
            }
        }
        // the kernel is real and even, so its transform is real: two components per FFT
        let scale = h * h * h / len as f64;
        let mut spectrum: [Vec<f64>; 6] = Default::default();
        let mut buf = vec![Complex64::default(); len];
        for pair in 0..3 {
            let (a, b) = (COMPONENTS[2 * pair], COMPONENTS[2 * pair + 1]);
            for (z, t) in buf.iter_mut().zip(&tensors) {
                *z = Complex64::new(t.get(a.0, a.1), t.get(b.0, b.1));
            }
            fft.forward(&mut buf, m);
            spectrum[2 * pair] = buf.iter().map(|z| z.re * scale).collect();
            spectrum[2 * pair + 1] = buf.iter().map(|z| z.im * scale).collect();
        }
        drop(tensors);
        let mut solver = StokesSolver { n, h, m, fft, spectrum, projected: project };
        if project {
            solver.project_spectrum();
        }
        Ok(solver)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn is_projected(&self) -> bool {
        self.projected
    }

    fn wavenumber(&self, q: usize) -> f64 {
        let theta = 2.0 * std::f64::consts::PI * q as f64 / self.m as f64;
        theta.sin() / self.h
    }

    fn kernel_at(&self, idx: usize) -> [[f64; 3]; 3] {
        let s = &self.spectrum;
        [
            [s[0][idx], s[3][idx], s[4][idx]],
            [s[3][idx], s[1][idx], s[5][idx]],
            [s[4][idx], s[5][idx], s[2][idx]],
        ]
    }

    fn project_spectrum(&mut self) {
        let m = self.m;
        for i in 0..m {
            let di = self.wavenumber(i);
            for j in 0..m {
                let dj = self.wavenumber(j);
                for k in 0..m {
                    let dk = self.wavenumber(k);
                    let d = [di, dj, dk];
                    let d2 = di * di + dj * dj + dk * dk;
                    if d2 < 1e-24 / (self.h * self.h) {
                        continue;
                    }
                    let mut p = [[0.0; 3]; 3];
                    for r in 0..3 {
                        for c in 0..3 {
                            p[r][c] = if r == c { 1.0 } else { 0.0 } - d[r] * d[c] / d2;
                        }
                    }
                    let idx = (i * m + j) * m + k;
                    let kk = self.kernel_at(idx);
                    let pk = mat_mul(&p, &kk);
                    let pkp = mat_mul(&pk, &p);
                    for (c, &(r, s)) in COMPONENTS.iter().enumerate() {
                        self.spectrum[c][idx] = 0.5 * (pkp[r][s] + pkp[s][r]);
                    }
                }
            }
        }
    }

    /// `u = K ∗ f` on the grid of `force` (whose spacing must match).
    pub fn apply(&self, force: &VectorGrid) -> Result<VectorGrid> {
        let spec = force.spec;
        if spec.n != self.n || (spec.spacing() - self.h).abs() > 1e-12 * self.h {
            return Err(SedError::invalid("force grid does not match the solver's grid"));
        }
        if !force.is_finite() {
            return Err(SedError::invalid("non-finite force density"));
        }
        let (n, m) = (self.n, self.m);
        let len = self.fft.len();
        let mut a = vec![Complex64::default(); len];
        let mut b = vec![Complex64::default(); len];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let f = force.values[spec.index(i, j, k)];
                    let idx = (i * m + j) * m + k;
                    a[idx] = Complex64::new(f.x, f.y);
                    b[idx] = Complex64::new(f.z, 0.0);
                }
            }
        }
        self.fft.forward(&mut a, n);
        self.fft.forward(&mut b, n);

        // unpack F_x, F_y from a = F_x + iF_y using Hermitian symmetry, multiply,
        // and repack U_x + iU_y into a, U_z into b
        let neg = |q: usize| (m - q) % m;
        let half_i = Complex64::new(0.0, -0.5);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = (i * m + j) * m + k;
                    let q = (neg(i) * m + neg(j)) * m + neg(k);
                    if q < p {
                        continue;
                    }
                    let (ap, aq) = (a[p], a[q]);
                    let fx_p = 0.5 * (ap + aq.conj());
                    let fy_p = half_i * (ap - aq.conj());
                    let fx_q = fx_p.conj();
                    let fy_q = fy_p.conj();
                    let kp = self.kernel_at(p);
                    let up = mul3(&kp, [fx_p, fy_p, b[p]]);
                    a[p] = up[0] + Complex64::i() * up[1];
                    if q != p {
                        let kq = self.kernel_at(q);
                        let uq = mul3(&kq, [fx_q, fy_q, b[q]]);
                        a[q] = uq[0] + Complex64::i() * uq[1];
                        b[q] = uq[2];
                    }
                    b[p] = up[2];
                }
            }
        }
        self.fft.inverse(&mut a, n);
        self.fft.inverse(&mut b, n);
        let mut u = VectorGrid::zeros(spec);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let idx = (i * m + j) * m + k;
                    u.values[spec.index(i, j, k)] = Vec3::new(a[idx].re, a[idx].im, b[idx].re);
                }
            }
        }
        Ok(u)
    }

    /// Process-wide cached solver for `(n, h, project)`.
    pub fn cached(n: usize, h: f64, project: bool) -> Result<Arc<StokesSolver>> {
        type Cache = Mutex<HashMap<(usize, u64, bool), Arc<StokesSolver>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (n, h.to_bits(), project);
        if let Some(s) = cache.lock().expect("solver cache poisoned").get(&key) {
            return Ok(Arc::clone(s));
        }
        let solver = Arc::new(StokesSolver::new(n, h, project)?);
        let mut map = cache.lock().expect("solver cache poisoned");
        if map.len() >= 4 {
            map.clear();
        }
        map.insert(key, Arc::clone(&solver));
        Ok(solver)
    }
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for r in 0..3 {
        for s in 0..3 {
            c[r][s] = (0..3).map(|t| a[r][t] * b[t][s]).sum();
        }
    }
    c
}

#[inline]
fn mul3(k: &[[f64; 3]; 3], f: [Complex64; 3]) -> [Complex64; 3] {
    [
        f[0] * k[0][0] + f[1] * k[0][1] + f[2] * k[0][2],
        f[0] * k[1][0] + f[1] * k[1][1] + f[2] * k[1][2],
        f[0] * k[2][0] + f[1] * k[2][1] + f[2] * k[2][2],
    ]
}

/// `u = Φ ∗ f` for a force density on the grid (free-space convolution, no projection).
pub fn stokes_solve(force: &VectorGrid) -> Result<FluidState> {
    stokes_solve_with(force, false)
}

/// As [`stokes_solve`], choosing whether to apply the spectral projection.
pub fn stokes_solve_with(force: &VectorGrid, project: bool) -> Result<FluidState> {
    let solver = StokesSolver::cached(force.spec.n, force.spec.spacing(), project)?;
    let u = solver.apply(force)?;
    Ok(FluidState::from_velocity(u, force, 0.0, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::grid::GridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_force(spec: GridSpec, seed: u64) -> VectorGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VectorGrid {
            spec,
            values: (0..spec.len())
                .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        }
    }

    #[test]
    fn unprojected_matches_direct_sum() {
        let spec = GridSpec::centered(Vec3::ZERO, 1.0, 8).unwrap();
        let f = random_force(spec, 3);
        let h = spec.spacing();
        let u = StokesSolver::new(8, h, false).unwrap().apply(&f).unwrap();
        let self_term = oseen_regularized(Vec3::ZERO, h).unwrap();
        for (ti, target) in [(0, 0, 0), (3, 5, 7), (7, 7, 1)].into_iter().enumerate() {
            let xt = spec.cell_center(target.0, target.1, target.2);
            let mut direct = Vec3::ZERO;
            for idx in 0..spec.len() {
                let (i, j, k) = spec.unravel(idx);
                let d = xt - spec.cell_center(i, j, k);
                let kern = if (i, j, k) == target { self_term } else { oseen_tensor(d) };
                direct += kern.mul_vec(f.values[idx]) * (h * h * h);
            }
            let got = u.values[spec.index(target.0, target.1, target.2)];
            assert!((got - direct).max_abs() < 1e-12 * (1.0 + direct.max_abs()), "target {ti}");
        }
    }

    #[test]
    fn zero_forcing_and_linearity() {
        let spec = GridSpec::centered(Vec3::ZERO, 2.0, 16).unwrap();
        let zero = stokes_solve(&VectorGrid::zeros(spec)).unwrap();
        assert!(zero.velocity.values.iter().all(|v| *v == Vec3::ZERO));
        let f1 = random_force(spec, 4);
        let f2 = random_force(spec, 5);
        let u1 = stokes_solve(&f1).unwrap().velocity;
        let u2 = stokes_solve(&f2).unwrap().velocity;
        let u12 = stokes_solve(&f1.add(&f2)).unwrap().velocity;
        let scale = u12.max_norm();
        for t in 0..spec.len() {
            assert!((u1.values[t] + u2.values[t] - u12.values[t]).max_abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn projection_removes_divergence_and_stays_symmetric() {
        let spec = GridSpec::centered(Vec3::ZERO, 2.0, 16).unwrap();
        let f = random_force(spec, 6);
        let g = random_force(spec, 7);
        let raw = stokes_solve_with(&f, false).unwrap();
        let clean = stokes_solve_with(&f, true).unwrap();
        assert!(clean.max_divergence < 1e-10 * raw.max_divergence.max(1.0));
        // <g, St f> = <f, St g> with and without projection
        for project in [false, true] {
            let uf = stokes_solve_with(&f, project).unwrap();
            let ug = stokes_solve_with(&g, project).unwrap().velocity;
            let a = g.inner(&uf.velocity);
            let b = f.inner(&ug);
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            assert!(uf.dirichlet_energy > 0.0);
        }
    }

    #[test]
    fn rejects_nan() {
        let spec = GridSpec::centered(Vec3::ZERO, 2.0, 8).unwrap();
        let mut f = VectorGrid::zeros(spec);
        f.values[3].y = f64::NAN;
        assert!(stokes_solve(&f).is_err());
    }
}
