//! Cell-centred grids on a cube and their serialization.

use std::io::{Read, Write};
use std::path::Path;

use super::vec3::{Mat3, Vec3};
use crate::error::{Result, SedError};

/// Geometry of an `n³` cell-centred grid on the cube `[origin, origin + L]³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Vec3,
    pub box_length: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(origin: Vec3, box_length: f64, n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(SedError::invalid(format!(
                "grid size must be a power of two >= 8, got {n}"
            )));
        }
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(SedError::invalid(format!("box length must be > 0, got {box_length}")));
        }
        if !origin.is_finite() {
            return Err(SedError::invalid("grid origin must be finite"));
        }
        Ok(GridSpec { origin, box_length, n })
    }

    /// Cube of side `box_length` centred at `center`.
    pub fn centered(center: Vec3, box_length: f64, n: usize) -> Result<Self> {
        GridSpec::new(center - Vec3::splat(0.5 * box_length), box_length, n)
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.spacing();
        self.origin + Vec3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h)
    }

    pub fn center(&self) -> Vec3 {
        self.origin + Vec3::splat(0.5 * self.box_length)
    }

    /// Same resolution, translated so that it is centred at `center`.
    pub fn recentered(&self, center: Vec3) -> GridSpec {
        GridSpec { origin: center - Vec3::splat(0.5 * self.box_length), ..*self }
    }

    /// Same cube and resolution? Used to check that fields can be combined.
    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.n == other.n
            && self.box_length == other.box_length
            && (self.origin - other.origin).max_abs() <= 1e-12 * self.box_length
    }
}

/// Scalar samples at the cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        ScalarGrid { spec, values: vec![0.0; spec.len()] }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(Vec3) -> f64) -> Self {
        let values = (0..spec.len())
            .map(|idx| {
                let (i, j, k) = spec.unravel(idx);
                f(spec.cell_center(i, j, k))
            })
            .collect();
        ScalarGrid { spec, values }
    }

    /// `∑ value · cell volume`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    /// Grid `L^p` norm; `p = ∞` gives the maximum modulus.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.spec.cell_volume()).powf(1.0 / p)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn add_assign(&mut self, other: &ScalarGrid) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

/// Vector samples at the cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid {
    pub spec: GridSpec,
    pub values: Vec<Vec3>,
}

impl VectorGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        VectorGrid { spec, values: vec![Vec3::ZERO; spec.len()] }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(Vec3) -> Vec3) -> Self {
        let values = (0..spec.len())
            .map(|idx| {
                let (i, j, k) = spec.unravel(idx);
                f(spec.cell_center(i, j, k))
            })
            .collect();
        VectorGrid { spec, values }
    }

    pub fn box_length(&self) -> f64 {
        self.spec.box_length
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `∑ value · cell volume`.
    pub fn integral(&self) -> Vec3 {
        self.values.iter().copied().sum::<Vec3>() * self.spec.cell_volume()
    }

    /// `h³ ∑ a·b`.
    pub fn inner(&self, other: &VectorGrid) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.dot(*b)).sum::<f64>()
            * self.spec.cell_volume()
    }

    /// `h³ ∑ ρ a·b`.
    pub fn weighted_inner(&self, other: &VectorGrid, rho: &ScalarGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(&rho.values)
            .map(|((a, b), r)| r * a.dot(*b))
            .sum::<f64>()
            * self.spec.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn add(&self, other: &VectorGrid) -> VectorGrid {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| *a + *b).collect();
        VectorGrid { spec: self.spec, values }
    }

    pub fn sub(&self, other: &VectorGrid) -> VectorGrid {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| *a - *b).collect();
        VectorGrid { spec: self.spec, values }
    }

    pub fn scaled(&self, s: f64) -> VectorGrid {
        VectorGrid { spec: self.spec, values: self.values.iter().map(|v| *v * s).collect() }
    }

    /// Velocity gradient `∂u_r/∂x_c` at a cell, by central differences
    /// (one-sided at the faces of the box).
    pub fn gradient_at(&self, i: usize, j: usize, k: usize) -> Mat3 {
        let n = self.spec.n;
        let h = self.spec.spacing();
        let idx = [i, j, k];
        let mut g = [[0.0; 3]; 3];
        for axis in 0..3 {
            let mut lo = idx;
            let mut hi = idx;
            let mut span = 2.0;
            if idx[axis] == 0 {
                hi[axis] += 1;
                span = 1.0;
            } else if idx[axis] == n - 1 {
                lo[axis] -= 1;
                span = 1.0;
            } else {
                lo[axis] -= 1;
                hi[axis] += 1;
            }
            let d = (self.values[self.spec.index(hi[0], hi[1], hi[2])]
                - self.values[self.spec.index(lo[0], lo[1], lo[2])])
                * (1.0 / (span * h));
            g[0][axis] = d.x;
            g[1][axis] = d.y;
            g[2][axis] = d.z;
        }
        Mat3(g)
    }

    /// Discrete `sup |∇u|` (spectral norm of the difference gradient).
    pub fn grad_sup_norm(&self) -> f64 {
        let n = self.spec.n;
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    m = m.max(self.gradient_at(i, j, k).spectral_norm());
                }
            }
        }
        m
    }

    /// Largest central-difference divergence over interior cells.
    pub fn max_divergence(&self) -> f64 {
        let n = self.spec.n;
        let mut m: f64 = 0.0;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                for k in 1..n - 1 {
                    m = m.max(self.gradient_at(i, j, k).trace().abs());
                }
            }
        }
        m
    }

    /// Flat little-endian layout: `L: f64`, `n: u64`, then `n³` row-major `(x, y, z)` triples.
    /// The origin is not stored; [`VectorGrid::read_binary`] centres the cube at 0.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.spec.box_length.to_le_bytes())?;
        w.write_all(&(self.spec.n as u64).to_le_bytes())?;
        for v in &self.values {
            for c in v.to_array() {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let box_length = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let spec = GridSpec::centered(Vec3::ZERO, box_length, n)?;
        let mut values = Vec::with_capacity(spec.len());
        for _ in 0..spec.len() {
            let mut c = [0.0; 3];
            for e in &mut c {
                r.read_exact(&mut b8)?;
                *e = f64::from_le_bytes(b8);
            }
            values.push(Vec3::from_array(c));
        }
        Ok(VectorGrid { spec, values })
    }

    /// CSV with columns `i,j,k,x,y,z,ux,uy,uz`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["i", "j", "k", "x", "y", "z", "ux", "uy", "uz"])?;
        for (idx, v) in self.values.iter().enumerate() {
            let (i, j, k) = self.spec.unravel(idx);
            let c = self.spec.cell_center(i, j, k);
            w.write_record(&[
                i.to_string(),
                j.to_string(),
                k.to_string(),
                c.x.to_string(),
                c.y.to_string(),
                c.z.to_string(),
                v.x.to_string(),
                v.y.to_string(),
                v.z.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(GridSpec::new(Vec3::ZERO, 1.0, 4).is_err());
        assert!(GridSpec::new(Vec3::ZERO, 1.0, 12).is_err());
        assert!(GridSpec::new(Vec3::ZERO, 0.0, 8).is_err());
        assert!(GridSpec::new(Vec3::ZERO, 1.0, 16).is_ok());
    }

    #[test]
    fn binary_layout_roundtrip() {
        let spec = GridSpec::centered(Vec3::ZERO, 2.0, 8).unwrap();
        let g = VectorGrid::from_fn(spec, |x| Vec3::new(x.x, 2.0 * x.y, -x.z + 1.0));
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * 3 * 512);
        assert_eq!(&buf[0..8], &2.0f64.to_le_bytes());
        assert_eq!(&buf[8..16], &8u64.to_le_bytes());
        // first triple is cell (0,0,0), x component first
        assert_eq!(&buf[16..24], &g.values[0].x.to_le_bytes());
        let back = VectorGrid::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn linear_field_gradient_and_divergence() {
        let spec = GridSpec::centered(Vec3::new(0.3, -0.1, 0.2), 3.0, 8).unwrap();
        let a = Mat3([[1.0, 2.0, 0.0], [0.5, -3.0, 1.0], [0.0, 0.0, 2.0]]);
        let g = VectorGrid::from_fn(spec, |x| a.mul_vec(x));
        let grad = g.gradient_at(0, 3, 7);
        for r in 0..3 {
            for c in 0..3 {
                assert!((grad.get(r, c) - a.get(r, c)).abs() < 1e-12);
            }
        }
        assert!(g.max_divergence().abs() < 1e-12);
        assert!((g.grad_sup_norm() - a.spectral_norm()).abs() < 1e-10);
    }

    #[test]
    fn lp_norms_of_constant() {
        let spec = GridSpec::centered(Vec3::ZERO, 2.0, 8).unwrap();
        let g = ScalarGrid::from_fn(spec, |_| 0.5);
        assert!((g.integral() - 4.0).abs() < 1e-12);
        assert!((g.lp_norm(2.0) - (0.25f64 * 8.0).sqrt()).abs() < 1e-12);
        assert_eq!(g.lp_norm(f64::INFINITY), 0.5);
    }
}
