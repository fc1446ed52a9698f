//! Cloud-in-cell (trilinear) deposition and its adjoint interpolation.

use super::grid::{GridSpec, ScalarGrid, VectorGrid};
use super::vec3::Vec3;
use crate::error::{Result, SedError};

/// What to do with a point outside the cell-centre span of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Reject with [`SedError::DomainExhausted`].
    #[default]
    Strict,
    /// Wrap periodically with period `L`.
    Periodic,
}

/// The eight (cell index, weight) pairs of the trilinear stencil at `x`.
pub(crate) fn stencil(spec: &GridSpec, x: Vec3, boundary: Boundary) -> Result<[(usize, f64); 8]> {
    let n = spec.n;
    let h = spec.spacing();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    let mut upper = [0usize; 3];
    for a in 0..3 {
        let s = (x[a] - spec.origin[a]) / h - 0.5;
        if !s.is_finite() {
            return Err(SedError::invalid("non-finite sample position"));
        }
        match boundary {
            Boundary::Strict => {
                if s < 0.0 || s > (n - 1) as f64 {
                    return Err(SedError::DomainExhausted(format!(
                        "point {:?} outside grid [{:?}, +{}]",
                        x, spec.origin, spec.box_length
                    )));
                }
                let i0 = (s.floor() as usize).min(n - 2);
                base[a] = i0;
                frac[a] = s - i0 as f64;
                upper[a] = i0 + 1;
            }
            Boundary::Periodic => {
                let f = s.floor();
                let i0 = (f as i64).rem_euclid(n as i64) as usize;
                base[a] = i0;
                frac[a] = s - f;
                upper[a] = (i0 + 1) % n;
            }
        }
    }
    let mut out = [(0usize, 0.0); 8];
    let mut t = 0;
    for (di, wi) in [(base[0], 1.0 - frac[0]), (upper[0], frac[0])] {
        for (dj, wj) in [(base[1], 1.0 - frac[1]), (upper[1], frac[1])] {
            for (dk, wk) in [(base[2], 1.0 - frac[2]), (upper[2], frac[2])] {
                out[t] = (spec.index(di, dj, dk), wi * wj * wk);
                t += 1;
            }
        }
    }
    Ok(out)
}

/// Deposits weighted samples `(x, v, w)` into densities `ρ = ∑ w δ_x` and `j = ∑ w v δ_x`.
/// Grid values are densities (per unit volume), so `∑ ρ h³` is the total weight.
pub fn deposit<I>(samples: I, spec: &GridSpec, boundary: Boundary) -> Result<(ScalarGrid, VectorGrid)>
where
    I: IntoIterator<Item = (Vec3, Vec3, f64)>,
{
    let mut rho = ScalarGrid::zeros(*spec);
    let mut j = VectorGrid::zeros(*spec);
    let inv_vol = 1.0 / spec.cell_volume();
    for (x, v, w) in samples {
        if !v.is_finite() || !w.is_finite() {
            return Err(SedError::invalid("non-finite sample"));
        }
        for (idx, s) in stencil(spec, x, boundary)? {
            let m = w * s * inv_vol;
            rho.values[idx] += m;
            j.values[idx] += v * m;
        }
    }
    Ok((rho, j))
}

/// Trilinear interpolation of `field` at `x`.
pub fn interpolate(field: &VectorGrid, x: Vec3, boundary: Boundary) -> Result<Vec3> {
    let mut u = Vec3::ZERO;
    for (idx, s) in stencil(&field.spec, x, boundary)? {
        u += field.values[idx] * s;
    }
    Ok(u)
}

/// Trilinear interpolation of a scalar grid at `x`.
pub fn interpolate_scalar(field: &ScalarGrid, x: Vec3, boundary: Boundary) -> Result<f64> {
    let mut u = 0.0;
    for (idx, s) in stencil(&field.spec, x, boundary)? {
        u += field.values[idx] * s;
    }
    Ok(u)
}

/// True when `x` lies within the cell-centre span, i.e. [`Boundary::Strict`] accepts it.
pub fn inside(spec: &GridSpec, x: Vec3) -> bool {
    let h = spec.spacing();
    (0..3).all(|a| {
        let s = (x[a] - spec.origin[a]) / h - 0.5;
        s >= 0.0 && s <= (spec.n - 1) as f64
    })
}
