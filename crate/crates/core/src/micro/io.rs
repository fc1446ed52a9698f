use std::io::{Read, Write};
use std::path::Path;

use super::ParticleEnsemble;
use crate::error::{Result, SedError};
use crate::kernels::Vec3;

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

impl ParticleEnsemble {
    /// Snapshot with columns `id,x,y,z,vx,vy,vz`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id", "x", "y", "z", "vx", "vy", "vz"])?;
        for (i, (x, v)) in self.positions.iter().zip(&self.velocities).enumerate() {
            w.write_record(&[
                i.to_string(),
                x.x.to_string(),
                x.y.to_string(),
                x.z.to_string(),
                v.x.to_string(),
                v.y.to_string(),
                v.z.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads positions and velocities written by [`ParticleEnsemble::write_csv`].
    pub fn read_csv_state(path: &Path) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
        let mut r = csv::Reader::from_path(path)?;
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let f = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| SedError::Parse(format!("missing column {k}")))?
                    .parse()
                    .map_err(|e| SedError::Parse(format!("column {k}: {e}")))
            };
            xs.push(Vec3::new(f(1)?, f(2)?, f(3)?));
            vs.push(Vec3::new(f(4)?, f(5)?, f(6)?));
        }
        Ok((xs, vs))
    }

    /// Binary checkpoint, little-endian: `N: u64, R, λ, t: f64, seed: u64`, then
    /// N records `(x, y, z, vx, vy, vz)`, then the gravity vector.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n() as u64).to_le_bytes())?;
        for v in [self.radius, self.lambda, self.time] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        for (x, v) in self.positions.iter().zip(&self.velocities) {
            for c in x.to_array().into_iter().chain(v.to_array()) {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        for c in self.gravity.to_array() {
            w.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let n = read_u64(&mut r)? as usize;
        let radius = read_f64(&mut r)?;
        let lambda = read_f64(&mut r)?;
        let time = read_f64(&mut r)?;
        let seed = read_u64(&mut r)?;
        let mut positions = Vec::with_capacity(n);
        let mut velocities = Vec::with_capacity(n);
        for _ in 0..n {
            let mut c = [0.0; 6];
            for e in &mut c {
                *e = read_f64(&mut r)?;
            }
            positions.push(Vec3::new(c[0], c[1], c[2]));
            velocities.push(Vec3::new(c[3], c[4], c[5]));
        }
        let gravity = Vec3::new(read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
        if positions.iter().chain(&velocities).any(|x| !x.is_finite()) {
            return Err(SedError::Parse("non-finite values in checkpoint".into()));
        }
        Ok(ParticleEnsemble { positions, velocities, radius, lambda, gravity, time, seed })
    }
}
