//! Cubic 3-D complex FFT with pruning for zero-padded convolution.
//!
//! Data are stored with index `(i*m + j)*m + k`, `k` contiguous. The pruned
//! transforms assume the input (forward) or the wanted output (inverse) lives in
//! the lower `n³` corner, `n = m/2`, and skip the rows that are identically zero
//! or never read.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft3 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 { m, fwd: planner.plan_fft_forward(m), inv: planner.plan_fft_inverse(m) }
    }

    pub fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    /// Unnormalized forward transform of data supported in the lower `live³` corner.
    pub fn forward(&self, data: &mut [Complex64], live: usize) {
        let m = self.m;
        let f = &self.fwd;
        let mut scratch = vec![Complex64::default(); f.get_inplace_scratch_len()];
        // k lines: only rows (i, j) with i, j < live carry data
        for i in 0..live {
            let start = i * m * m;
            f.process_with_scratch(&mut data[start..start + live * m], &mut scratch);
        }
        // j lines: only planes i < live
        let mut buf = vec![Complex64::default(); m * m];
        for i in 0..live {
            self.lines_j(data, i, &mut buf, f.as_ref(), &mut scratch);
        }
        // i lines: everything
        for j in 0..m {
            self.lines_i(data, j, &mut buf, f.as_ref(), &mut scratch);
        }
    }

    /// Unnormalized inverse transform; only the lower `live³` corner of the result is valid.
    pub fn inverse(&self, data: &mut [Complex64], live: usize) {
        let m = self.m;
        let f = &self.inv;
        let mut scratch = vec![Complex64::default(); f.get_inplace_scratch_len()];
        let mut buf = vec![Complex64::default(); m * m];
        for j in 0..m {
            self.lines_i(data, j, &mut buf, f.as_ref(), &mut scratch);
        }
        for i in 0..live {
            self.lines_j(data, i, &mut buf, f.as_ref(), &mut scratch);
        }
        for i in 0..live {
            let start = i * m * m;
            f.process_with_scratch(&mut data[start..start + live * m], &mut scratch);
        }
    }

    fn lines_j(
        &self,
        data: &mut [Complex64],
        i: usize,
        buf: &mut [Complex64],
        f: &dyn Fft<f64>,
        scratch: &mut [Complex64],
    ) {
        let m = self.m;
        let plane = &mut data[i * m * m..(i + 1) * m * m];
        for j in 0..m {
            for k in 0..m {
                buf[k * m + j] = plane[j * m + k];
            }
        }
        f.process_with_scratch(buf, scratch);
        for j in 0..m {
            for k in 0..m {
                plane[j * m + k] = buf[k * m + j];
            }
        }
    }

    fn lines_i(
        &self,
        data: &mut [Complex64],
        j: usize,
        buf: &mut [Complex64],
        f: &dyn Fft<f64>,
        scratch: &mut [Complex64],
    ) {
        let m = self.m;
        for i in 0..m {
            let row = &data[(i * m + j) * m..(i * m + j + 1) * m];
            for k in 0..m {
                buf[k * m + i] = row[k];
            }
        }
        f.process_with_scratch(buf, scratch);
        for i in 0..m {
            let row = &mut data[(i * m + j) * m..(i * m + j + 1) * m];
            for k in 0..m {
                row[k] = buf[k * m + i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], m: usize, sign: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); m * m * m];
        let w = |a: usize| Complex64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * a as f64 / m as f64);
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    let mut s = Complex64::default();
                    for i in 0..m {
                        for j in 0..m {
                            for k in 0..m {
                                s += data[(i * m + j) * m + k] * w((p * i + q * j + r * k) % m);
                            }
                        }
                    }
                    out[(p * m + q) * m + r] = s;
                }
            }
        }
        out
    }

    #[test]
    fn pruned_forward_matches_naive() {
        let m = 8;
        let live = 4;
        let mut data = vec![Complex64::default(); m * m * m];
        for i in 0..live {
            for j in 0..live {
                for k in 0..live {
                    data[(i * m + j) * m + k] =
                        Complex64::new((i + 2 * j) as f64 - 0.3 * k as f64, (k * i) as f64 * 0.1);
                }
            }
        }
        let expect = naive_dft(&data, m, -1.0);
        let fft = Fft3::new(m);
        fft.forward(&mut data, live);
        for (a, b) in data.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn pruned_inverse_matches_naive_on_corner() {
        let m = 8;
        let live = 4;
        let data: Vec<Complex64> = (0..m * m * m)
            .map(|t| Complex64::new(((t * 7) % 13) as f64, ((t * 3) % 5) as f64 - 2.0))
            .collect();
        let expect = naive_dft(&data, m, 1.0);
        let mut work = data.clone();
        Fft3::new(m).inverse(&mut work, live);
        for i in 0..live {
            for j in 0..live {
                for k in 0..live {
                    let idx = (i * m + j) * m + k;
                    assert!((work[idx] - expect[idx]).norm() < 1e-9);
                }
            }
        }
    }
}
