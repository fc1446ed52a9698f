use super::ParticleEnsemble;
use crate::kernels::Vec3;

/// Exponents `β` for which `S_β` is reported by default.
pub const DEFAULT_BETAS: [f64; 2] = [1.0, 2.25];

/// Configuration diagnostics of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub d_min: f64,
    /// `(β, S_β)` with `S_β = supᵢ ∑ⱼ d_ij^{−β}` and `d_ii = d_min`.
    pub s_beta: Vec<(f64, f64)>,
    /// `(1/N) ∑ |Vᵢ|⁹`.
    pub v_moment9: f64,
    /// `(1/N) ∑ |N Fᵢ|⁹`.
    pub force_moment9: f64,
}

impl EnsembleStats {
    /// `S_β` for a configured exponent.
    pub fn s(&self, beta: f64) -> Option<f64> {
        self.s_beta.iter().find(|(b, _)| *b == beta).map(|(_, s)| *s)
    }

    /// `S_β / N`, the normalisation that stays bounded under the usual assumptions.
    pub fn s_per_particle(&self, beta: f64, n: usize) -> Option<f64> {
        self.s(beta).map(|s| s / n as f64)
    }
}

/// `d_min`, `S_β` for each `β` in `betas`, and ninth moments of velocities and scaled forces.
pub fn stats(ens: &ParticleEnsemble, forces: &[Vec3], betas: &[f64]) -> EnsembleStats {
    let n = ens.n();
    let d_min = ens.closest_pair().map_or(f64::INFINITY, |p| p.2);
    let mut s_beta: Vec<(f64, f64)> = betas.iter().map(|b| (*b, 0.0)).collect();
    for i in 0..n {
        let mut sums = vec![0.0; betas.len()];
        for j in 0..n {
            let d = if i == j { d_min } else { (ens.positions[i] - ens.positions[j]).norm() };
            for (s, b) in sums.iter_mut().zip(betas) {
                *s += d.powf(-b);
            }
        }
        for (acc, s) in s_beta.iter_mut().zip(sums) {
            acc.1 = acc.1.max(s);
        }
    }
    let v_moment9 = ens.velocities.iter().map(|v| v.norm().powi(9)).sum::<f64>() / n as f64;
    let force_moment9 = forces.iter().map(|f| (f.norm() * n as f64).powi(9)).sum::<f64>() / n as f64;
    EnsembleStats { d_min, s_beta, v_moment9, force_moment9 }
}

/// Which of the standing assumptions hold for the current (initial) data.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// `N·R = 1/(6π)`.
    pub h1: bool,
    /// Sampled `𝒲₂(ρ⁰, ρ_N(0))`, when the caller supplied one.
    pub h2_w2: Option<f64>,
    /// `|Vᵢ − Vⱼ| ≤ (λ/2)|Xᵢ − Xⱼ|` for all pairs.
    pub h3: bool,
    /// `max |Vᵢ − Vⱼ| / ((λ/2)|Xᵢ − Xⱼ|)`; H3 holds iff this is ≤ 1.
    pub h3_ratio: f64,
    /// `(1/N)∑|Vᵢ|⁹ + (1/λ) supᵢ|Vᵢ| ≤ C_V`.
    pub h4: bool,
    pub h4_value: f64,
    pub c_v: f64,
}

impl AssumptionReport {
    /// H1, H3, H4 all hold (H2 is reported, never gated).
    pub fn all_hold(&self) -> bool {
        self.h1 && self.h3 && self.h4
    }

    pub fn flags(&self) -> (bool, bool, bool) {
        (self.h1, self.h3, self.h4)
    }
}

pub fn check_assumptions(ens: &ParticleEnsemble, c_v: f64, h2_w2: Option<f64>) -> AssumptionReport {
    let n = ens.n();
    let half_lambda = 0.5 * ens.lambda;
    let mut h3_ratio: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dv = (ens.velocities[i] - ens.velocities[j]).norm();
            if dv == 0.0 {
                continue;
            }
            let dx = (ens.positions[i] - ens.positions[j]).norm();
            h3_ratio = h3_ratio.max(dv / (half_lambda * dx));
        }
    }
    let m9 = ens.velocities.iter().map(|v| v.norm().powi(9)).sum::<f64>() / n as f64;
    let vmax = ens.velocities.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let h4_value = m9 + vmax / ens.lambda;
    AssumptionReport {
        h1: ens.satisfies_h1(),
        h2_w2,
        h3: h3_ratio <= 1.0,
        h3_ratio,
        h4: h4_value <= c_v,
        h4_value,
        c_v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Vec3 {
        Vec3::new(0.0, 0.0, -1.0)
    }

    #[test]
    fn pair_sums_use_dmin_on_diagonal() {
        let h = 0.3;
        let ens = ParticleEnsemble::new(vec![Vec3::ZERO, Vec3::new(h, 0.0, 0.0)], vec![Vec3::ZERO; 2], 1.0, g()).unwrap();
        let s = stats(&ens, &[Vec3::ZERO; 2], &DEFAULT_BETAS);
        assert!((s.d_min - h).abs() < 1e-15);
        assert!((s.s(1.0).unwrap() - 2.0 / h).abs() < 1e-12);
        assert!((s.s_per_particle(1.0, 2).unwrap() - 1.0 / h).abs() < 1e-12);
        assert!(s.s(2.25).unwrap() >= s.d_min.powf(-2.25));
    }

    #[test]
    fn lattice_dmin() {
        let s = 0.2;
        let mut pts = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    pts.push(Vec3::new(i as f64 * s, j as f64 * s, k as f64 * s));
                }
            }
        }
        let ens = ParticleEnsemble::new(pts, vec![Vec3::ZERO; 27], 1.0, g()).unwrap();
        let st = stats(&ens, &[Vec3::ZERO; 27], &[1.0]);
        assert!((st.d_min - s).abs() < 1e-15);
    }

    #[test]
    fn h3_detects_fast_pairs() {
        let x = vec![Vec3::ZERO, Vec3::new(0.1, 0.0, 0.0)];
        let mono = ParticleEnsemble::new(x.clone(), vec![g(); 2], 10.0, g()).unwrap();
        let rep = check_assumptions(&mono, 10.0, None);
        assert!(rep.h1 && rep.h3 && rep.h3_ratio == 0.0);
        // (λ/2)|ΔX| = 0.5
        let fast = ParticleEnsemble::new(x, vec![Vec3::ZERO, Vec3::new(0.0, 0.6, 0.0)], 10.0, g()).unwrap();
        let rep = check_assumptions(&fast, 10.0, Some(0.01));
        assert!(!rep.h3);
        assert!((rep.h3_ratio - 1.2).abs() < 1e-12);
        assert_eq!(rep.h2_w2, Some(0.01));
    }

    #[test]
    fn h4_value() {
        let ens = ParticleEnsemble::new(
            vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)],
            vec![Vec3::new(2.0, 0.0, 0.0), Vec3::ZERO],
            4.0,
            g(),
        )
        .unwrap();
        let rep = check_assumptions(&ens, 300.0, None);
        assert!((rep.h4_value - (512.0 / 2.0 + 0.5)).abs() < 1e-12);
        assert!(rep.h4);
        assert!(!check_assumptions(&ens, 100.0, None).h4);
    }
}
