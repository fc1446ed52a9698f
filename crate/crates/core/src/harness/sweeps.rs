//! Coupled cross-tier comparisons and the λ- and N-sweeps built from them.

use std::path::Path;

use super::config::SimConfig;
use super::output::TidyWriter;
use super::runs::{
    base_grid, kinetic_options, micro_options, run_micro, run_transport, run_vlasov, sample_request, spatial_marginal,
    Schedule, VlasovSettings,
};
use super::sampling::sample_initial;
use crate::bounds::{fit_dmin_constant, fit_envelope, GronwallEnvelope, TOL_SIMULATION};
use crate::error::{Result, SedError};
use crate::macro_transport::TransportOptions;
use crate::metrics::{
    identity_plan, paired_energy, phase_points, rate_fit, replicated_plan, wasserstein2_entropic, wasserstein2_exact,
    EntropicOptions, FitModel, Point, RateFit, EXACT_CAP,
};

/// Exact `𝒲₂` when the sizes allow it, otherwise the entropic estimate.
pub fn w2_between<P: Point>(a: &[P], b: &[P]) -> Result<f64> {
    if a.len().max(b.len()) <= EXACT_CAP && (a.len().is_multiple_of(b.len()) || b.len().is_multiple_of(a.len())) {
        return Ok(wasserstein2_exact(a, b)?.w2);
    }
    let (wa, wb) = (vec![1.0 / a.len() as f64; a.len()], vec![1.0 / b.len() as f64; b.len()]);
    Ok(wasserstein2_entropic(a, &wa, b, &wb, &EntropicOptions::default())?.w2)
}

/// Initial-layer window for the relaxation fit: `t ≤ LAYER_WIDTH / λ`.
pub const LAYER_WIDTH: f64 = 1.5;

/// One kinetic/transport pair at fixed λ.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroRow {
    pub lambda: f64,
    pub dt: f64,
    /// `𝒲₂(ρ[f_λ](T), ρ*(T))`.
    pub w2: f64,
    /// `(t, Z(t))` at snapshots.
    pub z_series: Vec<(f64, f64)>,
    /// `(t, S(t))` at every step.
    pub s_series: Vec<(f64, f64)>,
    /// Decay rate of `S` over the initial layer.
    pub s_rate: f64,
    /// Mean of `S` over `[T/2, T]`.
    pub s_plateau: f64,
}

/// Kinetic and transport runs from the same samples at the given λ.
pub fn compare_hydro(cfg: &SimConfig, lambda: f64) -> Result<HydroRow> {
    let dt = cfg.dt.min(0.25 / lambda);
    let sched = Schedule::new(dt, cfg.t_end, cfg.snapshots)?;
    let grid = base_grid(cfg)?;
    let init = sample_initial(&cfg.initial, &sample_request(cfg, 0, cfg.n, lambda)?)?;
    let spatial = spatial_marginal(&init.cloud);
    let mut settings = VlasovSettings { kinetic: kinetic_options(cfg), record_history: false, track_s: true };
    settings.kinetic.follow = true;
    let kin = run_vlasov(init.cloud, &grid, &sched, &settings)?;
    let tr = run_transport(spatial, &grid, &sched, &TransportOptions::default())?;
    let plan = identity_plan(cfg.n);
    let z_series = kin
        .snapshots
        .iter()
        .zip(&tr.snapshots)
        .map(|(k, t)| Ok((k.time, paired_energy(&k.positions, &t.positions, &plan)?)))
        .collect::<Result<Vec<_>>>()?;
    let w2 = w2_between(&kin.final_cloud.positions, &tr.final_cloud.positions)?;
    let layer: Vec<(f64, f64)> = kin.s_series.iter().copied().filter(|(t, _)| *t <= LAYER_WIDTH / lambda + 1e-12).collect();
    let s_rate = -rate_fit(&layer, FitModel::Exponential)?.slope;
    let tail: Vec<f64> = kin.s_series.iter().filter(|(t, _)| *t >= 0.5 * sched.t_end() - 1e-12).map(|p| p.1).collect();
    let s_plateau = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    Ok(HydroRow { lambda, dt: sched.dt, w2, z_series, s_series: kin.s_series, s_rate, s_plateau })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydroReport {
    pub rows: Vec<HydroRow>,
    /// Power-law fit of `𝒲₂` against λ.
    pub slope_fit: RateFit,
    /// `(λ_j/λ_i, rate_j/rate_i)` for all pairs `i < j`.
    pub rate_ratios: Vec<(f64, f64)>,
    pub pass_slope: bool,
    pub pass_rates: bool,
    /// The plateau of `S` decreases whenever λ doubles.
    pub pass_plateau: bool,
}

pub fn sweep_hydrodynamic(cfg: &SimConfig, lambdas: &[f64], out: Option<&Path>) -> Result<HydroReport> {
    if lambdas.len() < 3 {
        return Err(SedError::invalid("hydrodynamic sweep needs at least 3 λ values"));
    }
    let rows = lambdas.iter().map(|l| compare_hydro(cfg, *l)).collect::<Result<Vec<_>>>()?;
    let slope_fit = rate_fit(&rows.iter().map(|r| (r.lambda, r.w2)).collect::<Vec<_>>(), FitModel::PowerLaw)?;
    let mut rate_ratios = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            rate_ratios.push((rows[j].lambda / rows[i].lambda, rows[j].s_rate / rows[i].s_rate));
        }
    }
    let pass_rates = rate_ratios.iter().all(|(l, r)| (r / l - 1.0).abs() <= cfg.rate_ratio_tol);
    let mut pass_plateau = true;
    for a in &rows {
        for b in &rows {
            if (b.lambda / a.lambda - 2.0).abs() < 1e-9 && !(b.s_plateau < a.s_plateau) {
                pass_plateau = false;
            }
        }
    }
    let report = HydroReport {
        pass_slope: slope_fit.slope <= cfg.slope_max && slope_fit.r2 >= cfg.r2_min,
        slope_fit,
        rate_ratios,
        pass_rates,
        pass_plateau,
        rows,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut w = TidyWriter::create(&dir.join("hydro.csv"))?;
        for r in &report.rows {
            let id = format!("lambda_{}", r.lambda);
            w.row(&id, cfg.t_end, "w2_rho", r.w2)?;
            w.row(&id, 0.0, "s_rate", r.s_rate)?;
            w.row(&id, cfg.t_end, "s_plateau", r.s_plateau)?;
            w.series(&id, "Z", &r.z_series)?;
            w.series(&id, "S", &r.s_series)?;
        }
        w.row("fit", 0.0, "slope", report.slope_fit.slope)?;
        w.row("fit", 0.0, "r2", report.slope_fit.r2)?;
        w.finish()?;
    }
    Ok(report)
}

/// One micro/kinetic pair at fixed N.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldRow {
    pub n: usize,
    pub samples: usize,
    pub radius: f64,
    /// Exact `𝒲₂(f_N(0), f⁰)` without using the pairing.
    pub w2_initial: f64,
    pub w2_final: f64,
    pub growth: f64,
    pub e_series: Vec<(f64, f64)>,
    pub h_series: Vec<(f64, f64)>,
    pub dmin_series: Vec<(f64, f64)>,
    pub dmin_constant: Option<f64>,
    pub dmin_above_2r: bool,
    /// Largest `(1/N)∑|Vᵢ|⁹` along the run.
    pub m9_max: f64,
    pub flags: (bool, bool, bool),
    pub clipped_fraction: f64,
    /// `𝒲₂²(T) ≤ 2E(T) + 2H(T)`.
    pub coupling_dominates: bool,
    /// Fitted envelope for `(√H, √E)`.
    pub envelope: Option<GronwallEnvelope>,
}

/// Micro and kinetic runs from a shared initial coupling at `n` particles.
pub fn compare_meanfield(cfg: &SimConfig, n: usize) -> Result<MeanFieldRow> {
    let m = cfg.samples_per_particle;
    let samples = n * m;
    let sched = Schedule::new(cfg.dt, cfg.t_end, cfg.snapshots)?;
    let grid = base_grid(cfg)?;
    let init = sample_initial(&cfg.initial, &sample_request(cfg, n, samples, cfg.lambda)?)?;
    let ens = init.ensemble.clone().expect("particles requested");
    let flags = init.report.as_ref().map(|r| r.flags()).unwrap_or((false, false, false));
    let radius = ens.radius;
    let w2_initial = w2_between(&phase_points(&ens.positions, &ens.velocities), &phase_points(&init.cloud.positions, &init.cloud.velocities))?;
    let micro = run_micro(ens, &sched, &micro_options(cfg), None)?;
    let settings = VlasovSettings { kinetic: kinetic_options(cfg), record_history: false, track_s: false };
    let kin = run_vlasov(init.cloud, &grid, &sched, &settings)?;
    let plan = replicated_plan(n, m);
    let mut e_series = Vec::new();
    let mut h_series = Vec::new();
    for (p, c) in micro.snapshots.iter().zip(&kin.snapshots) {
        e_series.push((p.time, paired_energy(&p.velocities, &c.velocities, &plan)?));
        h_series.push((p.time, paired_energy(&p.positions, &c.positions, &plan)?));
    }
    let fin = &micro.final_ensemble;
    let w2_final = w2_between(
        &phase_points(&fin.positions, &fin.velocities),
        &phase_points(&kin.final_cloud.positions, &kin.final_cloud.velocities),
    )?;
    let dmin_series = micro.dmin_series();
    let (e_end, h_end) = (e_series.last().map_or(0.0, |p| p.1), h_series.last().map_or(0.0, |p| p.1));
    let root = |s: &[(f64, f64)]| s.iter().map(|(t, v)| (*t, v.sqrt())).collect::<Vec<_>>();
    Ok(MeanFieldRow {
        n,
        samples,
        radius,
        w2_initial,
        w2_final,
        growth: w2_final / w2_initial,
        dmin_constant: fit_dmin_constant(&dmin_series),
        dmin_above_2r: dmin_series.iter().all(|(_, d)| *d > 2.0 * radius),
        m9_max: micro.stats.iter().map(|(_, s)| s.v_moment9).fold(0.0, f64::max),
        envelope: fit_envelope(&root(&h_series), &root(&e_series), cfg.lambda, TOL_SIMULATION),
        coupling_dominates: w2_final * w2_final <= 2.0 * (e_end + h_end) * (1.0 + 1e-9),
        e_series,
        h_series,
        dmin_series,
        flags,
        clipped_fraction: init.clipped_fraction,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldReport {
    pub rows: Vec<MeanFieldRow>,
    /// Largest over smallest growth factor.
    pub growth_ratio: f64,
    pub pass: bool,
}

pub fn sweep_meanfield(cfg: &SimConfig, n_values: &[usize], out: Option<&Path>) -> Result<MeanFieldReport> {
    if n_values.len() < 3 {
        return Err(SedError::invalid("mean-field sweep needs at least 3 N values"));
    }
    let rows = n_values.iter().map(|n| compare_meanfield(cfg, *n)).collect::<Result<Vec<_>>>()?;
    if rows.iter().any(|r| r.flags != rows[0].flags) {
        return Err(SedError::Assumption("sweep members disagree on assumption flags".into()));
    }
    let growths: Vec<f64> = rows.iter().map(|r| r.growth).collect();
    let max = growths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = growths.iter().cloned().fold(f64::INFINITY, f64::min);
    let growth_ratio = max / min;
    let report = MeanFieldReport { pass: growth_ratio <= cfg.growth_ratio_max && min > 0.0, growth_ratio, rows };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut w = TidyWriter::create(&dir.join("meanfield.csv"))?;
        for r in &report.rows {
            let id = format!("n_{}", r.n);
            w.row(&id, 0.0, "w2", r.w2_initial)?;
            w.row(&id, cfg.t_end, "w2", r.w2_final)?;
            w.row(&id, cfg.t_end, "growth", r.growth)?;
            w.row(&id, 0.0, "clipped_fraction", r.clipped_fraction)?;
            w.row(&id, cfg.t_end, "m9_max", r.m9_max)?;
            w.row(&id, cfg.t_end, "d_min_constant", r.dmin_constant.unwrap_or(f64::INFINITY))?;
            w.series(&id, "E", &r.e_series)?;
            w.series(&id, "H", &r.h_series)?;
            w.series(&id, "d_min", &r.dmin_series)?;
        }
        w.row("all", cfg.t_end, "growth_ratio", report.growth_ratio)?;
        w.finish()?;
    }
    Ok(report)
}

