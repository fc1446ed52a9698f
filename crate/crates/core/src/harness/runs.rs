//! Time-stepping drivers for the three tiers and the single-run entry point.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::{SimConfig, Tier};
use super::output::{write_summary, TidyWriter};
use super::sampling::{sample_initial, SampleRequest};
use crate::bounds::fit_dmin_constant;
use crate::error::{Result, SedError};
use crate::kernels::{BrinkmanOptions, GridSpec, Vec3};
use crate::kinetic::{grid_for, moments, vlasov_step, BudgetSeries, FieldHistory, KineticOptions, PhaseCloud};
use crate::macro_transport::{transport_step, SpatialCloud, TransportOptions};
use crate::metrics::s_energy;
use crate::micro::{
    check_assumptions, stats, step, AssumptionReport, ClosureOptions, EnsembleStats, MicroOptions, ParticleEnsemble,
    DEFAULT_BETAS,
};

/// Gravity used by every run.
pub const GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -1.0);

/// Uniform time grid with a snapshot cadence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub dt: f64,
    pub steps: usize,
    pub cadence: usize,
}

impl Schedule {
    /// `round(T/dt)` steps of length `T/steps`, about `snapshots` snapshots.
    pub fn new(dt: f64, t_end: f64, snapshots: usize) -> Result<Self> {
        if !(dt > 0.0) || !(t_end > 0.0) || snapshots == 0 {
            return Err(SedError::invalid("schedule needs dt > 0, T > 0 and at least one snapshot"));
        }
        let steps = ((t_end / dt).round() as usize).max(1);
        Ok(Schedule { dt: t_end / steps as f64, steps, cadence: (steps / snapshots).max(1) })
    }

    pub fn is_snapshot(&self, k: usize) -> bool {
        k.is_multiple_of(self.cadence) || k == self.steps
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

#[derive(Debug, Clone)]
pub struct MicroRun {
    pub snapshots: Vec<ParticleEnsemble>,
    /// Statistics at every step and at the final time.
    pub stats: Vec<(f64, EnsembleStats)>,
    pub closure_iterations: Vec<usize>,
    pub final_ensemble: ParticleEnsemble,
}

impl MicroRun {
    pub fn dmin_series(&self) -> Vec<(f64, f64)> {
        self.stats.iter().map(|(t, s)| (*t, s.d_min)).collect()
    }
}

/// Runs the particle system; on failure the last state is written to `dump` if given.
pub fn run_micro(ens: ParticleEnsemble, sched: &Schedule, opts: &MicroOptions, dump: Option<&Path>) -> Result<MicroRun> {
    let mut ens = ens;
    let mut warm: Option<Vec<Vec3>> = None;
    let mut out = MicroRun { snapshots: Vec::new(), stats: Vec::new(), closure_iterations: Vec::new(), final_ensemble: ens.clone() };
    for k in 0..sched.steps {
        let st = match step(&ens, sched.dt, opts, warm.as_deref()) {
            Ok(st) => st,
            Err(e) => return Err(dump_state(&ens, dump, e)),
        };
        out.stats.push((ens.time, stats(&ens, &ens.forces(&st.w)?, &DEFAULT_BETAS)));
        out.closure_iterations.push(st.closure_iterations);
        if sched.is_snapshot(k) {
            out.snapshots.push(ens.clone());
        }
        ens = st.ensemble;
        warm = Some(st.w);
    }
    let w = if opts.interactions {
        ens.implicit_velocities(&opts.closure, warm.as_deref())?.w
    } else {
        vec![Vec3::ZERO; ens.n()]
    };
    out.stats.push((ens.time, stats(&ens, &ens.forces(&w)?, &DEFAULT_BETAS)));
    out.snapshots.push(ens.clone());
    out.final_ensemble = ens;
    Ok(out)
}

fn dump_state(ens: &ParticleEnsemble, dump: Option<&Path>, err: SedError) -> SedError {
    let Some(path) = dump else { return err };
    let written = fs::File::create(path).map_err(SedError::from).and_then(|f| ens.write_checkpoint(std::io::BufWriter::new(f)));
    match (err, written) {
        (SedError::Collision { i, j, distance, two_r, time, .. }, Ok(())) => {
            SedError::Collision { i, j, distance, two_r, time, dump: Some(path.to_path_buf()) }
        }
        (e, _) => e,
    }
}

/// Per-step diagnostics of the fluid solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidSummary {
    pub t: f64,
    pub residual: f64,
    pub iterations: usize,
    pub grad_sup_norm: f64,
    pub max_divergence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VlasovSettings {
    pub kinetic: KineticOptions,
    /// Keep every frozen field for backward characteristics.
    pub record_history: bool,
    /// Evaluate `S(t)` at every step (one extra Stokes solve per step).
    pub track_s: bool,
}

#[derive(Debug, Clone)]
pub struct VlasovRun {
    pub snapshots: Vec<PhaseCloud>,
    pub budget: BudgetSeries,
    pub fluid: Vec<FluidSummary>,
    pub s_series: Vec<(f64, f64)>,
    pub history: Option<FieldHistory>,
    pub final_cloud: PhaseCloud,
}

pub fn run_vlasov(cloud: PhaseCloud, spec: &GridSpec, sched: &Schedule, settings: &VlasovSettings) -> Result<VlasovRun> {
    let opts = &settings.kinetic;
    let mut cloud = cloud;
    let mut history = settings.record_history.then(|| FieldHistory::new(cloud.lambda, cloud.gravity, opts.boundary));
    let mut budget = BudgetSeries::new();
    let mut fluid = Vec::with_capacity(sched.steps);
    let mut s_series = Vec::new();
    let mut snapshots = Vec::new();
    let mut warm = None;
    for k in 0..sched.steps {
        let st = vlasov_step(&cloud, spec, sched.dt, opts, warm.as_ref())?;
        if settings.track_s {
            s_series.push((cloud.time, s_energy(&cloud, &grid_for(&cloud, spec, opts.follow), opts.boundary)?));
        }
        budget.push(st.budget);
        fluid.push(FluidSummary {
            t: cloud.time,
            residual: st.fluid.residual,
            iterations: st.fluid.iterations,
            grad_sup_norm: st.fluid.grad_sup_norm,
            max_divergence: st.fluid.max_divergence,
        });
        if let Some(h) = history.as_mut() {
            h.push_step(cloud.time, sched.dt, &st, opts.coupling);
        }
        if sched.is_snapshot(k) {
            snapshots.push(cloud);
        }
        warm = opts.coupling.then_some(st.fluid.velocity);
        cloud = st.cloud;
    }
    budget.finish(cloud.time, cloud.velocity_moment(2.0));
    if settings.track_s {
        s_series.push((cloud.time, s_energy(&cloud, &grid_for(&cloud, spec, opts.follow), opts.boundary)?));
    }
    snapshots.push(cloud.clone());
    Ok(VlasovRun { snapshots, budget, fluid, s_series, history, final_cloud: cloud })
}

#[derive(Debug, Clone)]
pub struct TransportRun {
    pub snapshots: Vec<SpatialCloud>,
    /// `(t, ‖∇u*‖∞)` at every step.
    pub grad_sup: Vec<(f64, f64)>,
    pub final_cloud: SpatialCloud,
}

pub fn run_transport(cloud: SpatialCloud, spec: &GridSpec, sched: &Schedule, opts: &TransportOptions) -> Result<TransportRun> {
    let mut cloud = cloud;
    let mut snapshots = Vec::new();
    let mut grad_sup = Vec::with_capacity(sched.steps);
    for k in 0..sched.steps {
        let (next, fluid) = transport_step(&cloud, spec, sched.dt, opts)?;
        grad_sup.push((cloud.time, fluid.grad_sup_norm));
        if sched.is_snapshot(k) {
            snapshots.push(cloud);
        }
        cloud = next;
    }
    snapshots.push(cloud.clone());
    Ok(TransportRun { snapshots, grad_sup, final_cloud: cloud })
}

/// Spatial marginal of a phase cloud.
pub fn spatial_marginal(cloud: &PhaseCloud) -> SpatialCloud {
    SpatialCloud { positions: cloud.positions.clone(), weights: cloud.weights.clone(), gravity: cloud.gravity, time: cloud.time }
}

/// Solver options derived from a configuration.
pub fn kinetic_options(cfg: &SimConfig) -> KineticOptions {
    KineticOptions {
        brinkman: BrinkmanOptions { tol: cfg.tolerance("brinkman", 1e-8), ..BrinkmanOptions::default() },
        ..KineticOptions::default()
    }
}

pub fn micro_options(cfg: &SimConfig) -> MicroOptions {
    MicroOptions { closure: ClosureOptions { tol: cfg.tolerance("closure", 1e-12), ..ClosureOptions::default() }, interactions: true }
}

pub fn base_grid(cfg: &SimConfig) -> Result<GridSpec> {
    GridSpec::centered(Vec3::ZERO, cfg.box_length, cfg.grid_n)
}

pub fn sample_request(cfg: &SimConfig, n_particles: usize, n_samples: usize, lambda: f64) -> Result<SampleRequest> {
    Ok(SampleRequest {
        n_particles,
        n_samples,
        seed: cfg.seed,
        lambda,
        gravity: GRAVITY,
        grid: base_grid(cfg)?,
        c_v: cfg.c_v,
        dmin_floor: cfg.dmin_floor,
        max_resamples: 10,
    })
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub exit_code: i32,
    pub message: String,
}

/// Outcome and outputs of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub tier: Tier,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub summary: Vec<(String, f64)>,
    pub assumptions: Option<AssumptionReport>,
    pub abort: Option<Abort>,
}

impl RunRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

fn write_assumptions(path: &Path, r: &AssumptionReport, clipped: f64) -> Result<()> {
    write_summary(
        path,
        &[
            ("h1".into(), r.h1 as u8 as f64),
            ("h3".into(), r.h3 as u8 as f64),
            ("h3_ratio".into(), r.h3_ratio),
            ("h4".into(), r.h4 as u8 as f64),
            ("h4_value".into(), r.h4_value),
            ("c_v".into(), r.c_v),
            ("clipped_fraction".into(), clipped),
        ],
    )
}

/// Runs the tier of `cfg` to `T` and writes snapshots, series and a summary into `out`.
/// Tier failures are recorded in [`RunRecord::abort`]; only configuration and I/O
/// problems are returned as errors.
pub fn run(cfg: &SimConfig, out: &Path) -> Result<RunRecord> {
    cfg.validate()?;
    fs::create_dir_all(out.join("snapshots"))?;
    fs::write(out.join("config.txt"), cfg.to_text())?;
    let hash = cfg.hash();
    let mut record = RunRecord {
        config_hash: hash.clone(),
        tier: cfg.tier,
        out_dir: out.to_path_buf(),
        files: vec![out.join("config.txt")],
        checkpoint: None,
        summary: Vec::new(),
        assumptions: None,
        abort: None,
    };
    if let Err(e) = execute(cfg, out, &hash[..12], &mut record) {
        if matches!(e, SedError::Io(_) | SedError::Csv(_) | SedError::InvalidInput(_) | SedError::Parse(_)) {
            return Err(e);
        }
        if let SedError::Collision { dump: Some(p), .. } = &e {
            record.checkpoint = Some(p.clone());
        }
        record.abort = Some(Abort { exit_code: e.exit_code(), message: e.to_string() });
        record.summary.push(("aborted".into(), 1.0));
    }
    write_summary(&out.join("summary.csv"), &record.summary)?;
    record.files.push(out.join("summary.csv"));
    Ok(record)
}

fn execute(cfg: &SimConfig, out: &Path, run_id: &str, record: &mut RunRecord) -> Result<()> {
    let grid = base_grid(cfg)?;
    let sched = Schedule::new(cfg.dt, cfg.t_end, cfg.snapshots)?;
    let n_particles = if cfg.tier == Tier::Micro { cfg.n } else { 0 };
    let init = sample_initial(&cfg.initial, &sample_request(cfg, n_particles, cfg.n, cfg.lambda)?)?;
    let metrics_path = out.join("metrics.csv");
    let mut tidy = TidyWriter::create(&metrics_path)?;
    record.files.push(metrics_path);
    match cfg.tier {
        Tier::Micro => {
            let ens = init.ensemble.expect("micro draw has an ensemble");
            let report = init.report.clone().unwrap_or_else(|| check_assumptions(&ens, cfg.c_v, None));
            let path = out.join("assumptions.csv");
            write_assumptions(&path, &report, init.clipped_fraction)?;
            record.files.push(path);
            record.assumptions = Some(report);
            let two_r = 2.0 * ens.radius;
            let dump = out.join("abort_checkpoint.bin");
            let res = run_micro(ens, &sched, &micro_options(cfg), Some(&dump))?;
            for (k, snap) in res.snapshots.iter().enumerate() {
                let p = out.join("snapshots").join(format!("micro_{k:04}.csv"));
                snap.write_csv(&p)?;
                record.files.push(p);
            }
            for (t, s) in &res.stats {
                tidy.row(run_id, *t, "d_min", s.d_min)?;
                for (beta, v) in &s.s_beta {
                    tidy.row(run_id, *t, &format!("s_beta_{beta}"), *v)?;
                }
                tidy.row(run_id, *t, "v_moment9", s.v_moment9)?;
                tidy.row(run_id, *t, "force_moment9", s.force_moment9)?;
            }
            let ckpt = out.join("checkpoint.bin");
            res.final_ensemble.write_checkpoint(std::io::BufWriter::new(fs::File::create(&ckpt)?))?;
            record.checkpoint = Some(ckpt);
            let dmin = res.dmin_series();
            record.summary.push(("final_time".into(), res.final_ensemble.time));
            record.summary.push(("d_min_final".into(), dmin.last().map_or(0.0, |d| d.1)));
            record.summary.push(("d_min_over_2r".into(), dmin.iter().map(|d| d.1).fold(f64::INFINITY, f64::min) / two_r));
            record.summary.push(("d_min_constant".into(), fit_dmin_constant(&dmin).unwrap_or(f64::INFINITY)));
        }
        Tier::Vlasov => {
            let settings = VlasovSettings { kinetic: kinetic_options(cfg), record_history: false, track_s: true };
            let res = run_vlasov(init.cloud, &grid, &sched, &settings)?;
            for (k, snap) in res.snapshots.iter().enumerate() {
                let p = out.join("snapshots").join(format!("vlasov_{k:04}.csv"));
                snap.write_csv(&p)?;
                record.files.push(p);
            }
            let budget_path = out.join("budget.csv");
            res.budget.write_csv(&budget_path)?;
            record.files.push(budget_path);
            for b in &res.budget.entries {
                tidy.row(run_id, b.t, "m2", b.m2)?;
                tidy.row(run_id, b.t, "budget_relative_residual", b.relative_residual())?;
            }
            for f in &res.fluid {
                tidy.row(run_id, f.t, "grad_sup_norm", f.grad_sup_norm)?;
                tidy.row(run_id, f.t, "brinkman_iterations", f.iterations as f64)?;
            }
            tidy.series(run_id, "S", &res.s_series)?;
            let fin = &res.final_cloud;
            let spec = grid_for(fin, &grid, true);
            let m = moments(fin, &cfg.k_set, &spec, &[1.0, 2.0, f64::INFINITY], settings.kinetic.boundary)?;
            for (k, v) in &m.m {
                record.summary.push((format!("M_{k}"), *v));
            }
            for (p, v) in &m.lp_rho {
                record.summary.push((format!("rho_L{p}"), *v));
            }
            record.summary.push(("final_time".into(), fin.time));
            record.summary.push(("total_weight".into(), fin.total_weight()));
            record.summary.push(("budget_max_relative_residual".into(), res.budget.max_relative_residual()));
        }
        Tier::Transport => {
            let spatial = spatial_marginal(&init.cloud);
            let res = run_transport(spatial, &grid, &sched, &TransportOptions::default())?;
            for (k, snap) in res.snapshots.iter().enumerate() {
                let p = out.join("snapshots").join(format!("transport_{k:04}.csv"));
                snap.write_csv(&p)?;
                record.files.push(p);
            }
            tidy.series(run_id, "grad_sup_norm", &res.grad_sup)?;
            for s in &res.snapshots {
                tidy.row(run_id, s.time, "center_of_mass_z", s.center_of_mass().z)?;
            }
            record.summary.push(("final_time".into(), res.final_cloud.time));
            record.summary.push(("total_weight".into(), res.final_cloud.total_weight()));
        }
    }
    tidy.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_rounds_and_snapshots() {
        let s = Schedule::new(0.01, 0.5, 50).unwrap();
        assert_eq!((s.steps, s.cadence), (50, 1));
        assert!((s.t_end() - 0.5).abs() < 1e-15);
        let s = Schedule::new(0.001, 1.0, 50).unwrap();
        assert_eq!(s.cadence, 20);
        assert!(s.is_snapshot(0) && s.is_snapshot(1000) && !s.is_snapshot(7));
    }
}
