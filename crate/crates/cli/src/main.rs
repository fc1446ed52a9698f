use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sedlab::bounds::{envelope_a, envelope_b, layer_bounds, GronwallEnvelope};
use sedlab::harness::{
    check_identities, compare_hydro, compare_meanfield, run, sweep_hydrodynamic, sweep_meanfield, write_summary, SimConfig,
    Tier,
};
use sedlab::{Result, SedError};

#[derive(Parser)]
#[command(name = "sedlab", version, about = "Sedimentation simulations across particle, kinetic and continuum scales")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (`key = value` with `[section]` headers).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    /// Particle or sample count.
    #[arg(long)]
    n: Option<u32>,
    /// micro, vlasov or transport.
    #[arg(long)]
    tier: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    EnvelopeA,
    EnvelopeB,
    LayerA,
    LayerB,
}

#[derive(Subcommand)]
enum Command {
    /// Run one tier to the final time and write snapshots and series.
    Simulate(Common),
    /// Coupled comparison: micro vs kinetic for tier micro, kinetic vs transport otherwise.
    Compare(Common),
    /// Kinetic vs transport over the configured λ values.
    SweepHydro(Common),
    /// Micro vs kinetic over the configured particle counts.
    SweepMeanfield(Common),
    /// Numerical self-checks of the solvers.
    CheckIdentities(Common),
    /// Evaluate the analytic envelopes at the given times.
    Oracle {
        #[arg(long, value_enum)]
        kind: OracleKind,
        /// Comma-separated `name=value` pairs, e.g. `C=1,c=1,lambda=1,d=0,a0=1,b0=0`.
        /// Layer bounds use `alpha,lambda,beta,b` (and `s` for layer-b).
        #[arg(long)]
        params: String,
        /// Comma-separated evaluation times.
        #[arg(long, default_value = "0,0.5,1")]
        t: String,
    },
}

fn load_config(c: &Common) -> Result<SimConfig> {
    let mut cfg = match &c.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(l) = c.lambda {
        cfg.lambda = l;
    }
    if let Some(n) = c.n {
        cfg.n = n as usize;
    }
    if let Some(t) = &c.tier {
        cfg.tier = t.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_params(text: &str) -> Result<BTreeMap<String, f64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| SedError::Parse(format!("expected name=value, got '{kv}'")))?;
            let v: f64 = v.trim().parse().map_err(|_| SedError::Parse(format!("bad number '{v}'")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn param(p: &BTreeMap<String, f64>, name: &str) -> Result<f64> {
    p.get(name).copied().ok_or_else(|| SedError::Parse(format!("missing parameter '{name}'")))
}

fn oracle(kind: OracleKind, params: &str, times: &str) -> Result<()> {
    let p = parse_params(params)?;
    let ts = times
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| SedError::Parse(format!("bad time '{t}'"))))
        .collect::<Result<Vec<f64>>>()?;
    println!("t,value");
    for t in ts {
        let v = match kind {
            OracleKind::EnvelopeA | OracleKind::EnvelopeB => {
                let env = GronwallEnvelope::new(
                    param(&p, "C")?,
                    param(&p, "c")?,
                    param(&p, "lambda")?,
                    p.get("d").copied().unwrap_or(0.0),
                    param(&p, "a0")?,
                    param(&p, "b0")?,
                )?;
                if matches!(kind, OracleKind::EnvelopeA) {
                    envelope_a(&env, t)?
                } else {
                    envelope_b(&env, t)?
                }
            }
            OracleKind::LayerA => layer_bounds(param(&p, "alpha")?, param(&p, "lambda")?, param(&p, "beta")?, true)?.a_bound(param(&p, "b")?, t)?,
            OracleKind::LayerB => {
                layer_bounds(param(&p, "alpha")?, param(&p, "lambda")?, param(&p, "beta")?, true)?.b_decay(param(&p, "b")?, param(&p, "s")?, t)?
            }
        };
        println!("{t},{v}");
    }
    Ok(())
}

fn report_rows(out: &Path, name: &str, rows: Vec<(String, f64)>) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for (k, v) in &rows {
        println!("{k} = {v}");
    }
    write_summary(&out.join(name), &rows)
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load_config(&c)?;
            let rec = run(&cfg, &c.out)?;
            println!("run {} ({}) -> {}", &rec.config_hash[..12], rec.tier, rec.out_dir.display());
            for (k, v) in &rec.summary {
                println!("{k} = {v}");
            }
            if let Some(a) = rec.abort {
                eprintln!("aborted: {}", a.message);
                return Ok(a.exit_code);
            }
        }
        Command::Compare(c) => {
            let cfg = load_config(&c)?;
            if cfg.tier == Tier::Micro {
                let r = compare_meanfield(&cfg, cfg.n)?;
                report_rows(
                    &c.out,
                    "compare.csv",
                    vec![
                        ("w2_initial".into(), r.w2_initial),
                        ("w2_final".into(), r.w2_final),
                        ("growth".into(), r.growth),
                        ("E_final".into(), r.e_series.last().map_or(0.0, |p| p.1)),
                        ("H_final".into(), r.h_series.last().map_or(0.0, |p| p.1)),
                        ("d_min_constant".into(), r.dmin_constant.unwrap_or(f64::INFINITY)),
                    ],
                )?;
            } else {
                let r = compare_hydro(&cfg, cfg.lambda)?;
                report_rows(
                    &c.out,
                    "compare.csv",
                    vec![
                        ("w2_rho".into(), r.w2),
                        ("Z_final".into(), r.z_series.last().map_or(0.0, |p| p.1)),
                        ("s_rate".into(), r.s_rate),
                        ("s_plateau".into(), r.s_plateau),
                    ],
                )?;
            }
        }
        Command::SweepHydro(c) => {
            let cfg = load_config(&c)?;
            let r = sweep_hydrodynamic(&cfg, &cfg.lambdas, Some(&c.out))?;
            for row in &r.rows {
                println!("lambda = {}: w2 = {:.4e}, S rate = {:.3}, S plateau = {:.3e}", row.lambda, row.w2, row.s_rate, row.s_plateau);
            }
            println!("slope = {:.3} (r2 = {:.3})", r.slope_fit.slope, r.slope_fit.r2);
            println!("slope {} / rates {} / plateau {}", verdict(r.pass_slope), verdict(r.pass_rates), verdict(r.pass_plateau));
            if !(r.pass_slope && r.pass_rates && r.pass_plateau) {
                return Ok(1);
            }
        }
        Command::SweepMeanfield(c) => {
            let cfg = load_config(&c)?;
            let r = sweep_meanfield(&cfg, &cfg.n_values, Some(&c.out))?;
            for row in &r.rows {
                println!("N = {}: w2(0) = {:.4e}, w2(T) = {:.4e}, growth = {:.3}", row.n, row.w2_initial, row.w2_final, row.growth);
            }
            println!("growth ratio = {:.3}: {}", r.growth_ratio, verdict(r.pass));
            if !r.pass {
                return Ok(1);
            }
        }
        Command::CheckIdentities(c) => {
            let checks = check_identities(c.seed.unwrap_or(1))?;
            let mut ok = true;
            for ch in &checks {
                println!("{} {}: {:.3e} (tol {:.1e})", verdict(ch.pass), ch.name, ch.value, ch.tolerance);
                ok &= ch.pass;
            }
            if !ok {
                return Ok(1);
            }
        }
        Command::Oracle { kind, params, t } => oracle(kind, &params, &t)?,
    }
    Ok(0)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
