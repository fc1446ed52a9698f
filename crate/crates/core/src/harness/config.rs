//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comment
//! [run]
//! tier = vlasov
//! T = 0.5
//! [grid]
//! L = 6
//! n = 64
//! ```
//!
//! Keys inside a section are qualified as `section.key`. A few short aliases
//! (`T`, `L`, `lambda`, `seed`, `tier`, `dt`) are accepted at top level.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::sampling::{Family, InitialSpec};
use crate::error::{Result, SedError};
use crate::kinetic::DEFAULT_K_SET;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Micro,
    Vlasov,
    Transport,
}

impl FromStr for Tier {
    type Err = SedError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "micro" => Ok(Tier::Micro),
            "vlasov" | "kinetic" => Ok(Tier::Vlasov),
            "transport" | "macro" => Ok(Tier::Transport),
            other => Err(SedError::Parse(format!("unknown tier '{other}'"))),
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tier::Micro => "micro",
            Tier::Vlasov => "vlasov",
            Tier::Transport => "transport",
        })
    }
}

/// Full description of a run or sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub tier: Tier,
    /// Particles (micro) or samples (vlasov, transport).
    pub n: usize,
    /// Kinetic samples per particle in coupled micro/kinetic comparisons.
    pub samples_per_particle: usize,
    pub lambda: f64,
    pub t_end: f64,
    pub dt: f64,
    pub box_length: f64,
    pub grid_n: usize,
    pub seed: u64,
    pub snapshots: usize,
    pub initial: InitialSpec,
    pub c_v: f64,
    pub dmin_floor: f64,
    pub k_set: Vec<f64>,
    /// Solver tolerances: `brinkman`, `closure`.
    pub tolerances: BTreeMap<String, f64>,
    pub lambdas: Vec<f64>,
    pub n_values: Vec<usize>,
    pub slope_max: f64,
    pub r2_min: f64,
    pub rate_ratio_tol: f64,
    pub growth_ratio_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            tier: Tier::Vlasov,
            n: 4096,
            samples_per_particle: 2,
            lambda: 20.0,
            t_end: 1.0,
            dt: 0.01,
            box_length: 6.0,
            grid_n: 32,
            seed: 1,
            snapshots: 50,
            initial: InitialSpec::default(),
            c_v: 10.0,
            dmin_floor: 0.0,
            k_set: DEFAULT_K_SET.to_vec(),
            tolerances: [("brinkman".to_string(), 1e-8), ("closure".to_string(), 1e-12)].into_iter().collect(),
            lambdas: vec![10.0, 20.0, 40.0, 80.0],
            n_values: vec![250, 500, 1000, 2000],
            slope_max: -0.7,
            r2_min: 0.9,
            rate_ratio_tol: 0.3,
            growth_ratio_max: 2.0,
        }
    }
}

fn canonical_key(section: &str, key: &str) -> Result<String> {
    let full = if key.contains('.') || section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
    let resolved = match full.as_str() {
        "tier" => "run.tier",
        "seed" => "run.seed",
        "T" | "t_end" | "run.T" => "run.t_end",
        "dt" => "run.dt",
        "snapshots" => "run.snapshots",
        "lambda" => "physics.lambda",
        "L" | "box_length" | "grid.L" => "grid.box_length",
        "n_particles" | "n_samples" | "particles.n_particles" | "particles.n_samples" => "particles.n",
        other => other,
    };
    if KEYS.contains(&resolved) || resolved.starts_with("tolerances.") {
        Ok(resolved.to_string())
    } else {
        Err(SedError::Parse(format!("unknown configuration key '{full}'")))
    }
}

const KEYS: [&str; 23] = [
    "run.tier",
    "run.seed",
    "run.t_end",
    "run.dt",
    "run.snapshots",
    "physics.lambda",
    "grid.box_length",
    "grid.n",
    "particles.n",
    "particles.samples_per_particle",
    "particles.c_v",
    "particles.dmin_floor",
    "initial.family",
    "initial.sigma_x",
    "initial.sigma_v",
    "moments.k_set",
    "sweep.lambdas",
    "sweep.n_values",
    "sweep.slope_max",
    "sweep.r2_min",
    "sweep.rate_ratio_tol",
    "sweep.growth_ratio_max",
    "run.name",
];

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| SedError::Parse(format!("{key}: cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Parses the text grammar into canonical `section.key → value` pairs.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut section = String::new();
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| SedError::Parse(format!("line {}: unterminated section", lineno + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| SedError::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        out.insert(canonical_key(&section, k.trim())?, v.trim().to_string());
    }
    Ok(out)
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one value by (canonical or alias) key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = canonical_key("", key)?;
        let v = value.trim();
        match key.as_str() {
            "run.tier" => self.tier = v.parse()?,
            "run.seed" => self.seed = parse_num(&key, v)?,
            "run.t_end" => self.t_end = parse_num(&key, v)?,
            "run.dt" => self.dt = parse_num(&key, v)?,
            "run.snapshots" => self.snapshots = parse_num(&key, v)?,
            "run.name" => {}
            "physics.lambda" => self.lambda = parse_num(&key, v)?,
            "grid.box_length" => self.box_length = parse_num(&key, v)?,
            "grid.n" => self.grid_n = parse_num(&key, v)?,
            "particles.n" => self.n = parse_num(&key, v)?,
            "particles.samples_per_particle" => self.samples_per_particle = parse_num(&key, v)?,
            "particles.c_v" => self.c_v = parse_num(&key, v)?,
            "particles.dmin_floor" => self.dmin_floor = parse_num(&key, v)?,
            "initial.family" => self.initial.family = v.parse()?,
            "initial.sigma_x" => self.initial.sigma_x = parse_num(&key, v)?,
            "initial.sigma_v" => self.initial.sigma_v = parse_num(&key, v)?,
            "moments.k_set" => self.k_set = parse_list(&key, v)?,
            "sweep.lambdas" => self.lambdas = parse_list(&key, v)?,
            "sweep.n_values" => self.n_values = parse_list(&key, v)?,
            "sweep.slope_max" => self.slope_max = parse_num(&key, v)?,
            "sweep.r2_min" => self.r2_min = parse_num(&key, v)?,
            "sweep.rate_ratio_tol" => self.rate_ratio_tol = parse_num(&key, v)?,
            "sweep.growth_ratio_max" => self.growth_ratio_max = parse_num(&key, v)?,
            t if t.starts_with("tolerances.") => {
                self.tolerances.insert(t["tolerances.".len()..].to_string(), parse_num(&key, v)?);
            }
            _ => unreachable!("canonical_key admitted {key}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SedError::invalid(m));
        if !(self.dt > 0.0) || !(self.t_end >= self.dt) {
            return bad(format!("need dt > 0 and T >= dt, got dt = {}, T = {}", self.dt, self.t_end));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("λ must be > 0, got {}", self.lambda));
        }
        if self.grid_n < 8 || !self.grid_n.is_power_of_two() {
            return bad(format!("grid n must be a power of two >= 8, got {}", self.grid_n));
        }
        if !(self.box_length > 0.0) {
            return bad(format!("box length must be > 0, got {}", self.box_length));
        }
        if self.n == 0 || self.samples_per_particle == 0 || self.snapshots == 0 {
            return bad("particle count, samples per particle and snapshots must be positive".into());
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0)) {
            return bad("sweep λ values must be > 0".into());
        }
        self.initial.validate()
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// Canonical key/value pairs with normalised values.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("run.tier", self.tier.to_string());
        put("run.seed", self.seed.to_string());
        put("run.t_end", self.t_end.to_string());
        put("run.dt", self.dt.to_string());
        put("run.snapshots", self.snapshots.to_string());
        put("physics.lambda", self.lambda.to_string());
        put("grid.box_length", self.box_length.to_string());
        put("grid.n", self.grid_n.to_string());
        put("particles.n", self.n.to_string());
        put("particles.samples_per_particle", self.samples_per_particle.to_string());
        put("particles.c_v", self.c_v.to_string());
        put("particles.dmin_floor", self.dmin_floor.to_string());
        put("initial.family", self.initial.family.to_string());
        put("initial.sigma_x", self.initial.sigma_x.to_string());
        put("initial.sigma_v", self.initial.sigma_v.to_string());
        put("moments.k_set", join(&self.k_set));
        put("sweep.lambdas", join(&self.lambdas));
        put("sweep.n_values", join(&self.n_values));
        put("sweep.slope_max", self.slope_max.to_string());
        put("sweep.r2_min", self.r2_min.to_string());
        put("sweep.rate_ratio_tol", self.rate_ratio_tol.to_string());
        put("sweep.growth_ratio_max", self.growth_ratio_max.to_string());
        for (k, v) in &self.tolerances {
            put(&format!("tolerances.{k}"), v.to_string());
        }
        m
    }

    /// Text form that parses back to the same configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current = String::new();
        for (k, v) in self.to_pairs() {
            let (section, key) = k.split_once('.').expect("qualified key");
            if section != current {
                out.push_str(&format!("[{section}]\n"));
                current = section.to_string();
            }
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }

    /// SHA-256 over the sorted canonical pairs, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.to_pairs() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

impl FromStr for Family {
    type Err = SedError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "uniform_ball" | "ball" => Ok(Family::UniformBall),
            "well_prepared" => Ok(Family::WellPrepared),
            "monokinetic" => Ok(Family::Monokinetic),
            other => Err(SedError::Parse(format!("unknown initial family '{other}'"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::UniformBall => "uniform_ball",
            Family::WellPrepared => "well_prepared",
            Family::Monokinetic => "monokinetic",
        })
    }
}
