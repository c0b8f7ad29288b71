//! Run configuration: flat `key = value` files plus command-line overrides.
//!
//! ```text
//! # comments and blank lines are ignored
//! problem = mid_cantilever
//! encoding = classical
//! symmetry = true
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::Benchmark;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Quantum,
    Classical,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Quantum => "quantum",
            Encoding::Classical => "classical",
        })
    }
}

impl FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(Encoding::Quantum),
            "classical" => Ok(Encoding::Classical),
            _ => Err(Error::arg(format!("unknown encoding `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Benchmark,
    pub encoding: Encoding,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub d_z: usize,
    pub iterations: usize,
    pub filtering: bool,
    pub symmetry: bool,
    pub seed: u64,
    pub nx: usize,
    pub ny: usize,
    pub target_volume: f64,
    pub output_dir: PathBuf,
    /// `|Omega|` in the penalty weights; 1 is the unit-square frame of the
    /// decoder coordinates, `nx * ny` counts unit elements.
    pub domain_area: f64,

    pub lr_decoder: f64,
    pub lr_projection: f64,
    pub lr_latent: f64,
    pub lr_theta: f64,
    pub fourier_m: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub r_min: f64,
    pub sym_max: f64,
    pub heaviside_period: usize,
    pub heaviside_cap: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: Benchmark::TipCantilever,
            encoding: Encoding::Quantum,
            n_qubits: 3,
            n_layers: 5,
            d_z: 64,
            iterations: 200,
            filtering: false,
            symmetry: false,
            seed: 0,
            nx: 60,
            ny: 30,
            target_volume: 0.4,
            output_dir: PathBuf::from("out"),
            domain_area: 1.0,
            lr_decoder: 1e-3,
            lr_projection: 1e-3,
            lr_latent: 1e-2,
            lr_theta: 1e-2,
            fourier_m: 32,
            f_min: 0.5,
            f_max: 8.0,
            r_min: 1.5,
            sym_max: 0.1,
            heaviside_period: 50,
            heaviside_cap: 64.0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "problem",
    "encoding",
    "n_qubits",
    "n_layers",
    "d_z",
    "iterations",
    "filtering",
    "symmetry",
    "seed",
    "nx",
    "ny",
    "Vstar",
    "output_dir",
    "domain_area",
    "lr_decoder",
    "lr_projection",
    "lr_latent",
    "lr_theta",
    "fourier_m",
    "f_min",
    "f_max",
    "r_min",
    "sym_max",
    "heaviside_period",
    "heaviside_cap",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Config {
        key: key.to_string(),
        msg: format!("cannot parse `{value}`: {e}"),
    })
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "problem" => self.problem = parse_value(key, v)?,
            "encoding" => self.encoding = parse_value(key, v)?,
            "n_qubits" => self.n_qubits = parse_value(key, v)?,
            "n_layers" => self.n_layers = parse_value(key, v)?,
            "d_z" => self.d_z = parse_value(key, v)?,
            "iterations" => self.iterations = parse_value(key, v)?,
            "filtering" => self.filtering = parse_value(key, v)?,
            "symmetry" => self.symmetry = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "nx" => self.nx = parse_value(key, v)?,
            "ny" => self.ny = parse_value(key, v)?,
            "Vstar" => self.target_volume = parse_value(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "domain_area" => self.domain_area = parse_value(key, v)?,
            "lr_decoder" => self.lr_decoder = parse_value(key, v)?,
            "lr_projection" => self.lr_projection = parse_value(key, v)?,
            "lr_latent" => self.lr_latent = parse_value(key, v)?,
            "lr_theta" => self.lr_theta = parse_value(key, v)?,
            "fourier_m" => self.fourier_m = parse_value(key, v)?,
            "f_min" => self.f_min = parse_value(key, v)?,
            "f_max" => self.f_max = parse_value(key, v)?,
            "r_min" => self.r_min = parse_value(key, v)?,
            "sym_max" => self.sym_max = parse_value(key, v)?,
            "heaviside_period" => self.heaviside_period = parse_value(key, v)?,
            "heaviside_cap" => self.heaviside_cap = parse_value(key, v)?,
            _ => {
                return Err(Error::Config {
                    key: key.to_string(),
                    msg: "unknown key".to_string(),
                })
            }
        }
        Ok(())
    }

    /// Parses config text, then applies `overrides` (`key=value` strings).
    /// Without an explicit `iterations`, filtering runs default to 500.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut explicit_iterations = false;
        let mut assignments = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                msg: format!("line {} is not `key = value`", lineno + 1),
            })?;
            assignments.push((k.trim().to_string(), v.trim().to_string()));
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config {
                key: o.clone(),
                msg: "override is not `key=value`".to_string(),
            })?;
            assignments.push((k.trim().to_string(), v.trim().to_string()));
        }
        for (k, v) in &assignments {
            cfg.set(k, v)?;
            explicit_iterations |= k == "iterations";
        }
        if cfg.filtering && !explicit_iterations {
            cfg.iterations = 500;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: "config".to_string(),
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| {
            Err(Error::Config {
                key: key.to_string(),
                msg: msg.to_string(),
            })
        };
        if self.n_qubits == 0 || self.n_qubits > 20 {
            return bad("n_qubits", "must be between 1 and 20");
        }
        if self.d_z <= 3 * self.n_qubits {
            return bad("d_z", "must exceed 3 * n_qubits");
        }
        if self.iterations == 0 {
            return bad("iterations", "must be positive");
        }
        if self.nx == 0 || self.ny == 0 {
            return bad("nx", "mesh dimensions must be positive");
        }
        if !(self.target_volume > 0.0 && self.target_volume < 1.0) {
            return bad("Vstar", "must lie in (0, 1)");
        }
        for (key, lr) in [
            ("lr_decoder", self.lr_decoder),
            ("lr_projection", self.lr_projection),
            ("lr_latent", self.lr_latent),
            ("lr_theta", self.lr_theta),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(key, "learning rates must be positive");
            }
        }
        if self.fourier_m == 0 {
            return bad("fourier_m", "must be positive");
        }
        if !(self.f_min > 0.0 && self.f_min <= self.f_max) {
            return bad("f_min", "need 0 < f_min <= f_max");
        }
        if !(self.domain_area > 0.0 && self.domain_area.is_finite()) {
            return bad("domain_area", "must be positive");
        }
        if !(self.r_min > 0.0) {
            return bad("r_min", "must be positive");
        }
        if self.sym_max < 0.0 {
            return bad("sym_max", "must be non-negative");
        }
        if self.heaviside_period == 0 || !(self.heaviside_cap >= 1.0) {
            return bad("heaviside_period", "period must be positive and cap >= 1");
        }
        Ok(())
    }

    /// `key = value` lines that reproduce this config.
    pub fn to_text(&self) -> String {
        let rows: Vec<(&str, String)> = vec![
            ("problem", self.problem.to_string()),
            ("encoding", self.encoding.to_string()),
            ("n_qubits", self.n_qubits.to_string()),
            ("n_layers", self.n_layers.to_string()),
            ("d_z", self.d_z.to_string()),
            ("iterations", self.iterations.to_string()),
            ("filtering", self.filtering.to_string()),
            ("symmetry", self.symmetry.to_string()),
            ("seed", self.seed.to_string()),
            ("nx", self.nx.to_string()),
            ("ny", self.ny.to_string()),
            ("Vstar", self.target_volume.to_string()),
            ("domain_area", self.domain_area.to_string()),
            ("lr_decoder", self.lr_decoder.to_string()),
            ("lr_projection", self.lr_projection.to_string()),
            ("lr_latent", self.lr_latent.to_string()),
            ("lr_theta", self.lr_theta.to_string()),
            ("fourier_m", self.fourier_m.to_string()),
            ("f_min", self.f_min.to_string()),
            ("f_max", self.f_max.to_string()),
            ("r_min", self.r_min.to_string()),
            ("sym_max", self.sym_max.to_string()),
            ("heaviside_period", self.heaviside_period.to_string()),
            ("heaviside_cap", self.heaviside_cap.to_string()),
        ];
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
