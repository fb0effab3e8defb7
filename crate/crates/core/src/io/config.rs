//! Flat key-value run configuration.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::model::{ModelParams, ParamSpec};
use crate::simulator::{SimOptions, ThermalParams};
use crate::solvers::{AdpConfig, SolverKind};
use crate::{Error, Result};

const DERIVED: [&str; 8] = [
    "kappa", "dt", "alpha", "gamma", "gamma1_u", "gamma2_u", "gamma1_d", "gamma2_d",
];

/// Optional overrides of the calibrated thermal constants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThermalOverrides {
    pub t_out: Option<f64>,
    pub tc_heat: Option<f64>,
    pub c_rate: Option<f64>,
    pub dt_sim: Option<f64>,
    pub margin: Option<f64>,
}

/// Model constants plus everything a run needs besides them.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ParamSpec,
    pub solver: SolverKind,
    pub tol: f64,
    pub max_iter: usize,
    pub price_grid_size: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub adp: AdpConfig,
    pub sim_steps: usize,
    pub sim: SimOptions,
    pub thermal: ThermalOverrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ParamSpec::default(),
            solver: SolverKind::Avi,
            tol: 1e-6,
            max_iter: 100_000,
            price_grid_size: 11,
            seed: 0,
            out_dir: None,
            adp: AdpConfig::default(),
            sim_steps: 100_000,
            sim: SimOptions::default(),
            thermal: ThermalOverrides::default(),
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("`{key}` must be a number"))),
    }
}

fn as_uint(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::Config(format!("`{key}` must be a non-negative integer"))),
    }
}

fn as_u32(key: &str, v: &Value) -> Result<u32> {
    u32::try_from(as_uint(key, v)?).map_err(|_| Error::Config(format!("`{key}` is too large")))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    usize::try_from(as_uint(key, v)?).map_err(|_| Error::Config(format!("`{key}` is too large")))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::Config(format!("`{key}` must be a string")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses a flat TOML document. Unknown keys, nested tables and derived
    /// quantities are rejected, and the model constants are validated.
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut cfg = RunConfig::default();
        let mut n2_given = false;
        let mut n_bar_given = false;
        let mut alpha0_given = false;
        let mut alpha1_given = false;
        for (key, v) in &table {
            let k = key.as_str();
            if DERIVED.contains(&k) {
                return Err(Error::Config(format!("`{k}` is derived from the other constants and cannot be set")));
            }
            let m = &mut cfg.model;
            match k {
                "n" => m.n = as_u32(k, v)?,
                "n1" => m.n1 = as_u32(k, v)?,
                "n2" => {
                    m.n2 = as_u32(k, v)?;
                    n2_given = true;
                }
                "n_bar" => {
                    m.n_bar = as_f64(k, v)?;
                    n_bar_given = true;
                }
                "r" => m.r = as_f64(k, v)?,
                "k" => m.k = as_f64(k, v)?,
                "lambda" => m.lambda = as_f64(k, v)?,
                "mu" => m.mu = as_f64(k, v)?,
                "b" => m.b = as_f64(k, v)?,
                "t_min" => m.t_min = as_f64(k, v)?,
                "t_max" => m.t_max = as_f64(k, v)?,
                "alpha0" => {
                    m.alpha0 = as_f64(k, v)?;
                    alpha0_given = true;
                }
                "alpha1" => {
                    m.alpha1 = as_f64(k, v)?;
                    alpha1_given = true;
                }
                "delta_y" => m.delta_y = as_f64(k, v)?,
                "tau_y" => m.tau_y = Some(as_f64(k, v)?),
                "r_disc" => m.r_disc = as_f64(k, v)?,
                "solver" => cfg.solver = as_str(k, v)?.parse()?,
                "tol" => cfg.tol = as_f64(k, v)?,
                "max_iter" => cfg.max_iter = as_usize(k, v)?,
                "price_grid_size" => cfg.price_grid_size = as_usize(k, v)?,
                "seed" => cfg.seed = as_uint(k, v)?,
                "out_dir" => cfg.out_dir = Some(PathBuf::from(as_str(k, v)?)),
                "k_min" => cfg.adp.k_min = as_usize(k, v)?,
                "eps_inner" => cfg.adp.eps_inner = as_f64(k, v)?,
                "tau_outer" => cfg.adp.tau_outer = as_f64(k, v)?,
                "max_outer" => cfg.adp.max_outer = as_usize(k, v)?,
                "max_inner" => cfg.adp.max_inner = as_usize(k, v)?,
                "sim_steps" => cfg.sim_steps = as_usize(k, v)?,
                "snapshot_every" => cfg.sim.snapshot_every = as_usize(k, v)?,
                "burn_in" => cfg.sim.burn_in = as_usize(k, v)?,
                "t_out" => cfg.thermal.t_out = Some(as_f64(k, v)?),
                "tc_heat" => cfg.thermal.tc_heat = Some(as_f64(k, v)?),
                "c_rate" => cfg.thermal.c_rate = Some(as_f64(k, v)?),
                "dt_sim" => cfg.thermal.dt_sim = Some(as_f64(k, v)?),
                "temp_margin" => cfg.thermal.margin = Some(as_f64(k, v)?),
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        // Keys left out follow the building size and the comfort band.
        let m = &mut cfg.model;
        if !n2_given {
            m.n2 = m.n;
        }
        if !n_bar_given {
            m.n_bar = f64::from(m.n) / 2.0;
        }
        if !alpha0_given {
            m.alpha0 = 0.5 * (m.t_min + m.t_max);
        }
        if !alpha1_given {
            m.alpha1 = -0.2 * (m.t_max - m.t_min);
        }
        cfg.adp.seed = cfg.seed;
        cfg.params()?;
        Ok(cfg)
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.model.clone())
    }

    /// Calibrated thermal constants with any configured overrides applied.
    pub fn thermal(&self, params: &ModelParams) -> Result<ThermalParams> {
        let mut t = ThermalParams::calibrated(params);
        let o = &self.thermal;
        t.t_out = o.t_out.unwrap_or(t.t_out);
        t.tc_heat = o.tc_heat.unwrap_or(t.tc_heat);
        t.c_rate = o.c_rate.unwrap_or(t.c_rate);
        t.dt_sim = o.dt_sim.unwrap_or(t.dt_sim);
        t.margin = o.margin.unwrap_or(t.margin);
        t.validate(params)?;
        Ok(t)
    }
}
