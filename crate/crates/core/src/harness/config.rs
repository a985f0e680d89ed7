//! Experiment configuration files.
//!
//! One `key = value` pair per line, `#` starts a comment, dotted keys group
//! settings. Lists are comma separated. Powers are given in dBm and gains in
//! dB; they are converted to watts and linear amplitudes here and nowhere else.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{Point, ScenarioGeometry};
use crate::driver::AoConfig;
use crate::error::{Error, Result};
use crate::system::{db_to_linear, dbm_to_watts, SystemParams};

/// Realization count used by `--full` runs.
pub const FULL_REALIZATIONS: usize = 100;
pub const DEFAULT_REALIZATIONS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepVariable {
    TransmitPowerDbm,
    Elements,
    AmplificationDb,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::TransmitPowerDbm => "P_T_dBm",
            SweepVariable::Elements => "n",
            SweepVariable::AmplificationDb => "eta2_dB",
        }
    }

    /// The `system.*` key this variable replaces.
    fn system_key(self) -> &'static str {
        match self {
            SweepVariable::TransmitPowerDbm => "system.pt_dbm",
            SweepVariable::Elements => "system.n",
            SweepVariable::AmplificationDb => "system.eta2_db",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [SweepVariable::TransmitPowerDbm, SweepVariable::Elements, SweepVariable::AmplificationDb]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown sweep variable `{s}` (expected P_T_dBm, n or eta2_dB)"))
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Active,
    Passive,
    NoRis,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Active, Method::Passive, Method::NoRis];

    pub fn name(self) -> &'static str {
        match self {
            Method::Active => "active",
            Method::Passive => "passive",
            Method::NoRis => "no_ris",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected active, passive or no_ris)"))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Physical settings in configuration units.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSettings {
    pub m: usize,
    pub n: usize,
    pub pt_dbm: f64,
    pub pi_dbm: f64,
    pub eta2_db: f64,
    pub noise_dbm: f64,
}

/// One sweep value with the parameters it implies, already in watts.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub params: SystemParams,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub geometry: ScenarioGeometry,
    pub system: SystemSettings,
    pub variable: SweepVariable,
    pub points: Vec<SweepPoint>,
    pub realizations: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    pub output_dir: Option<PathBuf>,
    pub write_traces: bool,
    pub ao: AoConfig,
}

impl ExperimentConfig {
    pub fn seed(&self, realization: usize) -> u64 {
        self.base_seed.wrapping_add(realization as u64)
    }

    pub fn total_runs(&self) -> usize {
        self.points.len() * self.methods.len() * self.realizations
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Entries(BTreeMap<String, Entry>);

fn value_error(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigValue { field: field.to_string(), message: message.into() }
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::ConfigParse { line, message: format!("expected `key = value`, found `{content}`") });
            };
            let key = key.trim();
            let valid_key = !key.is_empty()
                && key.split('.').all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
            if !valid_key {
                return Err(Error::ConfigParse { line, message: format!("malformed key `{key}`") });
            }
            let entry = Entry { line, value: value.trim().to_string(), used: false };
            if let Some(prev) = map.insert(key.to_string(), entry) {
                return Err(Error::ConfigParse { line, message: format!("`{key}` already set on line {}", prev.line) });
            }
        }
        Ok(Self(map))
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.0.get_mut(key).map(|e| {
            e.used = true;
            e.value.clone()
        })
    }

    fn optional<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| value_error(key, format!("cannot parse `{v}`"))),
        }
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.optional(key)?.ok_or_else(|| value_error(key, "missing required setting"))
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.optional(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let v = self.raw(key).ok_or_else(|| value_error(key, "missing required setting"))?;
        v.split(',')
            .map(|item| item.trim().parse().map_err(|_| value_error(key, format!("cannot parse list item `{}`", item.trim()))))
            .collect()
    }

    fn point(&mut self, key: &str) -> Result<Point> {
        let xs: Vec<f64> = self.list(key)?;
        match xs[..] {
            [x, y] => Ok([x, y]),
            _ => Err(value_error(key, "expected two comma-separated coordinates")),
        }
    }

    fn finish(self) -> Result<()> {
        match self.0.iter().filter(|(_, e)| !e.used).min_by_key(|(_, e)| e.line) {
            Some((key, e)) => Err(Error::ConfigParse { line: e.line, message: format!("unknown key `{key}`") }),
            None => Ok(()),
        }
    }
}

fn check_finite(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(value_error(field, "must be finite"))
    }
}

/// Watts-domain parameters for a sweep value.
pub fn build_params(system: &SystemSettings) -> Result<SystemParams> {
    let noise = dbm_to_watts(system.noise_dbm);
    let eta = db_to_linear(system.eta2_db).sqrt();
    SystemParams::uniform(system.m, system.n, dbm_to_watts(system.pt_dbm), dbm_to_watts(system.pi_dbm), eta, noise)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut e = Entries::parse(text)?;
    let variable: SweepVariable = e.required("sweep.variable")?;
    let values: Vec<f64> = e.list("sweep.values")?;

    let defaults = ScenarioGeometry::default();
    let geometry = ScenarioGeometry {
        alice_pos: e.point("geometry.alice_pos")?,
        bob_pos: e.point("geometry.bob_pos")?,
        eve_pos: e.point("geometry.eve_pos")?,
        ris_pos: e.point("geometry.ris_pos")?,
        d0: e.or("geometry.d0", defaults.d0)?,
        beta_db: e.or("geometry.beta_db", defaults.beta_db)?,
        alpha_ab: e.or("geometry.alpha_ab", defaults.alpha_ab)?,
        alpha_ae: e.or("geometry.alpha_ae", defaults.alpha_ae)?,
        alpha_ai: e.or("geometry.alpha_ai", defaults.alpha_ai)?,
        alpha_ib: e.or("geometry.alpha_ib", defaults.alpha_ib)?,
        alpha_ie: e.or("geometry.alpha_ie", defaults.alpha_ie)?,
        kappa: e.or("geometry.kappa", defaults.kappa)?,
        dt_over_lambda: e.or("geometry.dt_over_lambda", defaults.dt_over_lambda)?,
        dr_over_lambda: e.or("geometry.dr_over_lambda", defaults.dr_over_lambda)?,
    };
    geometry.validate().map_err(|err| value_error("geometry", err.to_string()))?;

    // The swept setting comes from the value list and must not also be fixed.
    let swept = variable.system_key();
    if e.0.contains_key(swept) {
        return Err(value_error(swept, format!("is set by sweep.values when sweeping {variable}")));
    }
    let mut fixed = |key: &str| -> Result<f64> {
        if key == swept {
            Ok(f64::NAN)
        } else {
            check_finite(key, e.required(key)?)
        }
    };
    let pt_dbm = fixed("system.pt_dbm")?;
    let pi_dbm = fixed("system.pi_dbm")?;
    let eta2_db = fixed("system.eta2_db")?;
    let noise_dbm = fixed("system.noise_dbm")?;
    let m: usize = e.required("system.m")?;
    let n: usize = if swept == "system.n" { 0 } else { e.required("system.n")? };
    let system = SystemSettings { m, n, pt_dbm, pi_dbm, eta2_db, noise_dbm };

    if values.is_empty() {
        return Err(value_error("sweep.values", "needs at least one value"));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(value_error("sweep.values", "must be strictly increasing"));
    }
    let mut points = Vec::with_capacity(values.len());
    for &value in &values {
        check_finite("sweep.values", value)?;
        let mut s = system.clone();
        match variable {
            SweepVariable::TransmitPowerDbm => s.pt_dbm = value,
            SweepVariable::AmplificationDb => s.eta2_db = value,
            SweepVariable::Elements => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(value_error("sweep.values", format!("element count {value} is not a positive integer")));
                }
                s.n = value as usize;
            }
        }
        let params = build_params(&s).map_err(|err| value_error("system", err.to_string()))?;
        points.push(SweepPoint { value, params });
    }

    let realizations = e.or("run.realizations", DEFAULT_REALIZATIONS)?;
    if realizations == 0 {
        return Err(value_error("run.realizations", "must be at least 1"));
    }
    let base_seed = e.or("run.base_seed", 0u64)?;
    let mut methods: Vec<Method> = match e.raw("run.methods") {
        None => Method::ALL.to_vec(),
        Some(v) => v
            .split(',')
            .map(|s| s.trim().parse().map_err(|msg: String| value_error("run.methods", msg)))
            .collect::<Result<_>>()?,
    };
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(value_error("run.methods", "needs at least one method"));
    }
    let output_dir = e.optional::<String>("run.output_dir")?.map(PathBuf::from);
    let write_traces = e.or("run.traces", true)?;

    let mut ao = AoConfig::default();
    ao.eps_ao = e.or("ao.eps", ao.eps_ao)?;
    ao.max_outer = e.or("ao.max_outer", ao.max_outer)?;
    ao.mm.eps3 = e.or("mm.eps", ao.mm.eps3)?;
    ao.mm.max_iterations = e.or("mm.max_iterations", ao.mm.max_iterations)?;
    ao.mm.penalty.eps1 = e.or("penalty.eps1", ao.mm.penalty.eps1)?;
    ao.mm.penalty.eps2 = e.or("penalty.eps2", ao.mm.penalty.eps2)?;
    ao.mm.penalty.p0 = e.or("penalty.p0", ao.mm.penalty.p0)?;
    ao.validate().map_err(|err| value_error("ao", err.to_string()))?;

    e.finish()?;
    Ok(ExperimentConfig { geometry, system, variable, points, realizations, base_seed, methods, output_dir, write_traces, ao })
}
