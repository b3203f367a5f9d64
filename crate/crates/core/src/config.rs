//! Run configuration: a flat document of dotted `key = value` lines.
//!
//! Every key is optional; defaults describe a 3 MW PV / 3 MW load /
//! 5 MW, 5 MWh battery plant on 2 s steps. Problems are collected and
//! reported together rather than one at a time.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::assets::{AssetFleet, PvParams, REFERENCE_SOC0};
use crate::flexibility::Scenario;
use crate::market::{MarketPrices, PvStatistic};
use crate::oracle::DEFAULT_SOC_GRID;
use crate::soc_guard::GuardConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration problem(s)", self.problems.len())?;
        for p in &self.problems {
            write!(f, "\n  - {p}")?;
        }
        Ok(())
    }
}

impl ConfigError {
    fn single(msg: String) -> Self {
        ConfigError { problems: vec![msg] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapacityMode {
    Fixed(f64),
    /// Largest envelope excursion over the largest signal excursion.
    MaxFlex,
    /// Battery rating plus half a PV statistic.
    Decomposed(PvStatistic),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalSource {
    Csv(PathBuf),
    Synthetic { seed: u64, window_s: u64, bias: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrradianceSource {
    Csv(PathBuf),
    /// Seeded clear-sky-with-clouds series starting at `start` (epoch s).
    Synthetic {
        seed: u64,
        start: i64,
    },
    /// Constant irradiance (W/m²).
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub fleet: AssetFleet,
    pub soc0: f64,
    pub dt_s: f64,
    pub hours: f64,
    pub scenario: Scenario,
    pub capacity: CapacityMode,
    pub prices: MarketPrices,
    pub guard: Option<GuardConfig>,
    pub signal: SignalSource,
    pub irradiance: IrradianceSource,
    pub oracle: bool,
    pub soc_grid: usize,
    /// Days of data for bid sweeps.
    pub sweep_days: u32,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fleet: AssetFleet::reference_plant(),
            soc0: REFERENCE_SOC0,
            dt_s: 2.0,
            hours: 1.0,
            scenario: Scenario::S1,
            capacity: CapacityMode::Fixed(6.5),
            prices: MarketPrices {
                lambda_c: 10.0,
                lambda_m: 1.0,
            },
            guard: None,
            signal: SignalSource::Synthetic {
                seed: 1,
                window_s: 900,
                bias: 0.0,
            },
            // 2021-06-21 00:00 UTC.
            irradiance: IrradianceSource::Synthetic {
                seed: 1,
                start: 1_624_233_600,
            },
            oracle: false,
            soc_grid: DEFAULT_SOC_GRID,
            sweep_days: 28,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Number of simulation steps in the configured horizon.
    pub fn steps(&self) -> usize {
        (self.hours * 3600.0 / self.dt_s).round() as usize
    }

    pub fn from_path(path: &Path) -> Result<RunConfig, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::single(format!("{}: {e}", path.display())))?;
        RunConfig::from_str_doc(&text)
    }

    pub fn from_str_doc(text: &str) -> Result<RunConfig, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::single(e.to_string()))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        let mut b = Builder {
            flat,
            problems: Vec::new(),
        };
        let cfg = b.build();
        let mut problems = b.problems;
        for key in b.flat.keys() {
            problems.push(format!("unknown key `{key}`"));
        }
        if problems.is_empty() {
            problems.extend(cfg.validate());
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError { problems })
        }
    }

    /// All invariant violations of a fully built configuration.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.fleet.validate() {
            out.push(e.to_string());
        }
        let b = &self.fleet.battery;
        if !(self.soc0 >= b.e_min && self.soc0 <= b.e_max) {
            out.push(format!(
                "battery.soc0 = {} outside [{}, {}]",
                self.soc0, b.e_min, b.e_max
            ));
        }
        if !(self.dt_s > 0.0) {
            out.push(format!("sim.dt_s = {} must be > 0", self.dt_s));
        } else if self.dt_s.fract() != 0.0 {
            out.push(format!("sim.dt_s = {} must be a whole number of seconds", self.dt_s));
        }
        if !(self.hours > 0.0) || self.steps() == 0 {
            out.push(format!("sim.hours = {} gives no steps", self.hours));
        }
        if let CapacityMode::Fixed(c) = self.capacity {
            if !(c > 0.0) || !c.is_finite() {
                out.push(format!("market.capacity_mw = {c} must be > 0"));
            }
        }
        if let Err(e) = self.prices.validate() {
            out.push(e.to_string());
        }
        if let Some(g) = &self.guard {
            if let Err(e) = g.validate(b) {
                out.push(e.to_string());
            } else if !(self.soc0 >= g.e_lower && self.soc0 <= g.e_upper) {
                out.push(format!(
                    "battery.soc0 = {} outside guard band [{}, {}]",
                    self.soc0, g.e_lower, g.e_upper
                ));
            }
        }
        if let SignalSource::Synthetic { window_s, bias, .. } = self.signal {
            if window_s == 0 {
                out.push("signal.window_s must be > 0".into());
            }
            if !(bias.abs() <= 1.0) {
                out.push(format!("signal.bias = {bias} outside [-1, 1]"));
            }
        }
        if let IrradianceSource::Constant(g) = self.irradiance {
            if !(g >= 0.0) || !g.is_finite() {
                out.push(format!("irradiance.ghi_wm2 = {g} must be >= 0"));
            }
        }
        if self.soc_grid < 3 {
            out.push(format!("oracle.soc_grid = {} must be >= 3", self.soc_grid));
        }
        if self.sweep_days == 0 {
            out.push("sweep.days must be > 0".into());
        }
        out
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Builder {
    flat: BTreeMap<String, toml::Value>,
    problems: Vec<String>,
}

impl Builder {
    fn num(&mut self, key: &str, default: f64) -> f64 {
        match self.flat.remove(key) {
            None => default,
            Some(toml::Value::Float(v)) => v,
            Some(toml::Value::Integer(v)) => v as f64,
            Some(other) => {
                self.problems
                    .push(format!("`{key}` must be a number, found {}", other.type_str()));
                default
            }
        }
    }

    fn uint(&mut self, key: &str, default: u64) -> u64 {
        match self.flat.remove(key) {
            None => default,
            Some(toml::Value::Integer(v)) if v >= 0 => v as u64,
            Some(other) => {
                self.problems
                    .push(format!("`{key}` must be a non-negative integer, found {other}"));
                default
            }
        }
    }

    fn int(&mut self, key: &str, default: i64) -> i64 {
        match self.flat.remove(key) {
            None => default,
            Some(toml::Value::Integer(v)) => v,
            Some(other) => {
                self.problems.push(format!("`{key}` must be an integer, found {other}"));
                default
            }
        }
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        match self.flat.remove(key) {
            None => default,
            Some(toml::Value::Boolean(v)) => v,
            Some(other) => {
                self.problems
                    .push(format!("`{key}` must be true or false, found {other}"));
                default
            }
        }
    }

    fn text(&mut self, key: &str) -> Option<String> {
        match self.flat.remove(key) {
            None => None,
            Some(toml::Value::String(s)) => Some(s),
            Some(other) => {
                self.problems.push(format!("`{key}` must be a string, found {other}"));
                None
            }
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        match self.text(key) {
            None => default,
            Some(s) => s.parse().unwrap_or_else(|e| {
                self.problems.push(format!("`{key}`: {e}"));
                default
            }),
        }
    }

    fn build(&mut self) -> RunConfig {
        let d = RunConfig::default();
        let mut fleet = d.fleet;

        let rated = self.num("pv.rated_mw", fleet.pv.p_pv_rated);
        let eta_pv = self.num("pv.eta", fleet.pv.eta_pv);
        let custom_cell = ["pv.i_sc_stc", "pv.i_0", "pv.r_p", "pv.r_s", "pv.n_cell"]
            .iter()
            .any(|k| self.flat.contains_key(*k));
        let base = PvParams::masters_cell(rated, eta_pv).unwrap_or(fleet.pv);
        let mut pv = PvParams {
            i_sc_stc: self.num("pv.i_sc_stc", base.i_sc_stc),
            i_0: self.num("pv.i_0", base.i_0),
            r_p: self.num("pv.r_p", base.r_p),
            r_s: self.num("pv.r_s", base.r_s),
            n_cell: self.num("pv.n_cell", base.n_cell),
            ..base
        };
        pv.p_pv_rated = rated;
        pv.eta_pv = eta_pv;
        if custom_cell && !self.flat.contains_key("pv.n_cell") {
            if let Err(e) = pv.autoscale() {
                self.problems.push(e.to_string());
            }
        }
        if let Err(e) = pv.validate() {
            self.problems.push(e.to_string());
        }
        fleet.pv = pv;

        fleet.load.p_max = self.num("load.p_max_mw", fleet.load.p_max);
        fleet.battery.p_max = self.num("battery.p_max_mw", fleet.battery.p_max);
        fleet.battery.e_cap = self.num("battery.e_cap_mwh", fleet.battery.e_cap);
        fleet.battery.eta_inv = self.num("battery.eta", fleet.battery.eta_inv);
        fleet.battery.e_min = self.num("battery.soc_min", fleet.battery.e_min);
        fleet.battery.e_max = self.num("battery.soc_max", fleet.battery.e_max);
        let soc0 = self.num("battery.soc0", d.soc0);

        let dt_s = self.num("sim.dt_s", d.dt_s);
        fleet.dt = dt_s / 3600.0;
        let hours = self.num("sim.hours", d.hours);
        let scenario = self.parsed("sim.scenario", d.scenario);

        let capacity = match self.text("market.capacity_mode").as_deref() {
            None | Some("fixed") => CapacityMode::Fixed(self.num("market.capacity_mw", 6.5)),
            Some("max-flex") => CapacityMode::MaxFlex,
            Some("decomposed") => CapacityMode::Decomposed(self.parsed("market.statistic", PvStatistic::Mean)),
            Some(other) => {
                self.problems.push(format!(
                    "`market.capacity_mode` = `{other}` (expected fixed, max-flex or decomposed)"
                ));
                d.capacity
            }
        };
        let prices = MarketPrices {
            lambda_c: self.num("market.lambda_c", d.prices.lambda_c),
            lambda_m: self.num("market.lambda_m", d.prices.lambda_m),
        };

        let guard_on = self.flag("guard.enabled", false);
        let e_upper = self.num("guard.e_upper", 0.6);
        let e_lower = self.num("guard.e_lower", 0.4);
        let buffer = self.num("guard.buffer", 0.1 * (e_upper - e_lower));
        let guard = guard_on.then(|| GuardConfig::new(e_upper, e_lower, buffer));

        let signal = match self.text("signal.source").as_deref() {
            None | Some("synthetic") => SignalSource::Synthetic {
                seed: self.uint("signal.seed", 1),
                window_s: self.uint("signal.window_s", 900),
                bias: self.num("signal.bias", 0.0),
            },
            Some("csv") => match self.text("signal.path") {
                Some(p) => SignalSource::Csv(PathBuf::from(p)),
                None => {
                    self.problems
                        .push("`signal.source = \"csv\"` needs `signal.path`".into());
                    d.signal.clone()
                }
            },
            Some(other) => {
                self.problems
                    .push(format!("`signal.source` = `{other}` (expected synthetic or csv)"));
                d.signal.clone()
            }
        };

        let irradiance = match self.text("irradiance.source").as_deref() {
            None | Some("synthetic") => IrradianceSource::Synthetic {
                seed: self.uint("irradiance.seed", 1),
                start: self.int("irradiance.start", 1_624_233_600),
            },
            Some("constant") => IrradianceSource::Constant(self.num("irradiance.ghi_wm2", 1000.0)),
            Some("csv") => match self.text("irradiance.path") {
                Some(p) => IrradianceSource::Csv(PathBuf::from(p)),
                None => {
                    self.problems
                        .push("`irradiance.source = \"csv\"` needs `irradiance.path`".into());
                    d.irradiance.clone()
                }
            },
            Some(other) => {
                self.problems.push(format!(
                    "`irradiance.source` = `{other}` (expected synthetic, constant or csv)"
                ));
                d.irradiance.clone()
            }
        };

        let oracle = self.flag("oracle.enabled", false);
        let soc_grid = self.uint("oracle.soc_grid", d.soc_grid as u64) as usize;
        let sweep_days = self.uint("sweep.days", d.sweep_days as u64).min(u32::MAX as u64) as u32;
        let out_dir = self.text("output.dir").map_or(d.out_dir, PathBuf::from);

        RunConfig {
            fleet,
            soc0,
            dt_s,
            hours,
            scenario,
            capacity,
            prices,
            guard,
            signal,
            irradiance,
            oracle,
            soc_grid,
            sweep_days,
            out_dir,
        }
    }
}
