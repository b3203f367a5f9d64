//! Physical models of the three plant assets: PV array, battery, and
//! controllable load.
//!
//! Power is in MW, energy capacity in MWh, state of charge in per-unit of
//! capacity and time steps in hours. Battery power follows the generator
//! convention: positive discharges into the plant bus, negative charges.

use thiserror::Error;

/// Snap tolerance for SoC comparisons against the operating bounds.
pub const SOC_TOL: f64 = 1e-12;

/// Reference irradiance at which `i_sc_stc` is specified (W/m²).
pub const STC_IRRADIANCE: f64 = 1000.0;

/// Thermal-voltage reciprocal of a silicon junction at 300 K (1/V).
pub const THERMAL_COEFF_300K: f64 = 38.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssetError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("irradiance must be finite and non-negative, got {0}")]
    NegativeIrradiance(f64),
    #[error("simultaneous charge ({p_charge} MW) and discharge ({p_discharge} MW)")]
    SimultaneousChargeDischarge { p_charge: f64, p_discharge: f64 },
    #[error("battery power out of range: charge {p_charge} MW, discharge {p_discharge} MW, limit {p_max} MW")]
    PowerOutOfRange {
        p_charge: f64,
        p_discharge: f64,
        p_max: f64,
    },
    #[error("state of charge {soc} outside [{e_min}, {e_max}]")]
    SocOutOfBounds {
        soc: f64,
        e_min: f64,
        e_max: f64,
        clipped: BatteryState,
    },
}

fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<(), AssetError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(AssetError::InvalidParam { name, value, reason })
    }
}

/// Single-diode equivalent-circuit PV cell scaled to a plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvParams {
    /// Short-circuit current at 1000 W/m² (A).
    pub i_sc_stc: f64,
    /// Diode saturation current (A).
    pub i_0: f64,
    /// Parallel (leakage) resistance (Ω).
    pub r_p: f64,
    /// Series (interconnect) resistance (Ω).
    pub r_s: f64,
    /// Diode exponent coefficient (1/V).
    pub thermal_coeff: f64,
    /// Aggregate number of cells in the plant.
    pub n_cell: f64,
    /// Inverter efficiency.
    pub eta_pv: f64,
    /// Plant rating (MW); output is clamped to it.
    pub p_pv_rated: f64,
}

/// Operating point of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPoint {
    pub v_junction: f64,
    pub current: f64,
    pub v_terminal: f64,
    pub power: f64,
}

impl PvParams {
    /// Textbook silicon cell (3.8 A, 6e-10 A, 6.6 Ω, 5 mΩ) with `n_cell`
    /// chosen so that the plant delivers exactly `p_pv_rated` at 1000 W/m².
    pub fn masters_cell(p_pv_rated: f64, eta_pv: f64) -> Result<Self, AssetError> {
        let mut params = PvParams {
            i_sc_stc: 3.8,
            i_0: 6e-10,
            r_p: 6.6,
            r_s: 0.005,
            thermal_coeff: THERMAL_COEFF_300K,
            n_cell: 1.0,
            eta_pv,
            p_pv_rated,
        };
        params.autoscale()?;
        Ok(params)
    }

    /// Re-derives `n_cell` so that clear-sky output equals the rating.
    pub fn autoscale(&mut self) -> Result<(), AssetError> {
        self.n_cell = 1.0;
        self.validate()?;
        let cell = self.max_power_point(self.i_sc_stc).power;
        check(cell > 0.0, "pv.cell_power", cell, "cell produces no power at STC")?;
        let n = self.p_pv_rated * 1e6 / (self.eta_pv * cell);
        check(n >= 1.0, "pv.n_cell", n, "rating below a single cell")?;
        self.n_cell = n;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), AssetError> {
        check(self.i_sc_stc >= 0.0, "pv.i_sc_stc", self.i_sc_stc, "must be >= 0")?;
        check(self.i_0 > 0.0, "pv.i_0", self.i_0, "must be > 0")?;
        check(self.r_p > 0.0, "pv.r_p", self.r_p, "must be > 0")?;
        check(self.r_s >= 0.0, "pv.r_s", self.r_s, "must be >= 0")?;
        check(
            self.thermal_coeff > 0.0,
            "pv.thermal_coeff",
            self.thermal_coeff,
            "must be > 0",
        )?;
        check(self.n_cell >= 1.0, "pv.n_cell", self.n_cell, "must be >= 1")?;
        check(
            self.eta_pv > 0.0 && self.eta_pv <= 1.0,
            "pv.eta",
            self.eta_pv,
            "must be in (0, 1]",
        )?;
        check(self.p_pv_rated > 0.0, "pv.rated_mw", self.p_pv_rated, "must be > 0")?;
        Ok(())
    }

    /// Cell current at junction voltage `v` for short-circuit current `i_sc`.
    pub fn cell_current(&self, i_sc: f64, v: f64) -> f64 {
        i_sc - self.i_0 * (self.thermal_coeff * v).exp_m1() - v / self.r_p
    }

    fn point(&self, i_sc: f64, v: f64) -> CellPoint {
        let current = self.cell_current(i_sc, v);
        let v_terminal = v - current * self.r_s;
        CellPoint {
            v_junction: v,
            current,
            v_terminal,
            power: current * v_terminal,
        }
    }

    /// Junction voltage at which the cell current vanishes (bisection to 1e-9 A).
    pub fn open_circuit_voltage(&self, i_sc: f64) -> f64 {
        if i_sc <= 0.0 {
            return 0.0;
        }
        let mut hi = (i_sc / self.i_0).ln_1p() / self.thermal_coeff + 1e-3;
        while self.cell_current(i_sc, hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let i = self.cell_current(i_sc, mid);
            if i.abs() <= 1e-9 {
                return mid;
            }
            if i > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Golden-section search for the maximum-power point over `[0, v_oc]`.
    pub fn max_power_point(&self, i_sc: f64) -> CellPoint {
        let v_oc = self.open_circuit_voltage(i_sc);
        if v_oc <= 0.0 {
            return self.point(i_sc, 0.0);
        }
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0, v_oc);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut pc = self.point(i_sc, c).power;
        let mut pd = self.point(i_sc, d).power;
        while b - a > 1e-12 {
            if pc > pd {
                b = d;
                d = c;
                pd = pc;
                c = b - inv_phi * (b - a);
                pc = self.point(i_sc, c).power;
            } else {
                a = c;
                c = d;
                pc = pd;
                d = a + inv_phi * (b - a);
                pd = self.point(i_sc, d).power;
            }
        }
        self.point(i_sc, 0.5 * (a + b))
    }
}

/// Plant AC output (MW) for a given plane-of-array irradiance (W/m²).
pub fn pv_power(params: &PvParams, irradiance: f64) -> Result<f64, AssetError> {
    if !(irradiance >= 0.0) || !irradiance.is_finite() {
        return Err(AssetError::NegativeIrradiance(irradiance));
    }
    let i_sc = params.i_sc_stc * irradiance / STC_IRRADIANCE;
    let cell = params.max_power_point(i_sc).power.max(0.0);
    let mw = params.eta_pv * params.n_cell * cell * 1e-6;
    Ok(mw.clamp(0.0, params.p_pv_rated))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    /// Rated power (MW), symmetric for charge and discharge.
    pub p_max: f64,
    /// Energy capacity (MWh).
    pub e_cap: f64,
    /// One-way inverter efficiency.
    pub eta_inv: f64,
    /// Lower SoC bound (p.u.).
    pub e_min: f64,
    /// Upper SoC bound (p.u.).
    pub e_max: f64,
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), AssetError> {
        check(self.p_max > 0.0, "battery.p_max_mw", self.p_max, "must be > 0")?;
        check(self.e_cap > 0.0, "battery.e_cap_mwh", self.e_cap, "must be > 0")?;
        check(
            self.eta_inv > 0.0 && self.eta_inv <= 1.0,
            "battery.eta",
            self.eta_inv,
            "must be in (0, 1]",
        )?;
        check(self.e_min >= 0.0, "battery.soc_min", self.e_min, "must be >= 0")?;
        check(self.e_max <= 1.0, "battery.soc_max", self.e_max, "must be <= 1")?;
        check(
            self.e_min < self.e_max,
            "battery.soc_min",
            self.e_min,
            "must be below soc_max",
        )?;
        Ok(())
    }

    pub fn contains_soc(&self, soc: f64) -> bool {
        soc >= self.e_min - SOC_TOL && soc <= self.e_max + SOC_TOL
    }

    pub fn efficiencies(&self) -> Efficiencies {
        Efficiencies::uniform(self.eta_inv)
    }

    /// SoC drawn (p.u., positive when discharging) by net power `p_net` held for `dt` hours.
    pub fn soc_drawn(&self, p_net: f64, dt: f64) -> f64 {
        self.efficiencies().soc_drawn(self, p_net, dt)
    }

    /// Largest discharge (MW) that keeps SoC at or above `e_min` for one step.
    pub fn max_discharge(&self, soc: f64, dt: f64) -> f64 {
        self.efficiencies().max_discharge(self, soc, dt)
    }

    /// Largest charge magnitude (MW) that keeps SoC at or below `e_max` for one step.
    pub fn max_charge(&self, soc: f64, dt: f64) -> f64 {
        self.efficiencies().max_charge(self, soc, dt)
    }
}

/// Separate charge and discharge conversion efficiencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Efficiencies {
    pub charge: f64,
    pub discharge: f64,
}

impl Efficiencies {
    pub fn uniform(eta: f64) -> Self {
        Efficiencies {
            charge: eta,
            discharge: eta,
        }
    }

    pub fn soc_drawn(&self, batt: &BatteryParams, p_net: f64, dt: f64) -> f64 {
        let (p_charge, p_discharge) = split_net_power(p_net);
        (dt / batt.e_cap) * (self.charge * p_charge + p_discharge / self.discharge)
    }

    pub fn max_discharge(&self, batt: &BatteryParams, soc: f64, dt: f64) -> f64 {
        ((soc - batt.e_min).max(0.0) * batt.e_cap * self.discharge / dt).min(batt.p_max)
    }

    pub fn max_charge(&self, batt: &BatteryParams, soc: f64, dt: f64) -> f64 {
        ((batt.e_max - soc).max(0.0) * batt.e_cap / (self.charge * dt)).min(batt.p_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub soc: f64,
}

/// Splits net battery power into `(p_charge <= 0, p_discharge >= 0)`.
pub fn split_net_power(p_net: f64) -> (f64, f64) {
    if p_net >= 0.0 {
        (0.0, p_net)
    } else {
        (p_net, 0.0)
    }
}

/// Energy-reservoir update for one step.
///
/// `p_charge` is non-positive, `p_discharge` non-negative and at most one of
/// them may be nonzero. A result outside `[e_min, e_max]` is an error that
/// carries the clipped state; values within [`SOC_TOL`] of a bound are
/// snapped onto it.
pub fn battery_step(
    params: &BatteryParams,
    state: BatteryState,
    p_charge: f64,
    p_discharge: f64,
    dt: f64,
) -> Result<BatteryState, AssetError> {
    battery_step_with(params, params.efficiencies(), state, p_charge, p_discharge, dt)
}

/// [`battery_step`] with separate charge and discharge efficiencies.
pub fn battery_step_with(
    params: &BatteryParams,
    eff: Efficiencies,
    state: BatteryState,
    p_charge: f64,
    p_discharge: f64,
    dt: f64,
) -> Result<BatteryState, AssetError> {
    if p_charge != 0.0 && p_discharge != 0.0 {
        return Err(AssetError::SimultaneousChargeDischarge { p_charge, p_discharge });
    }
    if !(p_charge <= 0.0 && p_charge >= -params.p_max && p_discharge >= 0.0 && p_discharge <= params.p_max) {
        return Err(AssetError::PowerOutOfRange {
            p_charge,
            p_discharge,
            p_max: params.p_max,
        });
    }
    let soc = state.soc - (dt / params.e_cap) * (eff.charge * p_charge + p_discharge / eff.discharge);
    if soc < params.e_min - SOC_TOL || soc > params.e_max + SOC_TOL {
        return Err(AssetError::SocOutOfBounds {
            soc,
            e_min: params.e_min,
            e_max: params.e_max,
            clipped: BatteryState {
                soc: soc.clamp(params.e_min, params.e_max),
            },
        });
    }
    Ok(BatteryState {
        soc: soc.clamp(params.e_min, params.e_max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadParams {
    /// Rated consumption (MW).
    pub p_max: f64,
}

pub fn load_feasible(params: &LoadParams, p_cl: f64) -> bool {
    (0.0..=params.p_max).contains(&p_cl)
}

/// Rated limits of the whole plant plus the simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssetFleet {
    pub pv: PvParams,
    pub battery: BatteryParams,
    pub load: LoadParams,
    /// Step duration (h).
    pub dt: f64,
}

impl AssetFleet {
    /// 3 MW PV, 3 MW load, 5 MW / 5 MWh battery at 95 % with SoC in
    /// [0.1, 0.9], stepped every 2 s.
    pub fn reference_plant() -> Self {
        AssetFleet {
            pv: PvParams::masters_cell(3.0, 1.0).expect("default PV parameters are valid"),
            battery: BatteryParams {
                p_max: 5.0,
                e_cap: 5.0,
                eta_inv: 0.95,
                e_min: 0.1,
                e_max: 0.9,
            },
            load: LoadParams { p_max: 3.0 },
            dt: 2.0 / 3600.0,
        }
    }

    pub fn validate(&self) -> Result<(), AssetError> {
        self.pv.validate()?;
        self.battery.validate()?;
        check(self.load.p_max >= 0.0, "load.p_max_mw", self.load.p_max, "must be >= 0")?;
        check(self.dt > 0.0, "sim.dt_s", self.dt, "must be > 0")?;
        Ok(())
    }

    /// Step duration in seconds.
    pub fn dt_seconds(&self) -> f64 {
        self.dt * 3600.0
    }
}

/// Initial SoC used by the default plant (p.u.).
pub const REFERENCE_SOC0: f64 = 0.5;
