//! State-of-charge drift correction and the per-step simulation loop.
//!
//! The guard tapers battery power linearly to zero inside a buffer zone at
//! the edges of a target SoC band, but only in the direction that would push
//! SoC out of the band. Allocation runs first; the guard only ever shrinks
//! the battery setpoint, and whatever power it removes shows up as tracking
//! shortfall.

use thiserror::Error;

use crate::assets::{
    battery_step_with, split_net_power, AssetError, AssetFleet, BatteryParams, BatteryState, Efficiencies,
};
use crate::dispatch::{allocate, allocate_nearest, DispatchError, DispatchRecord};
use crate::flexibility::{envelope, Scenario};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuardError {
    #[error("invalid guard band: {0}")]
    InvalidBand(String),
    #[error("series length mismatch: signal has {signal} samples, PV has {pv}")]
    LengthMismatch { signal: usize, pv: usize },
    #[error("initial SoC {soc0} outside [{lo}, {hi}]")]
    InitialSoc { soc0: f64, lo: f64, hi: f64 },
    #[error("capacity must be finite and non-negative, got {0}")]
    Capacity(f64),
    #[error("step {step}: {source}")]
    Dispatch {
        step: usize,
        #[source]
        source: DispatchError,
    },
    #[error("step {step}: {source}")]
    Battery {
        step: usize,
        #[source]
        source: AssetError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardConfig {
    pub e_upper: f64,
    pub e_lower: f64,
    pub buffer: f64,
    /// Charge/discharge efficiencies for the SoC update; the battery's
    /// inverter efficiency when unset.
    pub efficiencies: Option<Efficiencies>,
}

impl GuardConfig {
    pub fn new(e_upper: f64, e_lower: f64, buffer: f64) -> Self {
        GuardConfig {
            e_upper,
            e_lower,
            buffer,
            efficiencies: None,
        }
    }

    /// Buffer set to a tenth of the band width.
    pub fn with_default_buffer(e_upper: f64, e_lower: f64) -> Self {
        Self::new(e_upper, e_lower, 0.1 * (e_upper - e_lower))
    }

    pub fn efficiencies_for(&self, batt: &BatteryParams) -> Efficiencies {
        self.efficiencies.unwrap_or_else(|| batt.efficiencies())
    }

    pub fn validate(&self, batt: &BatteryParams) -> Result<(), GuardError> {
        let fail = |msg: String| Err(GuardError::InvalidBand(msg));
        if !(self.e_lower < self.e_upper) {
            return fail(format!(
                "e_lower {} must be below e_upper {}",
                self.e_lower, self.e_upper
            ));
        }
        if !(self.buffer > 0.0 && self.buffer <= 0.5 * (self.e_upper - self.e_lower)) {
            return fail(format!("buffer {} must lie in (0, half the band]", self.buffer));
        }
        if self.e_lower < batt.e_min || self.e_upper > batt.e_max {
            return fail(format!(
                "band [{}, {}] must lie within battery limits [{}, {}]",
                self.e_lower, self.e_upper, batt.e_min, batt.e_max
            ));
        }
        if let Some(eff) = self.efficiencies {
            for eta in [eff.charge, eff.discharge] {
                if !(eta > 0.0 && eta <= 1.0) {
                    return fail(format!("efficiency {eta} must be in (0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Largest one-step SoC move as a fraction of the buffer. The band is
    /// invariant under the guard whenever this is at most one.
    pub fn containment_ratio(&self, batt: &BatteryParams, dt: f64) -> f64 {
        let eff = self.efficiencies_for(batt);
        let worst = eff.charge.max(1.0 / eff.discharge);
        batt.p_max * worst * dt / (batt.e_cap * self.buffer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardOutcome {
    pub p_batt: f64,
    pub soc_next: f64,
    /// Taper factor applied, if the request was inside a buffer zone in
    /// the restricted direction.
    pub taper: Option<f64>,
}

/// One step of the drift-correction rule applied to a requested battery
/// power (positive discharge).
pub fn guard_step(cfg: &GuardConfig, batt: &BatteryParams, soc: f64, p_batt_req: f64, dt: f64) -> GuardOutcome {
    let eff = cfg.efficiencies_for(batt);
    let mut p_max = batt.p_max;
    let mut taper = None;
    if soc > cfg.e_upper - cfg.buffer {
        let k_u = ((cfg.e_upper - soc) / cfg.buffer).max(0.0);
        if p_batt_req < 0.0 {
            p_max = k_u * batt.p_max;
            taper = Some(k_u);
        }
    } else if soc < cfg.e_lower + cfg.buffer {
        let k_l = ((soc - cfg.e_lower) / cfg.buffer).max(0.0);
        if p_batt_req > 0.0 {
            p_max = k_l * batt.p_max;
            taper = Some(k_l);
        }
    }
    let (p_batt, delta) = if p_batt_req >= 0.0 {
        let p = p_batt_req.min(p_max);
        (p, p / eff.discharge * dt / batt.e_cap)
    } else {
        let p = p_batt_req.max(-p_max);
        (p, p * eff.charge * dt / batt.e_cap)
    };
    GuardOutcome {
        p_batt,
        soc_next: soc - delta,
        taper,
    }
}

/// Hard limit keeping the next SoC inside the battery's operating bounds.
pub fn limit_to_soc_bounds(batt: &BatteryParams, eff: Efficiencies, soc: f64, p_batt: f64, dt: f64) -> f64 {
    if p_batt > 0.0 {
        p_batt.min(eff.max_discharge(batt, soc, dt))
    } else if p_batt < 0.0 {
        p_batt.max(-eff.max_charge(batt, soc, dt))
    } else {
        0.0
    }
}

/// Counters collected over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunStats {
    /// Steps whose request fell outside the flexibility envelope.
    pub saturated_steps: usize,
    /// Steps where the scenario's rule could not realize the clamped request.
    pub unrealizable_steps: usize,
    /// Steps where the drift guard reduced battery power.
    pub guard_limited_steps: usize,
    /// Steps where battery power hit the hard SoC limits.
    pub soc_limited_steps: usize,
    /// Steps at which SoC sat on a hard operating bound afterwards.
    pub soc_at_bound_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<DispatchRecord>,
    pub stats: RunStats,
}

impl RunOutput {
    pub fn delivered(&self) -> Vec<f64> {
        self.records.iter().map(DispatchRecord::dp_delivered).collect()
    }

    pub fn soc_trajectory(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.soc_after)
    }
}

/// Rule-based dispatch of `capacity * r[k]` against PV series `pv`, with
/// optional drift guard.
pub fn simulate(
    fleet: &AssetFleet,
    scenario: Scenario,
    capacity: f64,
    r: &[f64],
    pv: &[f64],
    soc0: f64,
    guard: Option<&GuardConfig>,
) -> Result<RunOutput, GuardError> {
    if r.len() != pv.len() {
        return Err(GuardError::LengthMismatch {
            signal: r.len(),
            pv: pv.len(),
        });
    }
    if !(capacity >= 0.0) || !capacity.is_finite() {
        return Err(GuardError::Capacity(capacity));
    }
    let batt = &fleet.battery;
    let (lo, hi) = match guard {
        Some(cfg) => {
            cfg.validate(batt)?;
            (cfg.e_lower, cfg.e_upper)
        }
        None => (batt.e_min, batt.e_max),
    };
    if !(soc0 >= lo && soc0 <= hi) {
        return Err(GuardError::InitialSoc { soc0, lo, hi });
    }
    let eff = guard.map_or_else(|| batt.efficiencies(), |g| g.efficiencies_for(batt));
    let dt = fleet.dt;
    let mut stats = RunStats::default();
    let mut records = Vec::with_capacity(r.len());
    let mut state = BatteryState { soc: soc0 };

    for (step, (&rk, &p_pv)) in r.iter().zip(pv).enumerate() {
        let env = envelope(scenario, fleet, p_pv).map_err(|e| GuardError::Dispatch { step, source: e.into() })?;
        let dp_req = capacity * rk;
        let target = env.clamp(dp_req);
        if target != dp_req {
            stats.saturated_steps += 1;
        }
        let alloc = match allocate(scenario, fleet, p_pv, target) {
            Ok(a) => a,
            Err(DispatchError::Infeasible { .. }) => {
                stats.unrealizable_steps += 1;
                allocate_nearest(scenario, fleet, p_pv, env.p0, target)
            }
            Err(source) => return Err(GuardError::Dispatch { step, source }),
        };

        let mut p_batt = alloc.p_batt;
        if let Some(cfg) = guard {
            let g = guard_step(cfg, batt, state.soc, p_batt, dt);
            if g.p_batt != p_batt {
                stats.guard_limited_steps += 1;
            }
            p_batt = g.p_batt;
        }
        let limited = limit_to_soc_bounds(batt, eff, state.soc, p_batt, dt);
        if limited != p_batt {
            stats.soc_limited_steps += 1;
        }
        p_batt = limited;

        let (p_charge, p_discharge) = split_net_power(p_batt);
        state = battery_step_with(batt, eff, state, p_charge, p_discharge, dt)
            .map_err(|source| GuardError::Battery { step, source })?;
        if state.soc <= batt.e_min || state.soc >= batt.e_max {
            stats.soc_at_bound_steps += 1;
        }

        let p_hes = (p_pv - alloc.p_curtailed) - alloc.p_cl + p_batt;
        records.push(DispatchRecord {
            step,
            t: step as f64 * fleet.dt_seconds(),
            r: rk,
            p_hes,
            p0: env.p0,
            dp_req,
            p_pv,
            p_cl: alloc.p_cl,
            p_batt,
            p_curtailed: alloc.p_curtailed,
            soc_after: state.soc,
        });
    }
    Ok(RunOutput { records, stats })
}

/// Guarded run; `soc0` must lie inside the target band.
pub fn run_guarded(
    cfg: &GuardConfig,
    fleet: &AssetFleet,
    scenario: Scenario,
    capacity: f64,
    r: &[f64],
    pv: &[f64],
    soc0: f64,
) -> Result<RunOutput, GuardError> {
    simulate(fleet, scenario, capacity, r, pv, soc0, Some(cfg))
}

/// Unguarded run limited only by the battery's hard SoC bounds.
pub fn run_unguarded(
    fleet: &AssetFleet,
    scenario: Scenario,
    capacity: f64,
    r: &[f64],
    pv: &[f64],
    soc0: f64,
) -> Result<RunOutput, GuardError> {
    simulate(fleet, scenario, capacity, r, pv, soc0, None)
}
