//! Real-time disaggregation of a requested plant deviation into load,
//! battery and curtailment setpoints.
//!
//! Two allocation rules exist. The load-priority rule moves the controllable
//! load first and hands the remainder to the battery. The green-load rule
//! keeps the load powered only by PV and moves load and battery together
//! along a line through the two envelope corners. Net plant power always
//! satisfies `p_hes = (p_pv - p_curtailed) - p_cl + p_batt`.

use thiserror::Error;

use crate::assets::{AssetFleet, Efficiencies};
use crate::flexibility::{contains, envelope, FlexEnvelope, FlexError, Scenario};

/// Power-balance tolerance (MW).
pub const BALANCE_TOL: f64 = 1e-9;

/// Tolerance on box constraints when auditing records (MW or p.u.).
pub const BOX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError {
    #[error(transparent)]
    Flex(#[from] FlexError),
    #[error("deviation {dp} MW outside envelope [{lo}, {hi}]")]
    OutsideEnvelope { dp: f64, lo: f64, hi: f64 },
    #[error("deviation {dp} MW not realizable: balance residual {residual} MW")]
    Infeasible { dp: f64, residual: f64 },
}

/// Per-step outcome of a dispatch run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchRecord {
    pub step: usize,
    /// Time since the start of the run (s).
    pub t: f64,
    /// Regulation signal sample.
    pub r: f64,
    pub p_hes: f64,
    pub p0: f64,
    pub dp_req: f64,
    pub p_pv: f64,
    pub p_cl: f64,
    /// Net battery power, positive when discharging.
    pub p_batt: f64,
    pub p_curtailed: f64,
    pub soc_after: f64,
}

impl DispatchRecord {
    /// Deviation actually delivered around the nominal point.
    pub fn dp_delivered(&self) -> f64 {
        self.p_hes - self.p0
    }

    pub fn balance_residual(&self) -> f64 {
        self.p_hes - ((self.p_pv - self.p_curtailed) - self.p_cl + self.p_batt)
    }
}

/// Asset setpoints for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub p_cl: f64,
    pub p_batt: f64,
    pub p_curtailed: f64,
}

impl Allocation {
    pub fn net(&self, p_pv: f64) -> f64 {
        (p_pv - self.p_curtailed) - self.p_cl + self.p_batt
    }
}

/// Load-priority rule: `(p_cl, p_batt)` for target `p0 + dp`.
pub fn allocate_priority_load(fleet: &AssetFleet, p_pv: f64, p0: f64, dp: f64) -> (f64, f64) {
    let pb = fleet.battery.p_max;
    let p_cl = (p_pv - p0 - dp).clamp(0.0, fleet.load.p_max);
    let p_batt = (p0 + dp - p_pv + p_cl).clamp(-pb, pb);
    (p_cl, p_batt)
}

/// Green-load rule: the load never draws more than the available PV.
///
/// Valid for `p_pv <= P_cl`; the nominal point puts the load at `p_pv / 2`.
pub fn allocate_green_load(fleet: &AssetFleet, p_pv: f64, dp: f64) -> (f64, f64) {
    let pb = fleet.battery.p_max;
    let denom = 2.0 * pb + p_pv;
    if denom <= 0.0 {
        return (0.0, 0.0);
    }
    let p_cl = (p_pv * (pb + 0.5 * p_pv - dp) / denom).clamp(0.0, fleet.load.p_max);
    let p_batt = (pb * 2.0 * dp / denom).clamp(-pb, pb);
    (p_cl, p_batt)
}

fn curtail_surplus(p_pv: f64, target: f64, p_cl: f64, p_batt: f64) -> f64 {
    let surplus = p_pv - p_cl + p_batt - target;
    surplus.clamp(0.0, p_pv)
}

/// Routes a deviation request to the scenario's allocation rule and checks
/// that the result reproduces `p0 + dp` exactly.
pub fn allocate(scenario: Scenario, fleet: &AssetFleet, p_pv: f64, dp: f64) -> Result<Allocation, DispatchError> {
    let env = envelope(scenario, fleet, p_pv)?;
    if !contains(&env, dp) {
        return Err(DispatchError::OutsideEnvelope {
            dp,
            lo: env.dp_lo,
            hi: env.dp_hi,
        });
    }
    let alloc = rule_allocation(scenario, fleet, &env, p_pv, dp);
    let residual = alloc.net(p_pv) - (env.p0 + dp);
    if residual.abs() > BALANCE_TOL {
        return Err(DispatchError::Infeasible { dp, residual });
    }
    Ok(alloc)
}

fn rule_allocation(scenario: Scenario, fleet: &AssetFleet, env: &FlexEnvelope, p_pv: f64, dp: f64) -> Allocation {
    let pb = fleet.battery.p_max;
    let target = env.p0 + dp;
    match scenario {
        Scenario::S1 => {
            let (p_cl, p_batt) = allocate_priority_load(fleet, p_pv, env.p0, dp);
            Allocation {
                p_cl,
                p_batt,
                p_curtailed: 0.0,
            }
        }
        Scenario::S2 => {
            if p_pv <= fleet.load.p_max {
                let (p_cl, p_batt) = allocate_green_load(fleet, p_pv, dp);
                Allocation {
                    p_cl,
                    p_batt,
                    p_curtailed: 0.0,
                }
            } else {
                // Only P_cl worth of PV can feed the load; the battery takes
                // whatever balance remains.
                let (p_cl, _) = allocate_green_load(fleet, fleet.load.p_max, dp);
                let p_batt = (target - p_pv + p_cl).clamp(-pb, pb);
                Allocation {
                    p_cl,
                    p_batt,
                    p_curtailed: 0.0,
                }
            }
        }
        Scenario::S3 => {
            let p_cl = p_pv.min(fleet.load.p_max);
            let p_batt = (target - p_pv + p_cl).clamp(-pb, pb);
            Allocation {
                p_cl,
                p_batt,
                p_curtailed: 0.0,
            }
        }
        Scenario::S4 | Scenario::S5 => {
            let (p_cl, p_batt) = allocate_priority_load(fleet, p_pv, env.p0, dp);
            Allocation {
                p_cl,
                p_batt,
                p_curtailed: curtail_surplus(p_pv, target, p_cl, p_batt),
            }
        }
    }
}

/// Setpoints whose net power is as close as the assets allow to `p0 + dp`,
/// honouring the scenario's curtailment and green-load restrictions. Used
/// when a request cannot be realized exactly.
pub fn allocate_nearest(scenario: Scenario, fleet: &AssetFleet, p_pv: f64, p0: f64, dp: f64) -> Allocation {
    let pb = fleet.battery.p_max;
    let load_cap = if scenario == Scenario::S2 {
        p_pv.min(fleet.load.p_max)
    } else {
        fleet.load.p_max
    };
    let target = p0 + dp;
    let p_cl = (p_pv - target).clamp(0.0, load_cap);
    let p_batt = (target - p_pv + p_cl).clamp(-pb, pb);
    let p_curtailed = if scenario.allows_curtailment() {
        curtail_surplus(p_pv, target, p_cl, p_batt)
    } else {
        0.0
    };
    Allocation {
        p_cl,
        p_batt,
        p_curtailed,
    }
}

/// Physical bounds on net plant power under the scenario's rules, ignoring
/// state of charge.
pub fn reachable_net(scenario: Scenario, fleet: &AssetFleet, p_pv: f64) -> (f64, f64) {
    let pb = fleet.battery.p_max;
    let pcl = fleet.load.p_max;
    let hi = p_pv + pb;
    let lo = match scenario {
        Scenario::S1 | Scenario::S3 => p_pv - pcl - pb,
        Scenario::S2 => p_pv - p_pv.min(pcl) - pb,
        Scenario::S4 | Scenario::S5 => -pcl - pb,
    };
    (lo, hi)
}

/// Independent feasibility test of a net-power target against the asset boxes.
pub fn net_feasible(scenario: Scenario, fleet: &AssetFleet, p_pv: f64, p_hes: f64) -> bool {
    let (lo, hi) = reachable_net(scenario, fleet, p_pv);
    lo - BALANCE_TOL <= p_hes && p_hes <= hi + BALANCE_TOL
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordViolation {
    #[error("step {step}: power balance residual {residual} MW")]
    Balance { step: usize, residual: f64 },
    #[error("step {step}: {what} = {value} outside [{lo}, {hi}]")]
    Bound {
        step: usize,
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("step {step}: scenario {scenario} does not allow curtailment ({value} MW)")]
    Curtailment {
        step: usize,
        scenario: Scenario,
        value: f64,
    },
    #[error("step {step}: SoC recursion mismatch, expected {expected}, got {got}")]
    SocRecursion { step: usize, expected: f64, got: f64 },
}

fn bound(step: usize, what: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), RecordViolation> {
    if value >= lo - BOX_TOL && value <= hi + BOX_TOL {
        Ok(())
    } else {
        Err(RecordViolation::Bound {
            step,
            what,
            value,
            lo,
            hi,
        })
    }
}

/// Checks power balance and every asset box for one record.
pub fn validate_record(rec: &DispatchRecord, fleet: &AssetFleet, scenario: Scenario) -> Result<(), RecordViolation> {
    let step = rec.step;
    let residual = rec.balance_residual();
    if !(residual.abs() <= BALANCE_TOL) {
        return Err(RecordViolation::Balance { step, residual });
    }
    bound(step, "p_cl", rec.p_cl, 0.0, fleet.load.p_max)?;
    bound(step, "p_batt", rec.p_batt, -fleet.battery.p_max, fleet.battery.p_max)?;
    bound(step, "p_curtailed", rec.p_curtailed, 0.0, rec.p_pv)?;
    bound(step, "soc", rec.soc_after, fleet.battery.e_min, fleet.battery.e_max)?;
    if !scenario.allows_curtailment() && rec.p_curtailed != 0.0 {
        return Err(RecordViolation::Curtailment {
            step,
            scenario,
            value: rec.p_curtailed,
        });
    }
    if scenario == Scenario::S2 {
        bound(step, "p_cl (green)", rec.p_cl, 0.0, rec.p_pv)?;
    }
    Ok(())
}

/// Validates every record plus the SoC recursion between consecutive steps.
/// With `soc0` given, the first record is checked against it as well.
pub fn validate_trace(
    records: &[DispatchRecord],
    fleet: &AssetFleet,
    scenario: Scenario,
    soc0: Option<f64>,
    eff: Efficiencies,
) -> Result<(), RecordViolation> {
    let mut prev = soc0;
    for rec in records {
        validate_record(rec, fleet, scenario)?;
        if let Some(soc) = prev {
            let expected = soc - eff.soc_drawn(&fleet.battery, rec.p_batt, fleet.dt);
            if (expected - rec.soc_after).abs() > 1e-9 {
                return Err(RecordViolation::SocRecursion {
                    step: rec.step,
                    expected,
                    got: rec.soc_after,
                });
            }
        }
        prev = Some(rec.soc_after);
    }
    Ok(())
}
