//! Offline optimal dispatch for the maximum-flexibility scenario.
//!
//! The oracle sees the whole regulation signal in advance and minimizes the
//! summed absolute tracking error of the flexible component subject to
//! power balance, load and battery boxes, the SoC recursion and SoC bounds.
//! It is a benchmark, never a controller.
//!
//! Per step, the load can absorb any deviation within `±P_cl/2` of the
//! battery's contribution, so the step cost given battery power `p` is
//! `max(0, |C r - p| - P_cl/2)`. In terms of the SoC drawn per step this cost
//! is convex except for a concave kink at zero (charging stores less than it
//! draws), which appears only when the command sits below `-P_cl/2`.
//! Charge/discharge exclusivity is structural: battery power is a single
//! signed value.

mod exact;
mod grid;
pub mod plf;

use thiserror::Error;

use crate::assets::{battery_step_with, split_net_power, AssetError, AssetFleet, BatteryState, Efficiencies};
use crate::dispatch::DispatchRecord;
use crate::flexibility::Scenario;
use crate::market::{performance_score, tracking_error};
use crate::soc_guard::{run_unguarded, GuardError};

pub use exact::EXACT_MAX_STEPS;
use plf::Plf;

/// Label attached to every oracle result.
pub const OFFLINE_LABEL: &str = "offline-benchmark";

pub const DEFAULT_SOC_GRID: usize = 2001;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid oracle problem: {0}")]
    InvalidProblem(String),
    #[error("exact backend supports at most {max} steps, got {steps}")]
    HorizonTooLong { steps: usize, max: usize },
    #[error("step {step}: {source}")]
    Battery {
        step: usize,
        #[source]
        source: AssetError,
    },
    #[error("rule-based run failed: {0}")]
    Rule(#[from] GuardError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    SocDp,
    Exact,
}

impl Backend {
    pub fn label(self) -> &'static str {
        match self {
            Backend::SocDp => "soc-dp",
            Backend::Exact => "exact-pwl",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleProblem {
    pub fleet: AssetFleet,
    pub capacity: f64,
    pub signal: Vec<f64>,
    pub pv: Vec<f64>,
    pub soc0: f64,
    pub soc_grid: usize,
}

impl OracleProblem {
    pub fn new(fleet: AssetFleet, capacity: f64, signal: Vec<f64>, pv: Vec<f64>, soc0: f64) -> Self {
        OracleProblem {
            fleet,
            capacity,
            signal,
            pv,
            soc0,
            soc_grid: DEFAULT_SOC_GRID,
        }
    }

    pub fn horizon(&self) -> usize {
        self.signal.len()
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |msg: String| Err(OracleError::InvalidProblem(msg));
        self.fleet
            .validate()
            .map_err(|e| OracleError::InvalidProblem(e.to_string()))?;
        if self.signal.is_empty() {
            return bad("horizon must be at least one step".into());
        }
        if self.signal.len() != self.pv.len() {
            return bad(format!(
                "signal has {} samples, PV has {}",
                self.signal.len(),
                self.pv.len()
            ));
        }
        if self.soc_grid < 3 {
            return bad(format!("soc_grid must be at least 3, got {}", self.soc_grid));
        }
        if !(self.capacity >= 0.0) || !self.capacity.is_finite() {
            return bad(format!(
                "capacity must be finite and non-negative, got {}",
                self.capacity
            ));
        }
        let b = &self.fleet.battery;
        if !(self.soc0 >= b.e_min && self.soc0 <= b.e_max) {
            return bad(format!("soc0 {} outside [{}, {}]", self.soc0, b.e_min, b.e_max));
        }
        if let Some(k) = self.pv.iter().position(|p| !(*p >= 0.0) || !p.is_finite()) {
            return bad(format!("PV sample {k} is {}", self.pv[k]));
        }
        if let Some(k) = self.signal.iter().position(|r| !r.is_finite()) {
            return bad(format!("signal sample {k} is not finite"));
        }
        Ok(())
    }

    /// Grid spacing converted to the tracking-error units of the objective:
    /// one SoC cell of energy delivered at the steepest conversion rate.
    pub fn grid_bound(&self) -> f64 {
        let b = &self.fleet.battery;
        let spacing = (b.e_max - b.e_min) / (self.soc_grid - 1) as f64;
        let eff = b.efficiencies();
        spacing * b.e_cap / (eff.charge.min(eff.discharge) * self.fleet.dt)
    }

    fn step_costs(&self) -> Vec<StepCost> {
        let b = &self.fleet.battery;
        let eff = b.efficiencies();
        let tau = self.fleet.dt / b.e_cap;
        self.signal
            .iter()
            .map(|r| StepCost {
                d: self.capacity * r,
                h: 0.5 * self.fleet.load.p_max,
                pb: b.p_max,
                tau,
                eff,
            })
            .collect()
    }
}

/// Tracking cost of one step as a function of the SoC drawn from the
/// battery (p.u., positive when discharging).
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepCost {
    d: f64,
    h: f64,
    pb: f64,
    tau: f64,
    eff: Efficiencies,
}

impl StepCost {
    fn w_min(&self) -> f64 {
        -self.pb * self.eff.charge * self.tau
    }

    fn w_max(&self) -> f64 {
        self.pb * self.tau / self.eff.discharge
    }

    fn w_of_p(&self, p: f64) -> f64 {
        if p >= 0.0 {
            p * self.tau / self.eff.discharge
        } else {
            p * self.eff.charge * self.tau
        }
    }

    fn p_of_w(&self, w: f64) -> f64 {
        let p = if w >= 0.0 {
            w * self.eff.discharge / self.tau
        } else {
            w / (self.eff.charge * self.tau)
        };
        p.clamp(-self.pb, self.pb)
    }

    fn cost_p(&self, p: f64) -> f64 {
        ((self.d - p).abs() - self.h).max(0.0)
    }

    fn psi(&self, w: f64) -> f64 {
        self.cost_p(self.p_of_w(w))
    }

    /// Vertices of the exact cost, over `[w_lo, w_hi]` within the box.
    fn vertices(&self, w_lo: f64, w_hi: f64) -> Vec<(f64, f64)> {
        let mut ws: Vec<f64> = [-self.pb, self.d - self.h, 0.0, self.d + self.h, self.pb]
            .iter()
            .map(|&p| self.w_of_p(p.clamp(-self.pb, self.pb)))
            .chain([w_lo, w_hi])
            .filter(|&w| w >= w_lo && w <= w_hi)
            .collect();
        ws.sort_by(f64::total_cmp);
        ws.dedup();
        ws.into_iter().map(|w| (w, self.psi(w))).collect()
    }

    fn plf(&self, w_lo: f64, w_hi: f64) -> Plf {
        Plf::from_vertices(&self.vertices(w_lo, w_hi))
    }

    /// Load setting closest to the command for a given battery power.
    fn load_for(&self, p_batt: f64, p_cl_max: f64) -> f64 {
        (self.h + p_batt - self.d).clamp(0.0, p_cl_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub records: Vec<DispatchRecord>,
    /// Summed absolute tracking error, MW·steps.
    pub objective: f64,
    pub backend: Backend,
    /// Proven lower bound on the optimum; equals the objective for the
    /// exact backend.
    pub lower_bound: Option<f64>,
    pub label: &'static str,
}

/// Solves with the SoC-grid dynamic program.
pub fn solve(problem: &OracleProblem) -> Result<OracleSolution, OracleError> {
    solve_with(problem, Backend::SocDp)
}

pub fn solve_with(problem: &OracleProblem, backend: Backend) -> Result<OracleSolution, OracleError> {
    problem.validate()?;
    match backend {
        Backend::SocDp => grid::solve(problem),
        Backend::Exact => exact::solve(problem),
    }
}

/// Exact backend when the horizon allows it, grid otherwise.
pub fn solve_best(problem: &OracleProblem) -> Result<OracleSolution, OracleError> {
    if problem.horizon() <= EXACT_MAX_STEPS {
        solve_with(problem, Backend::Exact)
    } else {
        solve_with(problem, Backend::SocDp)
    }
}

/// Turns a drawn-SoC trajectory into audited records, recomputing SoC with
/// the battery model.
pub(crate) fn build_records(
    problem: &OracleProblem,
    costs: &[StepCost],
    draws: &[f64],
) -> Result<Vec<DispatchRecord>, OracleError> {
    let fleet = &problem.fleet;
    let b = &fleet.battery;
    let eff = b.efficiencies();
    let mut state = BatteryState { soc: problem.soc0 };
    let mut out = Vec::with_capacity(draws.len());
    for (step, ((cost, &w), (&r, &p_pv))) in costs
        .iter()
        .zip(draws)
        .zip(problem.signal.iter().zip(&problem.pv))
        .enumerate()
    {
        let p_batt = cost.p_of_w(w);
        let p_cl = cost.load_for(p_batt, fleet.load.p_max);
        let (p_charge, p_discharge) = split_net_power(p_batt);
        state = battery_step_with(b, eff, state, p_charge, p_discharge, fleet.dt)
            .map_err(|source| OracleError::Battery { step, source })?;
        out.push(DispatchRecord {
            step,
            t: step as f64 * fleet.dt_seconds(),
            r,
            p_hes: p_pv - p_cl + p_batt,
            p0: p_pv - cost.h,
            dp_req: cost.d,
            p_pv,
            p_cl,
            p_batt,
            p_curtailed: 0.0,
            soc_after: state.soc,
        });
    }
    Ok(out)
}

pub(crate) fn objective_of(problem: &OracleProblem, records: &[DispatchRecord]) -> f64 {
    let delivered: Vec<f64> = records.iter().map(DispatchRecord::dp_delivered).collect();
    tracking_error(problem.capacity, &problem.signal, &delivered).expect("lengths match by construction")
}

/// Tie-break between candidate draws: lower cost first, then less battery use.
pub(crate) fn better(cand: (f64, f64), best: (f64, f64)) -> bool {
    let (w, v) = cand;
    let (bw, bv) = best;
    let tol = 1e-12 * (1.0 + bv.abs());
    v < bv - tol || (v <= bv + tol && w.abs() < bw.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub objective_rule: f64,
    pub objective_oracle: f64,
    /// `None` when the signal is identically zero and the score is undefined.
    pub score_rule: Option<f64>,
    pub score_oracle: Option<f64>,
    pub backend: Backend,
    pub oracle_lower_bound: Option<f64>,
    pub label: &'static str,
}

/// Runs the unguarded load-priority rule and the oracle on the same inputs.
pub fn compare_with_rule(problem: &OracleProblem) -> Result<Comparison, OracleError> {
    problem.validate()?;
    let rule = run_unguarded(
        &problem.fleet,
        Scenario::S1,
        problem.capacity,
        &problem.signal,
        &problem.pv,
        problem.soc0,
    )?;
    let oracle = solve_best(problem)?;
    let delivered_rule = rule.delivered();
    let objective_rule = tracking_error(problem.capacity, &problem.signal, &delivered_rule).expect("same length");
    let delivered_oracle: Vec<f64> = oracle.records.iter().map(DispatchRecord::dp_delivered).collect();
    Ok(Comparison {
        objective_rule,
        objective_oracle: oracle.objective,
        score_rule: performance_score(problem.capacity, &problem.signal, &delivered_rule).ok(),
        score_oracle: performance_score(problem.capacity, &problem.signal, &delivered_oracle).ok(),
        backend: oracle.backend,
        oracle_lower_bound: oracle.lower_bound,
        label: OFFLINE_LABEL,
    })
}
