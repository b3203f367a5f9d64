//! Dynamic program over a uniform SoC grid. Cost-to-go is stored at grid
//! nodes and linearly interpolated between them; each stage minimizes
//! exactly over the continuous draw, which is piecewise linear with
//! breakpoints at the step cost's vertices and at draws landing on nodes.

use rayon::prelude::*;

use super::{
    better, build_records, objective_of, Backend, OracleError, OracleProblem, OracleSolution, StepCost, OFFLINE_LABEL,
};

struct Grid {
    lo: f64,
    hi: f64,
    step: f64,
    n: usize,
}

impl Grid {
    fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.step
        }
    }

    fn interp(&self, v: &[f64], s: f64) -> f64 {
        let x = ((s - self.lo) / self.step).clamp(0.0, (self.n - 1) as f64);
        let i = (x.floor() as usize).min(self.n - 2);
        let frac = x - i as f64;
        v[i] + frac * (v[i + 1] - v[i])
    }

    /// Best draw from SoC `s` against cost-to-go `next`, as `(w, value)`.
    fn best_draw(&self, cost: &StepCost, next: &[f64], s: f64) -> (f64, f64) {
        let w_lo = cost.w_min().max(s - self.hi).min(0.0);
        let w_hi = cost.w_max().min(s - self.lo).max(0.0);
        let eval = |w: f64| cost.psi(w) + self.interp(next, s - w);
        let mut best = (0.0, eval(0.0));
        let mut consider = |w: f64| {
            let w = w.clamp(w_lo, w_hi);
            let cand = (w, eval(w));
            if better(cand, best) {
                best = cand;
            }
        };
        for (w, _) in cost.vertices(w_lo, w_hi) {
            consider(w);
        }
        // Draws that land exactly on grid nodes.
        let j_lo = ((s - w_hi - self.lo) / self.step).ceil().max(0.0) as usize;
        let j_hi = (((s - w_lo - self.lo) / self.step).floor().max(0.0) as usize).min(self.n - 1);
        for j in j_lo..=j_hi {
            consider(s - self.node(j));
        }
        best
    }
}

pub(super) fn solve(problem: &OracleProblem) -> Result<OracleSolution, OracleError> {
    let b = &problem.fleet.battery;
    let n = problem.soc_grid;
    let grid = Grid {
        lo: b.e_min,
        hi: b.e_max,
        step: (b.e_max - b.e_min) / (n - 1) as f64,
        n,
    };
    let costs = problem.step_costs();
    let horizon = costs.len();

    // values[k] is the cost-to-go before step k; values[horizon] is zero.
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
    values.push(vec![0.0; n]);
    for cost in costs.iter().rev() {
        let next = values.last().expect("terminal stage present");
        let stage: Vec<f64> = (0..n)
            .into_par_iter()
            .with_min_len(128)
            .map(|i| grid.best_draw(cost, next, grid.node(i)).1)
            .collect();
        values.push(stage);
    }
    values.reverse();

    let mut draws = Vec::with_capacity(horizon);
    let mut s = problem.soc0;
    let eff = b.efficiencies();
    for (k, cost) in costs.iter().enumerate() {
        let (w, _) = grid.best_draw(cost, &values[k + 1], s);
        let p = cost.p_of_w(w);
        s = (s - eff.soc_drawn(b, p, problem.fleet.dt)).clamp(grid.lo, grid.hi);
        draws.push(w);
    }
    let records = build_records(problem, &costs, &draws)?;
    let objective = objective_of(problem, &records);
    log::debug!("soc-dp: {horizon} steps, {n} nodes, objective {objective}");
    Ok(OracleSolution {
        records,
        objective,
        backend: Backend::SocDp,
        lower_bound: None,
        label: OFFLINE_LABEL,
    })
}
