//! Exact dynamic program over piecewise-linear cost-to-go functions.
//!
//! The cost-to-go of SoC is continuous and piecewise linear, kept as the
//! lower envelope of convex pieces. Each step's cost splits into a convex
//! charge half and a convex discharge half; convolving every piece with each
//! half and taking the lower envelope enumerates charge/discharge sign
//! patterns while discarding the dominated ones. The envelope is then cut
//! back into convex pieces at its concave kinks.

use super::plf::Plf;
use super::{
    better, build_records, objective_of, Backend, OracleError, OracleProblem, OracleSolution, StepCost, OFFLINE_LABEL,
};

/// Longest horizon the exact backend accepts.
pub const EXACT_MAX_STEPS: usize = 7200;

/// Relative tolerance for dropping collinear vertices.
const COLLINEAR_TOL: f64 = 1e-12;

/// The step cost as convex pieces over the drawn SoC.
fn convex_halves(cost: &StepCost) -> Vec<Plf> {
    let whole = cost.plf(cost.w_min(), cost.w_max());
    if whole.is_convex(0.0) {
        vec![whole]
    } else {
        vec![cost.plf(cost.w_min(), 0.0), cost.plf(0.0, cost.w_max())]
    }
}

/// Lower envelope of lines `(v0 at x0, v1 at x1)` over `[x0, x1]`, as
/// vertices excluding `x0`.
fn envelope_of_lines(x0: f64, x1: f64, lines: &[(f64, f64)], out: &mut Vec<(f64, f64)>) {
    let width = x1 - x0;
    let slope = |l: &(f64, f64)| (l.1 - l.0) / width;
    // Lowest line at the left end, near-ties to the smaller slope. Rounding
    // leaves lines meeting at x0 a few ulps apart.
    let v_min = lines.iter().map(|l| l.0).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + v_min.abs());
    let mut cur = *lines
        .iter()
        .filter(|l| l.0 <= v_min + tol)
        .min_by(|a, b| slope(a).total_cmp(&slope(b)))
        .expect("at least one active line");
    let mut x = x0;
    loop {
        let (c0, c1) = cur;
        let cs = slope(&cur);
        let mut next: Option<(f64, (f64, f64))> = None;
        for l in lines {
            let ls = slope(l);
            if ls >= cs {
                continue;
            }
            // Crossing of l below cur.
            let t = (l.0 - c0) / (cs - ls);
            let xc = x0 + t;
            if xc > x + 1e-15 && xc < x1 - 1e-15 && next.is_none_or(|(bx, _)| xc < bx) {
                next = Some((xc, *l));
            }
        }
        match next {
            Some((xc, l)) => {
                out.push((xc, c0 + cs * (xc - x0)));
                x = xc;
                cur = l;
            }
            None => {
                out.push((x1, c1));
                break;
            }
        }
    }
}

/// Pointwise minimum of convex pieces over `[lo, hi]`, which they jointly cover.
fn lower_envelope(pieces: &[Plf], lo: f64, hi: f64) -> Plf {
    let mut xs: Vec<f64> = pieces
        .iter()
        .flat_map(|p| p.xs().iter().copied())
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    xs.push(lo);
    xs.push(hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|b, a| *b - *a <= 1e-15);

    let mut pts = vec![(lo, pieces.iter().map(|p| p.eval(lo)).fold(f64::INFINITY, f64::min))];
    // Sweep left to right keeping only pieces whose domain reaches the
    // current interval.
    let mut order: Vec<&Plf> = pieces.iter().collect();
    order.sort_by(|a, b| a.domain().0.total_cmp(&b.domain().0));
    let mut next_piece = 0;
    let mut active: Vec<&Plf> = Vec::new();
    let mut lines = Vec::new();
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        while next_piece < order.len() && order[next_piece].domain().0 <= x0 + 1e-15 {
            active.push(order[next_piece]);
            next_piece += 1;
        }
        active.retain(|p| p.domain().1 >= x1 - 1e-15);
        lines.clear();
        lines.extend(active.iter().map(|p| (p.eval(x0), p.eval(x1))));
        if lines.is_empty() {
            // Cannot happen while the zero draw keeps every SoC reachable.
            continue;
        }
        envelope_of_lines(x0, x1, &lines, &mut pts);
    }
    simplify(&Plf::from_vertices(&pts))
}

/// Drops vertices lying on the segment through their neighbours.
fn simplify(f: &Plf) -> Plf {
    let v: Vec<(f64, f64)> = f.vertices().collect();
    if v.len() <= 2 {
        return f.clone();
    }
    let mut out = vec![v[0]];
    for i in 1..v.len() - 1 {
        let a = *out.last().expect("non-empty");
        let (b, c) = (v[i], v[i + 1]);
        let interp = a.1 + (c.1 - a.1) * (b.0 - a.0) / (c.0 - a.0);
        if (b.1 - interp).abs() > COLLINEAR_TOL * (1.0 + b.1.abs()) {
            out.push(b);
        }
    }
    out.push(v[v.len() - 1]);
    Plf::from_vertices(&out)
}

/// Splits a function into maximal convex pieces at its concave kinks.
fn convex_pieces(f: &Plf) -> Vec<Plf> {
    let v: Vec<(f64, f64)> = f.vertices().collect();
    if v.len() <= 2 {
        return vec![f.clone()];
    }
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..v.len() - 1 {
        let s_in = (v[i].1 - v[i - 1].1) / (v[i].0 - v[i - 1].0);
        let s_out = (v[i + 1].1 - v[i].1) / (v[i + 1].0 - v[i].0);
        if s_out < s_in {
            out.push(Plf::from_vertices(&v[start..=i]));
            start = i;
        }
    }
    out.push(Plf::from_vertices(&v[start..]));
    out
}

pub(super) fn solve(problem: &OracleProblem) -> Result<OracleSolution, OracleError> {
    let n = problem.horizon();
    if n > EXACT_MAX_STEPS {
        return Err(OracleError::HorizonTooLong {
            steps: n,
            max: EXACT_MAX_STEPS,
        });
    }
    let b = &problem.fleet.battery;
    let (lo, hi) = (b.e_min, b.e_max);
    let costs = problem.step_costs();

    // values[k]: cost-to-go before step k.
    let mut values: Vec<Plf> = Vec::with_capacity(n + 1);
    values.push(Plf::constant(lo, hi, 0.0));
    let mut pieces = vec![values[0].clone()];
    let mut largest = 1;
    for cost in costs.iter().rev() {
        let halves = convex_halves(cost);
        let cands: Vec<Plf> = pieces
            .iter()
            .flat_map(|g| halves.iter().filter_map(move |f| f.inf_conv(g).restrict(lo, hi)))
            .collect();
        let v = lower_envelope(&cands, lo, hi);
        pieces = convex_pieces(&v);
        largest = largest.max(v.len());
        values.push(v);
    }
    values.reverse();
    let optimum = values[0].eval(problem.soc0);

    let eff = b.efficiencies();
    let mut s = problem.soc0;
    let mut draws = Vec::with_capacity(n);
    for (k, cost) in costs.iter().enumerate() {
        let next = &values[k + 1];
        let w_lo = cost.w_min().max(s - hi).min(0.0);
        let w_hi = cost.w_max().min(s - lo).max(0.0);
        let eval = |w: f64| cost.psi(w) + next.eval(s - w);
        let mut best = (0.0, eval(0.0));
        let candidates = cost
            .vertices(w_lo, w_hi)
            .into_iter()
            .map(|(w, _)| w)
            .chain(next.xs().iter().map(|x| s - x));
        for w in candidates {
            if w < w_lo || w > w_hi {
                continue;
            }
            let cand = (w, eval(w));
            if better(cand, best) {
                best = cand;
            }
        }
        let p = cost.p_of_w(best.0);
        s = (s - eff.soc_drawn(b, p, problem.fleet.dt)).clamp(lo, hi);
        draws.push(best.0);
    }
    log::debug!("exact: {n} steps, largest cost-to-go {largest} vertices, optimum {optimum}");
    let records = build_records(problem, &costs, &draws)?;
    let objective = objective_of(problem, &records);
    Ok(OracleSolution {
        records,
        objective,
        backend: Backend::Exact,
        lower_bound: Some(optimum),
        label: OFFLINE_LABEL,
    })
}
