//! Brute-force reference for [`super::optimize_day`].
//!
//! Dynamic programming over a uniform state-of-charge lattice. The first
//! move leaves the exact starting state, every later state is a lattice
//! point. Each interval's cost for a given battery move is found by
//! enumerating the candidate PV operating points, so this module shares no
//! optimization logic with the exact solver. The lattice restricts the
//! feasible set, so its optimum is an upper bound on the true one.

use super::{DayInput, DispatchResult, IntervalDecision, Plant, LIMIT_TOL};
use crate::{Error, Result};

pub const ORACLE_MAX_INTERVALS: usize = 48;
pub const ORACLE_MAX_POINTS: usize = 2001;

#[derive(Debug, Clone, Copy)]
struct Point {
    charge: f64,
    discharge: f64,
    pv_used: f64,
    inverter_ac: f64,
    grid_import: f64,
    grid_export: f64,
    cost: f64,
}

/// Cheapest operating point for a state-of-charge change `delta`, or `None`.
fn interval_cost(plant: &Plant, input: &DayInput<'_>, t: usize, delta: f64) -> Option<Point> {
    let (charge, discharge) = match plant.battery {
        Some(b) => {
            let (c, d) = if delta > 0.0 {
                (delta / b.eta_ch, 0.0)
            } else {
                (0.0, -delta * b.eta_dis)
            };
            if c > b.max_charge + LIMIT_TOL || d > b.max_discharge + LIMIT_TOL {
                return None;
            }
            (c, d)
        }
        None if delta == 0.0 => (0.0, 0.0),
        None => return None,
    };
    let inv = plant.inverter;
    let eta = inv.efficiency;
    let (load, pv) = (input.load[t], input.pv[t]);
    let draw = charge - discharge;

    let candidates = [
        0.0,
        pv,
        draw,
        draw + load / eta,
        draw + inv.ac_limit / eta,
        draw - eta * inv.ac_limit,
    ];
    let mut best: Option<Point> = None;
    for &p in &candidates {
        if p < 0.0 || p > pv {
            continue;
        }
        let x = p - draw;
        let ac = if x >= 0.0 {
            let out = eta * x;
            if out > inv.ac_limit + LIMIT_TOL {
                continue;
            }
            out
        } else {
            let rect = -x / eta;
            if !inv.bidirectional || rect > inv.ac_limit + LIMIT_TOL {
                continue;
            }
            -rect
        };
        let net = load - ac;
        let (imp, exp) = if net > 0.0 { (net, 0.0) } else { (0.0, -net) };
        let cost = input.buy[t] * imp - input.sell[t] * exp;
        if best.is_none_or(|b| cost < b.cost) {
            best = Some(Point {
                charge,
                discharge,
                pv_used: p,
                inverter_ac: ac,
                grid_import: imp,
                grid_export: exp,
                cost,
            });
        }
    }
    best
}

/// Lattice-optimal schedule with `grid_points` states between the SoC bounds.
pub fn oracle_optimize(
    input: &DayInput<'_>,
    plant: &Plant,
    soc_start: f64,
    grid_points: usize,
) -> Result<DispatchResult> {
    input.check()?;
    let n = input.len();
    if n > ORACLE_MAX_INTERVALS || grid_points > ORACLE_MAX_POINTS {
        return Err(Error::ResourceGuard(format!(
            "oracle limited to {ORACLE_MAX_INTERVALS} intervals and {ORACLE_MAX_POINTS} points, got {n} and {grid_points}"
        )));
    }
    let Some(bat) = plant.battery else {
        return no_state(input, plant);
    };
    if grid_points < 2 {
        return Err(Error::validation("grid_points", "need at least 2"));
    }
    let m = grid_points;
    let step = (bat.soc_max - bat.soc_min) / (m - 1) as f64;
    let lattice = |j: usize| bat.soc_min + step * j as f64;

    // value[t][j]: best cost to reach lattice j after t + 1 moves
    let mut value = vec![vec![f64::INFINITY; m]; n];
    let mut parent = vec![vec![usize::MAX; m]; n];
    let mut first_moves = vec![None; m];
    if n == 0 {
        return Ok(DispatchResult {
            decisions: Vec::new(),
            soc: vec![soc_start],
            variable_cost: 0.0,
        });
    }
    for j in 0..m {
        if let Some(p) = interval_cost(plant, input, 0, lattice(j) - soc_start) {
            value[0][j] = p.cost;
            first_moves[j] = Some(p);
        }
    }
    for t in 1..n {
        // lattice moves depend only on the offset
        let offsets: Vec<Option<f64>> = (0..2 * m - 1)
            .map(|k| {
                let delta = (k as f64 - (m - 1) as f64) * step;
                interval_cost(plant, input, t, delta).map(|p| p.cost)
            })
            .collect();
        let (prev, cur) = value.split_at_mut(t);
        let prev = &prev[t - 1];
        for (j, slot) in cur[0].iter_mut().enumerate() {
            for (i, &v) in prev.iter().enumerate() {
                if !v.is_finite() {
                    continue;
                }
                if let Some(c) = offsets[j + m - 1 - i] {
                    if v + c < *slot {
                        *slot = v + c;
                        parent[t][j] = i;
                    }
                }
            }
        }
    }

    let (mut j, best) = value[n - 1]
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty lattice");
    if !best.is_finite() {
        return Err(Error::Infeasible("no lattice path".into()));
    }
    let mut path = vec![0usize; n];
    for t in (0..n).rev() {
        path[t] = j;
        if t > 0 {
            j = parent[t][j];
        }
    }

    let mut soc = vec![soc_start];
    let mut decisions = Vec::with_capacity(n);
    let mut total = 0.0;
    for t in 0..n {
        let p = if t == 0 {
            first_moves[path[0]].expect("finite path")
        } else {
            let k = path[t] + m - 1 - path[t - 1];
            let delta = (k as f64 - (m - 1) as f64) * step;
            interval_cost(plant, input, t, delta).expect("finite path")
        };
        // state implied by the flows; equals the lattice point up to rounding
        soc.push(soc[t] + bat.eta_ch * p.charge - p.discharge / bat.eta_dis);
        total += p.cost;
        decisions.push(to_decision(&p, input.pv[t], plant.dt_hours));
    }
    Ok(DispatchResult {
        decisions,
        soc,
        variable_cost: total,
    })
}

fn to_decision(p: &Point, pv: f64, dt: f64) -> IntervalDecision {
    IntervalDecision {
        charge: p.charge / dt,
        discharge: p.discharge / dt,
        grid_import: p.grid_import,
        grid_export: p.grid_export,
        pv_used: p.pv_used,
        pv_curtailed: pv - p.pv_used,
        inverter_ac: p.inverter_ac,
    }
}

fn no_state(input: &DayInput<'_>, plant: &Plant) -> Result<DispatchResult> {
    let n = input.len();
    let mut decisions = Vec::with_capacity(n);
    let mut total = 0.0;
    for t in 0..n {
        let p = interval_cost(plant, input, t, 0.0)
            .ok_or_else(|| Error::Infeasible(format!("interval {t}")))?;
        total += p.cost;
        decisions.push(to_decision(&p, input.pv[t], plant.dt_hours));
    }
    Ok(DispatchResult {
        decisions,
        soc: vec![0.0; n + 1],
        variable_cost: total,
    })
}
