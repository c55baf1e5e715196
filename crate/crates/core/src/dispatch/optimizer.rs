//! Exact day-ahead battery scheduling.
//!
//! The day problem is a linear program in (charge, discharge, PV use,
//! inverter flows, import, export, soc). Eliminating everything except the
//! state of charge leaves, for each interval, a convex piecewise-linear cost
//! `f_t(delta)` of the change in stored energy. The cost-to-go
//! `V_t(s) = min_delta f_t(delta) + V_{t+1}(s + delta)` is then convex
//! piecewise linear as well and is computed exactly by merging slope lists.
//! A forward pass recovers the minimizing schedule, preferring to leave the
//! battery idle among equal-cost options.

use super::pwl::ConvexPwl;
use super::{
    settle, BatteryModel, DayInput, DispatchResult, IntervalDecision, Plant, TerminalSoc, LIMIT_TOL,
};
use crate::{Error, Result};

/// Idle is kept when no alternative improves the day cost by more than this (EUR).
const IDLE_TIE_EUR: f64 = 1e-10;

fn battery_dc(b: &BatteryModel, delta: f64) -> (f64, f64) {
    if delta >= 0.0 {
        (delta / b.eta_ch, 0.0)
    } else {
        (0.0, -delta * b.eta_dis)
    }
}

struct Stage {
    lo: f64,
    hi: f64,
    kinks: Vec<f64>,
    cost: ConvexPwl,
}

fn stage_cost(plant: &Plant, b: &BatteryModel, input: &DayInput<'_>, t: usize, delta: f64) -> f64 {
    let (c, d) = battery_dc(b, delta);
    settle(
        &plant.inverter,
        input.load[t],
        input.pv[t],
        input.buy[t],
        input.sell[t],
        c - d,
    )
    .map_or(f64::INFINITY, |s| s.cost)
}

fn build_stage(plant: &Plant, b: &BatteryModel, input: &DayInput<'_>, t: usize) -> Stage {
    let inv = &plant.inverter;
    let eta = inv.efficiency;
    let pv = input.pv[t];
    let dc_cap_out = inv.ac_limit / eta;
    let dc_cap_in = if inv.bidirectional {
        eta * inv.ac_limit
    } else {
        0.0
    };

    let lo = -b.max_discharge.min(dc_cap_out) / b.eta_dis;
    let hi = b.eta_ch * b.max_charge.min(pv + dc_cap_in);
    let to_delta = |dc: f64| {
        if dc >= 0.0 {
            dc * b.eta_ch
        } else {
            dc / b.eta_dis
        }
    };

    // kinks of the interval cost as a function of the battery's DC draw
    let mut xs: Vec<f64> = [0.0, pv - dc_cap_out, pv, pv - input.load[t] / eta]
        .into_iter()
        .map(to_delta)
        .filter(|&x| x > lo && x < hi)
        .collect();
    xs.push(lo);
    xs.push(hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);

    let samples: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| (x, stage_cost(plant, b, input, t, x)))
        .collect();
    Stage {
        lo,
        hi,
        cost: ConvexPwl::from_samples(&samples),
        kinks: xs,
    }
}

/// Minimum-cost schedule for one horizon.
pub fn optimize_day(
    input: &DayInput<'_>,
    plant: &Plant,
    soc_start: f64,
    terminal: TerminalSoc,
) -> Result<DispatchResult> {
    input.check()?;
    let n = input.len();
    let Some(bat) = plant.battery else {
        return Ok(pass_through(input, plant));
    };
    if soc_start < bat.soc_min - LIMIT_TOL || soc_start > bat.soc_max + LIMIT_TOL {
        return Err(Error::validation(
            "soc_start",
            format!("{soc_start} outside [{}, {}]", bat.soc_min, bat.soc_max),
        ));
    }
    let soc_start = soc_start.clamp(bat.soc_min, bat.soc_max);

    let stages: Vec<Stage> = (0..n).map(|t| build_stage(plant, &bat, input, t)).collect();

    let mut value = Vec::with_capacity(n + 1);
    value.push(match terminal {
        TerminalSoc::Free => ConvexPwl::constant(bat.soc_min, bat.soc_max, 0.0),
        TerminalSoc::ReturnToStart => ConvexPwl::point(soc_start, 0.0),
    });
    for stage in stages.iter().rev() {
        let next = value.last().expect("seeded");
        let here = next
            .infconv(&stage.cost.reflect())
            .restrict(bat.soc_min, bat.soc_max, LIMIT_TOL)
            .ok_or_else(|| {
                Error::Infeasible("no state of charge reaches the terminal target".into())
            })?;
        value.push(here);
    }
    value.reverse();
    let first = &value[0];
    if soc_start < first.lo() - LIMIT_TOL || soc_start > first.hi() + LIMIT_TOL {
        return Err(Error::Infeasible(format!(
            "terminal target unreachable from soc {soc_start}"
        )));
    }

    let mut soc = Vec::with_capacity(n + 1);
    soc.push(soc_start);
    let mut decisions = Vec::with_capacity(n);
    let mut total = 0.0;
    let mut s = soc_start;
    for (t, stage) in stages.iter().enumerate() {
        let delta = best_move(plant, &bat, input, t, stage, &value[t + 1], s)?;
        let (c, d) = battery_dc(&bat, delta);
        let st = settle(
            &plant.inverter,
            input.load[t],
            input.pv[t],
            input.buy[t],
            input.sell[t],
            c - d,
        )
        .ok_or_else(|| {
            Error::Infeasible(format!("interval {t} has no feasible operating point"))
        })?;
        s = s + bat.eta_ch * c - d / bat.eta_dis;
        soc.push(s);
        total += st.cost;
        decisions.push(IntervalDecision {
            charge: c / plant.dt_hours,
            discharge: d / plant.dt_hours,
            grid_import: st.grid_import,
            grid_export: st.grid_export,
            pv_used: st.pv_used,
            pv_curtailed: input.pv[t] - st.pv_used,
            inverter_ac: st.inverter_ac,
        });
    }
    Ok(DispatchResult {
        decisions,
        soc,
        variable_cost: total,
    })
}

fn best_move(
    plant: &Plant,
    bat: &BatteryModel,
    input: &DayInput<'_>,
    t: usize,
    stage: &Stage,
    next: &ConvexPwl,
    s: f64,
) -> Result<f64> {
    let wlo = stage.lo.max(next.lo() - s);
    let mut whi = stage.hi.min(next.hi() - s);
    if wlo > whi + LIMIT_TOL {
        return Err(Error::Infeasible(format!(
            "interval {t}: empty move window"
        )));
    }
    if whi < wlo {
        whi = wlo;
    }
    let h = |delta: f64| stage_cost(plant, bat, input, t, delta) + next.eval(s + delta);

    let mut best = (wlo, h(wlo));
    let mut consider = |x: f64, v: f64| {
        if v < best.1 {
            best = (x, v);
        }
    };
    consider(whi, h(whi));
    for &k in &stage.kinks {
        if k > wlo && k < whi {
            consider(k, h(k));
        }
    }

    // the cost-to-go breakpoints inside the window form a convex sequence
    let xs = next.breakpoints();
    let ys = next.values();
    let first = xs.partition_point(|&x| x - s <= wlo);
    let end = xs.partition_point(|&x| x - s < whi);
    if first < end {
        let hv = |i: usize| stage_cost(plant, bat, input, t, xs[i] - s) + ys[i];
        let (mut lo, mut hi) = (first, end - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if hv(mid + 1) < hv(mid) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        consider(xs[lo] - s, hv(lo));
    }

    if wlo <= 0.0 && 0.0 <= whi {
        let idle = h(0.0);
        if idle <= best.1 + IDLE_TIE_EUR {
            return Ok(0.0);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Infeasible(format!("interval {t}: no finite move")));
    }
    Ok(best.0)
}

fn pass_through(input: &DayInput<'_>, plant: &Plant) -> DispatchResult {
    let n = input.len();
    let mut decisions = Vec::with_capacity(n);
    let mut total = 0.0;
    for t in 0..n {
        let st = settle(
            &plant.inverter,
            input.load[t],
            input.pv[t],
            input.buy[t],
            input.sell[t],
            0.0,
        )
        .expect("zero battery flow is always feasible");
        total += st.cost;
        decisions.push(IntervalDecision {
            grid_import: st.grid_import,
            grid_export: st.grid_export,
            pv_used: st.pv_used,
            pv_curtailed: input.pv[t] - st.pv_used,
            inverter_ac: st.inverter_ac,
            ..IntervalDecision::default()
        });
    }
    DispatchResult {
        decisions,
        soc: vec![0.0; n + 1],
        variable_cost: total,
    }
}
