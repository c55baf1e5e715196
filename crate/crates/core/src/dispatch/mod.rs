//! Prosumer operation: PV, a shared inverter and an optional battery.
//!
//! Topology: PV and battery sit on a DC bus behind one inverter; the inverter
//! connects to the AC bus where the household load and the grid meter are.
//! Every quantity here is energy per interval (kWh) unless named `*_kw`.
//!
//! * PV output is available on the DC bus and may be curtailed.
//! * The inverter converts the net DC flow. DC to AC delivers `eta * x`, AC
//!   to DC (hybrid only) needs `x / eta`. Its AC-side throughput is limited
//!   to `kva * dt` in either direction.
//! * Battery state follows `soc' = soc + eta_ch * charge - discharge / eta_dis`
//!   with charge and discharge measured on the DC bus.
//! * The AC bus balances `load = inverter_ac + import - export`.
//!
//! [`optimize_day`] minimizes the energy bill of one day exactly.
//! [`oracle_optimize`] is an independent lattice dynamic program used to
//! check it. [`simulate_year`] chains days with state-of-charge carry-over.

mod optimizer;
mod oracle;
pub mod pwl;
mod year;

pub use optimizer::optimize_day;
pub use oracle::{oracle_optimize, ORACLE_MAX_INTERVALS, ORACLE_MAX_POINTS};
pub use year::{baseline_bill, simulate_year, SimulationConfig, YearResult};

use serde::{Deserialize, Serialize};

use crate::catalog::{BatterySpec, InverterSpec};
use crate::{Error, Result};

/// Feasibility slack on power and energy limits, kWh.
pub const LIMIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryModel {
    pub soc_min: f64,
    pub soc_max: f64,
    /// DC-side energy limits per interval.
    pub max_charge: f64,
    pub max_discharge: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterModel {
    /// AC-side energy limit per interval.
    pub ac_limit: f64,
    pub efficiency: f64,
    pub bidirectional: bool,
}

/// Physical plant at a fixed interval length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub dt_hours: f64,
    pub battery: Option<BatteryModel>,
    pub inverter: InverterModel,
}

impl Plant {
    pub fn new(battery: Option<&BatterySpec>, inverter: &InverterSpec, dt_hours: f64) -> Self {
        Plant {
            dt_hours,
            battery: battery.map(|b| BatteryModel {
                soc_min: b.soc_min(),
                soc_max: b.soc_max(),
                max_charge: b.max_charge_power() * dt_hours,
                max_discharge: b.max_discharge_power() * dt_hours,
                eta_ch: b.eta_ch,
                eta_dis: b.eta_dis,
            }),
            inverter: InverterModel {
                ac_limit: inverter.kva_rating * dt_hours,
                efficiency: inverter.efficiency,
                bidirectional: inverter.family.is_bidirectional(),
            },
        }
    }
}

/// Prices and energies for one optimization horizon.
#[derive(Debug, Clone, Copy)]
pub struct DayInput<'a> {
    pub buy: &'a [f64],
    pub sell: &'a [f64],
    pub load: &'a [f64],
    pub pv: &'a [f64],
}

impl DayInput<'_> {
    pub fn len(&self) -> usize {
        self.buy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buy.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.buy.len();
        if self.sell.len() != n || self.load.len() != n || self.pv.len() != n {
            return Err(Error::Shape(format!(
                "buy {}, sell {}, load {}, pv {}",
                n,
                self.sell.len(),
                self.load.len(),
                self.pv.len()
            )));
        }
        for t in 0..n {
            if !(self.load[t] >= 0.0) || !(self.pv[t] >= 0.0) {
                return Err(Error::validation(
                    format!("interval {t}"),
                    "load and PV must be non-negative",
                ));
            }
            if !(self.sell[t] <= self.buy[t]) {
                return Err(Error::validation(
                    format!("interval {t}"),
                    "sell price above buy price",
                ));
            }
        }
        Ok(())
    }
}

/// Whether the day must end at its starting state of charge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalSoc {
    #[default]
    Free,
    ReturnToStart,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntervalDecision {
    /// DC-side battery charging power, kW.
    pub charge: f64,
    /// DC-side battery discharging power, kW.
    pub discharge: f64,
    pub grid_import: f64,
    pub grid_export: f64,
    pub pv_used: f64,
    pub pv_curtailed: f64,
    /// Signed AC-side inverter energy, positive towards the AC bus.
    pub inverter_ac: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DispatchResult {
    pub decisions: Vec<IntervalDecision>,
    /// `decisions.len() + 1` states, starting with the initial one.
    pub soc: Vec<f64>,
    pub variable_cost: f64,
}

impl DispatchResult {
    pub fn charge_throughput(&self, dt_hours: f64) -> f64 {
        self.decisions.iter().map(|d| d.charge * dt_hours).sum()
    }

    pub fn imports(&self) -> Vec<f64> {
        self.decisions.iter().map(|d| d.grid_import).collect()
    }

    pub fn exports(&self) -> Vec<f64> {
        self.decisions.iter().map(|d| d.grid_export).collect()
    }

    pub(crate) fn append(&mut self, day: DispatchResult) {
        if self.soc.is_empty() {
            self.soc = day.soc;
        } else {
            self.soc.extend_from_slice(&day.soc[1..]);
        }
        self.decisions.extend(day.decisions);
        self.variable_cost += day.variable_cost;
    }

    /// Checks the physical model against a solution; returns the first violation.
    pub fn verify(&self, plant: &Plant, input: &DayInput<'_>) -> Result<()> {
        let n = input.len();
        let dt = plant.dt_hours;
        let fail = |t: usize, what: String| Err(Error::Invariant(format!("interval {t}: {what}")));
        if self.decisions.len() != n || self.soc.len() != n + 1 {
            return Err(Error::Invariant("result not aligned with inputs".into()));
        }
        let inv = plant.inverter;
        for (t, d) in self.decisions.iter().enumerate() {
            let (c, dis) = (d.charge * dt, d.discharge * dt);
            match plant.battery {
                Some(b) => {
                    let next = self.soc[t] + b.eta_ch * c - dis / b.eta_dis;
                    if (next - self.soc[t + 1]).abs() > LIMIT_TOL {
                        return fail(
                            t,
                            format!("soc recursion off by {}", next - self.soc[t + 1]),
                        );
                    }
                    if self.soc[t + 1] < b.soc_min - LIMIT_TOL
                        || self.soc[t + 1] > b.soc_max + LIMIT_TOL
                    {
                        return fail(t, format!("soc {} out of bounds", self.soc[t + 1]));
                    }
                    if c > b.max_charge + LIMIT_TOL || dis > b.max_discharge + LIMIT_TOL {
                        return fail(t, "battery power limit exceeded".into());
                    }
                }
                None => {
                    if c != 0.0 || dis != 0.0 {
                        return fail(t, "battery flow without a battery".into());
                    }
                }
            }
            if c < 0.0 || dis < 0.0 || c * dis > 0.0 {
                return fail(t, "simultaneous or negative charge/discharge".into());
            }
            if d.grid_import < 0.0 || d.grid_export < 0.0 || d.grid_import * d.grid_export > 0.0 {
                return fail(t, "simultaneous or negative import/export".into());
            }
            if d.inverter_ac.abs() > inv.ac_limit + LIMIT_TOL {
                return fail(t, "inverter limit exceeded".into());
            }
            if !inv.bidirectional && d.inverter_ac < -LIMIT_TOL {
                return fail(t, "reverse flow through a solar inverter".into());
            }
            if d.pv_curtailed < -LIMIT_TOL
                || (d.pv_used + d.pv_curtailed - input.pv[t]).abs() > LIMIT_TOL
            {
                return fail(t, "PV split does not match generation".into());
            }
            let ac_balance = d.inverter_ac + d.grid_import - d.grid_export - input.load[t];
            if ac_balance.abs() > LIMIT_TOL {
                return fail(t, format!("AC balance off by {ac_balance}"));
            }
            let dc_net = d.pv_used + dis - c;
            let expect_ac = if dc_net >= 0.0 {
                inv.efficiency * dc_net
            } else {
                dc_net / inv.efficiency
            };
            if (expect_ac - d.inverter_ac).abs() > LIMIT_TOL {
                return fail(t, "inverter conversion mismatch".into());
            }
        }
        Ok(())
    }
}

/// Outcome of one interval for a given DC draw of the battery.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Settlement {
    pub pv_used: f64,
    pub inverter_ac: f64,
    pub grid_import: f64,
    pub grid_export: f64,
    pub cost: f64,
}

/// Cheapest way to serve one interval when the battery draws `battery_dc`
/// (negative when discharging) from the DC bus. Uses as much PV as the
/// inverter can pass, since exports are never worth less than zero.
pub(crate) fn settle(
    inv: &InverterModel,
    load: f64,
    pv: f64,
    buy: f64,
    sell: f64,
    battery_dc: f64,
) -> Option<Settlement> {
    let eta = inv.efficiency;
    let pv_used = pv.min(battery_dc + inv.ac_limit / eta);
    if pv_used < -LIMIT_TOL {
        return None;
    }
    let pv_used = pv_used.max(0.0);
    let dc_net = pv_used - battery_dc;
    let inverter_ac = if dc_net >= 0.0 {
        (eta * dc_net).min(inv.ac_limit)
    } else {
        if !inv.bidirectional && dc_net < -LIMIT_TOL {
            return None;
        }
        let ac = dc_net / eta;
        if ac < -inv.ac_limit - LIMIT_TOL {
            return None;
        }
        ac
    };
    let net = load - inverter_ac;
    let (grid_import, grid_export) = if net >= 0.0 { (net, 0.0) } else { (0.0, -net) };
    Some(Settlement {
        pv_used,
        inverter_ac,
        grid_import,
        grid_export,
        cost: buy * grid_import - sell * grid_export,
    })
}
