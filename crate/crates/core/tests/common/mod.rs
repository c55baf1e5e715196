#![allow(dead_code)]

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pvpayback::catalog::{BatterySpec, InverterSpec, ProductCatalog};
use pvpayback::dispatch::{DayInput, Plant};

/// One randomly drawn dispatch problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub buy: Vec<f64>,
    pub sell: Vec<f64>,
    pub load: Vec<f64>,
    pub pv: Vec<f64>,
    pub battery: Option<BatterySpec>,
    pub inverter: InverterSpec,
    pub dt: f64,
    pub soc_start: f64,
}

impl Instance {
    pub fn input(&self) -> DayInput<'_> {
        DayInput {
            buy: &self.buy,
            sell: &self.sell,
            load: &self.load,
            pv: &self.pv,
        }
    }

    pub fn plant(&self) -> Plant {
        Plant::new(self.battery.as_ref(), &self.inverter, self.dt)
    }
}

/// Hourly household-scale instance with at most `max_len` intervals.
pub fn random_instance(rng: &mut ChaCha8Rng, max_len: usize, with_battery: bool) -> Instance {
    let c = ProductCatalog::bundled();
    let n = rng.random_range(2..=max_len);
    let dt = 1.0;
    let start_hour = rng.random_range(0..24usize);
    let tou = rng.random_bool(0.5);
    let (mut buy, mut sell) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for t in 0..n {
        let h = (start_hour + t) % 24;
        let (b, s) = if tou {
            if !(7..22).contains(&h) {
                (0.154008, 0.0211)
            } else {
                (0.200908, 0.0359)
            }
        } else {
            let b = rng.random_range(0.08..0.35);
            (b, b * rng.random_range(0.0..=1.0))
        };
        buy.push(b);
        sell.push(s);
    }
    let load: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.5)).collect();
    let pv_kwp = rng.random_range(0.0..6.0);
    let pv: Vec<f64> = (0..n)
        .map(|t| {
            let h = ((start_hour + t) % 24) as f64 + 0.5;
            let shape = (1.0 - ((h - 13.0) / 6.0).powi(2)).max(0.0);
            pv_kwp * 0.8 * shape * rng.random_range(0.3..1.0)
        })
        .collect();
    let battery = with_battery.then(|| c.batteries[rng.random_range(0..c.batteries.len())].clone());
    let inverter = if battery.is_some() || rng.random_bool(0.5) {
        c.hybrid_inverters[rng.random_range(0..c.hybrid_inverters.len())].clone()
    } else {
        c.solar_inverters[rng.random_range(0..c.solar_inverters.len())].clone()
    };
    let soc_start = battery
        .as_ref()
        .map_or(0.0, |b| rng.random_range(b.soc_min()..=b.soc_max()));
    Instance {
        buy,
        sell,
        load,
        pv,
        battery,
        inverter,
        dt,
        soc_start,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The day problem as a plain linear program, solved by a simplex code.
/// Returns the optimal variable cost.
pub fn lp_cost(inst: &Instance, return_to_start: bool) -> f64 {
    let plant = inst.plant();
    let inv = plant.inverter;
    let eta = inv.efficiency;
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let bat = plant.battery;
    let mut soc = bat.map(|_| p.add_var(0.0, (inst.soc_start, inst.soc_start)));
    let first = soc;
    for t in 0..inst.buy.len() {
        let used = p.add_var(0.0, (0.0, inst.pv[t]));
        // DC-side energy sent to the AC bus, AC-side energy taken from it
        let out = p.add_var(0.0, (0.0, inv.ac_limit / eta));
        let back_max = if inv.bidirectional { inv.ac_limit } else { 0.0 };
        let back = p.add_var(0.0, (0.0, back_max));
        let imp = p.add_var(inst.buy[t], (0.0, f64::INFINITY));
        let exp = p.add_var(-inst.sell[t], (0.0, f64::INFINITY));
        let mut dc = vec![(used, 1.0), (back, eta), (out, -1.0)];
        if let (Some(b), Some(prev)) = (bat, soc) {
            let ch = p.add_var(0.0, (0.0, b.max_charge));
            let dis = p.add_var(0.0, (0.0, b.max_discharge));
            let next = p.add_var(0.0, (b.soc_min, b.soc_max));
            p.add_constraint(
                [
                    (next, 1.0),
                    (prev, -1.0),
                    (ch, -b.eta_ch),
                    (dis, 1.0 / b.eta_dis),
                ],
                ComparisonOp::Eq,
                0.0,
            );
            dc.push((dis, 1.0));
            dc.push((ch, -1.0));
            soc = Some(next);
        }
        p.add_constraint(dc.as_slice(), ComparisonOp::Eq, 0.0);
        p.add_constraint(
            [(out, eta), (imp, 1.0), (exp, -1.0), (back, -1.0)],
            ComparisonOp::Eq,
            inst.load[t],
        );
    }
    if return_to_start {
        if let (Some(a), Some(z)) = (first, soc) {
            p.add_constraint([(z, 1.0), (a, -1.0)], ComparisonOp::Eq, 0.0);
        }
    }
    p.solve()
        .expect("lp solves")
        .into_solution()
        .expect("lp optimal")
        .objective()
}
