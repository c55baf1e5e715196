use serde::{Deserialize, Serialize};

use super::{optimize_day, DayInput, DispatchResult, Plant, TerminalSoc};
use crate::scenario::Scenario;
use crate::tariff::{bill_period, Bill, Contract, PriceSeries};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    #[serde(default)]
    pub terminal: TerminalSoc,
    /// Initial state of charge as a fraction of capacity; defaults to the
    /// minimum permissible level.
    #[serde(default)]
    pub initial_soc_fraction: Option<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            terminal: TerminalSoc::Free,
            initial_soc_fraction: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct YearResult {
    pub dispatch: DispatchResult,
    pub bill: Bill,
}

fn settlement_years(prices: &PriceSeries) -> f64 {
    prices.len() as f64 / prices.intervals_per_day() as f64 / 365.0
}

fn check_lengths(prices: &PriceSeries, load: &[f64], pv: &[f64]) -> Result<()> {
    if load.len() != prices.len() || pv.len() != prices.len() {
        return Err(Error::Shape(format!(
            "price series has {} intervals, load {} and pv {}",
            prices.len(),
            load.len(),
            pv.len()
        )));
    }
    if !prices.len().is_multiple_of(prices.intervals_per_day()) {
        return Err(Error::Shape(
            "price series does not cover whole days".into(),
        ));
    }
    Ok(())
}

/// Bill of the household without any installation.
pub fn baseline_bill(contract: &Contract, prices: &PriceSeries, load: &[f64]) -> Result<Bill> {
    let zeros = vec![0.0; load.len()];
    bill_period(
        prices,
        load,
        &zeros,
        contract,
        0.0,
        settlement_years(prices),
    )
}

/// One-day rolling-horizon simulation over the whole price series.
pub fn simulate_year(
    scenario: &Scenario,
    contract: &Contract,
    prices: &PriceSeries,
    load: &[f64],
    pv_per_kwp: &[f64],
    config: &SimulationConfig,
) -> Result<YearResult> {
    check_lengths(prices, load, pv_per_kwp)?;
    let plant = Plant::new(
        scenario.battery.as_ref(),
        &scenario.inverter,
        prices.interval_hours(),
    );
    let pv: Vec<f64> = pv_per_kwp.iter().map(|g| g * scenario.pv_kwp).collect();

    let mut soc = match (&scenario.battery, plant.battery) {
        (Some(spec), Some(b)) => config.initial_soc_fraction.map_or(b.soc_min, |f| {
            (f * spec.capacity).clamp(b.soc_min, b.soc_max)
        }),
        _ => 0.0,
    };
    let per_day = prices.intervals_per_day();
    let mut year = DispatchResult::default();
    for day in 0..prices.len() / per_day {
        let r = day * per_day..(day + 1) * per_day;
        let input = DayInput {
            buy: &prices.buy[r.clone()],
            sell: &prices.sell[r.clone()],
            load: &load[r.clone()],
            pv: &pv[r],
        };
        let result = optimize_day(&input, &plant, soc, config.terminal)?;
        result.verify(&plant, &input).map_err(|e| {
            Error::Invariant(format!("scenario {} day {}: {e}", scenario.id, day + 1))
        })?;
        soc = *result.soc.last().expect("non-empty trajectory");
        if let Some(b) = plant.battery {
            soc = soc.clamp(b.soc_min, b.soc_max);
        }
        year.append(result);
    }

    let bill = bill_period(
        prices,
        &year.imports(),
        &year.exports(),
        contract,
        scenario.inverter.kva_rating,
        settlement_years(prices),
    )?;
    Ok(YearResult {
        dispatch: year,
        bill,
    })
}
