//! Savings, payback and the scenario sweep.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dispatch::{baseline_bill, simulate_year, SimulationConfig};
use crate::par;
use crate::scenario::Scenario;
use crate::subsidy::{net_investment, total_subsidy, CapMode, SubsidySchedule};
use crate::tariff::{Bill, Contract, PriceSeries};
use crate::{Error, Result};

/// Written in place of a number when the investment never pays back.
pub const INFINITE: &str = "infinite";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payback {
    Years(f64),
    Infinite,
}

impl Payback {
    pub fn years(self) -> Option<f64> {
        match self {
            Payback::Years(y) => Some(y),
            Payback::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Payback::Years(_))
    }

    /// Total order with `Infinite` last.
    pub fn cmp_total(self, other: Payback) -> std::cmp::Ordering {
        match (self, other) {
            (Payback::Years(a), Payback::Years(b)) => a.total_cmp(&b),
            (Payback::Years(_), Payback::Infinite) => std::cmp::Ordering::Less,
            (Payback::Infinite, Payback::Years(_)) => std::cmp::Ordering::Greater,
            (Payback::Infinite, Payback::Infinite) => std::cmp::Ordering::Equal,
        }
    }
}

impl fmt::Display for Payback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payback::Years(y) => write!(f, "{y:.6}"),
            Payback::Infinite => f.write_str(INFINITE),
        }
    }
}

/// Simple payback: years of savings needed to recover the net investment.
pub fn compute_payback(net_investment: f64, annual_savings: f64) -> Result<Payback> {
    if !net_investment.is_finite() || net_investment < 0.0 {
        return Err(Error::validation(
            "net_investment",
            format!("must be finite and non-negative, got {net_investment}"),
        ));
    }
    if !annual_savings.is_finite() {
        return Err(Error::validation("annual_savings", "not finite"));
    }
    if annual_savings <= 0.0 {
        return Ok(Payback::Infinite);
    }
    Ok(Payback::Years(net_investment / annual_savings))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearEcon {
    pub subsidy: f64,
    pub net_investment: f64,
    pub payback: Payback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconReport {
    pub scenario_id: usize,
    pub pv_kwp: f64,
    pub battery_kwh: f64,
    pub inverter_kva: f64,
    pub inverter_family: String,
    pub gross_cost: f64,
    pub pv_inverter_ratio: f64,
    pub baseline_cost: f64,
    pub system_cost: f64,
    pub annual_savings: f64,
    pub grid_import_kwh: f64,
    pub grid_export_kwh: f64,
    pub battery_charge_kwh: f64,
    pub by_year: BTreeMap<u16, YearEcon>,
}

impl EconReport {
    pub fn payback(&self, year: u16) -> Option<Payback> {
        self.by_year.get(&year).map(|y| y.payback)
    }

    pub fn is_pv_only(&self) -> bool {
        self.battery_kwh == 0.0
    }

    /// Best payback over all configured years.
    pub fn best_payback(&self) -> Payback {
        self.by_year
            .values()
            .map(|y| y.payback)
            .min_by(|a, b| a.cmp_total(*b))
            .unwrap_or(Payback::Infinite)
    }
}

/// Everything the sweep needs besides the scenario list.
#[derive(Debug, Clone)]
pub struct SweepInputs<'a> {
    pub contract: &'a Contract,
    pub prices: &'a PriceSeries,
    pub load: &'a [f64],
    pub pv_per_kwp: &'a [f64],
    pub schedules: &'a BTreeMap<u16, SubsidySchedule>,
    pub cap_mode: CapMode,
    pub simulation: SimulationConfig,
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub baseline: Bill,
    pub reports: Vec<EconReport>,
}

/// Evaluates one scenario against a precomputed baseline bill.
pub fn evaluate(
    scenario: &Scenario,
    inputs: &SweepInputs<'_>,
    baseline: &Bill,
) -> Result<EconReport> {
    let year = simulate_year(
        scenario,
        inputs.contract,
        inputs.prices,
        inputs.load,
        inputs.pv_per_kwp,
        &inputs.simulation,
    )?;
    let system_cost = year.bill.total();
    let annual_savings = baseline.total() - system_cost;
    let mut by_year = BTreeMap::new();
    for (&y, schedule) in inputs.schedules {
        let subsidy = total_subsidy(scenario, schedule, inputs.cap_mode);
        let net = net_investment(scenario, schedule, inputs.cap_mode);
        by_year.insert(
            y,
            YearEcon {
                subsidy,
                net_investment: net,
                payback: compute_payback(net, annual_savings)?,
            },
        );
    }
    let dt = inputs.prices.interval_hours();
    Ok(EconReport {
        scenario_id: scenario.id,
        pv_kwp: scenario.pv_kwp,
        battery_kwh: scenario.battery_kwh(),
        inverter_kva: scenario.inverter.kva_rating,
        inverter_family: scenario.inverter.family.as_str().to_string(),
        gross_cost: scenario.gross_cost,
        pv_inverter_ratio: scenario.pv_inverter_ratio(),
        baseline_cost: baseline.total(),
        system_cost,
        annual_savings,
        grid_import_kwh: year.dispatch.decisions.iter().map(|d| d.grid_import).sum(),
        grid_export_kwh: year.dispatch.decisions.iter().map(|d| d.grid_export).sum(),
        battery_charge_kwh: year.dispatch.charge_throughput(dt),
        by_year,
    })
}

/// Simulates every scenario once and prices it under every subsidy year.
/// Output order follows `scenarios`, independent of the thread count.
pub fn sweep(scenarios: &[Scenario], inputs: &SweepInputs<'_>) -> Result<SweepOutput> {
    let baseline = baseline_bill(inputs.contract, inputs.prices, inputs.load)?;
    let results = par::map_ordered(scenarios, inputs.threads, |s| {
        evaluate(s, inputs, &baseline)
    });
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepOutput { baseline, reports })
}

pub fn write_reports_csv<W: Write>(reports: &[EconReport], writer: W) -> Result<()> {
    let err = |e: csv::Error| Error::Config(format!("writing reports: {e}"));
    let years: Vec<u16> = reports
        .first()
        .map(|r| r.by_year.keys().copied().collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "scenario_id",
        "pv_kwp",
        "battery_kwh",
        "inverter_kva",
        "inverter_family",
        "gross_cost_eur",
        "pv_inverter_ratio",
        "baseline_cost_eur",
        "system_cost_eur",
        "annual_savings_eur",
        "grid_import_kwh",
        "grid_export_kwh",
        "battery_charge_kwh",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for y in &years {
        header.push(format!("subsidy_{y}_eur"));
        header.push(format!("net_investment_{y}_eur"));
        header.push(format!("payback_{y}_years"));
    }
    w.write_record(&header).map_err(err)?;
    for r in reports {
        let mut row = vec![
            r.scenario_id.to_string(),
            format!("{:.3}", r.pv_kwp),
            format!("{:.1}", r.battery_kwh),
            format!("{:.2}", r.inverter_kva),
            r.inverter_family.clone(),
            format!("{:.2}", r.gross_cost),
            format!("{:.6}", r.pv_inverter_ratio),
            format!("{:.6}", r.baseline_cost),
            format!("{:.6}", r.system_cost),
            format!("{:.6}", r.annual_savings),
            format!("{:.6}", r.grid_import_kwh),
            format!("{:.6}", r.grid_export_kwh),
            format!("{:.6}", r.battery_charge_kwh),
        ];
        for y in &years {
            let e = r.by_year.get(y).ok_or_else(|| {
                Error::Invariant(format!("scenario {} lacks year {y}", r.scenario_id))
            })?;
            row.push(format!("{:.2}", e.subsidy));
            row.push(format!("{:.2}", e.net_investment));
            row.push(e.payback.to_string());
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::Config(format!("writing reports: {e}")))?;
    Ok(())
}

/// Pearson correlation; `None` with fewer than two points or no variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Best {
    pub scenario_id: usize,
    pub years: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearSummary {
    pub finite_paybacks: usize,
    pub best_overall: Option<Best>,
    pub best_pv_only: Option<Best>,
    pub best_with_battery: Option<Best>,
    /// Correlation of PV/inverter ratio with payback over PV-only scenarios.
    pub ratio_payback_correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenarios: usize,
    pub pv_only: usize,
    pub with_battery: usize,
    pub baseline_cost: f64,
    pub min_annual_savings: f64,
    pub by_year: BTreeMap<u16, YearSummary>,
    /// Mean relative payback increase from the first to the last year, in
    /// percent, over scenarios finite in both.
    pub mean_payback_increase_pct: Option<f64>,
}

fn best_of<'a>(reports: impl Iterator<Item = &'a EconReport>, year: u16) -> Option<Best> {
    reports
        .filter_map(|r| {
            r.payback(year)?.years().map(|years| Best {
                scenario_id: r.scenario_id,
                years,
            })
        })
        .min_by(|a, b| {
            a.years
                .total_cmp(&b.years)
                .then(a.scenario_id.cmp(&b.scenario_id))
        })
}

pub fn summarize(output: &SweepOutput) -> Summary {
    let reports = &output.reports;
    let years: Vec<u16> = reports
        .first()
        .map(|r| r.by_year.keys().copied().collect())
        .unwrap_or_default();
    let mut by_year = BTreeMap::new();
    for &y in &years {
        let (xs, ys): (Vec<f64>, Vec<f64>) = reports
            .iter()
            .filter(|r| r.is_pv_only())
            .filter_map(|r| Some((r.pv_inverter_ratio, r.payback(y)?.years()?)))
            .unzip();
        by_year.insert(
            y,
            YearSummary {
                finite_paybacks: reports
                    .iter()
                    .filter(|r| r.payback(y).is_some_and(Payback::is_finite))
                    .count(),
                best_overall: best_of(reports.iter(), y),
                best_pv_only: best_of(reports.iter().filter(|r| r.is_pv_only()), y),
                best_with_battery: best_of(reports.iter().filter(|r| !r.is_pv_only()), y),
                ratio_payback_correlation: pearson(&xs, &ys),
            },
        );
    }
    let mean_payback_increase_pct = match (years.first(), years.last()) {
        (Some(&a), Some(&b)) if a != b => {
            let rel: Vec<f64> = reports
                .iter()
                .filter_map(|r| {
                    let first = r.payback(a)?.years()?;
                    let last = r.payback(b)?.years()?;
                    (first > 0.0).then(|| (last / first - 1.0) * 100.0)
                })
                .collect();
            (!rel.is_empty()).then(|| rel.iter().sum::<f64>() / rel.len() as f64)
        }
        _ => None,
    };
    let pv_only = reports.iter().filter(|r| r.is_pv_only()).count();
    Summary {
        scenarios: reports.len(),
        pv_only,
        with_battery: reports.len() - pv_only,
        baseline_cost: output.baseline.total(),
        min_annual_savings: reports
            .iter()
            .map(|r| r.annual_savings)
            .fold(f64::INFINITY, f64::min),
        by_year,
        mean_payback_increase_pct,
    }
}
