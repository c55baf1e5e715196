//! Enumeration of admissible PV / battery / inverter combinations.
//!
//! PV arrays are whole multiples of the generation panel up to a peak cap.
//! Each array is paired with no battery or one catalog battery, and with every
//! inverter of the applicable family whose rating falls inside a band around
//! the combined rated power `S = pv_kwp + battery_kw`. When the band lies
//! entirely below the smallest inverter the smallest is used; when it lies
//! entirely above the largest, the largest is used.
//!
//! Size comparisons are done on integer milli-units so that band edges are
//! decided exactly (edges are inclusive).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::catalog::{BatterySpec, InverterFamily, InverterSpec, ProductCatalog};
use crate::{Error, Result};

/// Sizing rules for scenario generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizingRules {
    /// Largest PV array, kWp.
    pub pv_cap: f64,
    /// Inverter rating lower bound as a fraction of rated power.
    pub band_low: f64,
    /// Inverter rating upper bound as a fraction of rated power.
    pub band_high: f64,
}

impl Default for SizingRules {
    fn default() -> Self {
        SizingRules {
            pv_cap: 6.0,
            band_low: 0.55,
            band_high: 1.1,
        }
    }
}

impl SizingRules {
    pub fn validate(&self) -> Result<()> {
        if !(self.pv_cap > 0.0 && self.pv_cap.is_finite()) {
            return Err(Error::validation(
                "pv_cap",
                format!("must be positive, got {}", self.pv_cap),
            ));
        }
        if !(self.band_low > 0.0 && self.band_low < self.band_high && self.band_high.is_finite()) {
            return Err(Error::validation(
                "band",
                format!(
                    "need 0 < band_low < band_high, got [{}, {}]",
                    self.band_low, self.band_high
                ),
            ));
        }
        Ok(())
    }
}

/// Which rule admitted the inverter of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admission {
    Band,
    SmallestClamp,
    LargestClamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// 1-based, in (pv, battery, inverter kVA) ascending order.
    pub id: usize,
    pub panel_count: u32,
    pub pv_kwp: f64,
    pub battery: Option<BatterySpec>,
    pub inverter: InverterSpec,
    pub gross_cost: f64,
    pub admission: Admission,
}

impl Scenario {
    pub fn battery_kwh(&self) -> f64 {
        self.battery.as_ref().map_or(0.0, |b| b.capacity)
    }

    pub fn is_pv_only(&self) -> bool {
        self.battery.is_none()
    }

    pub fn pv_inverter_ratio(&self) -> f64 {
        self.pv_kwp / self.inverter.kva_rating
    }

    /// Rated power used for inverter sizing, kW.
    pub fn rated_power(&self) -> f64 {
        self.pv_kwp + self.battery.as_ref().map_or(0.0, |b| b.rated_power())
    }

    /// Builds a scenario directly, computing the gross cost from catalog prices.
    pub fn assemble(
        id: usize,
        panel_count: u32,
        panel_kwp: f64,
        panel_price: f64,
        battery: Option<BatterySpec>,
        inverter: InverterSpec,
        admission: Admission,
    ) -> Self {
        let pv_kwp = milli_to_f64(i64::from(panel_count) * to_milli(panel_kwp));
        let gross_cost = f64::from(panel_count) * panel_price
            + battery.as_ref().map_or(0.0, |b| b.price)
            + inverter.price;
        Scenario {
            id,
            panel_count,
            pv_kwp,
            battery,
            inverter,
            gross_cost,
            admission,
        }
    }
}

fn to_milli(x: f64) -> i64 {
    (x * 1000.0).round() as i64
}

fn milli_to_f64(m: i64) -> f64 {
    m as f64 / 1000.0
}

// Band fractions are compared in parts per million.
fn to_ppm(x: f64) -> i128 {
    (x * 1_000_000.0).round() as i128
}

/// Number of PV array sizes (including zero) under the cap.
pub fn pv_choices(catalog: &ProductCatalog, pv_cap: f64) -> Result<u32> {
    let panel = to_milli(catalog.generation_panel()?.peak_power);
    Ok((to_milli(pv_cap) / panel) as u32 + 1)
}

/// Size of the unfiltered product space: PV sizes x (batteries + none) x
/// inverter sizes, taking the longer of the two inverter lists.
pub fn worst_case_count(catalog: &ProductCatalog, rules: &SizingRules) -> Result<usize> {
    let pv = pv_choices(catalog, rules.pv_cap)? as usize;
    let batteries = catalog.batteries.len() + 1;
    let inverters = catalog
        .solar_inverters
        .len()
        .max(catalog.hybrid_inverters.len());
    Ok(pv * batteries * inverters)
}

/// Inverters of one family admitted for rated power `rated_milli`.
pub fn admissible_inverters<'a>(
    inverters: &'a [InverterSpec],
    rated_milli: i64,
    rules: &SizingRules,
) -> Vec<(&'a InverterSpec, Admission)> {
    let (Some(smallest), Some(largest)) = (inverters.first(), inverters.last()) else {
        return Vec::new();
    };
    let lo = to_ppm(rules.band_low) * i128::from(rated_milli);
    let hi = to_ppm(rules.band_high) * i128::from(rated_milli);
    let scaled = |inv: &InverterSpec| i128::from(to_milli(inv.kva_rating)) * 1_000_000;

    if hi < scaled(smallest) {
        return vec![(smallest, Admission::SmallestClamp)];
    }
    if lo > scaled(largest) {
        return vec![(largest, Admission::LargestClamp)];
    }
    inverters
        .iter()
        .filter(|inv| lo <= scaled(inv) && scaled(inv) <= hi)
        .map(|inv| (inv, Admission::Band))
        .collect()
}

/// All admissible scenarios in deterministic order.
pub fn enumerate_scenarios(catalog: &ProductCatalog, rules: &SizingRules) -> Result<Vec<Scenario>> {
    rules.validate()?;
    let panel = catalog.generation_panel()?;
    let panel_milli = to_milli(panel.peak_power);
    let n_pv = pv_choices(catalog, rules.pv_cap)?;

    let mut battery_options: Vec<Option<&BatterySpec>> = vec![None];
    battery_options.extend(catalog.batteries.iter().map(Some));

    let mut out = Vec::new();
    for count in 0..n_pv {
        let pv_milli = i64::from(count) * panel_milli;
        for battery in &battery_options {
            if count == 0 && battery.is_none() {
                continue;
            }
            let family = if battery.is_some() {
                InverterFamily::Hybrid
            } else {
                InverterFamily::Solar
            };
            let rated = pv_milli + battery.map_or(0, |b| to_milli(b.rated_power()));
            for (inv, admission) in admissible_inverters(catalog.inverters(family), rated, rules) {
                out.push(Scenario::assemble(
                    out.len() + 1,
                    count,
                    panel.peak_power,
                    panel.unit_price,
                    battery.cloned(),
                    inv.clone(),
                    admission,
                ));
            }
        }
    }
    Ok(out)
}

pub fn write_scenarios_csv<W: Write>(scenarios: &[Scenario], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Config(format!("writing scenarios csv: {e}"));
    w.write_record([
        "id",
        "pv_kwp",
        "battery_kwh",
        "inverter_kva",
        "inverter_family",
        "gross_cost_eur",
    ])
    .map_err(csv_err)?;
    for s in scenarios {
        w.write_record([
            s.id.to_string(),
            format!("{:.3}", s.pv_kwp),
            format!("{:.1}", s.battery_kwh()),
            format!("{:.2}", s.inverter.kva_rating),
            s.inverter.family.to_string(),
            format!("{:.2}", s.gross_cost),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Config(format!("writing scenarios csv: {e}")))?;
    Ok(())
}
