//! One-time PV and home-battery subsidies, by commissioning year.
//!
//! Both subsidies are piecewise linear in installed size with a flat tail:
//! nothing is paid for capacity above the last tier bound. The combined
//! amount is capped at a fraction of the gross investment.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::{Error, Result};

const BUNDLED_SCHEDULES: &str = include_str!("../data/subsidies.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    /// Upper bound of the tier (kWp or kWh).
    pub upto: f64,
    /// EUR per unit of size inside the tier.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsidySchedule {
    pub year: u16,
    pub pv_tiers: Vec<Tier>,
    pub pv_max: f64,
    pub battery_tiers: Vec<Tier>,
    pub battery_max: f64,
    pub cap_fraction: f64,
}

/// How the investment cap is applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapMode {
    /// PV + battery subsidy capped against the whole-system gross cost.
    #[default]
    Combined,
    /// Each subsidy capped against its own component cost (inverter excluded).
    PerTechnology,
}

fn tiered(size: f64, tiers: &[Tier]) -> f64 {
    let mut lower = 0.0;
    let mut total = 0.0;
    for tier in tiers {
        if size <= lower {
            break;
        }
        total += tier.rate * (size.min(tier.upto) - lower);
        lower = tier.upto;
    }
    total
}

fn non_negative(field: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(
            field,
            format!("must be non-negative, got {value}"),
        ))
    }
}

impl SubsidySchedule {
    pub fn validate(&self) -> Result<()> {
        for (name, tiers) in [
            ("pv_tiers", &self.pv_tiers),
            ("battery_tiers", &self.battery_tiers),
        ] {
            let mut lower = 0.0;
            for (i, t) in tiers.iter().enumerate() {
                if !(t.upto > lower) {
                    return Err(Error::validation(
                        format!("{}[{name}][{i}].upto", self.year),
                        "tier bounds must be strictly increasing and positive",
                    ));
                }
                non_negative(&format!("{}[{name}][{i}].rate", self.year), t.rate)?;
                lower = t.upto;
            }
        }
        non_negative("pv_max", self.pv_max)?;
        non_negative("battery_max", self.battery_max)?;
        if !(0.0..=1.0).contains(&self.cap_fraction) {
            return Err(Error::validation(
                "cap_fraction",
                format!("must lie in [0, 1], got {}", self.cap_fraction),
            ));
        }
        Ok(())
    }

    /// A schedule that pays nothing.
    pub fn none(year: u16) -> Self {
        SubsidySchedule {
            year,
            pv_tiers: Vec::new(),
            pv_max: 0.0,
            battery_tiers: Vec::new(),
            battery_max: 0.0,
            cap_fraction: 0.0,
        }
    }
}

pub fn pv_subsidy(pv_kwp: f64, schedule: &SubsidySchedule) -> Result<f64> {
    non_negative("pv_kwp", pv_kwp)?;
    Ok(tiered(pv_kwp, &schedule.pv_tiers).min(schedule.pv_max))
}

pub fn battery_subsidy(capacity_kwh: f64, schedule: &SubsidySchedule) -> Result<f64> {
    non_negative("capacity_kwh", capacity_kwh)?;
    Ok(tiered(capacity_kwh, &schedule.battery_tiers).min(schedule.battery_max))
}

/// Subsidy actually granted for a scenario after the investment cap.
pub fn total_subsidy(scenario: &Scenario, schedule: &SubsidySchedule, mode: CapMode) -> f64 {
    let pv = pv_subsidy(scenario.pv_kwp, schedule).unwrap_or(0.0);
    let battery = scenario.battery.as_ref().map_or(0.0, |b| {
        battery_subsidy(b.capacity, schedule).unwrap_or(0.0)
    });
    match mode {
        CapMode::Combined => (pv + battery).min(schedule.cap_fraction * scenario.gross_cost),
        CapMode::PerTechnology => {
            let pv_cost = scenario.gross_cost
                - scenario.inverter.price
                - scenario.battery.as_ref().map_or(0.0, |b| b.price);
            let battery_cost = scenario.battery.as_ref().map_or(0.0, |b| b.price);
            pv.min(schedule.cap_fraction * pv_cost)
                + battery.min(schedule.cap_fraction * battery_cost)
        }
    }
}

/// Gross cost minus the capped subsidy.
pub fn net_investment(scenario: &Scenario, schedule: &SubsidySchedule, mode: CapMode) -> f64 {
    scenario.gross_cost - total_subsidy(scenario, schedule, mode)
}

/// Schedules keyed by commissioning year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsidyBook {
    pub schedules: Vec<SubsidySchedule>,
}

impl SubsidyBook {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SCHEDULES, "bundled subsidies").expect("bundled subsidies are valid")
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut book: SubsidyBook = toml::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })?;
        book.schedules.sort_by_key(|s| s.year);
        for s in &book.schedules {
            s.validate()?;
        }
        Ok(book)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn year(&self, year: u16) -> Result<&SubsidySchedule> {
        self.schedules
            .iter()
            .find(|s| s.year == year)
            .ok_or_else(|| Error::Config(format!("no subsidy schedule for year {year}")))
    }

    pub fn years(&self) -> Vec<u16> {
        self.schedules.iter().map(|s| s.year).collect()
    }

    pub fn select(&self, years: &[u16]) -> Result<BTreeMap<u16, SubsidySchedule>> {
        years
            .iter()
            .map(|&y| self.year(y).map(|s| (y, s.clone())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ProductCatalog;
    use crate::scenario::{enumerate_scenarios, Admission, SizingRules};

    fn book() -> SubsidyBook {
        SubsidyBook::bundled()
    }

    #[test]
    fn pv_maxima_per_year() {
        let b = book();
        let got: Vec<f64> = [2021, 2022, 2023, 2024]
            .iter()
            .map(|&y| pv_subsidy(6.0, b.year(y).unwrap()).unwrap())
            .collect();
        assert_eq!(got, vec![1500.0, 1125.0, 750.0, 375.0]);
    }

    #[test]
    fn battery_maxima_per_year() {
        let b = book();
        for (y, max) in [
            (2021, 2550.0),
            (2022, 1725.0),
            (2023, 1150.0),
            (2024, 575.0),
        ] {
            let s = b.year(y).unwrap();
            assert_eq!(battery_subsidy(9.0, s).unwrap(), max);
            assert_eq!(battery_subsidy(9.8, s).unwrap(), max);
            assert_eq!(battery_subsidy(13.1, s).unwrap(), max);
        }
    }

    #[test]
    fn piecewise_values() {
        let b = book();
        let y21 = b.year(2021).unwrap();
        // 4 * 300 + 0.225 * 150
        assert_eq!(pv_subsidy(4.225, y21).unwrap(), 1233.75);
        assert_eq!(pv_subsidy(0.0, y21).unwrap(), 0.0);
        assert!((battery_subsidy(3.3, y21).unwrap() - 990.0).abs() < 1e-9);
        // 4 * 225 + 2 * 187.5 + 3 * 150
        assert_eq!(
            battery_subsidy(13.1, b.year(2022).unwrap()).unwrap(),
            1725.0
        );
    }

    #[test]
    fn negative_sizes_are_rejected() {
        let s = book().year(2021).unwrap().clone();
        assert!(pv_subsidy(-0.1, &s).is_err());
        assert!(battery_subsidy(-1.0, &s).is_err());
    }

    fn pv_only_4225() -> Scenario {
        let c = ProductCatalog::bundled();
        enumerate_scenarios(&c, &SizingRules::default())
            .unwrap()
            .into_iter()
            .find(|s| s.panel_count == 13 && s.battery.is_none() && s.inverter.kva_rating == 2.5)
            .unwrap()
    }

    #[test]
    fn cap_binds_for_4_225_kwp_on_2_5_kva() {
        let s = pv_only_4225();
        let sched = book().year(2021).unwrap().clone();
        let sub = total_subsidy(&s, &sched, CapMode::Combined);
        assert!((sub - 1196.40).abs() < 1e-9);
        assert!((net_investment(&s, &sched, CapMode::Combined) - 1794.60).abs() < 1e-9);
    }

    #[test]
    fn cap_is_forty_percent_of_gross() {
        let c = ProductCatalog::bundled();
        let mut inv = c.solar_inverters[0].clone();
        inv.price = 2000.0 - 6.0 * 174.0;
        let s = Scenario::assemble(1, 6, 0.325, 174.0, None, inv, Admission::Band);
        assert!((s.gross_cost - 2000.0).abs() < 1e-9);
        let mut sched = book().year(2021).unwrap().clone();
        sched.pv_tiers = vec![Tier {
            upto: 6.0,
            rate: 1500.0 / 1.95,
        }];
        assert!((pv_subsidy(s.pv_kwp, &sched).unwrap() - 1500.0).abs() < 1e-9);
        let sub = total_subsidy(&s, &sched, CapMode::Combined);
        assert!((sub - 800.0).abs() < 1e-9);
        assert!((net_investment(&s, &sched, CapMode::Combined) - 1200.0).abs() < 1e-9);
    }

    #[test]
    fn schedules_all_monotone_over_years() {
        let c = ProductCatalog::bundled();
        let b = book();
        for s in enumerate_scenarios(&c, &SizingRules::default()).unwrap() {
            for mode in [CapMode::Combined, CapMode::PerTechnology] {
                let subs: Vec<f64> = [2021, 2022, 2023, 2024]
                    .iter()
                    .map(|&y| total_subsidy(&s, b.year(y).unwrap(), mode))
                    .collect();
                assert!(subs.windows(2).all(|w| w[0] >= w[1]), "{} {subs:?}", s.id);
                assert!(subs[0] <= 0.4 * s.gross_cost + 1e-9);
            }
        }
    }

    #[test]
    fn per_technology_cap_never_exceeds_combined_cap() {
        let c = ProductCatalog::bundled();
        let sched = book().year(2021).unwrap().clone();
        for s in enumerate_scenarios(&c, &SizingRules::default()).unwrap() {
            let per = total_subsidy(&s, &sched, CapMode::PerTechnology);
            assert!(per <= 0.4 * s.gross_cost + 1e-9);
        }
    }

    #[test]
    fn no_subsidy_schedule_pays_nothing() {
        let s = pv_only_4225();
        assert_eq!(
            total_subsidy(&s, &SubsidySchedule::none(2025), CapMode::Combined),
            0.0
        );
    }

    #[test]
    fn bad_tiers_fail_validation() {
        let text = BUNDLED_SCHEDULES.replacen(
            "{ upto = 6.0, rate = 150.0 }",
            "{ upto = 3.0, rate = 150.0 }",
            1,
        );
        assert!(SubsidyBook::parse(&text, "t").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn subsidies_monotone_in_size(a in 0.0f64..20.0, b in 0.0f64..20.0, year in 2021u16..=2024) {
                let book = SubsidyBook::bundled();
                let s = book.year(year).unwrap();
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(pv_subsidy(lo, s).unwrap() <= pv_subsidy(hi, s).unwrap() + 1e-9);
                prop_assert!(battery_subsidy(lo, s).unwrap() <= battery_subsidy(hi, s).unwrap() + 1e-9);
            }

            #[test]
            fn subsidies_monotone_in_year(size in 0.0f64..20.0) {
                let book = SubsidyBook::bundled();
                let pv: Vec<f64> = book.schedules.iter().map(|s| pv_subsidy(size, s).unwrap()).collect();
                let bat: Vec<f64> = book.schedules.iter().map(|s| battery_subsidy(size, s).unwrap()).collect();
                prop_assert!(pv.windows(2).all(|w| w[0] >= w[1]));
                prop_assert!(bat.windows(2).all(|w| w[0] >= w[1]));
            }

            #[test]
            fn battery_subsidy_flat_beyond_nine(extra in 0.0f64..50.0, year in 2021u16..=2024) {
                let book = SubsidyBook::bundled();
                let s = book.year(year).unwrap();
                prop_assert_eq!(battery_subsidy(9.0, s).unwrap(), battery_subsidy(9.0 + extra, s).unwrap());
            }
        }
    }
}
