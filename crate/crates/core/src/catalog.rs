//! Manufacturer product tables.
//!
//! The catalog is data, not code: the bundled default lives in
//! `data/catalog.toml` and any file with the same layout can replace it.
//! Sections are `panels`, `batteries`, `solar_inverters` and
//! `hybrid_inverters`; money is EUR, energy kWh, power kWp / kVA.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

const BUNDLED_CATALOG: &str = include_str!("../data/catalog.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    /// Rated output of one panel, kWp.
    pub peak_power: f64,
    /// EUR per panel.
    pub unit_price: f64,
    /// Marks the panel used to build PV arrays during scenario generation.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub generation: bool,
}

impl PanelSpec {
    pub fn price_per_kwp(&self) -> f64 {
        self.unit_price / self.peak_power
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    /// Usable upper bound of the state of charge, kWh.
    pub capacity: f64,
    pub price: f64,
    /// Datasheet charging current in A. Not used by the power model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_charge_current: Option<f64>,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub soc_min_fraction: f64,
    /// Charge power limit as a multiple of capacity, 1/h.
    pub c_rate_charge: f64,
    pub c_rate_discharge: f64,
}

impl BatterySpec {
    pub fn soc_min(&self) -> f64 {
        self.soc_min_fraction * self.capacity
    }

    pub fn soc_max(&self) -> f64 {
        self.capacity
    }

    pub fn max_charge_power(&self) -> f64 {
        self.capacity * self.c_rate_charge
    }

    pub fn max_discharge_power(&self) -> f64 {
        self.capacity * self.c_rate_discharge
    }

    /// Rated power counted towards inverter sizing (kW).
    pub fn rated_power(&self) -> f64 {
        self.max_discharge_power()
    }

    pub fn price_per_kwh(&self) -> f64 {
        self.price / self.capacity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InverterFamily {
    /// Unidirectional PV string inverter.
    Solar,
    /// Bidirectional inverter shared by PV and battery.
    Hybrid,
}

impl InverterFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            InverterFamily::Solar => "solar",
            InverterFamily::Hybrid => "hybrid",
        }
    }

    pub fn is_bidirectional(self) -> bool {
        matches!(self, InverterFamily::Hybrid)
    }
}

impl fmt::Display for InverterFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverterSpec {
    pub kva_rating: f64,
    pub price: f64,
    pub efficiency: f64,
    /// Set from the catalog section the entry was read from.
    #[serde(skip, default = "default_family")]
    pub family: InverterFamily,
}

fn default_family() -> InverterFamily {
    InverterFamily::Solar
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCatalog {
    #[serde(default = "default_version")]
    pub version: String,
    pub panels: Vec<PanelSpec>,
    pub batteries: Vec<BatterySpec>,
    pub solar_inverters: Vec<InverterSpec>,
    pub hybrid_inverters: Vec<InverterSpec>,
}

fn default_version() -> String {
    "custom".to_string()
}

/// Parses and validates a catalog document.
pub fn load_catalog(text: &str, source_name: &str) -> Result<ProductCatalog> {
    let mut catalog: ProductCatalog = toml::from_str(text).map_err(|e| Error::Parse {
        source_name: source_name.to_string(),
        message: e.to_string(),
    })?;
    catalog.normalize()?;
    Ok(catalog)
}

impl ProductCatalog {
    /// The catalog shipped with the crate.
    pub fn bundled() -> Self {
        load_catalog(BUNDLED_CATALOG, "bundled catalog").expect("bundled catalog is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        load_catalog(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("catalog serializes")
    }

    /// SHA-256 of the canonical serialization, for run metadata.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn inverters(&self, family: InverterFamily) -> &[InverterSpec] {
        match family {
            InverterFamily::Solar => &self.solar_inverters,
            InverterFamily::Hybrid => &self.hybrid_inverters,
        }
    }

    pub fn smallest_inverter(&self, family: InverterFamily) -> Result<&InverterSpec> {
        self.inverters(family)
            .first()
            .ok_or_else(|| Error::MissingProduct(format!("{family} inverter")))
    }

    pub fn largest_inverter(&self, family: InverterFamily) -> Result<&InverterSpec> {
        self.inverters(family)
            .last()
            .ok_or_else(|| Error::MissingProduct(format!("{family} inverter")))
    }

    /// Panel used to build PV arrays: the flagged one, else the cheapest per kWp.
    pub fn generation_panel(&self) -> Result<&PanelSpec> {
        if let Some(p) = self.panels.iter().find(|p| p.generation) {
            return Ok(p);
        }
        self.panels
            .iter()
            .min_by(|a, b| a.price_per_kwp().total_cmp(&b.price_per_kwp()))
            .ok_or_else(|| Error::MissingProduct("panel".to_string()))
    }

    /// Sorts every list by size, tags inverter families and checks invariants.
    pub fn normalize(&mut self) -> Result<()> {
        self.panels
            .sort_by(|a, b| a.peak_power.total_cmp(&b.peak_power));
        self.batteries
            .sort_by(|a, b| a.capacity.total_cmp(&b.capacity));
        for (list, family) in [
            (&mut self.solar_inverters, InverterFamily::Solar),
            (&mut self.hybrid_inverters, InverterFamily::Hybrid),
        ] {
            list.sort_by(|a, b| a.kva_rating.total_cmp(&b.kva_rating));
            for inv in list.iter_mut() {
                inv.family = family;
            }
        }
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        let flagged = self.panels.iter().filter(|p| p.generation).count();
        if flagged > 1 {
            return Err(Error::validation(
                "panels",
                format!("{flagged} panels flagged for generation, at most one allowed"),
            ));
        }
        for (i, p) in self.panels.iter().enumerate() {
            positive(&format!("panels[{i}].peak_power"), p.peak_power)?;
            positive(&format!("panels[{i}].unit_price"), p.unit_price)?;
        }
        unique("panels", self.panels.iter().map(|p| p.peak_power))?;

        for (i, b) in self.batteries.iter().enumerate() {
            let name = |f: &str| format!("batteries[{i}].{f}");
            positive(&name("capacity"), b.capacity)?;
            positive(&name("price"), b.price)?;
            fraction(&name("eta_ch"), b.eta_ch)?;
            fraction(&name("eta_dis"), b.eta_dis)?;
            if !(0.0..1.0).contains(&b.soc_min_fraction) {
                return Err(Error::validation(
                    name("soc_min_fraction"),
                    format!("must lie in [0, 1), got {}", b.soc_min_fraction),
                ));
            }
            positive(&name("c_rate_charge"), b.c_rate_charge)?;
            positive(&name("c_rate_discharge"), b.c_rate_discharge)?;
        }
        unique("batteries", self.batteries.iter().map(|b| b.capacity))?;

        for (section, list) in [
            ("solar_inverters", &self.solar_inverters),
            ("hybrid_inverters", &self.hybrid_inverters),
        ] {
            for (i, inv) in list.iter().enumerate() {
                positive(&format!("{section}[{i}].kva_rating"), inv.kva_rating)?;
                positive(&format!("{section}[{i}].price"), inv.price)?;
                fraction(&format!("{section}[{i}].efficiency"), inv.efficiency)?;
            }
            unique(section, list.iter().map(|inv| inv.kva_rating))?;
        }
        Ok(())
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(
            field,
            format!("must be positive, got {value}"),
        ))
    }
}

fn fraction(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::validation(
            field,
            format!("must lie in (0, 1], got {value}"),
        ))
    }
}

fn unique(section: &str, sorted_sizes: impl Iterator<Item = f64>) -> Result<()> {
    let mut prev: Option<f64> = None;
    for size in sorted_sizes {
        if prev == Some(size) {
            return Err(Error::validation(section, format!("duplicate size {size}")));
        }
        prev = Some(size);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_catalog_matches_product_tables() {
        let c = ProductCatalog::bundled();
        assert_eq!(c.panels.len(), 5);
        assert_eq!(c.batteries.len(), 4);
        assert_eq!(c.solar_inverters.len(), 7);
        assert_eq!(c.hybrid_inverters.len(), 7);

        assert!(c
            .panels
            .iter()
            .any(|p| p.peak_power == 0.325 && p.unit_price == 174.0));
        assert!(c
            .hybrid_inverters
            .iter()
            .any(|i| i.kva_rating == 6.0 && i.price == 1929.0));
        let gen = c.generation_panel().unwrap();
        assert_eq!(gen.peak_power, 0.325);

        let capacities: Vec<f64> = c.batteries.iter().map(|b| b.capacity).collect();
        assert_eq!(capacities, vec![3.3, 6.5, 9.8, 13.1]);
        for b in &c.batteries {
            assert_eq!(b.eta_ch, 0.95);
            assert_eq!(b.eta_dis, 0.95);
            assert_eq!(b.soc_min_fraction, 0.1);
            assert_eq!(b.c_rate_charge, 1.0);
        }
        assert!(c
            .solar_inverters
            .iter()
            .chain(&c.hybrid_inverters)
            .all(|i| i.efficiency == 0.98));
    }

    #[test]
    fn cheapest_panel_per_kwp_is_the_generation_panel() {
        let mut c = ProductCatalog::bundled();
        for p in &mut c.panels {
            p.generation = false;
        }
        assert_eq!(c.generation_panel().unwrap().peak_power, 0.325);
    }

    #[test]
    fn smallest_inverters() {
        let c = ProductCatalog::bundled();
        let s = c.smallest_inverter(InverterFamily::Solar).unwrap();
        assert_eq!((s.kva_rating, s.price), (1.5, 539.0));
        let h = c.smallest_inverter(InverterFamily::Hybrid).unwrap();
        assert_eq!((h.kva_rating, h.price), (2.2, 1529.0));
        assert_eq!(h.family, InverterFamily::Hybrid);
    }

    #[test]
    fn empty_inverter_list_is_missing_product() {
        let mut c = ProductCatalog::bundled();
        c.solar_inverters.clear();
        assert!(matches!(
            c.smallest_inverter(InverterFamily::Solar),
            Err(Error::MissingProduct(_))
        ));
    }

    #[test]
    fn zero_priced_battery_is_rejected() {
        let text = BUNDLED_CATALOG.replacen("price = 2349.0", "price = 0.0", 1);
        let err = load_catalog(&text, "test").unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "batteries[0].price"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_entry_is_a_parse_error() {
        let text = BUNDLED_CATALOG.replacen("unit_price = 174.0", "unit_price = \"cheap\"", 1);
        let err = load_catalog(&text, "broken.toml").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(msg.contains("broken.toml"), "{msg}");
        assert!(msg.contains("unit_price"), "{msg}");
    }

    #[test]
    fn per_kwh_battery_price_falls_with_size() {
        let c = ProductCatalog::bundled();
        let per_kwh: Vec<f64> = c.batteries.iter().map(|b| b.price_per_kwh()).collect();
        assert!(per_kwh.windows(2).all(|w| w[0] > w[1]), "{per_kwh:?}");
    }

    #[test]
    fn round_trip_is_identity() {
        let c = ProductCatalog::bundled();
        let again = load_catalog(&c.to_toml_string(), "round trip").unwrap();
        assert_eq!(c, again);
        assert_eq!(c.fingerprint(), again.fingerprint());
    }

    #[test]
    fn unsorted_input_is_sorted_on_load() {
        let mut c = ProductCatalog::bundled();
        c.hybrid_inverters.reverse();
        let reloaded = load_catalog(&c.to_toml_string(), "reversed").unwrap();
        assert_eq!(reloaded.hybrid_inverters[0].kva_rating, 2.2);
    }
}
