//! End-to-end runs: configuration, input loading and report files.
//!
//! All inputs are loaded and validated before the first output file is
//! written, so a failed run leaves the output directory untouched.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::ProductCatalog;
use crate::dispatch::{simulate_year, SimulationConfig};
use crate::econ::{self, EconReport, Summary, SweepInputs, SweepOutput};
use crate::profile::{self, Expectation, Profile, SyntheticConfig, LOAD_COLUMN, PV_COLUMN};
use crate::scenario::{self, Scenario, SizingRules};
use crate::subsidy::{CapMode, SubsidyBook, SubsidySchedule};
use crate::tariff::{
    self, build_price_series, Calendar, Contract, ContractBook, ContractId, PriceSeries,
};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Product catalog; the bundled one when absent.
    pub catalog: Option<PathBuf>,
    pub contracts: Option<PathBuf>,
    pub subsidies: Option<PathBuf>,
    pub contract: ContractId,
    pub years: Vec<u16>,
    pub interval_minutes: u32,
    pub calendar_year: i32,
    /// Replaces the built-in public holiday list when set.
    pub holidays: Option<Vec<NaiveDate>>,
    pub load_profile: Option<PathBuf>,
    pub pv_profile: Option<PathBuf>,
    /// Used when no profile files are given.
    pub synthetic: SyntheticConfig,
    pub sizing: SizingRules,
    pub cap_mode: CapMode,
    pub simulation: SimulationConfig,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub write_prices: bool,
    /// Scenario ids whose full-year dispatch is written out.
    pub dispatch_traces: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            catalog: None,
            contracts: None,
            subsidies: None,
            contract: ContractId::C3,
            years: vec![2021, 2022, 2023, 2024],
            interval_minutes: 15,
            calendar_year: 2021,
            holidays: None,
            load_profile: None,
            pv_profile: None,
            synthetic: SyntheticConfig::default(),
            sizing: SizingRules::default(),
            cap_mode: CapMode::default(),
            simulation: SimulationConfig::default(),
            threads: 0,
            output_dir: PathBuf::from("out"),
            write_prices: false,
            dispatch_traces: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, source_name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn effective_threads(&self) -> usize {
        if self.threads == 0 {
            par::default_threads()
        } else {
            self.threads
        }
    }

    /// Hash of the configuration, independent of the thread count and the
    /// output location.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            threads: 0,
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let text = toml::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        tariff::validate_interval(self.interval_minutes)?;
        self.sizing.validate()?;
        if self.years.is_empty() {
            return Err(Error::validation(
                "years",
                "at least one subsidy year is needed",
            ));
        }
        if self.load_profile.is_some() != self.pv_profile.is_some() {
            return Err(Error::Config(
                "load_profile and pv_profile must be given together".into(),
            ));
        }
        if let Some(f) = self.simulation.initial_soc_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::validation(
                    "initial_soc_fraction",
                    "must lie in [0, 1]",
                ));
            }
        }
        if NaiveDate::from_ymd_opt(self.calendar_year, 1, 1).is_none() {
            return Err(Error::validation("calendar_year", "out of range"));
        }
        Ok(())
    }

    pub fn calendar(&self) -> Calendar {
        let mut cal = Calendar::year(self.calendar_year);
        if let Some(h) = &self.holidays {
            cal.holidays = h.iter().copied().collect::<BTreeSet<_>>();
        }
        cal
    }
}

/// Where the profiles of a run came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    Files { load: PathBuf, pv: PathBuf },
    Synthetic { seed: u64 },
}

/// Fully loaded and validated inputs of a run.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub config: RunConfig,
    pub catalog: ProductCatalog,
    pub contract: Contract,
    pub schedules: std::collections::BTreeMap<u16, SubsidySchedule>,
    pub scenarios: Vec<Scenario>,
    pub worst_case: usize,
    pub prices: PriceSeries,
    pub load: Profile,
    pub pv: Profile,
    pub profile_source: ProfileSource,
}

impl Inputs {
    pub fn load(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let catalog = match &config.catalog {
            Some(p) => ProductCatalog::from_path(p)?,
            None => ProductCatalog::bundled(),
        };
        let contracts = match &config.contracts {
            Some(p) => ContractBook::from_path(p)?,
            None => ContractBook::bundled(),
        };
        let book = match &config.subsidies {
            Some(p) => SubsidyBook::from_path(p)?,
            None => SubsidyBook::bundled(),
        };
        let contract = contracts.get(config.contract)?.clone();
        let schedules = book.select(&config.years)?;
        let scenarios = scenario::enumerate_scenarios(&catalog, &config.sizing)?;
        let worst_case = scenario::worst_case_count(&catalog, &config.sizing)?;
        for &id in &config.dispatch_traces {
            if id == 0 || id > scenarios.len() {
                return Err(Error::validation(
                    "dispatch_traces",
                    format!("scenario {id} does not exist (1..={})", scenarios.len()),
                ));
            }
        }

        let calendar = config.calendar();
        let prices = build_price_series(&contract, &calendar, config.interval_minutes)?;
        let (load, pv, profile_source) = match (&config.load_profile, &config.pv_profile) {
            (Some(lp), Some(pp)) => {
                let expect = |column| Expectation {
                    column,
                    start: prices.start,
                    interval_minutes: config.interval_minutes,
                    len: prices.len(),
                };
                let load = profile::read_profile_csv(lp, &expect(LOAD_COLUMN))?;
                let pv = profile::read_profile_csv(pp, &expect(PV_COLUMN))?;
                (
                    load,
                    pv,
                    ProfileSource::Files {
                        load: lp.clone(),
                        pv: pp.clone(),
                    },
                )
            }
            _ => {
                let (load, pv) = profile::generate_synthetic(
                    &config.synthetic,
                    &calendar,
                    config.interval_minutes,
                )?;
                (
                    load,
                    pv,
                    ProfileSource::Synthetic {
                        seed: config.synthetic.seed,
                    },
                )
            }
        };
        Ok(Inputs {
            config: config.clone(),
            catalog,
            contract,
            schedules,
            scenarios,
            worst_case,
            prices,
            load,
            pv,
            profile_source,
        })
    }

    pub fn sweep_inputs(&self) -> SweepInputs<'_> {
        SweepInputs {
            contract: &self.contract,
            prices: &self.prices,
            load: &self.load.values,
            pv_per_kwp: &self.pv.values,
            schedules: &self.schedules,
            cap_mode: self.config.cap_mode,
            simulation: self.config.simulation,
            threads: self.config.effective_threads(),
        }
    }

    pub fn scenario(&self, id: usize) -> Result<&Scenario> {
        self.scenarios
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::validation("scenario", format!("no scenario with id {id}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub tool_version: String,
    pub config_hash: String,
    pub catalog_version: String,
    pub catalog_fingerprint: String,
    pub contract: ContractId,
    pub interval_minutes: u32,
    pub calendar_year: i32,
    pub profile_source: ProfileSource,
    pub load_fingerprint: String,
    pub pv_fingerprint: String,
    pub annual_load_kwh: f64,
    pub annual_pv_kwh_per_kwp: f64,
    pub worst_case_scenarios: usize,
    pub results: Summary,
}

pub struct RunOutcome {
    pub output: SweepOutput,
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Loads everything, sweeps all scenarios and writes the report files.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let inputs = Inputs::load(config)?;
    let output = econ::sweep(&inputs.scenarios, &inputs.sweep_inputs())?;
    let traces = config
        .dispatch_traces
        .iter()
        .map(|&id| Ok((id, trace_rows(&inputs, id)?)))
        .collect::<Result<Vec<_>>>()?;

    let summary = RunSummary {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        catalog_version: inputs.catalog.version.clone(),
        catalog_fingerprint: inputs.catalog.fingerprint(),
        contract: config.contract,
        interval_minutes: config.interval_minutes,
        calendar_year: config.calendar_year,
        profile_source: inputs.profile_source.clone(),
        load_fingerprint: inputs.load.fingerprint(),
        pv_fingerprint: inputs.pv.fingerprint(),
        annual_load_kwh: inputs.load.total(),
        annual_pv_kwh_per_kwp: inputs.pv.total(),
        worst_case_scenarios: inputs.worst_case,
        results: econ::summarize(&output),
    };

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();

    let path = dir.join("scenarios.csv");
    scenario::write_scenarios_csv(&inputs.scenarios, create(&path)?)?;
    files.push(path);

    let path = dir.join("reports.csv");
    econ::write_reports_csv(&output.reports, create(&path)?)?;
    files.push(path);

    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Invariant(format!("summary serialization: {e}")))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    files.push(path);

    if config.write_prices {
        let path = dir.join("prices.csv");
        inputs.prices.write_csv(create(&path)?)?;
        files.push(path);
    }
    for (id, rows) in traces {
        let path = dir.join(format!("dispatch_{id}.csv"));
        fs::write(&path, rows).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    Ok(RunOutcome {
        output,
        summary,
        files,
    })
}

/// Per-interval dispatch of one scenario as CSV text.
pub fn trace_rows(inputs: &Inputs, id: usize) -> Result<String> {
    let s = inputs.scenario(id)?;
    let year = simulate_year(
        s,
        &inputs.contract,
        &inputs.prices,
        &inputs.load.values,
        &inputs.pv.values,
        &inputs.config.simulation,
    )?;
    let mut out = String::from(
        "timestamp,buy_eur_per_kwh,sell_eur_per_kwh,load_kwh,pv_kwh,pv_used_kwh,pv_curtailed_kwh,\
         charge_kw,discharge_kw,soc_kwh,grid_import_kwh,grid_export_kwh,inverter_ac_kwh\n",
    );
    for (t, d) in year.dispatch.decisions.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            inputs.prices.timestamp(t).format("%Y-%m-%dT%H:%M:%S"),
            inputs.prices.buy[t],
            inputs.prices.sell[t],
            inputs.load.values[t],
            inputs.pv.values[t] * s.pv_kwp,
            d.pv_used,
            d.pv_curtailed,
            d.charge,
            d.discharge,
            year.dispatch.soc[t + 1],
            d.grid_import,
            d.grid_export,
            d.inverter_ac,
        );
    }
    Ok(out)
}

/// Human-readable breakdown of one scenario.
pub fn explain(inputs: &Inputs, id: usize) -> Result<String> {
    let s = inputs.scenario(id)?;
    let baseline =
        crate::dispatch::baseline_bill(&inputs.contract, &inputs.prices, &inputs.load.values)?;
    let report: EconReport = econ::evaluate(s, &inputs.sweep_inputs(), &baseline)?;
    let mut out = String::new();
    let _ = writeln!(out, "scenario {id}");
    let _ = writeln!(
        out,
        "  pv        {} x {:.3} kWp panels = {:.3} kWp",
        s.panel_count,
        s.pv_kwp / f64::from(s.panel_count.max(1)),
        s.pv_kwp
    );
    match &s.battery {
        Some(b) => {
            let _ = writeln!(
                out,
                "  battery   {:.1} kWh ({:.0} EUR)",
                b.capacity, b.price
            );
        }
        None => {
            let _ = writeln!(out, "  battery   none");
        }
    }
    let _ = writeln!(
        out,
        "  inverter  {} {:.2} kVA ({:.0} EUR), admitted by {:?}",
        s.inverter.family.as_str(),
        s.inverter.kva_rating,
        s.inverter.price,
        s.admission
    );
    let _ = writeln!(out, "  pv/inverter ratio {:.3}", s.pv_inverter_ratio());
    let _ = writeln!(out, "  gross cost {:.2} EUR", s.gross_cost);
    let _ = writeln!(
        out,
        "  contract {}: baseline {:.2} EUR/yr, with system {:.2} EUR/yr, savings {:.2} EUR/yr",
        inputs.config.contract, report.baseline_cost, report.system_cost, report.annual_savings
    );
    for (y, e) in &report.by_year {
        let _ = writeln!(
            out,
            "  {y}: subsidy {:.2}, net investment {:.2}, payback {}",
            e.subsidy, e.net_investment, e.payback
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_and_rejects_unknown_keys() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text, "t").unwrap(), c);
        assert!(matches!(
            RunConfig::from_toml("bogus = 1", "t"),
            Err(Error::Parse { .. })
        ));
        let partial =
            RunConfig::from_toml("contract = \"C1\"\ninterval_minutes = 60\n", "t").unwrap();
        assert_eq!(partial.contract, ContractId::C1);
        assert_eq!(partial.years, vec![2021, 2022, 2023, 2024]);
    }

    #[test]
    fn hash_ignores_threads_and_output_dir() {
        let a = RunConfig::default();
        let b = RunConfig {
            threads: 7,
            output_dir: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig {
            interval_minutes: 60,
            ..a.clone()
        };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn validation_catches_bad_settings() {
        let bad_interval = RunConfig {
            interval_minutes: 7,
            ..RunConfig::default()
        };
        assert!(bad_interval.validate().is_err());
        let half_profiles = RunConfig {
            load_profile: Some("x.csv".into()),
            ..RunConfig::default()
        };
        assert!(matches!(half_profiles.validate(), Err(Error::Config(_))));
        let no_years = RunConfig {
            years: vec![],
            ..RunConfig::default()
        };
        assert!(no_years.validate().is_err());
    }

    #[test]
    fn unknown_trace_id_fails_before_output() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let c = RunConfig {
            interval_minutes: 60,
            dispatch_traces: vec![9999],
            output_dir: out.clone(),
            ..RunConfig::default()
        };
        assert!(run(&c).is_err());
        assert!(!out.exists());
    }
}
