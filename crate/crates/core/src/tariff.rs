//! Supply contracts, interval price series and billing.
//!
//! A contract has day and night registers. Dual-rate contracts bill the
//! night register from 22:00 to 07:00 and all day on weekends and public
//! holidays; single-rate contracts use one register throughout. The buy
//! price of an interval is energy rate + variable distribution + surcharges;
//! the sell price is the injection rate alone.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const BUNDLED_CONTRACTS: &str = include_str!("../data/contracts.toml");

pub const NIGHT_START_HOUR: u32 = 22;
pub const NIGHT_END_HOUR: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContractId {
    C1,
    C2,
    C3,
    C4,
}

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ContractId::C1 => "C1",
            ContractId::C2 => "C2",
            ContractId::C3 => "C3",
            ContractId::C4 => "C4",
        };
        f.write_str(s)
    }
}

impl FromStr for ContractId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" => Ok(ContractId::C1),
            "C2" => Ok(ContractId::C2),
            "C3" => Ok(ContractId::C3),
            "C4" => Ok(ContractId::C4),
            other => Err(Error::Config(format!("unknown contract `{other}`"))),
        }
    }
}

/// Billing ruleset. Energy terms in EUR/kWh, fixed terms in EUR/year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub id: ContractId,
    #[serde(default)]
    pub name: String,
    pub dual_rate: bool,
    pub fixed_charge: f64,
    pub day_rate: f64,
    pub night_rate: f64,
    pub injection_day: f64,
    pub injection_night: f64,
    /// EUR per kW of inverter rating per year.
    pub prosumer_tax: f64,
    pub fixed_distribution_per_year: f64,
    pub fixed_distribution_per_month: f64,
    pub variable_distribution_day: f64,
    pub variable_distribution_night: f64,
    pub surcharges: Vec<f64>,
}

impl Contract {
    pub fn surcharge_total(&self) -> f64 {
        self.surcharges.iter().sum()
    }

    pub fn buy_price(&self, night: bool) -> f64 {
        if night {
            self.night_rate + self.variable_distribution_night + self.surcharge_total()
        } else {
            self.day_rate + self.variable_distribution_day + self.surcharge_total()
        }
    }

    pub fn sell_price(&self, night: bool) -> f64 {
        if night {
            self.injection_night
        } else {
            self.injection_day
        }
    }

    pub fn fixed_distribution_annual(&self) -> f64 {
        self.fixed_distribution_per_year + 12.0 * self.fixed_distribution_per_month
    }

    /// Fixed annual charges for a site with the given inverter rating.
    pub fn annual_fixed(&self, inverter_kva: f64) -> f64 {
        self.fixed_charge + self.fixed_distribution_annual() + self.prosumer_tax * inverter_kva
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("fixed_charge", self.fixed_charge),
            ("day_rate", self.day_rate),
            ("night_rate", self.night_rate),
            ("injection_day", self.injection_day),
            ("injection_night", self.injection_night),
            ("prosumer_tax", self.prosumer_tax),
            (
                "fixed_distribution_per_year",
                self.fixed_distribution_per_year,
            ),
            (
                "fixed_distribution_per_month",
                self.fixed_distribution_per_month,
            ),
            ("variable_distribution_day", self.variable_distribution_day),
            (
                "variable_distribution_night",
                self.variable_distribution_night,
            ),
        ];
        for (field, v) in rates
            .into_iter()
            .chain(self.surcharges.iter().map(|&s| ("surcharges", s)))
        {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(
                    format!("{}.{field}", self.id),
                    format!("must be non-negative, got {v}"),
                ));
            }
        }
        // The dispatch model relies on exports never being worth more than imports.
        for night in [false, true] {
            if self.sell_price(night) > self.buy_price(night) {
                return Err(Error::validation(
                    format!("{}.injection", self.id),
                    "injection rate exceeds the consumption price",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractBook {
    pub contracts: Vec<Contract>,
}

impl ContractBook {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CONTRACTS, "bundled contracts").expect("bundled contracts are valid")
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let book: ContractBook = toml::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })?;
        for c in &book.contracts {
            c.validate()?;
        }
        Ok(book)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, id: ContractId) -> Result<&Contract> {
        self.contracts
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::Config(format!("contract {id} not defined")))
    }
}

/// Simulated date range plus the public holidays billed at night rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Calendar {
    pub start: NaiveDate,
    pub days: u32,
    pub holidays: BTreeSet<NaiveDate>,
}

impl Calendar {
    /// A full calendar year with Belgian public holidays.
    pub fn year(year: i32) -> Self {
        let start = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
        let next = NaiveDate::from_ymd_opt(year + 1, 1, 1).expect("valid year");
        Calendar {
            start,
            days: (next - start).num_days() as u32,
            holidays: belgian_holidays(year),
        }
    }

    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(i64::from(self.days))
    }

    pub fn is_off_day(&self, date: NaiveDate) -> bool {
        matches!(date.weekday(), Weekday::Sat | Weekday::Sun) || self.holidays.contains(&date)
    }

    /// Fraction of a 365-day year covered by the calendar.
    pub fn year_fraction(&self) -> f64 {
        f64::from(self.days) / 365.0
    }
}

/// Easter Sunday (anonymous Gregorian algorithm).
pub fn easter_sunday(year: i32) -> NaiveDate {
    let a = year % 19;
    let b = year / 100;
    let c = year % 100;
    let d = b / 4;
    let e = b % 4;
    let f = (b + 8) / 25;
    let g = (b - f + 1) / 3;
    let h = (19 * a + b - d - g + 15) % 30;
    let i = c / 4;
    let k = c % 4;
    let l = (32 + 2 * e + 2 * i - h - k) % 7;
    let m = (a + 11 * h + 22 * l) / 451;
    let month = (h + l - 7 * m + 114) / 31;
    let day = (h + l - 7 * m + 114) % 31 + 1;
    NaiveDate::from_ymd_opt(year, month as u32, day as u32).expect("valid easter date")
}

/// The ten Belgian legal public holidays.
pub fn belgian_holidays(year: i32) -> BTreeSet<NaiveDate> {
    let d = |m, day| NaiveDate::from_ymd_opt(year, m, day).expect("valid date");
    let easter = easter_sunday(year);
    [
        d(1, 1),
        easter + Duration::days(1),
        d(5, 1),
        easter + Duration::days(39),
        easter + Duration::days(50),
        d(7, 21),
        d(8, 15),
        d(11, 1),
        d(11, 11),
        d(12, 25),
    ]
    .into_iter()
    .collect()
}

pub fn validate_interval(minutes: u32) -> Result<()> {
    if minutes == 0 || 1440 % minutes != 0 {
        return Err(Error::Config(format!(
            "interval of {minutes} min does not divide a day"
        )));
    }
    Ok(())
}

/// Buy/sell prices per interval, aligned with the simulated calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub start: NaiveDateTime,
    pub interval_minutes: u32,
    pub buy: Vec<f64>,
    pub sell: Vec<f64>,
    pub is_night: Vec<bool>,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.buy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buy.is_empty()
    }

    pub fn interval_hours(&self) -> f64 {
        f64::from(self.interval_minutes) / 60.0
    }

    pub fn intervals_per_day(&self) -> usize {
        (1440 / self.interval_minutes) as usize
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::minutes(i64::from(self.interval_minutes) * index as i64)
    }

    /// Owned copy of intervals `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> PriceSeries {
        PriceSeries {
            start: self.timestamp(from),
            interval_minutes: self.interval_minutes,
            buy: self.buy[from..to].to_vec(),
            sell: self.sell[from..to].to_vec(),
            is_night: self.is_night[from..to].to_vec(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let err = |e: csv::Error| Error::Config(format!("writing price csv: {e}"));
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "timestamp",
            "buy_eur_per_kwh",
            "sell_eur_per_kwh",
            "is_night",
        ])
        .map_err(err)?;
        for i in 0..self.len() {
            w.write_record([
                self.timestamp(i).format("%Y-%m-%dT%H:%M:%S").to_string(),
                format!("{:.6}", self.buy[i]),
                format!("{:.6}", self.sell[i]),
                u8::from(self.is_night[i]).to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()
            .map_err(|e| Error::Config(format!("writing price csv: {e}")))?;
        Ok(())
    }
}

pub fn is_night_hour(hour: u32) -> bool {
    !(NIGHT_END_HOUR..NIGHT_START_HOUR).contains(&hour)
}

pub fn build_price_series(
    contract: &Contract,
    calendar: &Calendar,
    interval_minutes: u32,
) -> Result<PriceSeries> {
    validate_interval(interval_minutes)?;
    if calendar.days == 0 {
        return Err(Error::Config("empty date range".to_string()));
    }
    let per_day = (1440 / interval_minutes) as usize;
    let n = per_day * calendar.days as usize;
    let start = calendar.start.and_hms_opt(0, 0, 0).expect("midnight");

    let mut buy = Vec::with_capacity(n);
    let mut sell = Vec::with_capacity(n);
    let mut is_night = Vec::with_capacity(n);
    for i in 0..n {
        let ts = start + Duration::minutes(i64::from(interval_minutes) * i as i64);
        let night =
            contract.dual_rate && (is_night_hour(ts.hour()) || calendar.is_off_day(ts.date()));
        buy.push(contract.buy_price(night));
        sell.push(contract.sell_price(night));
        is_night.push(night);
    }
    Ok(PriceSeries {
        start,
        interval_minutes,
        buy,
        sell,
        is_night,
    })
}

/// Bill for one settlement period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bill {
    pub energy: f64,
    pub fixed: f64,
    pub prosumer_tax: f64,
}

impl Bill {
    pub fn total(&self) -> f64 {
        self.energy + self.fixed + self.prosumer_tax
    }
}

/// Variable energy cost plus pro-rated fixed charges and prosumer tax.
///
/// `duration_years` is the settlement period as a fraction of a year.
pub fn bill_period(
    series: &PriceSeries,
    import_kwh: &[f64],
    export_kwh: &[f64],
    contract: &Contract,
    inverter_kva: f64,
    duration_years: f64,
) -> Result<Bill> {
    if import_kwh.len() != series.len() || export_kwh.len() != series.len() {
        return Err(Error::Shape(format!(
            "price series has {} intervals, import {} and export {}",
            series.len(),
            import_kwh.len(),
            export_kwh.len()
        )));
    }
    let mut energy = 0.0;
    for (i, ((&imp, &exp), (&buy, &sell))) in import_kwh
        .iter()
        .zip(export_kwh)
        .zip(series.buy.iter().zip(&series.sell))
        .enumerate()
    {
        if !(imp >= 0.0) || !(exp >= 0.0) {
            return Err(Error::validation(
                format!("metered energy at interval {i}"),
                format!("import {imp} / export {exp} must be non-negative"),
            ));
        }
        energy += buy * imp - sell * exp;
    }
    Ok(Bill {
        energy,
        fixed: duration_years * (contract.fixed_charge + contract.fixed_distribution_annual()),
        prosumer_tax: duration_years * contract.prosumer_tax * inverter_kva,
    })
}
