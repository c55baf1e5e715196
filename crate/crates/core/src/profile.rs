//! Load and PV time series: CSV ingestion with strict validation, and a
//! seeded synthetic generator for users without metered data.
//!
//! CSV layout (header required, timestamps in local time, no offset):
//!
//! ```text
//! timestamp,load_kwh_per_interval
//! 2021-01-01T00:00:00,0.061
//! 2021-01-01T00:15:00,0.058
//! ```
//!
//! PV files use the column `generation_kwh_per_kwp_per_interval`. Each row
//! holds the energy of the interval that starts at its timestamp. The series
//! must cover the simulated period without gaps or duplicates.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::tariff::Calendar;
use crate::{Error, Result};

pub const LOAD_COLUMN: &str = "load_kwh_per_interval";
pub const PV_COLUMN: &str = "generation_kwh_per_kwp_per_interval";

const TS_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub start: NaiveDateTime,
    pub interval_minutes: u32,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::minutes(i64::from(self.interval_minutes) * index as i64)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.start.to_string().as_bytes());
        h.update(self.interval_minutes.to_le_bytes());
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn write_csv<W: Write>(&self, column: &str, writer: W) -> Result<()> {
        let err = |e: csv::Error| Error::Config(format!("writing profile csv: {e}"));
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp", column]).map_err(err)?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([
                self.timestamp(i).format("%Y-%m-%dT%H:%M:%S").to_string(),
                format!("{v:.9}"),
            ])
            .map_err(err)?;
        }
        w.flush()
            .map_err(|e| Error::Config(format!("writing profile csv: {e}")))?;
        Ok(())
    }
}

/// What an ingested series must look like.
#[derive(Debug, Clone, Copy)]
pub struct Expectation<'a> {
    pub column: &'a str,
    pub start: NaiveDateTime,
    pub interval_minutes: u32,
    pub len: usize,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    TS_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn read_profile_csv(path: &Path, expect: &Expectation<'_>) -> Result<Profile> {
    let file = std::fs::File::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        message: format!("cannot open: {e}"),
    })?;
    parse_profile(file, path, expect)
}

/// Parses and validates a profile. `path` is only used in diagnostics.
pub fn parse_profile<R: Read>(reader: R, path: &Path, expect: &Expectation<'_>) -> Result<Profile> {
    let fail = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| fail(format!("unreadable header: {e}")))?
        .clone();
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != expect.column {
        return Err(fail(format!(
            "header must be `timestamp,{}`, got `{}`",
            expect.column,
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let step = Duration::minutes(i64::from(expect.interval_minutes));
    let mut values = Vec::with_capacity(expect.len);
    let mut prev: Option<NaiveDateTime> = None;
    for (i, record) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let record = record.map_err(|e| fail(format!("row {line}: {e}")))?;
        if record.len() != 2 {
            return Err(fail(format!(
                "row {line}: expected 2 fields, got {}",
                record.len()
            )));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| fail(format!("row {line}: bad timestamp `{}`", &record[0])))?;
        let v: f64 = record[1]
            .parse()
            .map_err(|_| fail(format!("row {line}: bad value `{}`", &record[1])))?;
        if !v.is_finite() || v < 0.0 {
            return Err(fail(format!(
                "row {line}: negative or non-finite energy {v}"
            )));
        }
        match prev {
            None if ts != expect.start => {
                return Err(fail(format!(
                    "row {line}: series starts at {ts}, expected {}",
                    expect.start
                )));
            }
            None => {}
            Some(p) => {
                let diff = ts - p;
                if diff == Duration::zero() {
                    return Err(fail(format!("row {line}: duplicate timestamp {ts}")));
                }
                if diff < Duration::zero() {
                    return Err(fail(format!("row {line}: timestamp {ts} goes backwards")));
                }
                if diff != step {
                    if diff.num_seconds() % step.num_seconds() == 0 {
                        return Err(fail(format!(
                            "row {line}: gap, missing {} to {}",
                            p + step,
                            ts - step
                        )));
                    }
                    return Err(fail(format!(
                        "row {line}: interval of {} min, expected {}",
                        diff.num_minutes(),
                        expect.interval_minutes
                    )));
                }
            }
        }
        if values.len() == expect.len {
            return Err(fail(format!(
                "row {line}: series extends past the simulated period"
            )));
        }
        values.push(v);
        prev = Some(ts);
    }
    if values.len() < expect.len {
        let next = expect.start + step * values.len() as i32;
        let last = expect.start + step * (expect.len as i32 - 1);
        return Err(fail(format!("missing span {next} to {last}")));
    }
    Ok(Profile {
        start: expect.start,
        interval_minutes: expect.interval_minutes,
        values,
    })
}

/// Parameters of the synthetic household and PV generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub seed: u64,
    /// Annual household consumption, kWh.
    pub annual_load_kwh: f64,
    /// Annual PV yield per installed kWp, kWh/kWp.
    pub pv_yield_kwh_per_kwp: f64,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    /// Standard-time offset from UTC, hours.
    pub utc_offset_hours: f64,
    /// Module tilt from horizontal, south facing.
    pub tilt_deg: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 42,
            annual_load_kwh: 3500.0,
            pv_yield_kwh_per_kwp: 950.0,
            latitude_deg: 50.93,
            longitude_deg: 5.33,
            utc_offset_hours: 1.0,
            tilt_deg: 35.0,
        }
    }
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    let z = (h - centre) / width;
    (-0.5 * z * z).exp()
}

/// Household load in kW for a given hour of day, before noise.
fn load_shape(hour: f64, off_day: bool, winter: f64) -> f64 {
    let base = 0.16 + 0.06 * winter;
    let lighting = 0.25 * winter * bump(hour, 18.5, 1.5);
    let activity = if off_day {
        0.45 * bump(hour, 9.5, 1.5) + 0.40 * bump(hour, 13.0, 2.5) + 0.85 * bump(hour, 19.0, 1.7)
    } else {
        0.55 * bump(hour, 7.3, 0.8) + 0.15 * bump(hour, 13.0, 2.0) + 0.90 * bump(hour, 19.0, 1.5)
    };
    base + lighting + activity
}

/// Relative clear-sky irradiance on a tilted, south-facing plane.
fn clear_sky(cfg: &SyntheticConfig, doy: f64, clock_hour: f64) -> f64 {
    let rad = PI / 180.0;
    let decl = 23.44 * rad * (2.0 * PI * (284.0 + doy) / 365.0).sin();
    let b = 2.0 * PI * (doy - 81.0) / 364.0;
    let eot_min = 9.87 * (2.0 * b).sin() - 7.53 * b.cos() - 1.5 * b.sin();
    let solar_hour =
        clock_hour + (4.0 * (cfg.longitude_deg - 15.0 * cfg.utc_offset_hours) + eot_min) / 60.0;
    let omega = 15.0 * rad * (solar_hour - 12.0);
    let lat = cfg.latitude_deg * rad;
    let sin_elev = lat.sin() * decl.sin() + lat.cos() * decl.cos() * omega.cos();
    if sin_elev <= 0.0 {
        return 0.0;
    }
    let air_mass = 1.0 / sin_elev.max(0.05);
    let dni = 0.7f64.powf(air_mass.powf(0.678));
    let tilted = lat - cfg.tilt_deg * rad;
    let cos_inc = (tilted.sin() * decl.sin() + tilted.cos() * decl.cos() * omega.cos()).max(0.0);
    dni * cos_inc + 0.12 * dni * sin_elev
}

/// Generates a (load, PV per kWp) pair for the calendar.
pub fn generate_synthetic(
    cfg: &SyntheticConfig,
    calendar: &Calendar,
    interval_minutes: u32,
) -> Result<(Profile, Profile)> {
    crate::tariff::validate_interval(interval_minutes)?;
    if !(cfg.annual_load_kwh > 0.0 && cfg.pv_yield_kwh_per_kwp > 0.0) {
        return Err(Error::Config("synthetic targets must be positive".into()));
    }
    let per_day = (1440 / interval_minutes) as usize;
    let n = per_day * calendar.days as usize;
    let dt = f64::from(interval_minutes) / 60.0;
    let start = calendar.start.and_hms_opt(0, 0, 0).expect("midnight");

    let mut load_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sky_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f51);

    let mut load = Vec::with_capacity(n);
    let mut pv = Vec::with_capacity(n);
    let mut cloud_state = 0.0f64;
    for day in 0..calendar.days as usize {
        let date = calendar.start + Duration::days(day as i64);
        let doy = f64::from(date.ordinal());
        let winter = 0.5 * (1.0 + (2.0 * PI * (doy - 15.0) / 365.0).cos());
        let off_day = calendar.is_off_day(date);
        let day_level: f64 = 1.0 + 0.12 * (load_rng.random::<f64>() * 2.0 - 1.0);
        let clearness_mean = 0.62 - 0.30 * winter;
        let clearness =
            (clearness_mean + 0.30 * (sky_rng.random::<f64>() * 2.0 - 1.0)).clamp(0.08, 1.0);

        for k in 0..per_day {
            let ts =
                start + Duration::minutes(i64::from(interval_minutes) * (day * per_day + k) as i64);
            let mid = f64::from(ts.hour()) + f64::from(ts.minute()) / 60.0 + dt / 2.0;

            let noise = 1.0 + 0.30 * (load_rng.random::<f64>() * 2.0 - 1.0);
            let spike = if load_rng.random::<f64>() < 0.02 {
                1.2 * load_rng.random::<f64>()
            } else {
                0.0
            };
            load.push((load_shape(mid, off_day, winter) * day_level * noise + spike).max(0.0) * dt);

            cloud_state = 0.9 * cloud_state + 0.1 * (sky_rng.random::<f64>() * 2.0 - 1.0);
            let cloud = (clearness + 0.6 * cloud_state).clamp(0.05, 1.0);
            pv.push(clear_sky(cfg, doy, mid) * cloud * dt);
        }
    }

    let years = f64::from(calendar.days) / 365.0;
    let scale = |v: &mut Vec<f64>, target: f64| {
        let total: f64 = v.iter().sum();
        if total > 0.0 {
            let f = target / total;
            v.iter_mut().for_each(|x| *x *= f);
        }
    };
    scale(&mut load, cfg.annual_load_kwh * years);
    scale(&mut pv, cfg.pv_yield_kwh_per_kwp * years);

    let make = |values| Profile {
        start,
        interval_minutes,
        values,
    };
    Ok((make(load), make(pv)))
}
