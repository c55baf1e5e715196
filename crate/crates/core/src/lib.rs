//! Techno-economic engine for residential PV, home battery and inverter
//! investments under Flemish time-of-use contracts and subsidy schedules.
//!
//! The pipeline is:
//!
//! 1. [`catalog`] loads the product tables (panels, batteries, inverters).
//! 2. [`scenario`] enumerates admissible PV / battery / inverter combinations.
//! 3. [`tariff`] compiles a supply contract and calendar into buy/sell prices.
//! 4. [`dispatch`] simulates a year of cost-optimal operation, one day at a time.
//! 5. [`subsidy`] and [`econ`] turn bills into net investment, savings and payback.
//!
//! [`profile`] ingests or synthesizes load and PV series and [`run`] ties the
//! stages together for the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod dispatch;
pub mod econ;
mod error;
pub mod par;
pub mod profile;
pub mod run;
pub mod scenario;
pub mod subsidy;
pub mod tariff;

pub use error::{Error, Result};
