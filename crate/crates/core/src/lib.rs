//! Techno-economic simulation of a nuclear plant coupled to high-temperature
//! electrolysis, hydrogen storage and Fischer–Tropsch synthetic fuel production.

pub mod co2supply;
pub mod dispatch;
pub mod error;
pub mod finance;
pub mod fuelmarket;
pub mod plantmodel;
pub mod pricegen;
pub mod study;

pub use error::{Error, Result};
