//! Simulation, guidance and learning toolkit for tethered-net capture of
//! space debris.

pub mod capture;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod episode;
pub mod harness;
pub mod error;
pub mod io;
pub mod policy;
pub mod surrogate;

pub use config::{Config, Variant};
pub use error::{Error, Result};
