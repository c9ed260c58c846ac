//! Finite-control-set model predictive control of an islanded hybrid AC/DC
//! microgrid: PV boost stage, battery bidirectional converter and a group of
//! parallel three-phase inverters sharing one point of common coupling.

pub mod config;
pub mod control;
pub mod error;
pub mod io;
pub mod metrics;
pub mod numerics;
pub mod plant;
pub mod pv;
pub mod scenarios;
pub mod sim;

pub use error::{Error, Result};
