//! Deterministic simulator for a network of radar-equipped UAVs that track a
//! moving target with per-agent extended Kalman filters and steer themselves
//! to maximise the determinant of the target-position Fisher information.

pub mod comms;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod infomat;
pub mod nav;
pub mod radar;
pub mod tracker;
pub mod world;

pub use error::{Error, FieldError, Result};
