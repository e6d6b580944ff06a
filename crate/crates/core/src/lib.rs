//! Q-tensor nematic liquid crystal dynamics on a periodic torus.

pub mod config;
pub mod eigen;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod qtensor;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
