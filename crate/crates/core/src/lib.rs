//! Cross-lingual adaptation by co-teaching three task models over vicinity
//! samples mixed with the labeled source data.

pub mod coteach;
pub mod data;
pub mod distill;
pub mod error;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod vicinity;

pub use error::{Error, Result};
