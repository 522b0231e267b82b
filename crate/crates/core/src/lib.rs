//! Link-level simulation of secret-subspace anti-jamming for massive MU-MIMO uplinks.

pub mod config;
pub mod error;
pub mod framing;
pub mod hadamard;
pub mod harness;
pub mod jammers;
pub mod linalg;
pub mod receivers;
pub mod reciprocal;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod theory;
pub mod transforms;

pub use error::{MashError, Result};
