//! Traffic domain model: road networks, travel demand, a deterministic
//! point-queue simulator, signal-timing strategies and metric reports.
//!
//! Everything in this crate is a pure function of its inputs. File and
//! process handling live in the server crate.

pub mod demand;
pub mod error;
pub mod metrics;
pub mod network;
pub mod netxml;
pub mod osm;
pub mod rng;
pub mod routing;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
pub use network::{DistrictSet, Edge, Node, RoadNetwork};
