//! Core toolkit for the cooperative subpath-synthesis TSP solver: instances
//! and tours, the vertex-to-agent assignment subproblem, the two-phase game
//! environment, and classical baseline algorithms.

pub mod assignment;
pub mod baselines;
pub mod env;
mod error;
pub mod instance;
pub mod io;
pub mod tour;

pub use error::{Error, Result};
pub use instance::{
    checked_distance, distance, gap, generate_instances, DistanceMatrix, Instance, Point, Seed,
};
pub use tour::{cycle_length, tour_length, Tour};
