//! Multi-modal multi-agent path finding on graphs with slow edges, battery
//! limits, charging stations and waypoints.
//!
//! The crate provides the data model, a plan validator, an optimal solver,
//! revise-and-augment replanning for executing plans, and an explanation
//! engine answering wait, infeasibility and optimality queries. The `mmapf`
//! binary exposes all of it on the command line and over HTTP.

pub mod cli;
pub mod dynamic;
pub mod explain;
pub mod io;
pub mod model;
pub mod random;
pub mod service;
pub mod solver;
pub mod validate;
