//! Network epidemics with asymptomatic infections, contact tracing and isolation.
//!
//! * [`dist`]: degree distributions and their generating functions.
//! * [`kinetics`]: degree-based ODE systems, early-time solution, threshold.
//! * [`stability`]: linearisation around disease-free equilibria.
//! * [`netgraph`]: contact graphs, edge typing, statistics, configuration model.
//! * [`abm`]: stochastic agent-based simulation.
//! * [`cli`]: command-line front end.

pub mod abm;
pub mod cli;
pub mod dist;
pub mod error;
pub mod kinetics;
pub mod netgraph;
pub mod stability;

pub use error::{Error, Result};
