//! Equilibria of a strategic exploration game on a Brownian landscape.
//!
//! `N` players split a unit resource between exploiting the best technology
//! found so far and exploring further along a landscape whose quality follows
//! a Brownian motion with drift. Payoffs depend on the state only through the
//! gap `a` between the best quality and the current frontier, so every
//! solution concept reduces to a free-boundary problem in `a`.
//!
//! * [`planner`]: the cooperative cutoff rule and the complete-information benchmark.
//! * [`symmetric`]: the unique symmetric Markov perfect equilibrium.
//! * [`asymmetric`]: turn-taking equilibria built by recursive splitting.
//! * [`verify`]: equilibrium-condition checks and a dynamic-programming oracle.
//! * [`sim`]: Monte Carlo simulation of the reflected gap process.
//! * [`cli`]: the `exploration-eq` command line.

pub mod asymmetric;
pub mod cli;
pub mod error;
pub mod model;
pub mod odekit;
pub mod planner;
pub mod profile;
pub mod sim;
pub mod symmetric;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Extended, LandscapeClass, ModelParams};
