//! Agent-based simulator for geometric-mean AMMs on fast and slow ledgers.
//!
//! The building blocks are usable on their own: [`amm`] for pool math,
//! [`cam`] for the auction slot, [`market`] for reference prices, [`chain`]
//! for block execution and [`agents`] for trading policies. [`runner`] ties
//! them into repeated scenario runs.

pub mod agents;
pub mod amm;
pub mod cam;
pub mod chain;
pub mod cli;
pub mod market;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod sim;

pub use amm::{Direction, Pool, SwapResult};
pub use runner::{run_scenario, RunOptions, ScenarioOutcome};
pub use scenario::{load_scenario, preset, AmmVariant, ScenarioConfig};
