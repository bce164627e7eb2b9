//! Planning for stochastic shortest path problems with portfolios of reduced
//! models: outcome selection, risk-aware 0/1 model selection, solvers, a
//! plan-execute-replan simulator, and benchmark domains.

pub mod mdp;
pub mod solvers;
pub mod reduction;
pub mod risk;
pub mod rng;
pub mod domains;
pub mod simulator;
