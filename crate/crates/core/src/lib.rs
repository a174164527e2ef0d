//! Team-maxmin equilibria with a coordination device in zero-sum
//! multiplayer extensive-form games.
//!
//! The solver stack is generic over [`scalar::Scalar`]; the aliases below fix
//! it to `f64`, which is what the command-line tool uses.

pub mod bro;
pub mod cmb;
pub mod error;
pub mod game;
pub mod lp;
pub mod master;
pub mod scalar;
pub mod sequence;
pub mod verify;

pub use error::{Error, Result};

pub type Game = game::GameTree<f64>;
pub type Plan = sequence::RealizationPlan<f64>;
pub type Column = master::HybridColumn<f64>;
pub type Master = master::MasterSolution<f64>;
pub type BestResponse = bro::BroSolution<f64>;
pub type CmbOutcome = cmb::CmbResult<f64>;
pub type CmbFailure = cmb::CmbError<f64>;
pub type Model = lp::LinearModel<f64>;
/// Exact rational scalar for reference solves on small models.
pub type Exact = num_rational::Ratio<i128>;
