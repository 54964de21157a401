//! Online selection with predictions: the secretary problem, online
//! bipartite matching and the graphic matroid secretary problem, plus exact
//! offline oracles, instance generators and an experiment harness.

pub mod bipartite;
pub mod error;
pub mod graphic;
pub mod harness;
pub mod instances;
pub mod numerics;
pub mod oracles;
pub mod rng;
pub mod secretary;
pub mod stats;
pub mod truthful;
pub mod union_find;

pub use error::{Error, Result};
