//! Discrete-time simulator and policy library for a mixed passenger and
//! parcel fleet: greedy matching, insertion route planning, multi-hop parcel
//! relay, negotiated pricing and learned repositioning.

pub mod city;
pub mod demand;
pub mod dispatch;
pub mod error;
pub mod fleet;
pub mod matching;
pub mod pricing;
pub mod rng;
pub mod routing;
pub mod sim;
pub mod training;

pub use error::{Error, Result};
