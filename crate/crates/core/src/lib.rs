//! DouDizhu laboratory: rules engine, feature encoders, dense residual
//! Q-networks with manual backpropagation, Deep Monte Carlo self-play training,
//! the call-scoring bidding network, duplicate-deck evaluation and a transport
//! agnostic play session.

pub mod cards;
pub mod rng;
pub mod game;
pub mod encoding;
pub mod networks;
pub mod dmc;
pub mod bidding;
pub mod evaluation;
pub mod session;
