//! Joint constellation design for the multi-user MIMO broadcast channel.
//!
//! A base station with `T` antennas sends one symbol to each of `K` users. Instead
//! of precoding independent per-user symbols, [`optimizer`] learns one transmit
//! vector per joint message by projected stochastic gradient descent on the
//! largest per-user cross-entropy, which maximizes the smallest per-user mutual
//! information. [`precoders`] builds the matched, zero-forcing and MMSE linear
//! baselines, and [`metrics`] estimates per-user mutual information by Monte Carlo.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod output;
pub mod precoders;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    ChannelSet, Constellation, MessageSpace, NoiseConvention, ObservationBatch, PowerConstraint,
};
pub use rng::{SeedStreams, Stream};
