//! Near-memory query processing model: a classical cache-line baseline and a
//! discrete-event simulation of migrating threadlets on memory nodes joined
//! by a fat-tree fabric, with synthetic relations to drive both.

pub mod baseline;
pub mod engine;
pub mod error;
pub mod fabric;
pub mod harness;
pub mod queries;
pub mod relgen;
pub mod traffic;

pub use error::{Error, Result};
