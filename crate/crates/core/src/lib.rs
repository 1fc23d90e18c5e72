//! Core of a multi-agent social interaction simulator: domain model, message
//! broker, agent policies, episode engine, evaluation and storage.

pub mod agents;
pub mod broker;
pub mod domain;
pub mod engine;
pub mod evaluation;
pub mod persistence;
pub mod retry;

pub use domain::Pk;
