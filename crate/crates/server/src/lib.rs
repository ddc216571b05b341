//! Live session service, persistence and command-line entry points.

pub mod cli;
pub mod error;
pub mod live;
pub mod protocol;
pub mod replay_export;
pub mod store;
pub mod tcp;
