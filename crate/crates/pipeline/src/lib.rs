//! File formats, the model gateway, the review service and the command
//! line around `mmm-core`.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod gateway;
pub mod review;
pub mod translate;

pub use mmm_core as core;
