//! File formats, extraction backends, and batch commands around
//! `sewtree-core`.

pub mod commands;
pub mod corpus;
pub mod error;
pub mod experiments;
pub mod extractor;
pub mod formats;

pub use error::{Error, Result};
