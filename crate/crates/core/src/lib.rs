//! Crime record unification, news filtering and text mining.

pub mod analytics;
pub mod cluster;
pub mod config;
pub mod corpus;
pub mod crimemap;
pub mod entities;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod svg;
pub mod textproc;
pub mod topics;
pub mod vectorize;

pub use error::{Error, Result};
