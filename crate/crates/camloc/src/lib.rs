//! File formats, batch commands and the HTTP service around `camloc-core`.

pub mod app;
pub mod cli;
pub mod error;
pub mod map;
pub mod measure;
pub mod result;
pub mod schema;
pub mod service;
pub mod sweep;
pub mod vp;

pub use error::{AppError, AppResult};
