//! Command line tool and HTTP API over `searchsvc-core`.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod ops;
pub mod output;
pub mod snapshot;
pub mod store;

pub use error::AppError;
pub use ops::{AppContext, SearchRequest};
pub use store::SpecStore;
