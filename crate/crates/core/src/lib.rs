//! Declarative search services over third-party HTML search interfaces.
//!
//! A [`model::ServiceSpec`] describes how to drive a site's search UI; the
//! [`engine`] turns a query into HTTP requests, [`extract`] materializes the
//! results into domain objects, [`visualize`] shapes them for display and
//! [`klm`] estimates interaction time with the keystroke-level model.

pub mod codec;
pub mod dom;
pub mod engine;
pub mod extract;
pub mod klm;
pub mod model;
pub mod selector;
pub mod validate;
pub mod visualize;

pub use dom::{Document, DocumentHandle, NodeId, NodePath};
pub use model::*;
pub use validate::{validate_spec, Issue, Severity, ValidationReport};
pub use engine::{Engine, EngineError, Fetcher, HttpFetcher, PageCursor};
pub use extract::{DomainObject, PropertyValue, ResultSet};
