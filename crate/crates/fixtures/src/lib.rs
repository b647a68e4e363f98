//! Local search engines over a fixed book dataset, with a brute-force oracle.
//!
//! Four HTML engines (form reload, ajax fragment, keystroke ajax and an
//! infinite-scroll feed the engine cannot drive) and one JSON API, all
//! answering deterministically from `data/books.json`.

pub mod dataset;
pub mod generate;
pub mod server;
pub mod specs;

pub use dataset::{dataset, ground_truth, Book, SortKey, VenueKind, PAGE_SIZE};
pub use server::{spawn_background, FixtureError, FixtureServer, FixtureState, DEFAULT_PORT};
pub use specs::EngineMode;
