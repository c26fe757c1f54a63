//! Backend for two-phase annotation: span labeling, then alignment of
//! Observer spans to finalized Target spans, with review, discussion and
//! admin adjudication. Exports gold corpora in the core JSONL format.

pub mod api;
pub mod model;
pub mod palette;
pub mod store;

pub use api::{router, serve, AppState, ServerConfig};
pub use model::*;
pub use palette::Palette;
pub use store::{Store, Thread};
