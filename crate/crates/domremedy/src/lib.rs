//! domremedy: a DOM-level web performance remediation pipeline.
//!
//! The library parses a page's DOM, splits it into token-budgeted chunks,
//! submits chunks together with failing performance audits to pluggable model
//! backends, reassembles the modified page, re-audits it, and quantifies both
//! the change in audit incidence and the structural nature of the edits.

pub mod audit;
pub mod chunk;
pub mod cli;
pub mod diff;
pub mod dom;
pub mod metrics;
pub mod remedy;
pub mod workspace;

pub use dom::{DomDocument, DomNode, NodeKind, TreePath};

// Downstream crates (the C bindings) serialize our types without taking
// their own serde_json dependency.
pub use serde_json;
