//! Summarized sequence diagrams from object-oriented execution traces.
//!
//! The pipeline detects template/hook meta patterns in a static code model,
//! groups the objects that take part in each pattern at run time, picks the
//! groups that hold important objects, and draws only the interactions
//! between those groups.
//!
//! ```text
//! CodeModel --detect--> PatternSet --+
//!                                    +--group--> GroupingResult --+
//! Trace -----------------------------+                            +--summarize--> SummarizedDiagram
//! Trace --rank--> Ranking ----------------------------------------+
//! ```

pub mod cli;
pub mod detect;
pub mod error;
pub mod evaluate;
pub mod generate;
pub mod group;
pub mod model;
pub mod ranking;
pub mod summarize;
pub mod trace;

pub use error::{Error, Result};
