//! Simulation and evaluation workbench for interactive web-table retrieval.
//!
//! Simulated users search a multimodal table corpus through BM25, page
//! through SERPs, click and judge tables under configurable behavior models,
//! and reformulate their queries from a growing knowledge state. Sessions
//! are scored query-wise (session DCG) and time-wise (cumulative gain over
//! elapsed seconds), and whole parameter grids run reproducibly from one
//! config file.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod querygen;
pub mod retrieval;
pub mod simulator;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
