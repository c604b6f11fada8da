//! LegacyForge: corpus curation, synthetic data generation, and evaluation
//! for COBOL-focused language models.
//!
//! The library is organized as a pipeline. Acquisition ([`ingest`]) produces
//! source units; [`filter`] and [`dedup`] clean the corpus; [`toolchain`]
//! validates code with a real or scripted compiler.

pub mod config;
pub mod dedup;
pub mod error;
pub mod evalbench;
pub mod filter;
pub mod ingest;
pub mod instruct;
pub mod jsonl;
pub mod modelgw;
pub mod pipeline;
pub mod qa;
pub mod repair;
pub mod toolchain;
pub mod translate;

pub use error::{Error, Result};
