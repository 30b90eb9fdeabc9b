//! Mutation-based isolation of the machine-code slow paths behind Wasm
//! runtime performance issues.
//!
//! Given a bug-inducing module, a buggy runtime, and an oracle runtime, the
//! pipeline generates single-instruction mutants, selects the mutant that
//! behaves like the original on the oracle but escapes the slowdown on the
//! buggy runtime, and diffs the JIT-generated machine code of the two to
//! pin down the responsible instruction sequences.
//!
//! The crate is organized along the pipeline:
//! - [`model`]: parse/classify/re-encode Wasm modules;
//! - [`mutate`]: type-aware single-instruction mutants;
//! - [`harness`]: process-boundary execution, timing, machine-code dumps;
//! - [`score`]: differential mutant selection;
//! - [`diff`]: opcode-level LCS comparison of dumps;
//! - [`report`]: side-by-side visual report;
//! - [`reduction`]: validity checks for externally reduced modules;
//! - [`mock`]: a deterministic cost-model interpreter for desk-scale runs;
//! - [`pipeline`]: the orchestrator behind the `warp-lens` CLI.

pub mod diff;
pub mod error;
pub mod harness;
pub mod mock;
pub mod model;
pub mod mutate;
pub mod pipeline;
pub mod reduction;
pub mod report;
pub mod score;

pub use error::{Error, Result};
