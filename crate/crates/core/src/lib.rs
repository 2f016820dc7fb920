//! Core of a gray-box continuous optimizer built around RV-GOMEA.
//!
//! The crate is `no_std` (with `alloc`) and free of IO and clocks: it holds the
//! benchmark problem suite with partial evaluations, fitness-based linkage
//! learning (dependency strength matrix and variable interaction graph),
//! non-conditional and conditional FOS linkage models (including clique
//! seeding), Gaussian model estimation/sampling, and the optimizer loop.
//! File formats, experiment harness, and the CLI live in the companion
//! `gomea-harness` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod conditional;
pub mod fos;
pub mod gomea;
pub mod linalg;
pub mod linkage;
pub mod problems;
pub mod sampler;
pub mod vig;

pub use gomea::{EaConfig, LinkageMode, RunResult};
pub use problems::{EvaluationLedger, GrayBoxProblem, Solution};
pub use vig::Vig;
