//! Deployment economics for supervised versus zero-shot object detectors.
//!
//! The crate is `no_std` (with `alloc`) and holds every model the toolkit
//! evaluates: total-cost-of-ownership curves, closed-form break-even
//! volumes, cost per correct detection, detection scoring, the statistics
//! used to qualify measured accuracies, deterministic stratified sampling,
//! validation of VLM detection responses, and the rule-based architecture
//! recommender. File formats, the CLI and the HTTP facade live in the
//! `detcost` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
pub use error::{Error, Result};

pub mod breakeven;
pub mod cost;
pub mod decision;
pub mod metrics;
pub mod reproduce;
pub mod rng;
pub mod sampler;
pub mod scenarios;
pub mod special;
pub mod stats;
pub mod vlm;

/// Days in the deployment year used for every annualized volume.
pub const DAYS_PER_YEAR: u32 = 365;
