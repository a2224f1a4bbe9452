//! File formats, command-line interface and HTTP service around
//! `detcost-core`.

pub mod analysis;
pub mod api;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod formats;
pub mod render;
pub mod service;
