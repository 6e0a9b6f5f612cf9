// SPDX-License-Identifier: Apache-2.0

//! Training-free understand / edit / verify image editing on a synthetic semantic latent world.

pub mod bench;
pub mod config;
pub mod dse;
pub mod error;
pub mod instruction_parser;
pub mod linalg;
pub mod run_dir;
pub mod scene_graph;
pub mod semantic_space;
pub mod uev;
pub mod velocity_model;
pub mod verifier;

pub use error::{Error, Result};
