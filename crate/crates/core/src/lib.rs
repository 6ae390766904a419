#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod mdp;
pub mod repr;

pub use error::{Error, Result};
