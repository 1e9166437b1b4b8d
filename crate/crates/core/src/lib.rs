//! Information content principle (ICP) checks over generalized probabilistic theories.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod axioms;
pub mod catalog;
pub mod constructions;
pub mod ensemble;
pub mod error;
pub mod gpt;
pub mod info;
pub mod optimize;
pub mod proof_chain;
pub mod random;
pub mod schema;

pub use error::{IcpError, Result};
