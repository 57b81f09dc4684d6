//! Exact computation in iterated wreath products of cyclic and symmetric
//! groups acting on rooted d-ary trees.
//!
//! The modules build on each other bottom-up: [`tree`] holds portraits,
//! [`recursion`] solves wreath recurrences, [`conjugacy`] decides conjugacy,
//! [`permgroup`] provides the stabilizer-chain engine, [`model`] constructs
//! the model groups and their invariants, [`arithmetic`] handles cyclotomic
//! numbers and constant fields, and [`verify`] bundles the verification
//! suites shared by the tests and the command-line tool.

pub mod arithmetic;
pub mod conjugacy;
pub mod error;
pub mod model;
pub mod perm;
pub mod permgroup;
pub mod recursion;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use perm::Permutation;
pub use tree::{Perm, Portrait, TreeShape};
