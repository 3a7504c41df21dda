//! Evaluation and empirical testing of mean-value and correlation laws for
//! `h_F R_F` over quadratic fields, with brute-force local density oracles.

pub mod arith;
pub mod density;
pub mod error;
pub mod experiments;
pub mod localdata;
pub mod orbitcount;
pub mod quadfields;

pub use error::{Error, Result};
