//! Extremal Teichmüller maps between triangulated planar domains.
//!
//! The solver alternates a linear Beltrami solve ([`lbs`]) with a projection
//! of the resulting Beltrami coefficient onto constant modulus
//! ([`beltrami`]) until the energy gap ([`energy`]) stops decreasing. See
//! [`qc::run`] for the driver.

// `!(x < y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beltrami;
pub mod cli;
pub mod constraints;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod lbs;
pub mod mesh;
pub mod qc;
pub mod testcase;

pub use error::{Error, Result};
pub use mesh::C64;

/// Shortest decimal representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}
