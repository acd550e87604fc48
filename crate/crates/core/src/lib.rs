//! Pathwise mild solutions of evolution equations
//! `du = (Au + F(u)) dt + G(u) dω` driven by Hölder paths such as fractional
//! Brownian motion with `H > 1/2`, and the set-valued cocycle they generate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dynsys;
pub mod error;
pub mod fracint;
pub mod heat;
pub mod kummer;
pub mod paths;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
