//! Reference datasets shipped with the crate.
//!
//! `NORMAL20` is a 20-point sample from N(0, 1) whose last value sits almost
//! exactly on the mean and produces a spurious LDPD minimum near sigma = 0.
//! `MIXTURE20` is a 20-point sample from 0.9 N(10, 1) + 0.1 N(0, 1).

use crate::io::parse_data;

pub const NORMAL20_CSV: &str = include_str!("../../../fixtures/normal20.csv");
pub const MIXTURE20_CSV: &str = include_str!("../../../fixtures/mixture20.csv");

pub fn normal20() -> Vec<f64> {
    parse_data(NORMAL20_CSV).expect("bundled fixture parses")
}

pub fn mixture20() -> Vec<f64> {
    parse_data(MIXTURE20_CSV).expect("bundled fixture parses")
}
