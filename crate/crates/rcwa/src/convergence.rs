//! Placeholder.
use crate::error::Result;

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {}

#[derive(Debug, Clone, Copy)]
pub enum FloorPolicy {
    Auto,
    NoFloor,
}

pub fn fit_rate(_xs: &[f64], _errs: &[f64], _policy: FloorPolicy) -> Result<(f64, f64, Vec<usize>)> {
    unimplemented!()
}

pub fn run_m_sweep() {
    unimplemented!()
}

pub fn run_h_sweep() {
    unimplemented!()
}
