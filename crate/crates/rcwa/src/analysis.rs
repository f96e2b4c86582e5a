//! Placeholder.
use crate::error::Result;
use crate::modal::IncidentWave;
use crate::geometry::DeviceSpec;

#[derive(Debug, Clone, serde::Serialize)]
pub struct AprioriReport {}

pub fn apriori_constant(_d: &DeviceSpec, _i: &IncidentWave) -> Result<AprioriReport> {
    unimplemented!()
}

pub fn sesquilinear_residual(
    _sol: &crate::solver::ScatterSolution,
    _test_order: usize,
) -> Result<Vec<f64>> {
    unimplemented!()
}
