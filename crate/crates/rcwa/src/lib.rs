//! Rigorous coupled wave solver for s-polarized plane-wave scattering by
//! periodic gratings, with convergence and theory diagnostics.
//!
//! The solver expands the field in quasi-periodic Fourier modes, slices the
//! grating into thin horizontal strips with piecewise-constant permittivity,
//! solves the resulting modal ODE system per slice by eigendecomposition, and
//! stitches slices with a numerically stable scattering-matrix recursion.
//! Alongside the solver the crate ships analytic multilayer oracles, field
//! evaluation and diffraction efficiencies, a Galerkin-residual certificate,
//! a-priori stability constants, and a convergence harness that fits error
//! decay rates in the truncation order M and the slice thickness h.
//!
//! See the `examples/` directory for runnable entry points, or the `rcwa`
//! binary for the JSON-config driven CLI.

pub mod analysis;
pub mod config;
pub mod convergence;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod modal;
pub mod oracle;
pub mod presets;
pub mod solver;

pub use error::{RcwaError, Result};
pub use geometry::{
    build_slicing, check_nontrapping, stairstep_error_norm, stairstep_permittivity, DeviceSpec,
    InterfaceProfile, NonTrappingReport, Orientation, RegionPermittivity, Segment, SegmentShape,
    SliceProfile, SlicedPermittivity, Slicing,
};
pub use modal::{
    dtn_apply, mode_basis, permittivity_fourier_coeffs, toeplitz_matrix, truncate, IncidentWave,
    ModeBasis, Side,
};
pub use oracle::{homogeneous_field, multilayer_field, multilayer_scattering, LayerStack};
pub use solver::{
    assemble_global_smatrix, slice_eigenmodes, slice_smatrix, solve_scattering, ScatterMatrix,
    ScatterSolution, SliceEigen,
};
pub use fields::{
    diffraction_efficiencies, evaluate_field, evaluate_gradient, norm_error, EfficiencyTable,
    FieldSample, ModalField, NormKind,
};
pub use analysis::{apriori_constant, sesquilinear_residual, AprioriReport};
pub use convergence::{fit_rate, run_h_sweep, run_m_sweep, ConvergenceReport, FloorPolicy};
