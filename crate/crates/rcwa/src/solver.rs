//! Per-slice modal eigenproblem and the stable scattering-matrix recursion.
//!
//! Each slice's truncated modal system u'' = -A u, A = kappa^2 E - diag(alpha_n^2),
//! is solved exactly by eigendecomposition; slices are stitched with Redheffer
//! star products so that every stored exponential factor decays (magnitude <= 1),
//! which keeps arbitrarily thick absorbing stacks well conditioned.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use ndarray_linalg::{Eig, Inverse, SVD};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{RcwaError, Result};
use crate::geometry::{DeviceSpec, SliceProfile, SlicedPermittivity, Slicing};
use crate::modal::{
    mode_basis, permittivity_fourier_coeffs, radiation_sqrt, toeplitz_matrix, IncidentWave,
    ModeBasis, Side,
};

type C = Complex64;

fn czero() -> C {
    C::new(0.0, 0.0)
}

fn ci() -> C {
    C::new(0.0, 1.0)
}

/// Eigendecomposition of one slice's modal ODE matrix.
#[derive(Debug, Clone)]
pub struct SliceEigen {
    /// Eigenvector matrix W, columns are modal field patterns.
    pub w: Array2<C>,
    /// Propagation constants q with Im q >= 0 (Re q >= 0 on ties).
    pub q: Vec<C>,
    pub thickness: f64,
    /// Condition number of W (1 for diagonal systems).
    pub cond_w: f64,
}

impl SliceEigen {
    /// W * diag(q), the derivative factor used in mode matching.
    pub fn wq(&self) -> Array2<C> {
        let mut out = self.w.clone();
        for (j, &qj) in self.q.iter().enumerate() {
            out.column_mut(j).mapv_inplace(|v| v * qj);
        }
        out
    }

    /// diag(e^{i q t}) as a vector; |entries| <= 1 for t >= 0.
    pub fn phases(&self, t: f64) -> Vec<C> {
        self.q.iter().map(|&qj| (ci() * qj * t).exp()).collect()
    }
}

/// Solve the slice eigenproblem A = kappa^2 E - diag(alpha_n^2).
pub fn slice_eigenmodes(
    e_j: &Array2<C>,
    basis: &ModeBasis,
    thickness: f64,
) -> Result<SliceEigen> {
    let n = basis.n_modes();
    assert_eq!(e_j.dim(), (n, n), "Toeplitz block size mismatch");
    let k2 = basis.kappa * basis.kappa;
    let mut a = e_j.mapv(|v| v * k2);
    for i in 0..n {
        a[(i, i)] -= basis.alphas[i] * basis.alphas[i];
    }
    // diagonal system (laterally constant slice): closed form, W = I
    let off_diag = a
        .indexed_iter()
        .filter(|((r, c), _)| r != c)
        .map(|(_, v)| v.norm())
        .fold(0.0f64, f64::max);
    if off_diag == 0.0 {
        let q = (0..n).map(|i| radiation_sqrt(a[(i, i)])).collect();
        return Ok(SliceEigen {
            w: Array2::eye(n),
            q,
            thickness,
            cond_w: 1.0,
        });
    }
    let (lambda, w) = a
        .eig()
        .map_err(|e| RcwaError::Linalg(format!("eigendecomposition failed: {e}")))?;
    // residual check: ||A W - W diag(lambda)||_F <= 1e-10 ||A||_F
    let mut wl = w.clone();
    for (j, &lj) in lambda.iter().enumerate() {
        wl.column_mut(j).mapv_inplace(|v| v * lj);
    }
    let resid = (&a.dot(&w) - &wl).mapv(|v| v.norm_sqr()).sum().sqrt();
    let scale = a.mapv(|v| v.norm_sqr()).sum().sqrt();
    let tol = 1e-10;
    if resid > tol * scale {
        return Err(RcwaError::EigSolverFailure {
            slice: 0,
            residual: resid / scale,
            tolerance: tol,
        });
    }
    let sv = w
        .svd(false, false)
        .map_err(|e| RcwaError::Linalg(format!("svd failed: {e}")))?
        .1;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond_w = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !cond_w.is_finite() || cond_w > 1e14 {
        return Err(RcwaError::DefectiveModes { slice: 0, cond: cond_w });
    }
    let q = lambda.iter().map(|&l| radiation_sqrt(l)).collect();
    Ok(SliceEigen {
        w,
        q,
        thickness,
        cond_w,
    })
}

/// Two-port block scattering matrix. Port 1 faces up, port 2 faces down:
/// with `d` incoming from above and `g` incoming from below,
/// outgoing = (S11 d + S12 g upward, S21 d + S22 g downward).
#[derive(Debug, Clone)]
pub struct ScatterMatrix {
    pub s11: Array2<C>,
    pub s12: Array2<C>,
    pub s21: Array2<C>,
    pub s22: Array2<C>,
}

impl ScatterMatrix {
    /// The neutral element of the star product (transparent section).
    pub fn identity(n: usize) -> Self {
        ScatterMatrix {
            s11: Array2::zeros((n, n)),
            s12: Array2::eye(n),
            s21: Array2::eye(n),
            s22: Array2::zeros((n, n)),
        }
    }

    /// Pure propagation with per-mode phase factors (diagonal, no reflection).
    pub fn propagation(phases: &[C]) -> Self {
        let n = phases.len();
        let mut p = Array2::zeros((n, n));
        for (i, &ph) in phases.iter().enumerate() {
            p[(i, i)] = ph;
        }
        ScatterMatrix {
            s11: Array2::zeros((n, n)),
            s12: p.clone(),
            s21: p,
            s22: Array2::zeros((n, n)),
        }
    }

    pub fn n(&self) -> usize {
        self.s11.nrows()
    }

    /// Redheffer star product: `self` stacked above `other`.
    pub fn star(&self, other: &ScatterMatrix) -> Result<ScatterMatrix> {
        let n = self.n();
        let eye: Array2<C> = Array2::eye(n);
        let inv1 = (&eye - &other.s11.dot(&self.s22))
            .inv()
            .map_err(|e| RcwaError::Linalg(format!("star product inversion failed: {e}")))?;
        let inv2 = (&eye - &self.s22.dot(&other.s11))
            .inv()
            .map_err(|e| RcwaError::Linalg(format!("star product inversion failed: {e}")))?;
        Ok(ScatterMatrix {
            s11: &self.s11 + &self.s12.dot(&inv1).dot(&other.s11).dot(&self.s21),
            s12: self.s12.dot(&inv1).dot(&other.s12),
            s21: other.s21.dot(&inv2).dot(&self.s21),
            s22: &other.s22 + &other.s21.dot(&inv2).dot(&self.s22).dot(&other.s12),
        })
    }

    /// Largest entry magnitude over all four blocks.
    pub fn max_entry(&self) -> f64 {
        [&self.s11, &self.s12, &self.s21, &self.s22]
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

/// One side of a mode-matching interface.
#[derive(Clone, Copy)]
pub enum Port<'a> {
    /// Rayleigh basis of a half-space (identity patterns, beta wavenumbers).
    Rayleigh(Side),
    /// Eigenbasis of a slice.
    Modes(&'a SliceEigen),
}

fn port_fg(port: Port, basis: &ModeBasis) -> (Array2<C>, Array2<C>) {
    match port {
        Port::Rayleigh(side) => {
            let n = basis.n_modes();
            let f = Array2::eye(n);
            let mut g = Array2::zeros((n, n));
            for (i, &b) in basis.betas(side).iter().enumerate() {
                g[(i, i)] = b;
            }
            (f, g)
        }
        Port::Modes(e) => (e.w.clone(), e.wq()),
    }
}

/// Scattering matrix of the bare interface between an upper and a lower
/// modal basis, from continuity of the field and its x2-derivative.
pub fn interface_smatrix(
    upper: Port,
    lower: Port,
    basis: &ModeBasis,
) -> Result<ScatterMatrix> {
    let (f1, g1) = port_fg(upper, basis);
    let (f2, g2) = port_fg(lower, basis);
    let n = basis.n_modes();
    // [F1, -F2; G1, G2] [r; t] = [-F1, F2; G1, G2] [d; g]
    let lhs = concatenate![
        Axis(0),
        concatenate![Axis(1), f1, f2.mapv(|v| -v)],
        concatenate![Axis(1), g1, g2]
    ];
    let rhs = concatenate![
        Axis(0),
        concatenate![Axis(1), f1.mapv(|v| -v), f2],
        concatenate![Axis(1), g1, g2]
    ];
    let x = lhs
        .inv()
        .map_err(|_| RcwaError::SingularInterface(0))?
        .dot(&rhs);
    Ok(ScatterMatrix {
        s11: x.slice(s![0..n, 0..n]).to_owned(),
        s12: x.slice(s![0..n, n..2 * n]).to_owned(),
        s21: x.slice(s![n..2 * n, 0..n]).to_owned(),
        s22: x.slice(s![n..2 * n, n..2 * n]).to_owned(),
    })
}

/// Full scattering matrix of one slice embedded between two neighbors:
/// interface from `above`, internal propagation, interface to `below`.
pub fn slice_smatrix(
    eigen: &SliceEigen,
    basis: &ModeBasis,
    above: Port,
    below: Port,
) -> Result<ScatterMatrix> {
    let top = interface_smatrix(above, Port::Modes(eigen), basis)?;
    let prop = ScatterMatrix::propagation(&eigen.phases(eigen.thickness));
    let bot = interface_smatrix(Port::Modes(eigen), below, basis)?;
    top.star(&prop)?.star(&bot)
}

/// Left-to-right star-product fold of a chain of sections.
pub fn assemble_global_smatrix(sections: &[ScatterMatrix]) -> Result<ScatterMatrix> {
    let n = sections
        .first()
        .map(|m| m.n())
        .ok_or_else(|| RcwaError::InvalidArgument("empty section chain".into()))?;
    let mut acc = ScatterMatrix::identity(n);
    for m in sections {
        acc = acc.star(m)?;
    }
    Ok(acc)
}

/// A maximal run of consecutive slices sharing one lateral profile; solved
/// with a single eigendecomposition and propagated as one section.
#[derive(Debug, Clone)]
pub struct MergedSegment {
    /// slice indices [first, last] inclusive, bottom to top
    pub first_slice: usize,
    pub last_slice: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub eigen: SliceEigen,
}

/// Per-slice modal amplitudes in the owning segment's eigenbasis:
/// u(x2) = W (e^{iQ(x2 - z_lo)} a + e^{iQ(z_hi - x2)} b) on the slice.
#[derive(Debug, Clone)]
pub struct SliceAmplitudes {
    pub segment: usize,
    pub a: Array1<C>,
    pub b: Array1<C>,
}

/// Timings and conditioning diagnostics of one solve.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct SolveDiagnostics {
    pub n_slices: usize,
    pub n_segments: usize,
    pub max_cond_w: f64,
    pub ill_conditioned: bool,
    pub eigen_ms: f64,
    pub smatrix_ms: f64,
    pub total_ms: f64,
}

/// Complete RCWA solution: Rayleigh coefficients plus everything needed to
/// evaluate the field anywhere in the cell.
#[derive(Debug, Clone)]
pub struct ScatterSolution {
    pub basis: ModeBasis,
    pub incident: IncidentWave,
    pub device: DeviceSpec,
    pub slicing: Slicing,
    pub sliced: SlicedPermittivity,
    /// Reflected Rayleigh coefficients, referenced at x2 = H.
    pub refl: Array1<C>,
    /// Transmitted Rayleigh coefficients, referenced at x2 = -H.
    pub trans: Array1<C>,
    pub segments: Vec<MergedSegment>,
    pub slices: Vec<SliceAmplitudes>,
    pub diagnostics: SolveDiagnostics,
}

fn same_profile(a: &SliceProfile, b: &SliceProfile) -> bool {
    a.intervals.len() == b.intervals.len()
        && a.intervals
            .iter()
            .zip(&b.intervals)
            .all(|(x, y)| x.0 == y.0 && x.1 == y.1 && x.2 == y.2)
}

/// Incident modal amplitude vector at the top port (x2 = H).
fn incident_vector(basis: &ModeBasis, incident: &IncidentWave, h: f64) -> Array1<C> {
    let mut d = Array1::zeros(basis.n_modes());
    let beta0 = basis.betas_plus[basis.idx(0)];
    d[basis.idx(0)] = incident.amplitude * (-(ci()) * beta0 * h).exp();
    d
}

/// Full pipeline: stairstep, Toeplitz, per-slice eigenmodes, S-matrix
/// recursion, and back-substitution of the interior amplitudes.
pub fn solve_scattering(
    device: &DeviceSpec,
    slicing: &Slicing,
    incident: &IncidentWave,
    m: usize,
) -> Result<ScatterSolution> {
    let t_start = std::time::Instant::now();
    let basis = mode_basis(incident, device, m)?;
    let n = basis.n_modes();
    let sliced = crate::geometry::stairstep_permittivity(device, slicing);
    let n_slices = sliced.slices.len();

    // merge identical consecutive slices into segments (exact: the modal ODE
    // coefficients are constant across such a run)
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    for j in 1..n_slices {
        if !same_profile(&sliced.slices[j], &sliced.slices[start]) {
            ranges.push((start, j - 1));
            start = j;
        }
    }
    ranges.push((start, n_slices - 1));

    let t_eigen = std::time::Instant::now();
    let segments: Vec<MergedSegment> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let z_lo = slicing.boundaries[lo];
            let z_hi = slicing.boundaries[hi + 1];
            let coeffs = permittivity_fourier_coeffs(&sliced.slices[lo], 2 * m);
            let e_j = toeplitz_matrix(&coeffs, m)?;
            let eigen = slice_eigenmodes(&e_j, &basis, z_hi - z_lo).map_err(|err| match err {
                RcwaError::EigSolverFailure {
                    residual,
                    tolerance,
                    ..
                } => RcwaError::EigSolverFailure {
                    slice: lo,
                    residual,
                    tolerance,
                },
                RcwaError::DefectiveModes { cond, .. } => {
                    RcwaError::DefectiveModes { slice: lo, cond }
                }
                other => other,
            })?;
            Ok(MergedSegment {
                first_slice: lo,
                last_slice: hi,
                z_lo,
                z_hi,
                eigen,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let eigen_ms = t_eigen.elapsed().as_secs_f64() * 1e3;
    let n_segments = segments.len();
    let max_cond_w = segments
        .iter()
        .map(|sg| sg.eigen.cond_w)
        .fold(0.0, f64::max);

    let t_sm = std::time::Instant::now();
    // interfaces: idx g is the interface ABOVE segment g; idx n_segments is
    // the bottom interface to the lower half-space... rather: iface_above[g]
    // for g in 0..n_segments is between segment g and the section above it
    // (segment g+1 or the upper half-space); iface_below is the bottom one.
    let mut iface_above: Vec<ScatterMatrix> = Vec::with_capacity(n_segments);
    for g in 0..n_segments {
        let upper = if g + 1 < n_segments {
            Port::Modes(&segments[g + 1].eigen)
        } else {
            Port::Rayleigh(Side::Plus)
        };
        iface_above.push(
            interface_smatrix(upper, Port::Modes(&segments[g].eigen), &basis).map_err(|e| {
                match e {
                    RcwaError::SingularInterface(_) => RcwaError::SingularInterface(g + 1),
                    other => other,
                }
            })?,
        );
    }
    let iface_below = interface_smatrix(
        Port::Modes(&segments[0].eigen),
        Port::Rayleigh(Side::Minus),
        &basis,
    )
    .map_err(|e| match e {
        RcwaError::SingularInterface(_) => RcwaError::SingularInterface(0),
        other => other,
    })?;

    // prefix[g]: everything above the interior of segment g (ends just inside
    // its top boundary); suffix[g]: everything below its bottom boundary
    let mut prefix: Vec<Option<ScatterMatrix>> = vec![None; n_segments];
    prefix[n_segments - 1] = Some(iface_above[n_segments - 1].clone());
    for g in (0..n_segments - 1).rev() {
        let upper = prefix[g + 1].as_ref().unwrap();
        let prop = ScatterMatrix::propagation(&segments[g + 1].eigen.phases(
            segments[g + 1].z_hi - segments[g + 1].z_lo,
        ));
        prefix[g] = Some(upper.star(&prop)?.star(&iface_above[g])?);
    }
    let mut suffix: Vec<Option<ScatterMatrix>> = vec![None; n_segments];
    suffix[0] = Some(iface_below.clone());
    for g in 1..n_segments {
        let below = suffix[g - 1].as_ref().unwrap();
        let prop = ScatterMatrix::propagation(
            &segments[g - 1]
                .eigen
                .phases(segments[g - 1].z_hi - segments[g - 1].z_lo),
        );
        suffix[g] = Some(iface_above[g - 1].star(&prop)?.star(below)?);
    }

    let top = prefix[n_segments - 1].as_ref().unwrap();
    let prop_top = ScatterMatrix::propagation(
        &segments[n_segments - 1]
            .eigen
            .phases(segments[n_segments - 1].z_hi - segments[n_segments - 1].z_lo),
    );
    let global = top
        .star(&prop_top)?
        .star(suffix[n_segments - 1].as_ref().unwrap())?;

    let d_in = incident_vector(&basis, incident, device.half_height);
    let refl = global.s11.dot(&d_in);
    let trans = global.s21.dot(&d_in);

    // interior amplitudes per segment, then per slice
    let eye: Array2<C> = Array2::eye(n);
    let mut slices: Vec<SliceAmplitudes> = Vec::with_capacity(n_slices);
    for (g, seg) in segments.iter().enumerate() {
        let a_mat = prefix[g].as_ref().unwrap();
        let b_mat = suffix[g].as_ref().unwrap();
        let phases = seg.eigen.phases(seg.z_hi - seg.z_lo);
        let scale_cols = |mat: &Array2<C>, ph: &[C]| {
            // mat * diag(ph)
            let mut out = mat.clone();
            for (j, &p) in ph.iter().enumerate() {
                out.column_mut(j).mapv_inplace(|v| v * p);
            }
            out
        };
        let r_below_e = scale_cols(&b_mat.s11, &phases); // S^bot_11 * E
        let coupling = scale_cols(&a_mat.s22, &phases).dot(&r_below_e); // S^top_22 E S^bot_11 E
        let b_seg = (&eye - &coupling)
            .inv()
            .map_err(|e| RcwaError::Linalg(format!("interior back-substitution failed: {e}")))?
            .dot(&a_mat.s21.dot(&d_in));
        let a_seg = r_below_e.dot(&b_seg);
        for j in seg.first_slice..=seg.last_slice {
            let zl = slicing.boundaries[j];
            let zh = slicing.boundaries[j + 1];
            let up: Array1<C> = seg
                .eigen
                .phases(zl - seg.z_lo)
                .iter()
                .zip(a_seg.iter())
                .map(|(p, v)| p * v)
                .collect();
            let down: Array1<C> = seg
                .eigen
                .phases(seg.z_hi - zh)
                .iter()
                .zip(b_seg.iter())
                .map(|(p, v)| p * v)
                .collect();
            slices.push(SliceAmplitudes {
                segment: g,
                a: up,
                b: down,
            });
        }
    }
    let smatrix_ms = t_sm.elapsed().as_secs_f64() * 1e3;

    Ok(ScatterSolution {
        basis,
        incident: *incident,
        device: device.clone(),
        slicing: slicing.clone(),
        sliced,
        refl,
        trans,
        segments,
        slices,
        diagnostics: SolveDiagnostics {
            n_slices,
            n_segments,
            max_cond_w,
            ill_conditioned: max_cond_w > 1e10,
            eigen_ms,
            smatrix_ms,
            total_ms: t_start.elapsed().as_secs_f64() * 1e3,
        },
    })
}

impl ScatterSolution {
    /// All modal coefficients (value, x2-derivative) of the total field at
    /// height x2, ordered n = -M..M.
    pub fn modal_coeffs(&self, x2: f64) -> Vec<(C, C)> {
        let n = self.basis.n_modes();
        let h = self.device.half_height;
        let i = ci();
        if x2 >= h {
            // incident + reflected Rayleigh expansion
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let beta = self.basis.betas_plus[k];
                let up = self.refl[k] * (i * beta * (x2 - h)).exp();
                let mut v = up;
                let mut dv = i * beta * up;
                if self.basis.order(k) == 0 {
                    let beta0 = self.basis.betas_plus[self.basis.idx(0)];
                    let inc = self.incident.amplitude * (-(i) * beta0 * x2).exp();
                    v += inc;
                    dv += -(i) * beta0 * inc;
                }
                out.push((v, dv));
            }
            return out;
        }
        if x2 <= -h {
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let beta = self.basis.betas_minus[k];
                let dn = self.trans[k] * (-(i) * beta * (x2 + h)).exp();
                out.push((dn, -(i) * beta * dn));
            }
            return out;
        }
        let j = self.slicing.find_slice(x2);
        self.slice_coeffs(j, x2)
    }

    /// Modal coefficients evaluated with slice j's representation (x2 may sit
    /// on a boundary; used for one-sided continuity checks).
    pub fn slice_coeffs(&self, j: usize, x2: f64) -> Vec<(C, C)> {
        let amp = &self.slices[j];
        let seg = &self.segments[amp.segment];
        let zl = self.slicing.boundaries[j];
        let zh = self.slicing.boundaries[j + 1];
        let i = ci();
        let nm = self.basis.n_modes();
        let mut vec_v: Array1<C> = Array1::zeros(nm);
        let mut vec_d: Array1<C> = Array1::zeros(nm);
        for (k, &qk) in seg.eigen.q.iter().enumerate() {
            let up = amp.a[k] * (i * qk * (x2 - zl)).exp();
            let down = amp.b[k] * (i * qk * (zh - x2)).exp();
            vec_v[k] = up + down;
            vec_d[k] = i * qk * (up - down);
        }
        let v = seg.eigen.w.dot(&vec_v);
        let d = seg.eigen.w.dot(&vec_d);
        v.iter().zip(d.iter()).map(|(&a, &b)| (a, b)).collect()
    }

    /// Maximum mismatch of modal value/derivative across every internal slice
    /// boundary and both half-space boundaries, relative to the field scale.
    pub fn max_continuity_residual(&self) -> f64 {
        let nb = self.slicing.boundaries.len();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        let mut pairs: Vec<(Vec<(C, C)>, Vec<(C, C)>)> = Vec::new();
        // bottom half-space vs slice 0
        let z0 = self.slicing.boundaries[0];
        pairs.push((self.modal_coeffs(z0 - 0.0), self.slice_coeffs(0, z0)));
        for b in 1..nb - 1 {
            let z = self.slicing.boundaries[b];
            pairs.push((self.slice_coeffs(b - 1, z), self.slice_coeffs(b, z)));
        }
        let zt = *self.slicing.boundaries.last().unwrap();
        pairs.push((
            self.slice_coeffs(nb - 2, zt),
            self.modal_coeffs(zt + 0.0),
        ));
        let kappa = self.basis.kappa;
        for (lo, hi) in &pairs {
            for ((v1, d1), (v2, d2)) in lo.iter().zip(hi) {
                scale = scale.max(v1.norm()).max(d1.norm() / kappa);
                worst = worst
                    .max((v1 - v2).norm())
                    .max((d1 - d2).norm() / kappa);
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// Largest magnitude over all stored per-slice amplitudes and propagation
    /// phases (the stability contract: bounded by the incident scale).
    pub fn max_stored_exponential(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|sg| sg.eigen.phases(sg.z_hi - sg.z_lo))
            .map(|p| p.norm())
            .fold(0.0, f64::max)
    }
}

impl crate::fields::ModalField for ScatterSolution {
    fn max_order(&self) -> usize {
        self.basis.m
    }

    fn coeff(&self, n: i64, x2: f64) -> (C, C) {
        if n.unsigned_abs() as usize > self.basis.m {
            return (czero(), czero());
        }
        self.modal_coeffs(x2)[self.basis.idx(n)]
    }

    fn coeffs(&self, x2: f64) -> Vec<(C, C)> {
        self.modal_coeffs(x2)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.slicing.boundaries.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_slicing;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn basis_for(eps_plus: C, eps_minus: C, m: usize) -> ModeBasis {
        let inc = IncidentWave::new(600.0, 0.0).unwrap();
        ModeBasis::build(&inc, eps_plus, eps_minus, 500.0, m).unwrap()
    }

    fn const_block(v: C, m: usize) -> Array2<C> {
        Array2::eye(2 * m + 1).mapv(|e: C| e * v)
    }

    #[test]
    fn eigen_trivial_vacuum() {
        // kappa = 1 via wavelength 2*pi, alpha = 0, M = 0, eps = 1: A = [1], q = 1
        let inc = IncidentWave::new(std::f64::consts::TAU, 0.0).unwrap();
        let b = ModeBasis::build(&inc, c(1.0, 0.0), c(1.0, 0.0), 500.0, 0).unwrap();
        let e = slice_eigenmodes(&const_block(c(1.0, 0.0), 0), &b, 1.0).unwrap();
        assert_relative_eq!(e.q[0].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(e.q[0].im, 0.0, epsilon = 1e-12);
        assert_eq!(e.w[(0, 0)], c(1.0, 0.0));
    }

    #[test]
    fn eigen_evanescent_branch() {
        // single mode with alpha_n = 2, kappa = 1: A = 1 - 4 = -3, q = i sqrt(3)
        let inc = IncidentWave::new(std::f64::consts::TAU, 0.0).unwrap();
        // period pi makes alpha_{+1} = 2; pick the n = +1 diagonal entry
        let b = ModeBasis::build(&inc, c(1.0, 0.0), c(1.0, 0.0), std::f64::consts::PI, 1).unwrap();
        let e = slice_eigenmodes(&const_block(c(1.0, 0.0), 1), &b, 1.0).unwrap();
        let q_plus1 = e.q[b.idx(1)];
        assert_relative_eq!(q_plus1.im, 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(q_plus1.re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_matches_dense_oracle_for_step_profile() {
        // M = 1 step-profile slice: q^2 must equal the eigenvalues of the
        // 3x3 A assembled by hand
        let b = basis_for(c(1.0, 0.0), c(1.0, 0.0), 1);
        let prof = SliceProfile {
            z_lo: 0.0,
            z_hi: 1.0,
            midline: 0.5,
            intervals: vec![(0.0, 250.0, c(4.0, 0.0)), (250.0, 500.0, c(1.0, 0.0))],
        };
        let coeffs = permittivity_fourier_coeffs(&prof, 2);
        let e_j = toeplitz_matrix(&coeffs, 1).unwrap();
        let eig = slice_eigenmodes(&e_j, &b, 1.0).unwrap();
        // dense oracle: characteristic polynomial roots via closed-form A
        let k2 = b.kappa * b.kappa;
        let mut a = e_j.mapv(|v| v * k2);
        for i in 0..3 {
            a[(i, i)] -= b.alphas[i] * b.alphas[i];
        }
        let (lambda, _) = a.eig().unwrap();
        let mut got: Vec<f64> = eig.q.iter().map(|q| (q * q).re).collect();
        let mut expect: Vec<f64> = lambda.iter().map(|l| l.re).collect();
        got.sort_by(f64::total_cmp);
        expect.sort_by(f64::total_cmp);
        for (g, x) in got.iter().zip(&expect) {
            assert_relative_eq!(g, x, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn vacuum_slice_smatrix_is_pure_phase() {
        let m = 2;
        let b = basis_for(c(1.0, 0.0), c(1.0, 0.0), m);
        let e = slice_eigenmodes(&const_block(c(1.0, 0.0), m), &b, 73.0).unwrap();
        let sm = slice_smatrix(&e, &b, Port::Rayleigh(Side::Plus), Port::Rayleigh(Side::Minus))
            .unwrap();
        for i in 0..b.n_modes() {
            for j in 0..b.n_modes() {
                assert!(sm.s11[(i, j)].norm() < 1e-12);
                assert!(sm.s22[(i, j)].norm() < 1e-12);
                let expect = if i == j {
                    (ci() * b.betas_plus[i] * 73.0).exp()
                } else {
                    czero()
                };
                assert!((sm.s12[(i, j)] - expect).norm() < 1e-12);
                assert!((sm.s21[(i, j)] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_thickness_interface_roundtrip() {
        // an interface composed with its reverse is transparent
        let m = 1;
        let b = basis_for(c(1.0, 0.0), c(2.25, 0.0), m);
        let prof = SliceProfile {
            z_lo: 0.0,
            z_hi: 0.0,
            midline: 0.0,
            intervals: vec![(0.0, 300.0, c(2.25, 0.0)), (300.0, 500.0, c(1.0, 0.0))],
        };
        let coeffs = permittivity_fourier_coeffs(&prof, 2 * m);
        let e_j = toeplitz_matrix(&coeffs, m).unwrap();
        let eig = slice_eigenmodes(&e_j, &b, 0.0).unwrap();
        let fwd = interface_smatrix(Port::Rayleigh(Side::Plus), Port::Modes(&eig), &b).unwrap();
        let rev = interface_smatrix(Port::Modes(&eig), Port::Rayleigh(Side::Plus), &b).unwrap();
        let id = fwd.star(&rev).unwrap();
        for i in 0..b.n_modes() {
            for j in 0..b.n_modes() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id.s12[(i, j)].re - expect).abs() < 1e-12);
                assert!(id.s12[(i, j)].im.abs() < 1e-12);
                assert!(id.s11[(i, j)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fresnel_half_space_interface() {
        // vacuum above, eps = 2.25 below, M = 0, normal incidence: r = -0.2
        let b = basis_for(c(1.0, 0.0), c(2.25, 0.0), 0);
        let sm =
            interface_smatrix(Port::Rayleigh(Side::Plus), Port::Rayleigh(Side::Minus), &b).unwrap();
        assert_relative_eq!(sm.s11[(0, 0)].re, -0.2, epsilon = 1e-12);
        assert_relative_eq!(sm.s11[(0, 0)].im, 0.0, epsilon = 1e-12);
        assert_relative_eq!(sm.s21[(0, 0)].re, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn star_identity_and_phase_additivity() {
        let n = 5;
        let id = ScatterMatrix::identity(n);
        let composed = id.star(&ScatterMatrix::identity(n)).unwrap();
        assert!((composed.s12[(2, 2)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(composed.s11.iter().all(|v| v.norm() < 1e-14));
        // vacuum phases add
        let b = basis_for(c(1.0, 0.0), c(1.0, 0.0), 2);
        let p1 = ScatterMatrix::propagation(
            &b.betas_plus.iter().map(|&bb| (ci() * bb * 40.0).exp()).collect::<Vec<_>>(),
        );
        let p2 = ScatterMatrix::propagation(
            &b.betas_plus.iter().map(|&bb| (ci() * bb * 17.0).exp()).collect::<Vec<_>>(),
        );
        let p = p1.star(&p2).unwrap();
        for i in 0..b.n_modes() {
            let expect = (ci() * b.betas_plus[i] * 57.0).exp();
            assert!((p.s12[(i, i)] - expect).norm() < 1e-13);
        }
    }

    fn random_passive_smatrix(n: usize, seed: &mut u64) -> ScatterMatrix {
        let mut next = move |seed: &mut u64| {
            *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (*seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut block = |seed: &mut u64, scale: f64| {
            Array2::from_shape_fn((n, n), |_| c(next(seed), next(seed)) * scale)
        };
        ScatterMatrix {
            s11: block(seed, 0.4),
            s12: block(seed, 0.6),
            s21: block(seed, 0.6),
            s22: block(seed, 0.4),
        }
    }

    #[test]
    fn star_is_associative() {
        let mut seed = 31u64;
        for _ in 0..5 {
            let s1 = random_passive_smatrix(4, &mut seed);
            let s2 = random_passive_smatrix(4, &mut seed);
            let s3 = random_passive_smatrix(4, &mut seed);
            let left = s1.star(&s2).unwrap().star(&s3).unwrap();
            let right = s1.star(&s2.star(&s3).unwrap()).unwrap();
            for (a, b) in [
                (&left.s11, &right.s11),
                (&left.s12, &right.s12),
                (&left.s21, &right.s21),
                (&left.s22, &right.s22),
            ] {
                let diff = (a - b).mapv(|v| v.norm()).fold(0.0f64, |acc, &v| acc.max(v));
                assert!(diff < 1e-12, "associativity violated by {diff}");
            }
        }
    }

    #[test]
    fn empty_device_is_transparent() {
        let d = DeviceSpec::homogeneous(500.0, 300.0, c(1.0, 0.0)).unwrap();
        let s = build_slicing(&d, 50.0).unwrap();
        let inc = IncidentWave::new(600.0, 0.0).unwrap();
        let sol = solve_scattering(&d, &s, &inc, 3).unwrap();
        for v in sol.refl.iter() {
            assert!(v.norm() < 1e-12, "nonzero reflection {v}");
        }
        let t0 = sol.trans[sol.basis.idx(0)];
        assert_relative_eq!(t0.norm(), 1.0, epsilon = 1e-12);
        for k in 0..sol.basis.n_modes() {
            if sol.basis.order(k) != 0 {
                assert!(sol.trans[k].norm() < 1e-12);
            }
        }
        // the transmitted amplitude equals the incident coefficient at -H
        let beta0 = sol.basis.betas_plus[sol.basis.idx(0)];
        let expect = (ci() * beta0 * 300.0).exp();
        assert!((t0 - expect).norm() < 1e-12);
    }

    #[test]
    fn homogeneous_slab_matches_oracle() {
        // eps = 2.25 slab of 100 nm inside a vacuum cell
        let h = 150.0;
        let d = DeviceSpec::new(
            500.0,
            h,
            vec![
                crate::geometry::InterfaceProfile::flat(500.0, -50.0),
                crate::geometry::InterfaceProfile::flat(500.0, 50.0),
            ],
            vec![
                crate::geometry::RegionPermittivity::constant(1.0, 0.0),
                crate::geometry::RegionPermittivity::constant(2.25, 0.0),
                crate::geometry::RegionPermittivity::constant(1.0, 0.0),
            ],
            c(1.0, 0.0),
            c(1.0, 0.0),
        )
        .unwrap();
        let s = build_slicing(&d, 25.0).unwrap();
        let inc = IncidentWave::new(600.0, 0.0).unwrap();
        let stack = crate::oracle::LayerStack::new(
            c(1.0, 0.0),
            c(1.0, 0.0),
            vec![(c(1.0, 0.0), 100.0), (c(2.25, 0.0), 100.0), (c(1.0, 0.0), 100.0)],
            h,
        )
        .unwrap();
        let (r_ref, t_ref) = crate::oracle::multilayer_scattering(&stack, &inc, 500.0, 0).unwrap();
        for m in [0usize, 2, 5] {
            let sol = solve_scattering(&d, &s, &inc, m).unwrap();
            let r = sol.refl[sol.basis.idx(0)];
            let t = sol.trans[sol.basis.idx(0)];
            assert!(
                (r - r_ref).norm() < 1e-10,
                "M = {m}: r = {r} vs oracle {r_ref}"
            );
            assert!(
                (t - t_ref).norm() < 1e-10,
                "M = {m}: t = {t} vs oracle {t_ref}"
            );
            assert_relative_eq!(r.norm_sqr(), (0.4f64 / 1.04).powi(2), epsilon = 1e-10);
        }
    }

    #[test]
    fn continuity_residuals_small() {
        let d = crate::presets::lamellar_grating(c(2.25, 0.0), c(1.0, 0.0), 0.5, 200.0);
        let s = build_slicing(&d, 40.0).unwrap();
        let inc = IncidentWave::new(600.0, 0.0).unwrap();
        let sol = solve_scattering(&d, &s, &inc, 8).unwrap();
        assert!(
            sol.max_continuity_residual() < 1e-9,
            "continuity residual {}",
            sol.max_continuity_residual()
        );
        assert!(sol.max_stored_exponential() <= 1.0 + 1e-12);
    }

    #[test]
    fn redundant_boundary_is_invisible() {
        let d = crate::presets::lamellar_grating(c(2.25, 0.0), c(1.0, 0.0), 0.5, 200.0);
        let inc = IncidentWave::new(600.0, 0.0).unwrap();
        let s1 = build_slicing(&d, 50.0).unwrap();
        let mut bounds = s1.boundaries.clone();
        bounds.push(13.7); // inside the lamellar region
        bounds.sort_by(f64::total_cmp);
        let s2 = Slicing::from_boundaries(bounds).unwrap();
        let sol1 = solve_scattering(&d, &s1, &inc, 6).unwrap();
        let sol2 = solve_scattering(&d, &s2, &inc, 6).unwrap();
        for k in 0..sol1.basis.n_modes() {
            assert!((sol1.refl[k] - sol2.refl[k]).norm() < 1e-10);
            assert!((sol1.trans[k] - sol2.trans[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn merged_segments_collapse_uniform_regions() {
        let d = crate::presets::nonsymmetric_grating();
        let s = build_slicing(&d, 1.0).unwrap();
        let inc = IncidentWave::new(600.0, 0.0).unwrap();
        let sol = solve_scattering(&d, &s, &inc, 2).unwrap();
        assert_eq!(sol.diagnostics.n_slices, 3000);
        // 2900 uniform air slices + 50 uniform metal slices collapse; only
        // the 50 ridge slices stay distinct
        assert!(
            sol.diagnostics.n_segments < 60,
            "expected aggressive merging, got {} segments",
            sol.diagnostics.n_segments
        );
    }
}
