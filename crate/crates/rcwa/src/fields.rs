//! Field evaluation, diffraction efficiencies, and discrete L2/H1 norms.
//!
//! All fields in play are modal: u(x1, x2) = sum_n u_n(x2) e^{i alpha_n x1}.
//! The `ModalField` trait exposes the coefficients u_n and their
//! x2-derivatives so RCWA solutions, analytic oracles, and external
//! references all share one norm/error pipeline. Integrals over x1 are exact
//! by Parseval; integrals over x2 use per-interval Gauss-Legendre quadrature
//! on the union of both fields' breakpoint grids.

use num_complex::Complex64;

use crate::error::{RcwaError, Result};
use crate::solver::ScatterSolution;

type C = Complex64;

/// 8-point Gauss-Legendre nodes/weights on (-1, 1).
const GAUSS_X: [f64; 8] = [
    -0.9602898564975363,
    -0.7966664774136267,
    -0.5255324099163290,
    -0.1834346424956498,
    0.1834346424956498,
    0.5255324099163290,
    0.7966664774136267,
    0.9602898564975363,
];
const GAUSS_W: [f64; 8] = [
    0.1012285362903763,
    0.2223810344533745,
    0.3137066458778873,
    0.3626837833783620,
    0.3626837833783620,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

/// A quasi-periodic field given by its modal coefficients.
pub trait ModalField {
    /// Largest |n| with a possibly non-zero coefficient.
    fn max_order(&self) -> usize;

    /// (u_n(x2), d/dx2 u_n(x2)).
    fn coeff(&self, n: i64, x2: f64) -> (C, C);

    /// All coefficients for n = -max_order..max_order at once.
    fn coeffs(&self, x2: f64) -> Vec<(C, C)> {
        let m = self.max_order() as i64;
        (-m..=m).map(|n| self.coeff(n, x2)).collect()
    }

    /// Heights where the coefficients are non-smooth (quadrature must break).
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// One evaluated field point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub x1: f64,
    pub x2: f64,
    pub value: C,
    pub gradient: (C, C),
}

/// Evaluate the total field of a solution at arbitrary points.
pub fn evaluate_field(sol: &ScatterSolution, points: &[(f64, f64)]) -> Vec<FieldSample> {
    points
        .iter()
        .map(|&(x1, x2)| {
            let coeffs = sol.modal_coeffs(x2);
            let i = C::new(0.0, 1.0);
            let mut value = C::new(0.0, 0.0);
            let mut gx1 = C::new(0.0, 0.0);
            let mut gx2 = C::new(0.0, 0.0);
            for (k, &(v, dv)) in coeffs.iter().enumerate() {
                let an = sol.basis.alphas[k];
                let ph = (i * an * x1).exp();
                value += v * ph;
                gx1 += i * an * v * ph;
                gx2 += dv * ph;
            }
            FieldSample {
                x1,
                x2,
                value,
                gradient: (gx1, gx2),
            }
        })
        .collect()
}

/// Gradients only (same expansion as `evaluate_field`).
pub fn evaluate_gradient(sol: &ScatterSolution, points: &[(f64, f64)]) -> Vec<(C, C)> {
    evaluate_field(sol, points)
        .into_iter()
        .map(|s| s.gradient)
        .collect()
}

/// Diffraction efficiencies of the propagating orders.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EfficiencyTable {
    /// (order, R_n) for propagating reflected orders.
    pub reflected: Vec<(i64, f64)>,
    /// (order, T_n) for propagating transmitted orders.
    pub transmitted: Vec<(i64, f64)>,
    pub total_reflected: f64,
    pub total_transmitted: f64,
    /// 1 - sum R - sum T; zero for lossless devices.
    pub absorbed: f64,
}

/// Power partition per propagating order, normalized to unit incident flux.
pub fn diffraction_efficiencies(sol: &ScatterSolution) -> Result<EfficiencyTable> {
    if (sol.incident.amplitude - C::new(1.0, 0.0)).norm() > 1e-12 {
        return Err(RcwaError::InvalidArgument(
            "efficiencies assume unit incident amplitude".into(),
        ));
    }
    let beta0 = sol.basis.betas_plus[sol.basis.idx(0)].re;
    let mut reflected = Vec::new();
    let mut transmitted = Vec::new();
    for k in 0..sol.basis.n_modes() {
        let n = sol.basis.order(k);
        let bp = sol.basis.betas_plus[k];
        if bp.im == 0.0 {
            reflected.push((n, bp.re / beta0 * sol.refl[k].norm_sqr()));
        }
        let bm = sol.basis.betas_minus[k];
        if bm.im == 0.0 {
            transmitted.push((n, bm.re / beta0 * sol.trans[k].norm_sqr()));
        }
    }
    let total_reflected: f64 = reflected.iter().map(|p| p.1).sum();
    let total_transmitted: f64 = transmitted.iter().map(|p| p.1).sum();
    Ok(EfficiencyTable {
        reflected,
        transmitted,
        total_reflected,
        total_transmitted,
        absorbed: 1.0 - total_reflected - total_transmitted,
    })
}

/// Which norm `norm_error` measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
}

fn union_grid(a: &dyn ModalField, b: &dyn ModalField, lo: f64, hi: f64) -> Vec<f64> {
    let mut grid = vec![lo, hi];
    for z in a.breakpoints().into_iter().chain(b.breakpoints()) {
        if z > lo && z < hi {
            grid.push(z);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|x, y| (*x - *y).abs() < 1e-12 * (hi - lo).abs().max(1.0));
    grid
}

/// Squared norm contribution at one height: sum over modes of
/// |u_n|^2 (+ |u_n'|^2 + alpha_n^2 |u_n|^2 for H1).
fn density(
    coeffs_a: &[(C, C)],
    coeffs_b: Option<&[(C, C)]>,
    orders: i64,
    alpha: f64,
    period: f64,
    norm: NormKind,
) -> f64 {
    let mut acc = 0.0;
    for (k, &(va, da)) in coeffs_a.iter().enumerate() {
        let n = k as i64 - orders;
        let an = alpha + std::f64::consts::TAU * n as f64 / period;
        let (v, d) = match coeffs_b {
            Some(cb) => (va - cb[k].0, da - cb[k].1),
            None => (va, da),
        };
        acc += v.norm_sqr();
        if norm == NormKind::H1 {
            acc += d.norm_sqr() + an * an * v.norm_sqr();
        }
    }
    acc
}

/// Pad a coefficient list centered on fewer orders up to `orders`.
fn padded(f: &dyn ModalField, x2: f64, orders: usize) -> Vec<(C, C)> {
    let own = f.max_order();
    let mut out = vec![(C::new(0.0, 0.0), C::new(0.0, 0.0)); 2 * orders + 1];
    let coeffs = f.coeffs(x2);
    for (k, c) in coeffs.into_iter().enumerate() {
        let n = k as i64 - own as i64;
        out[(n + orders as i64) as usize] = c;
    }
    out
}

/// Norm of a modal field over the cell (0, period) x (lo, hi).
pub fn field_norm(
    f: &dyn ModalField,
    alpha: f64,
    period: f64,
    lo: f64,
    hi: f64,
    norm: NormKind,
    quad_panels: usize,
) -> f64 {
    let orders = f.max_order();
    let mut grid = vec![lo, hi];
    for z in f.breakpoints() {
        if z > lo && z < hi {
            grid.push(z);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|x, y| (*x - *y).abs() < 1e-12 * (hi - lo).abs().max(1.0));
    let mut acc = 0.0;
    for w in grid.windows(2) {
        for p in 0..quad_panels {
            let a = w[0] + (w[1] - w[0]) * p as f64 / quad_panels as f64;
            let b = w[0] + (w[1] - w[0]) * (p + 1) as f64 / quad_panels as f64;
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (xi, wi) in GAUSS_X.iter().zip(GAUSS_W) {
                let x2 = mid + half * xi;
                let coeffs = f.coeffs(x2);
                acc += wi * half * density(&coeffs, None, orders as i64, alpha, period, norm);
            }
        }
    }
    (period * acc).sqrt()
}

/// Relative error ||a - b|| / ||b|| in the chosen norm over the full cell.
pub fn norm_error(
    a: &ScatterSolution,
    b: &dyn ModalField,
    norm: NormKind,
) -> Result<f64> {
    let period = a.device.period;
    let h = a.device.half_height;
    let alpha = a.basis.alpha;
    let orders = a.basis.m.max(b.max_order());
    let grid = union_grid(a, b, -h, h);
    let mut num = 0.0;
    let mut den = 0.0;
    for w in grid.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[0] + w[1]);
        for (xi, wi) in GAUSS_X.iter().zip(GAUSS_W) {
            let x2 = mid + half * xi;
            let ca = padded(a, x2, orders);
            let cb = padded(b, x2, orders);
            num += wi * half * density(&ca, Some(&cb), orders as i64, alpha, period, norm);
            den += wi * half * density(&cb, None, orders as i64, alpha, period, norm);
        }
    }
    if den == 0.0 {
        return Err(RcwaError::ZeroReference);
    }
    Ok((num / den).sqrt())
}
