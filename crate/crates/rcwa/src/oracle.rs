//! Independent analytic references: the classical transfer-matrix (Airy
//! recursion) solution for laterally invariant multilayers, and the
//! closed-form homogeneous-domain plane wave. These never share code with the
//! modal solver so they can serve as ground truth for it.

use num_complex::Complex64;

use crate::error::{RcwaError, Result};
use crate::fields::ModalField;
use crate::modal::{radiation_sqrt, IncidentWave};

/// A laterally invariant stack of homogeneous layers between two half-spaces.
/// Layers are listed top to bottom; the stack top sits at `x2 = top` and the
/// layers extend downward from there.
#[derive(Debug, Clone)]
pub struct LayerStack {
    pub eps_plus: Complex64,
    pub eps_minus: Complex64,
    /// (relative permittivity, thickness), top to bottom.
    pub layers: Vec<(Complex64, f64)>,
    /// x2 coordinate of the top of the first layer.
    pub top: f64,
}

impl LayerStack {
    pub fn new(
        eps_plus: Complex64,
        eps_minus: Complex64,
        layers: Vec<(Complex64, f64)>,
        top: f64,
    ) -> Result<Self> {
        for &(eps, d) in &layers {
            if !(d > 0.0) {
                return Err(RcwaError::InvalidGeometry(format!(
                    "layer thickness must be positive, got {d}"
                )));
            }
            let ok = (eps.re > 0.0 && eps.im >= 0.0) || (eps.re <= 0.0 && eps.im > 0.0);
            if !ok {
                return Err(RcwaError::InvalidGeometry(format!(
                    "inadmissible layer permittivity {eps}"
                )));
            }
        }
        Ok(LayerStack {
            eps_plus,
            eps_minus,
            layers,
            top,
        })
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.1).sum()
    }

    pub fn bottom(&self) -> f64 {
        self.top - self.total_thickness()
    }

    /// Vertical wavenumbers for order-n transverse wavenumber alpha_n, for the
    /// sequence (top half-space, layers..., bottom half-space).
    fn vertical_wavenumbers(&self, kappa: f64, alpha_n: f64) -> Result<Vec<Complex64>> {
        let k2 = kappa * kappa;
        let a2 = Complex64::new(alpha_n * alpha_n, 0.0);
        let mut eps_seq = Vec::with_capacity(self.layers.len() + 2);
        eps_seq.push(self.eps_plus);
        eps_seq.extend(self.layers.iter().map(|l| l.0));
        eps_seq.push(self.eps_minus);
        let mut ks = Vec::with_capacity(eps_seq.len());
        for (j, &eps) in eps_seq.iter().enumerate() {
            if (k2 * eps - a2).norm() < 1e-12 * k2 && (j == 0 || j == eps_seq.len() - 1) {
                let side = if j == 0 { '+' } else { '-' };
                return Err(RcwaError::RayleighAnomaly { order: 0, side });
            }
            ks.push(radiation_sqrt(k2 * eps - a2));
        }
        Ok(ks)
    }
}

fn fresnel_r(k1: Complex64, k2: Complex64) -> Complex64 {
    (k1 - k2) / (k1 + k2)
}

fn fresnel_t(k1: Complex64, k2: Complex64) -> Complex64 {
    2.0 * k1 / (k1 + k2)
}

/// Interface reflection coefficients seen from above, by downward Airy
/// recursion; `rho[j]` is the reflection coefficient just above interface j
/// (between medium j and j+1), referenced at that interface.
fn interface_reflectances(ks: &[Complex64], ds: &[f64]) -> Vec<Complex64> {
    let n_ifaces = ks.len() - 1;
    let mut rho = vec![Complex64::new(0.0, 0.0); n_ifaces];
    rho[n_ifaces - 1] = fresnel_r(ks[n_ifaces - 1], ks[n_ifaces]);
    for j in (0..n_ifaces - 1).rev() {
        // medium j+1 is a true layer with thickness ds[j]
        let phase = (Complex64::new(0.0, 2.0 * ds[j]) * ks[j + 1]).exp();
        let r = fresnel_r(ks[j], ks[j + 1]);
        rho[j] = (r + rho[j + 1] * phase) / (1.0 + r * rho[j + 1] * phase);
    }
    rho
}

/// Order-n complex reflection/transmission amplitudes of the stack.
///
/// Conventions match the modal solver: the incident wave is
/// `amp * e^{i alpha x1 - i beta0 x2}` (phase referenced at x2 = 0); `r` is
/// the upward amplitude at the stack top and `t` the downward amplitude at
/// the stack bottom. For a stack filling the cell `(-H, H)` these are exactly
/// the Rayleigh coefficients of the grating solver.
pub fn multilayer_scattering(
    stack: &LayerStack,
    incident: &IncidentWave,
    period: f64,
    n: i64,
) -> Result<(Complex64, Complex64)> {
    let kappa = incident.kappa();
    let alpha_n = incident.alpha() + std::f64::consts::TAU * n as f64 / period;
    let ks = stack.vertical_wavenumbers(kappa, alpha_n)?;
    let ds: Vec<f64> = stack.layers.iter().map(|l| l.1).collect();
    if n != 0 {
        // the incident plane wave only drives order zero of an invariant stack
        return Ok((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
    }
    let d_top = incident.amplitude * (Complex64::new(0.0, -stack.top) * ks[0]).exp();
    let rho = interface_reflectances(&ks, &ds);
    let r = rho[0] * d_top;
    // downward amplitudes through the stack
    let mut t = d_top;
    let n_ifaces = ks.len() - 1;
    for j in 0..n_ifaces {
        let (phase, rho_next) = if j + 1 < n_ifaces {
            (
                (Complex64::new(0.0, 2.0 * ds[j]) * ks[j + 1]).exp(),
                rho[j + 1],
            )
        } else {
            (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
        };
        let travel = if j + 1 < n_ifaces {
            (Complex64::new(0.0, ds[j]) * ks[j + 1]).exp()
        } else {
            Complex64::new(1.0, 0.0)
        };
        t = t * fresnel_t(ks[j], ks[j + 1]) * travel
            / (1.0 + fresnel_r(ks[j], ks[j + 1]) * rho_next * phase);
    }
    Ok((r, t))
}

/// Modal evaluator of the full multilayer field (incident + scattered),
/// usable as a reference in the error norms. Only order 0 is non-zero.
#[derive(Debug, Clone)]
pub struct MultilayerField {
    alpha: f64,
    /// vertical wavenumbers for (top half-space, layers..., bottom half-space)
    ks: Vec<Complex64>,
    /// interface heights, top to bottom (len = ks.len() - 1)
    zs: Vec<f64>,
    /// per medium: (downward amplitude at medium top, upward amplitude at
    /// medium bottom); half-spaces use the stack top/bottom as reference
    amps: Vec<(Complex64, Complex64)>,
}

/// Build the bounded-amplitude field of the stack under the given incidence.
pub fn multilayer_field(
    stack: &LayerStack,
    incident: &IncidentWave,
) -> Result<MultilayerField> {
    let kappa = incident.kappa();
    let alpha = incident.alpha();
    let ks = stack.vertical_wavenumbers(kappa, alpha)?;
    let ds: Vec<f64> = stack.layers.iter().map(|l| l.1).collect();
    let mut zs = vec![stack.top];
    for &d in &ds {
        zs.push(zs.last().unwrap() - d);
    }
    let rho = interface_reflectances(&ks, &ds);
    let n_media = ks.len();
    let d_top = incident.amplitude * (Complex64::new(0.0, -stack.top) * ks[0]).exp();
    let mut amps = vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); n_media];
    // top half-space: downward reference at stack top, upward is r
    amps[0] = (d_top, rho[0] * d_top);
    let mut d_prev_bot = d_top; // downward amplitude at the bottom of medium j-1
    for j in 1..n_media {
        // medium j spans interfaces j-1 (top) to j (bottom); rho[j] is the
        // reflection looking down from just above its bottom interface
        let (decay, rho_below) = if j < n_media - 1 {
            ((Complex64::new(0.0, ds[j - 1]) * ks[j]).exp(), rho[j])
        } else {
            (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
        };
        let d_j = fresnel_t(ks[j - 1], ks[j]) * d_prev_bot
            / (1.0 + fresnel_r(ks[j - 1], ks[j]) * rho_below * decay * decay);
        let u_j = rho_below * d_j * decay; // upward amplitude at medium bottom
        amps[j] = (d_j, u_j);
        d_prev_bot = d_j * decay;
    }
    Ok(MultilayerField {
        alpha,
        ks,
        zs,
        amps,
    })
}

impl MultilayerField {
    fn medium_of(&self, x2: f64) -> usize {
        // zs is decreasing; medium j occupies (zs[j], zs[j-1]) for layers
        for (j, &z) in self.zs.iter().enumerate() {
            if x2 >= z {
                return j;
            }
        }
        self.ks.len() - 1
    }

    /// Field value and x2-derivative of the order-0 modal coefficient.
    pub fn coeff0(&self, x2: f64) -> (Complex64, Complex64) {
        let j = self.medium_of(x2);
        let i = Complex64::new(0.0, 1.0);
        let k = self.ks[j];
        let (down, up) = self.amps[j];
        let (z_top, z_bot) = if j == 0 {
            (self.zs[0], self.zs[0])
        } else if j == self.ks.len() - 1 {
            (*self.zs.last().unwrap(), *self.zs.last().unwrap())
        } else {
            (self.zs[j - 1], self.zs[j])
        };
        // downward wave referenced at z_top, upward at z_bot; in the
        // half-spaces one of the two is zero or outgoing so the references
        // never produce growing stored exponentials inside the domain
        let vd = down * (i * k * (z_top - x2)).exp();
        let vu = up * (i * k * (x2 - z_bot)).exp();
        (vd + vu, -i * k * vd + i * k * vu)
    }

    pub fn eval(&self, x1: f64, x2: f64) -> (Complex64, (Complex64, Complex64)) {
        let (v, dv) = self.coeff0(x2);
        let ph = (Complex64::new(0.0, self.alpha * x1)).exp();
        (
            v * ph,
            (Complex64::new(0.0, self.alpha) * v * ph, dv * ph),
        )
    }
}

impl ModalField for MultilayerField {
    fn max_order(&self) -> usize {
        0
    }

    fn coeff(&self, n: i64, x2: f64) -> (Complex64, Complex64) {
        if n == 0 {
            self.coeff0(x2)
        } else {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        }
    }
}

/// The free-space plane wave `u = amp * e^{i kappa (x1 sin theta - x2 cos theta)}`.
#[derive(Debug, Clone)]
pub struct HomogeneousField {
    pub incident: IncidentWave,
}

/// Closed-form field of the empty domain (no scatterer).
pub fn homogeneous_field(incident: &IncidentWave) -> HomogeneousField {
    HomogeneousField {
        incident: *incident,
    }
}

impl HomogeneousField {
    pub fn eval(&self, x1: f64, x2: f64) -> (Complex64, (Complex64, Complex64)) {
        let k = self.incident.kappa();
        let (s, c) = (self.incident.theta.sin(), self.incident.theta.cos());
        let u = self.incident.amplitude * (Complex64::new(0.0, k * (x1 * s - x2 * c))).exp();
        (
            u,
            (Complex64::new(0.0, k * s) * u, Complex64::new(0.0, -k * c) * u),
        )
    }
}

impl ModalField for HomogeneousField {
    fn max_order(&self) -> usize {
        0
    }

    fn coeff(&self, n: i64, x2: f64) -> (Complex64, Complex64) {
        if n != 0 {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let k = self.incident.kappa();
        let beta = k * self.incident.theta.cos();
        let v = self.incident.amplitude * Complex64::new(0.0, -beta * x2).exp();
        (v, Complex64::new(0.0, -beta) * v)
    }
}
