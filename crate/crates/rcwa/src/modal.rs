//! Quasi-periodic Fourier machinery: the mode basis (alpha_n, beta_n),
//! Fourier coefficients of the stairstep permittivity, Toeplitz convolution
//! matrices, the truncation operator, and the discrete
//! Dirichlet-to-Neumann action.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{RcwaError, Result};
use crate::geometry::{DeviceSpec, SliceProfile};

/// Incident s-polarized plane wave, travelling downward onto the grating.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IncidentWave {
    /// Free-space wavelength, nm.
    pub wavelength: f64,
    /// Angle from the downward vertical, radians, |theta| < pi/2.
    pub theta: f64,
    /// Complex amplitude of the single non-zero incident coefficient.
    pub amplitude: Complex64,
}

impl IncidentWave {
    pub fn new(wavelength: f64, theta: f64) -> Result<Self> {
        IncidentWave::with_amplitude(wavelength, theta, Complex64::new(1.0, 0.0))
    }

    pub fn with_amplitude(wavelength: f64, theta: f64, amplitude: Complex64) -> Result<Self> {
        if !(wavelength > 0.0) {
            return Err(RcwaError::InvalidIncident(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(theta.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(RcwaError::InvalidIncident(format!(
                "angle must satisfy |theta| < pi/2, got {theta}"
            )));
        }
        Ok(IncidentWave {
            wavelength,
            theta,
            amplitude,
        })
    }

    /// Free-space wavenumber kappa = 2*pi/wavelength.
    pub fn kappa(&self) -> f64 {
        std::f64::consts::TAU / self.wavelength
    }

    /// Transverse quasi-momentum alpha = kappa*sin(theta).
    pub fn alpha(&self) -> f64 {
        self.kappa() * self.theta.sin()
    }
}

/// Which half-space a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Square root with the radiation branch: Im >= 0, and Re >= 0 when the
/// imaginary part vanishes.
pub fn radiation_sqrt(z: Complex64) -> Complex64 {
    let mut r = z.sqrt();
    if r.im < 0.0 {
        r = -r;
    }
    if r.im == 0.0 && r.re < 0.0 {
        r = -r;
    }
    // principal sqrt can leave a tiny negative imaginary part for positive
    // reals; the checks above already fold it to the correct branch
    r
}

/// Truncated quasi-periodic mode basis for orders n = -M..M.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub m: usize,
    pub kappa: f64,
    pub alpha: f64,
    pub period: f64,
    pub eps_plus: Complex64,
    pub eps_minus: Complex64,
    /// alpha_n = alpha + 2*pi*n/period, n = -M..M.
    pub alphas: Vec<f64>,
    pub betas_plus: Vec<Complex64>,
    pub betas_minus: Vec<Complex64>,
}

impl ModeBasis {
    pub fn build(
        incident: &IncidentWave,
        eps_plus: Complex64,
        eps_minus: Complex64,
        period: f64,
        m: usize,
    ) -> Result<Self> {
        let kappa = incident.kappa();
        let alpha = incident.alpha();
        let n_modes = 2 * m + 1;
        let mut alphas = Vec::with_capacity(n_modes);
        let mut betas_plus = Vec::with_capacity(n_modes);
        let mut betas_minus = Vec::with_capacity(n_modes);
        let k2 = kappa * kappa;
        for i in 0..n_modes {
            let n = i as i64 - m as i64;
            let an = alpha + std::f64::consts::TAU * n as f64 / period;
            let an2 = Complex64::new(an * an, 0.0);
            for (side, eps) in [('+', eps_plus), ('-', eps_minus)] {
                if (an2 - k2 * eps).norm() < 1e-12 * k2 {
                    return Err(RcwaError::RayleighAnomaly { order: n, side });
                }
            }
            alphas.push(an);
            betas_plus.push(radiation_sqrt(k2 * eps_plus - an2));
            betas_minus.push(radiation_sqrt(k2 * eps_minus - an2));
        }
        Ok(ModeBasis {
            m,
            kappa,
            alpha,
            period,
            eps_plus,
            eps_minus,
            alphas,
            betas_plus,
            betas_minus,
        })
    }

    pub fn n_modes(&self) -> usize {
        2 * self.m + 1
    }

    /// Storage index of mode order n.
    pub fn idx(&self, n: i64) -> usize {
        (n + self.m as i64) as usize
    }

    /// Mode order of storage index i.
    pub fn order(&self, i: usize) -> i64 {
        i as i64 - self.m as i64
    }

    pub fn betas(&self, side: Side) -> &[Complex64] {
        match side {
            Side::Plus => &self.betas_plus,
            Side::Minus => &self.betas_minus,
        }
    }

    /// Orders with purely real beta on the given side (propagating).
    pub fn propagating(&self, side: Side) -> Vec<i64> {
        self.betas(side)
            .iter()
            .enumerate()
            .filter(|(_, b)| b.im == 0.0)
            .map(|(i, _)| self.order(i))
            .collect()
    }
}

/// Build the mode basis from a device's half-space permittivities.
pub fn mode_basis(incident: &IncidentWave, device: &DeviceSpec, m: usize) -> Result<ModeBasis> {
    ModeBasis::build(incident, device.eps_plus, device.eps_minus, device.period, m)
}

/// Closed-form Fourier coefficients of a piecewise-constant slice profile,
/// indexed -P..P: c_n = (1/L) * integral of eps_h(x1) e^{-i 2 pi n x1 / L}.
pub fn permittivity_fourier_coeffs(profile: &SliceProfile, p: usize) -> Vec<Complex64> {
    let l = profile.intervals.last().unwrap().1 - profile.intervals[0].0;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * p + 1];
    coeffs[p] = profile.mean();
    for i in 0..p {
        let n = (i + 1) as f64;
        let w = std::f64::consts::TAU * n / l;
        let mut c = Complex64::new(0.0, 0.0);
        for &(a, b, v) in &profile.intervals {
            // (1/L) * v * [e^{-iwx}/(-iw)]_a^b
            let ea = Complex64::new(0.0, -w * a).exp();
            let eb = Complex64::new(0.0, -w * b).exp();
            c += v * (ea - eb) / Complex64::new(0.0, w * l);
        }
        coeffs[p + i + 1] = c;
        // c_{-n} by the same closed form with w -> -w
        let mut cm = Complex64::new(0.0, 0.0);
        for &(a, b, v) in &profile.intervals {
            let ea = Complex64::new(0.0, w * a).exp();
            let eb = Complex64::new(0.0, w * b).exp();
            cm += v * (ea - eb) / Complex64::new(0.0, -w * l);
        }
        coeffs[p - i - 1] = cm;
    }
    coeffs
}

/// Toeplitz block E[n, m] = coeffs[n - m] for n, m in -M..M; `coeffs` must be
/// centered and cover -2M..2M.
pub fn toeplitz_matrix(coeffs: &[Complex64], m: usize) -> Result<Array2<Complex64>> {
    let need = 4 * m + 1;
    if coeffs.len() < need {
        return Err(RcwaError::InvalidArgument(format!(
            "Toeplitz block of order M = {m} needs {need} centered coefficients, got {}",
            coeffs.len()
        )));
    }
    let center = coeffs.len() / 2;
    let n_modes = 2 * m + 1;
    let mut e = Array2::zeros((n_modes, n_modes));
    for r in 0..n_modes {
        for c in 0..n_modes {
            let d = r as i64 - c as i64;
            e[(r, c)] = coeffs[(center as i64 + d) as usize];
        }
    }
    Ok(e)
}

/// Fourier truncation: keep exactly the coefficients with |n| <= M.
pub fn truncate<T: Clone>(expansion: &BTreeMap<i64, T>, m: usize) -> BTreeMap<i64, T> {
    expansion
        .iter()
        .filter(|(n, _)| n.unsigned_abs() <= m as u64)
        .map(|(n, v)| (*n, v.clone()))
        .collect()
}

/// Dirichlet-to-Neumann action: trace coefficients phi_n to i*beta_n*phi_n.
pub fn dtn_apply(basis: &ModeBasis, side: Side, trace: &[Complex64]) -> Vec<Complex64> {
    basis
        .betas(side)
        .iter()
        .zip(trace)
        .map(|(b, t)| Complex64::new(0.0, 1.0) * b * t)
        .collect()
}
