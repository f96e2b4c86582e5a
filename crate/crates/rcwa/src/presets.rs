//! Ready-made device descriptions used across the examples and tests:
//! the two triangular metal gratings of the benchmark study, a lamellar
//! grating, and a deep lossy evanescent stack for stability testing.

use num_complex::Complex64;

use crate::geometry::{
    DeviceSpec, InterfaceProfile, RegionPermittivity, Segment, SegmentShape,
};

/// Fictitious metal permittivity used by the benchmark gratings.
pub const EPS_METAL: Complex64 = Complex64::new(-15.0, 4.0);
/// Period of the benchmark gratings, nm.
pub const BENCH_PERIOD: f64 = 500.0;
/// Half-height of the benchmark computational cell, nm (3000 nm total).
pub const BENCH_HALF_HEIGHT: f64 = 1500.0;
/// Free-space wavelength of the benchmark incident wave, nm.
pub const BENCH_WAVELENGTH: f64 = 600.0;

/// Standard normal-incidence plane wave for the benchmark devices.
pub fn bench_incident() -> crate::modal::IncidentWave {
    crate::modal::IncidentWave::new(BENCH_WAVELENGTH, 0.0).unwrap()
}

fn triangular_grating(peak_x: f64) -> DeviceSpec {
    let period = BENCH_PERIOD;
    let h = BENCH_HALF_HEIGHT;
    // metal floor: 50 nm backing above the cell bottom; triangular ridge of
    // 50 nm (non-symmetric) or 100 nm (symmetric) on top of it
    let base = -h + 50.0;
    let peak = if (peak_x - 0.5 * period).abs() < 1e-9 {
        -h + 150.0
    } else {
        -h + 100.0
    };
    let g = InterfaceProfile::new(vec![
        Segment::new(
            0.0,
            peak_x,
            SegmentShape::Linear {
                start: base,
                end: peak,
            },
        ),
        Segment::new(
            peak_x,
            period,
            SegmentShape::Linear {
                start: peak,
                end: base,
            },
        ),
    ])
    .unwrap();
    DeviceSpec::new(
        period,
        h,
        vec![g],
        vec![
            RegionPermittivity::Constant { value: EPS_METAL },
            RegionPermittivity::constant(1.0, 0.0),
        ],
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
    )
    .unwrap()
}

/// Triangular metal grating whose 50 nm ridge peaks 62.5 nm right of center,
/// on a 50 nm metal backing inside a 3000 nm tall cell.
pub fn nonsymmetric_grating() -> DeviceSpec {
    triangular_grating(0.5 * BENCH_PERIOD + 62.5)
}

/// Symmetric triangular metal grating: 100 nm ridge peaking at mid-period on
/// the same 50 nm backing.
pub fn symmetric_grating() -> DeviceSpec {
    triangular_grating(0.5 * BENCH_PERIOD)
}

/// Lamellar (vertical-sidewall) grating: a layer of thickness `thickness`
/// centered at x2 = 0 filled with `eps_fill` over the first `duty` fraction
/// of the period and `eps_bg` over the rest, vacuum elsewhere.
/// The cell is `2*thickness` tall with period 500 nm.
pub fn lamellar_grating(
    eps_fill: Complex64,
    eps_bg: Complex64,
    duty: f64,
    thickness: f64,
) -> DeviceSpec {
    let period = BENCH_PERIOD;
    let h = thickness;
    DeviceSpec::new(
        period,
        h,
        vec![
            InterfaceProfile::flat(period, -0.5 * thickness),
            InterfaceProfile::flat(period, 0.5 * thickness),
        ],
        vec![
            RegionPermittivity::constant(1.0, 0.0),
            RegionPermittivity::LateralStep {
                intervals: vec![
                    (0.0, duty * period, eps_fill),
                    (duty * period, period, eps_bg),
                ],
            },
            RegionPermittivity::constant(1.0, 0.0),
        ],
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
    )
    .unwrap()
}

/// Deep lossy stack for stability testing: 40 layers of 30 nm each
/// (1200 nm = 2 wavelengths at 600 nm) alternating between two strongly
/// absorbing lateral step profiles (Im eps = 4) in checkerboard fashion,
/// vacuum above and below inside a 1300 nm cell.
pub fn evanescent_stack() -> DeviceSpec {
    let period = BENCH_PERIOD;
    let n_layers = 40;
    let layer_t = 30.0;
    let total = n_layers as f64 * layer_t;
    let h = 0.5 * total + 50.0;
    let eps_a = Complex64::new(-15.0, 4.0);
    let eps_b = Complex64::new(2.0, 4.0);
    let mut interfaces = Vec::new();
    let mut regions = vec![RegionPermittivity::constant(1.0, 0.0)];
    for k in 0..=n_layers {
        interfaces.push(InterfaceProfile::flat(period, -0.5 * total + k as f64 * layer_t));
    }
    for k in 0..n_layers {
        let (lo, hi) = if k % 2 == 0 { (eps_a, eps_b) } else { (eps_b, eps_a) };
        regions.push(RegionPermittivity::LateralStep {
            intervals: vec![(0.0, 0.5 * period, lo), (0.5 * period, period, hi)],
        });
    }
    regions.push(RegionPermittivity::constant(1.0, 0.0));
    DeviceSpec::new(
        period,
        h,
        interfaces,
        regions,
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
    )
    .unwrap()
}

/// Sinusoidal-interface dielectric grating used by the stairstep-norm
/// diagnostics: interface a*sin(2*pi*x1/period) at mid-cell, dielectric
/// below, vacuum above.
pub fn sinusoidal_grating(amplitude: f64) -> DeviceSpec {
    let period = BENCH_PERIOD;
    let g = InterfaceProfile::new(vec![Segment::new(
        0.0,
        period,
        SegmentShape::Sine {
            offset: 0.0,
            amplitude,
            angular_frequency: std::f64::consts::TAU / period,
            phase: 0.0,
        },
    )])
    .unwrap();
    DeviceSpec::new(
        period,
        amplitude + 200.0,
        vec![g],
        vec![
            RegionPermittivity::constant(2.25, 0.0),
            RegionPermittivity::constant(1.0, 0.0),
        ],
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_devices_validate() {
        nonsymmetric_grating().validate().unwrap();
        symmetric_grating().validate().unwrap();
        evanescent_stack().validate().unwrap();
        sinusoidal_grating(100.0).validate().unwrap();
    }

    #[test]
    fn nonsymmetric_peak_is_off_center() {
        let d = nonsymmetric_grating();
        let g = &d.interfaces[0];
        let h = d.half_height;
        // peak 62.5 nm right of center, 100 nm above the cell floor
        assert_eq!(g.eval(312.5), -h + 100.0);
        assert_eq!(g.eval(0.0), -h + 50.0);
        assert!(g.eval(312.5) > g.eval(250.0));
    }

    #[test]
    fn symmetric_grating_is_mirror_symmetric() {
        let d = symmetric_grating();
        let g = &d.interfaces[0];
        for x in [10.0, 100.0, 200.0, 249.0] {
            approx::assert_relative_eq!(g.eval(x), g.eval(500.0 - x), epsilon = 1e-9);
        }
        assert_eq!(g.eval(250.0), -d.half_height + 150.0);
    }
}
