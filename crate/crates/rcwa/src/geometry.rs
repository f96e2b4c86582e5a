//! Grating geometry: interface profiles, device description, slicing and the
//! stairstep permittivity, plus the non-trapping diagnostic and the
//! stairstep-error norm.
//!
//! All lengths are in nanometers. The computational cell is
//! `(0, period) x (-half_height, half_height)`; interfaces are graphs
//! `x2 = g_k(x1)` built from closed-form segments so that derivatives and
//! extrema are available exactly.

use num_complex::Complex64;

use crate::error::{RcwaError, Result};

/// Closed-form height function on one segment of an interface.
///
/// `Linear` interpolates between the segment's endpoint heights.
/// `Polynomial` coefficients are in the local coordinate `t = x1 - x_start`.
/// `Sine` is evaluated in the global coordinate, `offset + amp*sin(w*x1 + phase)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SegmentShape {
    Constant {
        value: f64,
    },
    Linear {
        start: f64,
        end: f64,
    },
    Sine {
        offset: f64,
        amplitude: f64,
        angular_frequency: f64,
        phase: f64,
    },
    Polynomial {
        coeffs: Vec<f64>,
    },
}

/// One segment of an interface graph on `[x_start, x_end]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub x_start: f64,
    pub x_end: f64,
    pub shape: SegmentShape,
}

impl Segment {
    pub fn new(x_start: f64, x_end: f64, shape: SegmentShape) -> Self {
        Segment {
            x_start,
            x_end,
            shape,
        }
    }

    pub fn eval(&self, x1: f64) -> f64 {
        match &self.shape {
            SegmentShape::Constant { value } => *value,
            SegmentShape::Linear { start, end } => {
                let t = (x1 - self.x_start) / (self.x_end - self.x_start);
                start + t * (end - start)
            }
            SegmentShape::Sine {
                offset,
                amplitude,
                angular_frequency,
                phase,
            } => offset + amplitude * (angular_frequency * x1 + phase).sin(),
            SegmentShape::Polynomial { coeffs } => {
                let t = x1 - self.x_start;
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
            }
        }
    }

    pub fn deriv(&self, x1: f64) -> f64 {
        match &self.shape {
            SegmentShape::Constant { .. } => 0.0,
            SegmentShape::Linear { start, end } => (end - start) / (self.x_end - self.x_start),
            SegmentShape::Sine {
                amplitude,
                angular_frequency,
                phase,
                ..
            } => amplitude * angular_frequency * (angular_frequency * x1 + phase).cos(),
            SegmentShape::Polynomial { coeffs } => {
                let t = x1 - self.x_start;
                coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (i, &c)| acc * t + i as f64 * c)
            }
        }
    }

    pub fn deriv2(&self, x1: f64) -> f64 {
        match &self.shape {
            SegmentShape::Constant { .. } | SegmentShape::Linear { .. } => 0.0,
            SegmentShape::Sine {
                amplitude,
                angular_frequency,
                phase,
                ..
            } => {
                -amplitude
                    * angular_frequency
                    * angular_frequency
                    * (angular_frequency * x1 + phase).sin()
            }
            SegmentShape::Polynomial { coeffs } => {
                let t = x1 - self.x_start;
                coeffs
                    .iter()
                    .enumerate()
                    .skip(2)
                    .rev()
                    .fold(0.0, |acc, (i, &c)| acc * t + (i * (i - 1)) as f64 * c)
            }
        }
    }

    fn is_flat(&self) -> bool {
        match &self.shape {
            SegmentShape::Constant { .. } => true,
            SegmentShape::Linear { start, end } => start == end,
            SegmentShape::Sine { amplitude, .. } => *amplitude == 0.0,
            SegmentShape::Polynomial { coeffs } => coeffs.iter().skip(1).all(|&c| c == 0.0),
        }
    }

    /// Interior roots of dg/dx1 plus boundaries of monotone pieces.
    fn deriv_roots(&self) -> Vec<f64> {
        if self.is_flat() {
            return Vec::new();
        }
        let samples = match &self.shape {
            SegmentShape::Linear { .. } => return Vec::new(),
            SegmentShape::Sine {
                angular_frequency, ..
            } => {
                let cycles =
                    (angular_frequency.abs() * (self.x_end - self.x_start)) / std::f64::consts::TAU;
                (64.0_f64).max(16.0 * cycles.ceil()) as usize
            }
            _ => 64,
        };
        let mut roots = Vec::new();
        let dx = (self.x_end - self.x_start) / samples as f64;
        let mut prev_x = self.x_start;
        let mut prev_d = self.deriv(prev_x);
        for i in 1..=samples {
            let x = self.x_start + i as f64 * dx;
            let d = self.deriv(x);
            if prev_d == 0.0 {
                roots.push(prev_x);
            } else if prev_d * d < 0.0 {
                roots.push(bisect(|t| self.deriv(t), prev_x, x));
            }
            prev_x = x;
            prev_d = d;
        }
        if self.deriv(self.x_end) == 0.0 {
            roots.push(self.x_end);
        }
        roots
    }

    /// All x1 in the open segment with g(x1) = y, found per monotone piece.
    fn crossings(&self, y: f64) -> Vec<f64> {
        if self.is_flat() {
            // A flat segment at exactly y does not cross it; the material is
            // identical on both sides of the tangency.
            return Vec::new();
        }
        let mut nodes = vec![self.x_start];
        nodes.extend(self.deriv_roots());
        nodes.push(self.x_end);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let mut xs = Vec::new();
        for w in nodes.windows(2) {
            let (a, b) = (w[0], w[1]);
            let fa = self.eval(a) - y;
            let fb = self.eval(b) - y;
            if fa == 0.0 {
                xs.push(a);
            } else if fa * fb < 0.0 {
                xs.push(bisect(|t| self.eval(t) - y, a, b));
            }
        }
        if self.eval(self.x_end) == y {
            xs.push(self.x_end);
        }
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * (self.x_end - self.x_start).abs());
        xs
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fa * fm <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// A periodic interface graph `x2 = g(x1)` assembled from segments that tile
/// one period. Jump discontinuities are permitted only at segment boundaries.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InterfaceProfile {
    pub segments: Vec<Segment>,
}

impl InterfaceProfile {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(RcwaError::InvalidGeometry(
                "interface needs at least one segment".into(),
            ));
        }
        for s in &segments {
            if !(s.x_end > s.x_start) {
                return Err(RcwaError::InvalidGeometry(format!(
                    "segment [{}, {}] has non-positive width",
                    s.x_start, s.x_end
                )));
            }
        }
        for w in segments.windows(2) {
            if (w[0].x_end - w[1].x_start).abs() > 1e-9 * (w[1].x_end - w[0].x_start).abs() {
                return Err(RcwaError::InvalidGeometry(format!(
                    "segments do not tile: gap between {} and {}",
                    w[0].x_end, w[1].x_start
                )));
            }
        }
        Ok(InterfaceProfile { segments })
    }

    /// Flat interface at a fixed height.
    pub fn flat(period: f64, height: f64) -> Self {
        InterfaceProfile {
            segments: vec![Segment::new(
                0.0,
                period,
                SegmentShape::Constant { value: height },
            )],
        }
    }

    pub fn period(&self) -> f64 {
        self.segments.last().unwrap().x_end - self.segments[0].x_start
    }

    fn wrap(&self, x1: f64) -> f64 {
        let l = self.period();
        let x0 = self.segments[0].x_start;
        let mut t = (x1 - x0).rem_euclid(l) + x0;
        if t >= x0 + l {
            t = x0;
        }
        t
    }

    fn segment_at(&self, x1: f64) -> &Segment {
        let x = self.wrap(x1);
        self.segments
            .iter()
            .find(|s| x >= s.x_start && x < s.x_end)
            .unwrap_or_else(|| self.segments.last().unwrap())
    }

    /// Height at x1, using the left-closed convention at jumps.
    pub fn eval(&self, x1: f64) -> f64 {
        let x = self.wrap(x1);
        self.segment_at(x).eval(x)
    }

    pub fn deriv(&self, x1: f64) -> f64 {
        let x = self.wrap(x1);
        self.segment_at(x).deriv(x)
    }

    /// Jump `g(x+) - g(x-)` at a segment boundary, 0 elsewhere.
    pub fn jump_at(&self, x1: f64) -> f64 {
        let x = self.wrap(x1);
        for (i, s) in self.segments.iter().enumerate() {
            if (x - s.x_start).abs() < 1e-12 * self.period() {
                let left = if i == 0 {
                    self.segments.last().unwrap()
                } else {
                    &self.segments[i - 1]
                };
                return s.eval(s.x_start) - left.eval(left.x_end);
            }
        }
        0.0
    }

    /// Heights that must coincide with slice boundaries: one-sided segment
    /// endpoint heights, interior extrema, and flat-segment heights.
    pub fn mandatory_heights(&self) -> Vec<f64> {
        let mut hs = Vec::new();
        for s in &self.segments {
            hs.push(s.eval(s.x_start));
            hs.push(s.eval(s.x_end));
            if s.is_flat() {
                continue;
            }
            for r in s.deriv_roots() {
                hs.push(s.eval(r));
            }
        }
        hs.sort_by(f64::total_cmp);
        hs
    }

    pub fn min_height(&self) -> f64 {
        self.mandatory_heights()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_height(&self) -> f64 {
        self.mandatory_heights()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// All x1 in one period where the interface (including its vertical jump
    /// walls) crosses the horizontal line x2 = y.
    pub fn crossings(&self, y: f64) -> Vec<f64> {
        let mut xs = Vec::new();
        for (i, s) in self.segments.iter().enumerate() {
            xs.extend(s.crossings(y));
            // vertical wall at the left boundary of this segment
            let left = if i == 0 {
                self.segments.last().unwrap()
            } else {
                &self.segments[i - 1]
            };
            let lo = left.eval(left.x_end).min(s.eval(s.x_start));
            let hi = left.eval(left.x_end).max(s.eval(s.x_start));
            if lo < y && y < hi {
                xs.push(s.x_start);
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * self.period());
        xs
    }

    /// The same interface shifted right by `shift` (periodically).
    pub fn translated(&self, shift: f64) -> Self {
        let l = self.period();
        let x0 = self.segments[0].x_start;
        let s = shift.rem_euclid(l);
        if s == 0.0 {
            return self.clone();
        }
        let mut pieces: Vec<Segment> = Vec::new();
        for seg in &self.segments {
            let mut moved = seg.clone();
            moved.x_start += s;
            moved.x_end += s;
            if let SegmentShape::Sine { phase, .. } = &mut moved.shape {
                *phase -= moved_shift_phase(seg, s);
            }
            if moved.x_end <= x0 + l + 1e-12 * l {
                pieces.push(moved);
            } else if moved.x_start >= x0 + l - 1e-12 * l {
                pieces.push(shift_back(moved, l));
            } else {
                let cut = x0 + l;
                let (a, b) = split_segment(&moved, cut);
                pieces.push(a);
                pieces.push(shift_back(b, l));
            }
        }
        pieces.sort_by(|a, b| a.x_start.total_cmp(&b.x_start));
        InterfaceProfile { segments: pieces }
    }
}

fn moved_shift_phase(seg: &Segment, s: f64) -> f64 {
    match &seg.shape {
        SegmentShape::Sine {
            angular_frequency, ..
        } => angular_frequency * s,
        _ => 0.0,
    }
}

fn shift_back(mut seg: Segment, l: f64) -> Segment {
    seg.x_start -= l;
    seg.x_end -= l;
    if let SegmentShape::Sine {
        angular_frequency,
        phase,
        ..
    } = &mut seg.shape
    {
        *phase += *angular_frequency * l;
    }
    seg
}

fn split_segment(seg: &Segment, cut: f64) -> (Segment, Segment) {
    let v = seg.eval(cut);
    let left = Segment {
        x_start: seg.x_start,
        x_end: cut,
        shape: match &seg.shape {
            SegmentShape::Linear { start, .. } => SegmentShape::Linear {
                start: *start,
                end: v,
            },
            SegmentShape::Polynomial { coeffs } => SegmentShape::Polynomial {
                coeffs: coeffs.clone(),
            },
            other => other.clone(),
        },
    };
    let right = Segment {
        x_start: cut,
        x_end: seg.x_end,
        shape: match &seg.shape {
            SegmentShape::Linear { end, .. } => SegmentShape::Linear { start: v, end: *end },
            SegmentShape::Polynomial { coeffs } => SegmentShape::Polynomial {
                coeffs: poly_shift(coeffs, cut - seg.x_start),
            },
            other => other.clone(),
        },
    };
    (left, right)
}

/// Taylor shift: coefficients of p(t + dt) given those of p(t).
fn poly_shift(coeffs: &[f64], dt: f64) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n];
    for (i, &c) in coeffs.iter().enumerate() {
        // expand c*(t+dt)^i
        let mut binom = 1.0;
        let mut pow = 1.0;
        for k in (0..=i).rev() {
            out[k] += c * binom * pow;
            binom *= k as f64 / (i - k + 1) as f64;
            pow *= dt;
        }
    }
    out
}

/// Relative permittivity of one subdomain between consecutive interfaces.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegionPermittivity {
    Constant {
        value: Complex64,
    },
    /// eps = value + x2_slope * x2 (graded in the vertical direction).
    Affine {
        value: Complex64,
        x2_slope: Complex64,
    },
    /// Piecewise constant in x1, independent of x2 (lamellar regions).
    /// Intervals must tile one period.
    LateralStep {
        intervals: Vec<(f64, f64, Complex64)>,
    },
}

impl RegionPermittivity {
    pub fn constant(re: f64, im: f64) -> Self {
        RegionPermittivity::Constant {
            value: Complex64::new(re, im),
        }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> Complex64 {
        match self {
            RegionPermittivity::Constant { value } => *value,
            RegionPermittivity::Affine { value, x2_slope } => value + x2_slope * x2,
            RegionPermittivity::LateralStep { intervals } => {
                let period = intervals.last().unwrap().1 - intervals[0].0;
                let x = (x1 - intervals[0].0).rem_euclid(period) + intervals[0].0;
                for &(a, b, v) in intervals {
                    if x >= a && x < b {
                        return v;
                    }
                }
                intervals.last().unwrap().2
            }
        }
    }

    /// d(eps)/dx2 where defined (zero a.e. for the step variants).
    pub fn dz(&self) -> Complex64 {
        match self {
            RegionPermittivity::Affine { x2_slope, .. } => *x2_slope,
            _ => Complex64::new(0.0, 0.0),
        }
    }

    fn lateral_breakpoints(&self) -> Vec<f64> {
        match self {
            RegionPermittivity::LateralStep { intervals } => {
                let mut xs: Vec<f64> = intervals.iter().map(|iv| iv.0).collect();
                xs.push(intervals.last().unwrap().1);
                xs
            }
            _ => Vec::new(),
        }
    }

    fn translated(&self, shift: f64, period: f64) -> Self {
        match self {
            RegionPermittivity::LateralStep { intervals } => {
                let s = shift.rem_euclid(period);
                let x0 = intervals[0].0;
                let mut out: Vec<(f64, f64, Complex64)> = Vec::new();
                for &(a, b, v) in intervals {
                    let (mut a2, mut b2) = (a + s, b + s);
                    if b2 <= x0 + period + 1e-12 * period {
                        out.push((a2, b2, v));
                    } else if a2 >= x0 + period - 1e-12 * period {
                        out.push((a2 - period, b2 - period, v));
                    } else {
                        out.push((a2, x0 + period, v));
                        a2 = x0;
                        b2 -= period;
                        out.push((a2, b2, v));
                    }
                }
                out.sort_by(|p, q| p.0.total_cmp(&q.0));
                RegionPermittivity::LateralStep { intervals: out }
            }
            other => other.clone(),
        }
    }
}

fn admissible(eps: Complex64) -> bool {
    (eps.re > 0.0 && eps.im >= 0.0) || (eps.re <= 0.0 && eps.im > 0.0)
}

/// Full description of the periodic scatterer.
///
/// `interfaces` are ordered bottom to top; `regions` has one entry more than
/// `interfaces` (region k lies between interfaces k-1 and k, with the half
/// spaces `eps_minus` below `-H` and `eps_plus` above `H`).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DeviceSpec {
    pub period: f64,
    pub half_height: f64,
    pub interfaces: Vec<InterfaceProfile>,
    pub regions: Vec<RegionPermittivity>,
    pub eps_plus: Complex64,
    pub eps_minus: Complex64,
}

impl DeviceSpec {
    pub fn new(
        period: f64,
        half_height: f64,
        interfaces: Vec<InterfaceProfile>,
        regions: Vec<RegionPermittivity>,
        eps_plus: Complex64,
        eps_minus: Complex64,
    ) -> Result<Self> {
        let d = DeviceSpec {
            period,
            half_height,
            interfaces,
            regions,
            eps_plus,
            eps_minus,
        };
        d.validate()?;
        Ok(d)
    }

    /// Homogeneous cell with no interfaces.
    pub fn homogeneous(period: f64, half_height: f64, eps: Complex64) -> Result<Self> {
        DeviceSpec::new(
            period,
            half_height,
            Vec::new(),
            vec![RegionPermittivity::Constant { value: eps }],
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !(self.half_height > 0.0) {
            return Err(RcwaError::InvalidGeometry(
                "period and half_height must be positive".into(),
            ));
        }
        if self.regions.len() != self.interfaces.len() + 1 {
            return Err(RcwaError::InvalidGeometry(format!(
                "{} interfaces require {} regions, got {}",
                self.interfaces.len(),
                self.interfaces.len() + 1,
                self.regions.len()
            )));
        }
        if !admissible(self.eps_plus) || !admissible(self.eps_minus) {
            return Err(RcwaError::InvalidGeometry(
                "half-space permittivities must satisfy {Re>0, Im>=0} or {Re<=0, Im>0}".into(),
            ));
        }
        for r in &self.regions {
            match r {
                RegionPermittivity::Constant { value } => {
                    if !admissible(*value) {
                        return Err(RcwaError::InvalidGeometry(format!(
                            "inadmissible permittivity {value}"
                        )));
                    }
                }
                RegionPermittivity::Affine { .. } => {
                    let h = self.half_height;
                    for i in 0..=32 {
                        let x2 = -h + 2.0 * h * i as f64 / 32.0;
                        if !admissible(r.eval(0.0, x2)) {
                            return Err(RcwaError::InvalidGeometry(format!(
                                "graded permittivity leaves the admissible class at x2 = {x2}"
                            )));
                        }
                    }
                }
                RegionPermittivity::LateralStep { intervals } => {
                    if intervals.is_empty() {
                        return Err(RcwaError::InvalidGeometry(
                            "lateral step region has no intervals".into(),
                        ));
                    }
                    for &(a, b, v) in intervals {
                        if !(b > a) {
                            return Err(RcwaError::InvalidGeometry(format!(
                                "lateral interval [{a}, {b}] has non-positive width"
                            )));
                        }
                        if !admissible(v) {
                            return Err(RcwaError::InvalidGeometry(format!(
                                "inadmissible permittivity {v}"
                            )));
                        }
                    }
                    let span = intervals.last().unwrap().1 - intervals[0].0;
                    if (span - self.period).abs() > 1e-9 * self.period {
                        return Err(RcwaError::InvalidGeometry(
                            "lateral step intervals must tile one period".into(),
                        ));
                    }
                }
            }
        }
        for g in &self.interfaces {
            if (g.period() - self.period).abs() > 1e-9 * self.period {
                return Err(RcwaError::InvalidGeometry(
                    "interface segments must tile one device period".into(),
                ));
            }
        }
        // ordering, separation, and distance to +-H, checked on a sample grid
        let n = 512;
        for i in 0..n {
            let x1 = self.period * (i as f64 + 0.5) / n as f64;
            let mut prev = -self.half_height;
            for (k, g) in self.interfaces.iter().enumerate() {
                let y = g.eval(x1);
                if y <= prev {
                    return Err(RcwaError::InvalidGeometry(format!(
                        "interface {k} is not strictly above its predecessor at x1 = {x1}"
                    )));
                }
                prev = y;
            }
            if prev >= self.half_height {
                return Err(RcwaError::InvalidGeometry(format!(
                    "top interface reaches x2 = {prev} >= H at x1 = {x1}"
                )));
            }
        }
        Ok(())
    }

    /// Index of the region containing (x1, x2); points on an interface are
    /// assigned to the region above it.
    pub fn region_index(&self, x1: f64, x2: f64) -> usize {
        self.interfaces
            .iter()
            .take_while(|g| g.eval(x1) <= x2)
            .count()
    }

    pub fn eps_at(&self, x1: f64, x2: f64) -> Complex64 {
        self.regions[self.region_index(x1, x2)].eval(x1, x2)
    }

    /// Supremum of |eps| over the cell (sampled; exact for non-graded regions).
    pub fn max_abs_eps(&self) -> f64 {
        let mut m: f64 = 0.0;
        for r in &self.regions {
            match r {
                RegionPermittivity::Constant { value } => m = m.max(value.norm()),
                RegionPermittivity::LateralStep { intervals } => {
                    for &(_, _, v) in intervals {
                        m = m.max(v.norm());
                    }
                }
                RegionPermittivity::Affine { .. } => {
                    let h = self.half_height;
                    m = m.max(r.eval(0.0, -h).norm()).max(r.eval(0.0, h).norm());
                }
            }
        }
        m
    }

    pub fn max_abs_re_eps(&self) -> f64 {
        let mut m: f64 = 0.0;
        for r in &self.regions {
            match r {
                RegionPermittivity::Constant { value } => m = m.max(value.re.abs()),
                RegionPermittivity::LateralStep { intervals } => {
                    for &(_, _, v) in intervals {
                        m = m.max(v.re.abs());
                    }
                }
                RegionPermittivity::Affine { .. } => {
                    let h = self.half_height;
                    m = m
                        .max(r.eval(0.0, -h).re.abs())
                        .max(r.eval(0.0, h).re.abs());
                }
            }
        }
        m
    }

    /// The same device shifted right by `shift` (periodically).
    pub fn translated(&self, shift: f64) -> Self {
        DeviceSpec {
            period: self.period,
            half_height: self.half_height,
            interfaces: self
                .interfaces
                .iter()
                .map(|g| g.translated(shift))
                .collect(),
            regions: self
                .regions
                .iter()
                .map(|r| r.translated(shift, self.period))
                .collect(),
            eps_plus: self.eps_plus,
            eps_minus: self.eps_minus,
        }
    }

    fn mandatory_boundaries(&self) -> Result<Vec<f64>> {
        let h = self.half_height;
        let mut ys = vec![-h, h];
        for g in &self.interfaces {
            ys.extend(g.mandatory_heights());
        }
        ys.sort_by(f64::total_cmp);
        let eq_tol = 1e-12 * self.period * 1e-2;
        ys.dedup_by(|a, b| (*a - *b).abs() <= eq_tol);
        for w in ys.windows(2) {
            let gap = w[1] - w[0];
            if gap < 1e-12 * self.period {
                return Err(RcwaError::DegenerateGeometry(
                    w[0],
                    w[1],
                    1e-12 * self.period,
                ));
            }
        }
        Ok(ys)
    }
}

/// Horizontal slice boundaries `h_0 = -H < ... < h_S = H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slicing {
    pub boundaries: Vec<f64>,
    pub quasi_uniformity: f64,
}

impl Slicing {
    pub fn from_boundaries(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(RcwaError::InvalidSlicing(
                "need at least two boundaries".into(),
            ));
        }
        if !boundaries.windows(2).all(|w| w[1] > w[0]) {
            return Err(RcwaError::InvalidSlicing(
                "boundaries must be strictly increasing".into(),
            ));
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for w in boundaries.windows(2) {
            let d = w[1] - w[0];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        Ok(Slicing {
            boundaries,
            quasi_uniformity: hi / lo,
        })
    }

    pub fn num_slices(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn max_thickness(&self) -> f64 {
        self.boundaries
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn thickness(&self, j: usize) -> f64 {
        self.boundaries[j + 1] - self.boundaries[j]
    }

    pub fn midline(&self, j: usize) -> f64 {
        0.5 * (self.boundaries[j] + self.boundaries[j + 1])
    }

    /// Index of the slice containing x2 (clamped to the cell).
    pub fn find_slice(&self, x2: f64) -> usize {
        match self
            .boundaries
            .binary_search_by(|b| b.total_cmp(&x2))
        {
            Ok(i) => i.min(self.num_slices() - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.num_slices() - 1),
        }
    }
}

/// Build a slicing with max thickness <= `target_h` whose boundaries contain
/// every mandatory height (interface extrema, segment-endpoint heights, flat
/// heights, and +-H). Gaps between mandatory heights are equisubdivided; the
/// effective target is clamped so that the result stays 2-quasi-uniform.
pub fn build_slicing(device: &DeviceSpec, target_h: f64) -> Result<Slicing> {
    if !(target_h > 0.0) {
        return Err(RcwaError::InvalidSlicing(format!(
            "target_h must be positive, got {target_h}"
        )));
    }
    if target_h > 2.0 * device.half_height {
        return Err(RcwaError::InvalidSlicing(format!(
            "target_h = {target_h} exceeds the cell height {}",
            2.0 * device.half_height
        )));
    }
    let mandatory = device.mandatory_boundaries()?;
    let min_gap = mandatory
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let eff = target_h.min(2.0 * min_gap * (1.0 - 1e-12));
    let mut boundaries = Vec::new();
    for w in mandatory.windows(2) {
        let gap = w[1] - w[0];
        let n = (gap / eff).ceil().max(1.0) as usize;
        for i in 0..n {
            boundaries.push(w[0] + gap * i as f64 / n as f64);
        }
    }
    boundaries.push(*mandatory.last().unwrap());
    Slicing::from_boundaries(boundaries)
}

/// The piecewise-constant lateral profile of one slice of the stairstep
/// permittivity: `eps_h(x1, x2) = eps(x1, midline)` for x2 in the slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceProfile {
    pub z_lo: f64,
    pub z_hi: f64,
    pub midline: f64,
    /// (x_lo, x_hi, eps) intervals tiling [0, period).
    pub intervals: Vec<(f64, f64, Complex64)>,
}

impl SliceProfile {
    pub fn eval(&self, x1: f64) -> Complex64 {
        let period = self.intervals.last().unwrap().1;
        let x = x1.rem_euclid(period);
        for &(a, b, v) in &self.intervals {
            if x >= a && x < b {
                return v;
            }
        }
        self.intervals.last().unwrap().2
    }

    pub fn mean(&self) -> Complex64 {
        let period = self.intervals.last().unwrap().1 - self.intervals[0].0;
        self.intervals
            .iter()
            .map(|&(a, b, v)| v * (b - a))
            .sum::<Complex64>()
            / period
    }
}

/// The stairstep approximation of the device permittivity on a slicing.
#[derive(Debug, Clone)]
pub struct SlicedPermittivity {
    pub slices: Vec<SliceProfile>,
}

impl SlicedPermittivity {
    pub fn eval(&self, slicing: &Slicing, x1: f64, x2: f64) -> Complex64 {
        self.slices[slicing.find_slice(x2)].eval(x1)
    }
}

/// Sample the device permittivity along each slice midline (Eq.-style
/// stairstep): constant in x2 per slice, piecewise constant in x1.
pub fn stairstep_permittivity(device: &DeviceSpec, slicing: &Slicing) -> SlicedPermittivity {
    let period = device.period;
    let slices = (0..slicing.num_slices())
        .map(|j| {
            let mid = slicing.midline(j);
            let mut cuts = vec![0.0, period];
            for g in &device.interfaces {
                cuts.extend(g.crossings(mid));
            }
            for r in &device.regions {
                cuts.extend(r.lateral_breakpoints());
            }
            cuts.retain(|&x| (0.0..=period).contains(&x));
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * period);
            let mut intervals: Vec<(f64, f64, Complex64)> = Vec::new();
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                if b - a <= 0.0 {
                    continue;
                }
                let v = device.eps_at(0.5 * (a + b), mid);
                match intervals.last_mut() {
                    Some(last) if last.2 == v && last.1 == a => last.1 = b,
                    _ => intervals.push((a, b, v)),
                }
            }
            // close the tiling exactly
            if let Some(last) = intervals.last_mut() {
                last.1 = period;
            }
            SliceProfile {
                z_lo: slicing.boundaries[j],
                z_hi: slicing.boundaries[j + 1],
                midline: mid,
                intervals,
            }
        })
        .collect();
    SlicedPermittivity { slices }
}

/// Orientation under which the non-trapping conditions hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    IncreasingUpward,
    IncreasingDownward,
    Neither,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Violation {
    pub condition: String,
    pub location: (f64, f64),
    pub value: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NonTrappingReport {
    pub satisfied: bool,
    pub orientation: Orientation,
    /// Some sampled value sat within 1e-12 of zero.
    pub marginal: bool,
    pub violations: Vec<Violation>,
}

const NT_TOL: f64 = 1e-12;

/// Check the sign conditions d(Re eps)/dx2 >= 0 in each region,
/// Re[eps] > 0 across every interface (jump taken downward-normal), and
/// Re(eps+ - eps) >= 0 on the top boundary; also the fully sign-reversed
/// variant with Re(eps- - eps) >= 0 on the bottom. The conditions are
/// evaluated on Re(eps), which extends the real-permittivity statement to
/// lossy media for diagnostic purposes.
pub fn check_nontrapping(device: &DeviceSpec) -> NonTrappingReport {
    let nx = 256;
    let mut marginal = false;
    let mut up: Vec<Violation> = Vec::new();
    let mut down: Vec<Violation> = Vec::new();
    let period = device.period;
    let h = device.half_height;

    // interior monotonicity, sampled per region band
    for i in 0..nx {
        let x1 = period * (i as f64 + 0.5) / nx as f64;
        let mut lo = -h;
        for k in 0..=device.interfaces.len() {
            let hi = device
                .interfaces
                .get(k)
                .map(|g| g.eval(x1))
                .unwrap_or(h);
            if hi > lo {
                for s in 0..4 {
                    let x2 = lo + (hi - lo) * (s as f64 + 0.5) / 4.0;
                    let d = device.regions[k].dz().re;
                    if d.abs() <= NT_TOL {
                        marginal |= d != 0.0;
                    } else if d < 0.0 {
                        up.push(Violation {
                            condition: "interior d(Re eps)/dx2 >= 0".into(),
                            location: (x1, x2),
                            value: d,
                        });
                    } else {
                        down.push(Violation {
                            condition: "interior d(Re eps)/dx2 <= 0".into(),
                            location: (x1, x2),
                            value: d,
                        });
                    }
                }
            }
            lo = hi;
        }
    }

    // interface jumps, [eps] = above - below with the downward normal
    for (k, g) in device.interfaces.iter().enumerate() {
        for i in 0..nx {
            let x1 = period * (i as f64 + 0.5) / nx as f64;
            let y = g.eval(x1);
            let jump = device.regions[k + 1].eval(x1, y).re - device.regions[k].eval(x1, y).re;
            if jump.abs() <= NT_TOL {
                marginal = true;
                continue;
            }
            if jump <= 0.0 {
                up.push(Violation {
                    condition: format!("jump Re[eps] > 0 across interface {k}"),
                    location: (x1, y),
                    value: jump,
                });
            } else {
                down.push(Violation {
                    condition: format!("jump Re[eps] < 0 across interface {k}"),
                    location: (x1, y),
                    value: jump,
                });
            }
        }
    }

    // boundary conditions on Gamma_H (upward orientation) and Gamma_-H (reversed)
    for i in 0..nx {
        let x1 = period * (i as f64 + 0.5) / nx as f64;
        let top = device.eps_plus.re - device.eps_at(x1, h - 1e-9 * h).re;
        if top.abs() <= NT_TOL {
            marginal |= top != 0.0;
        } else if top < 0.0 {
            up.push(Violation {
                condition: "Re(eps+ - eps) >= 0 on Gamma_H".into(),
                location: (x1, h),
                value: top,
            });
        }
        let bot = device.eps_minus.re - device.eps_at(x1, -h + 1e-9 * h).re;
        if bot.abs() <= NT_TOL {
            marginal |= bot != 0.0;
        } else if bot < 0.0 {
            down.push(Violation {
                condition: "Re(eps- - eps) >= 0 on Gamma_-H".into(),
                location: (x1, -h),
                value: bot,
            });
        }
    }

    let (satisfied, orientation, violations) = if up.is_empty() {
        (true, Orientation::IncreasingUpward, Vec::new())
    } else if down.is_empty() {
        (true, Orientation::IncreasingDownward, Vec::new())
    } else {
        up.truncate(16);
        down.truncate(16);
        let mut v = up;
        v.extend(down);
        (false, Orientation::Neither, v)
    };
    NonTrappingReport {
        satisfied,
        orientation,
        marginal,
        violations,
    }
}

/// `|| eps - eps_h ||_{L^q(Omega)}`, computed slice by slice with exact
/// vertical decomposition along each sampled line and adaptive horizontal
/// quadrature split at interface crossings.
pub fn stairstep_error_norm(device: &DeviceSpec, slicing: &Slicing, q: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(RcwaError::InvalidArgument(format!(
            "exponent q must satisfy 1 <= q < inf, got {q}"
        )));
    }
    let sliced = stairstep_permittivity(device, slicing);
    let period = device.period;
    let mut total = 0.0;
    for prof in &sliced.slices {
        let vertical = |x1: f64| vertical_mismatch(device, prof, x1, q);
        // split where any interface crosses the slice's three reference lines,
        // at segment boundaries, and at lateral steps of eps_h
        let mut cuts = vec![0.0, period];
        for g in &device.interfaces {
            for y in [prof.z_lo, prof.midline, prof.z_hi] {
                cuts.extend(g.crossings(y));
            }
            for s in &g.segments {
                cuts.push(s.x_start.rem_euclid(period));
            }
        }
        for &(a, _, _) in &prof.intervals {
            cuts.push(a);
        }
        cuts.retain(|&x| (0.0..=period).contains(&x));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * period);
        for w in cuts.windows(2) {
            if w[1] - w[0] > 0.0 {
                total += adaptive_simpson(&vertical, w[0], w[1], 1e-11 * (1.0 + total), 24);
            }
        }
    }
    Ok(total.powf(1.0 / q))
}

/// Integral over x2 in one slice of |eps(x1, x2) - eps_h(x1)|^q at fixed x1.
fn vertical_mismatch(device: &DeviceSpec, prof: &SliceProfile, x1: f64, q: f64) -> f64 {
    let step = prof.eval(x1);
    let mut ys = vec![prof.z_lo, prof.z_hi];
    for g in &device.interfaces {
        let y = g.eval(x1);
        if y > prof.z_lo && y < prof.z_hi {
            ys.push(y);
        }
    }
    ys.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for w in ys.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let region = &device.regions[device.region_index(x1, 0.5 * (a + b))];
        match region {
            RegionPermittivity::Affine { value, x2_slope } => {
                acc += abs_affine_pow_integral(value + x1 * 0.0 - step, *x2_slope, a, b, q);
            }
            _ => {
                let d = (region.eval(x1, 0.5 * (a + b)) - step).norm();
                if d > 0.0 {
                    acc += d.powf(q) * (b - a);
                }
            }
        }
    }
    acc
}

/// Integral of |A + B*y|^q over [a, b] for complex A, B; closed form when the
/// two are colinear, adaptive quadrature otherwise.
fn abs_affine_pow_integral(a_coef: Complex64, b_coef: Complex64, a: f64, b: f64, q: f64) -> f64 {
    if b_coef.norm() == 0.0 {
        return a_coef.norm().powf(q) * (b - a);
    }
    let cross = (a_coef * b_coef.conj()).im;
    if cross.abs() <= 1e-14 * a_coef.norm() * b_coef.norm() {
        // |A + B y| = |B| * |y - y0|
        let y0 = -(a_coef * b_coef.conj()).re / b_coef.norm_sqr();
        let f = |t: f64| t.signum() * t.abs().powf(q + 1.0) / (q + 1.0);
        return b_coef.norm().powf(q) * (f(b - y0) - f(a - y0));
    }
    adaptive_simpson(
        &|y| (a_coef + b_coef * y).norm().powf(q),
        a,
        b,
        1e-12 * (a_coef.norm() + b_coef.norm() * b.abs().max(a.abs())).powf(q) * (b - a),
        20,
    )
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn flat_two_layer() -> DeviceSpec {
        DeviceSpec::new(
            1.0,
            1.0,
            vec![InterfaceProfile::flat(1.0, 0.0)],
            vec![
                RegionPermittivity::constant(2.25, 0.0),
                RegionPermittivity::constant(1.0, 0.0),
            ],
            c(1.0),
            c(1.0),
        )
        .unwrap()
    }

    #[test]
    fn flat_interface_forces_boundary() {
        let d = flat_two_layer();
        let s = build_slicing(&d, 0.5).unwrap();
        let expect = [-1.0, -0.5, 0.0, 0.5, 1.0];
        assert_eq!(s.boundaries.len(), expect.len());
        for (b, e) in s.boundaries.iter().zip(expect) {
            assert_relative_eq!(*b, e, epsilon = 1e-12);
        }
    }

    fn sinusoid_device(amp: f64) -> DeviceSpec {
        let period = 500.0;
        let g = InterfaceProfile::new(vec![Segment::new(
            0.0,
            period,
            SegmentShape::Sine {
                offset: 0.0,
                amplitude: amp,
                angular_frequency: std::f64::consts::TAU / period,
                phase: 0.0,
            },
        )])
        .unwrap();
        DeviceSpec::new(
            period,
            300.0,
            vec![g],
            vec![
                RegionPermittivity::constant(2.25, 0.0),
                RegionPermittivity::constant(1.0, 0.0),
            ],
            c(1.0),
            c(1.0),
        )
        .unwrap()
    }

    #[test]
    fn sinusoid_extrema_and_endpoint_heights_are_boundaries() {
        let a = 100.0;
        let d = sinusoid_device(a);
        let s = build_slicing(&d, a).unwrap();
        for target in [-a, 0.0, a] {
            assert!(
                s.boundaries.iter().any(|b| (b - target).abs() < 1e-9),
                "missing mandatory boundary {target}"
            );
        }
    }

    #[test]
    fn section7_slicing_counts_and_quasi_uniformity() {
        let d = crate::presets::nonsymmetric_grating();
        let s = build_slicing(&d, 1.0).unwrap();
        // 3000 nm total, <= 1 nm slices, transitions at 0/50/100 above the floor
        assert_eq!(s.num_slices(), 3000);
        assert!(s.max_thickness() <= 1.0 + 1e-9);
        assert!(s.quasi_uniformity <= 2.0 + 1e-9);
        let h = d.half_height;
        for rel in [0.0, 50.0, 100.0] {
            let target = -h + rel;
            assert!(
                s.boundaries.iter().any(|b| (b - target).abs() < 1e-9),
                "missing region transition at {rel} nm"
            );
        }
    }

    #[test]
    fn rejects_bad_target() {
        let d = flat_two_layer();
        assert!(build_slicing(&d, 0.0).is_err());
        assert!(build_slicing(&d, 5.0).is_err());
    }

    #[test]
    fn stairstep_is_exact_on_lamellar_devices() {
        let d = crate::presets::lamellar_grating(c(2.25), c(1.0), 0.5, 200.0);
        let s = build_slicing(&d, 40.0).unwrap();
        let eps_h = stairstep_permittivity(&d, &s);
        let mut rng = 0x9e3779b97f4a7c15u64;
        for _ in 0..200 {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let x1 = (rng >> 11) as f64 / (1u64 << 53) as f64 * d.period;
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let x2 = ((rng >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0) * d.half_height * 0.999;
            assert_eq!(eps_h.eval(&s, x1, x2), d.eps_at(x1, x2));
        }
    }

    #[test]
    fn stairstep_step_sits_at_midline_crossing() {
        // triangular interface crossing a slice: the step must be where the
        // interface meets the midline
        let period = 100.0;
        let g = InterfaceProfile::new(vec![Segment::new(
            0.0,
            period,
            SegmentShape::Linear {
                start: -50.0,
                end: 50.0,
            },
        )])
        .unwrap();
        let d = DeviceSpec::new(
            period,
            100.0,
            vec![g],
            vec![
                RegionPermittivity::constant(4.0, 0.0),
                RegionPermittivity::constant(1.0, 0.0),
            ],
            c(1.0),
            c(1.0),
        )
        .unwrap();
        let s = Slicing::from_boundaries(vec![-100.0, -10.0, 10.0, 100.0]).unwrap();
        let eps_h = stairstep_permittivity(&d, &s);
        // midline of slice 1 is 0; g crosses 0 at x1 = 50
        let prof = &eps_h.slices[1];
        assert_relative_eq!(prof.midline, 0.0);
        assert_eq!(prof.eval(49.0), c(1.0)); // above the interface at midline
        assert_eq!(prof.eval(51.0), c(4.0));
    }

    #[test]
    fn stairstep_of_graded_region_is_midline_sample() {
        let h = 100.0;
        let d = DeviceSpec::new(
            50.0,
            h,
            vec![],
            vec![RegionPermittivity::Affine {
                value: c(2.0),
                x2_slope: c(1.0 / h),
            }],
            c(1.0),
            c(1.0),
        )
        .unwrap();
        let s = build_slicing(&d, 25.0).unwrap();
        let eps_h = stairstep_permittivity(&d, &s);
        for (j, prof) in eps_h.slices.iter().enumerate() {
            let expect = 2.0 + s.midline(j) / h;
            assert_relative_eq!(prof.eval(10.0).re, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn nontrapping_metal_backed_grating() {
        let d = crate::presets::nonsymmetric_grating();
        let r = check_nontrapping(&d);
        assert!(r.satisfied);
        assert_eq!(r.orientation, Orientation::IncreasingUpward);
    }

    #[test]
    fn nontrapping_dielectric_reports_failing_condition() {
        // air above dielectric 4: downward jump 1 - 4 < 0 breaks the upward
        // orientation; the reversed orientation fails on Gamma_-H when the
        // substrate does not match eps-
        let d = DeviceSpec::new(
            1.0,
            1.0,
            vec![InterfaceProfile::flat(1.0, 0.0)],
            vec![
                RegionPermittivity::constant(4.0, 0.0),
                RegionPermittivity::constant(1.0, 0.0),
            ],
            c(1.0),
            c(1.0),
        )
        .unwrap();
        let r = check_nontrapping(&d);
        assert!(!r.satisfied);
        assert_eq!(r.orientation, Orientation::Neither);
        assert!(r
            .violations
            .iter()
            .any(|v| v.condition.contains("Gamma_-H")));
        // with a matching substrate below, the reversed orientation holds
        let d2 = DeviceSpec::new(
            1.0,
            1.0,
            vec![InterfaceProfile::flat(1.0, 0.0)],
            vec![
                RegionPermittivity::constant(4.0, 0.0),
                RegionPermittivity::constant(1.0, 0.0),
            ],
            c(1.0),
            c(4.0),
        )
        .unwrap();
        let r2 = check_nontrapping(&d2);
        assert!(r2.satisfied);
        assert_eq!(r2.orientation, Orientation::IncreasingDownward);
    }

    #[test]
    fn nontrapping_homogeneous_is_vacuous() {
        let d = DeviceSpec::homogeneous(1.0, 1.0, c(1.0)).unwrap();
        let r = check_nontrapping(&d);
        assert!(r.satisfied);
    }

    #[test]
    fn nontrapping_invariant_under_translation() {
        let base = crate::presets::nonsymmetric_grating();
        for frac in [0.1, 0.25, 0.6180339887, 0.9] {
            let d = base.translated(frac * base.period);
            d.validate().unwrap();
            let r = check_nontrapping(&d);
            assert!(r.satisfied, "translation by {frac} broke non-trapping");
            assert_eq!(r.orientation, Orientation::IncreasingUpward);
        }
    }

    #[test]
    fn error_norm_zero_on_lamellar() {
        let d = crate::presets::lamellar_grating(c(2.25), c(1.0), 0.5, 200.0);
        let s = build_slicing(&d, 35.0).unwrap();
        let e = stairstep_error_norm(&d, &s, 2.0).unwrap();
        assert!(e < 1e-10, "lamellar stairstep should be exact, got {e}");
    }

    #[test]
    fn error_norm_rejects_bad_exponent() {
        let d = flat_two_layer();
        let s = build_slicing(&d, 0.5).unwrap();
        assert!(stairstep_error_norm(&d, &s, 0.5).is_err());
    }

    #[test]
    fn error_norm_matches_triangle_area_sum_for_linear_interface() {
        // single sawtooth interface of slope s; q = 1 mismatch is |J| times
        // the summed areas of the stairstep triangles
        let period = 100.0;
        let height = 80.0;
        let g = InterfaceProfile::new(vec![Segment::new(
            0.0,
            period,
            SegmentShape::Linear {
                start: -height / 2.0,
                end: height / 2.0,
            },
        )])
        .unwrap();
        let d = DeviceSpec::new(
            period,
            100.0,
            vec![g],
            vec![
                RegionPermittivity::constant(4.0, 0.0),
                RegionPermittivity::constant(1.0, 0.0),
            ],
            c(1.0),
            c(1.0),
        )
        .unwrap();
        let nslices = 8;
        let dh = height / nslices as f64;
        let mut bounds = vec![-100.0];
        for i in 0..=nslices {
            bounds.push(-height / 2.0 + dh * i as f64);
        }
        bounds.push(100.0);
        let s = Slicing::from_boundaries(bounds).unwrap();
        let got = stairstep_error_norm(&d, &s, 1.0).unwrap();
        // per interior slice, the interface of slope m = height/period crosses
        // the midline; mismatch region = two triangles of legs (dh/2, dh/(2m))
        let slope = height / period;
        let tri = 2.0 * 0.5 * (dh / 2.0) * (dh / (2.0 * slope));
        let expect = 3.0 * tri * nslices as f64; // |J| = |1 - 4| = 3
        assert_relative_eq!(got, expect, max_relative = 1e-8);
    }

    #[test]
    fn error_norm_first_order_in_h_for_sinusoid() {
        let d = sinusoid_device(100.0);
        let mut pts = Vec::new();
        for &h in &[25.0, 12.5, 6.25, 3.125] {
            let s = build_slicing(&d, h).unwrap();
            let e = stairstep_error_norm(&d, &s, 1.0).unwrap();
            pts.push(((h as f64).ln(), e.ln()));
        }
        let n = pts.len() as f64;
        let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / n, sy / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
        assert!(
            (slope - 1.0).abs() < 0.1,
            "expected ~h^1 decay for q = 1, got slope {slope}"
        );
    }

    #[test]
    fn mandatory_boundaries_survive_random_interfaces() {
        // property: every extremum height of a random sine/polynomial
        // interface appears among the slicing boundaries
        let mut seed = 42u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..20 {
            let period = 100.0;
            let shape = if trial % 2 == 0 {
                SegmentShape::Sine {
                    offset: 10.0 * (next() - 0.5),
                    amplitude: 5.0 + 20.0 * next(),
                    angular_frequency: std::f64::consts::TAU / period * (1.0 + (3.0 * next()).floor()),
                    phase: std::f64::consts::TAU * next(),
                }
            } else {
                SegmentShape::Polynomial {
                    coeffs: vec![
                        20.0 * (next() - 0.5),
                        0.8 * (next() - 0.5),
                        0.02 * (next() - 0.5),
                        0.0002 * (next() - 0.5),
                    ],
                }
            };
            let g = InterfaceProfile::new(vec![Segment::new(0.0, period, shape)]).unwrap();
            let d = DeviceSpec::new(
                period,
                100.0,
                vec![g.clone()],
                vec![
                    RegionPermittivity::constant(2.0, 0.0),
                    RegionPermittivity::constant(1.0, 0.0),
                ],
                c(1.0),
                c(1.0),
            );
            let d = match d {
                Ok(d) => d,
                Err(_) => continue, // interface left the cell; skip
            };
            let s = match build_slicing(&d, 7.0) {
                Ok(s) => s,
                Err(_) => continue,
            };
            for hgt in g.mandatory_heights() {
                assert!(
                    s.boundaries.iter().any(|b| (b - hgt).abs() < 1e-7),
                    "trial {trial}: mandatory height {hgt} missing"
                );
            }
        }
    }

    #[test]
    fn translated_interface_evaluates_consistently() {
        let d = crate::presets::nonsymmetric_grating();
        let g = &d.interfaces[0];
        let shift = 123.456;
        let gt = g.translated(shift);
        for i in 0..97 {
            let x = d.period * i as f64 / 97.0;
            assert_relative_eq!(gt.eval(x), g.eval(x - shift), epsilon = 1e-9);
        }
    }
}
