//! Physical parameters, wall laws, grids and the fixed-wall eigenbasis.
//!
//! Everything is in atomic units unless the caller overrides `hbar`.
//! The well occupies `[-L(t)/2, L(t)/2]`; fields vanish at both ends.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad;

/// Speed of light in atomic units.
pub const SPEED_OF_LIGHT_AU: f64 = 137.035999;

/// Relative tolerance for the quadrature behind [`WallTrajectory::phase_integral`].
pub const PHASE_INTEGRAL_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalParams {
    pub mass: f64,
    pub hbar: f64,
    pub c: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            hbar: 1.0,
            c: SPEED_OF_LIGHT_AU,
        }
    }
}

impl PhysicalParams {
    pub fn new(mass: f64, hbar: f64, c: f64) -> Result<Self> {
        let p = Self { mass, hbar, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mass", self.mass), ("hbar", self.hbar), ("c", self.c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Boundary law `L(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WallTrajectory {
    Static { l0: f64 },
    Linear { l0: f64, q: f64 },
    SmoothTurnOn { l0: f64, q: f64, beta: f64 },
    /// Expands as `L0 + q t` up to `T/2`, then contracts as `L0 + q (T - t)`.
    PiecewiseReversal { l0: f64, q: f64, period: f64 },
}

/// Which side of a velocity discontinuity to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Before,
    After,
}

impl WallTrajectory {
    pub fn validate(&self) -> Result<()> {
        let l0 = self.l0();
        if !(l0.is_finite() && l0 > 0.0) {
            return Err(Error::InvalidParameter(format!("L0 must be positive, got {l0}")));
        }
        match *self {
            WallTrajectory::SmoothTurnOn { beta, q, .. } => {
                if !(beta.is_finite() && beta > 0.0) || !q.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "smooth turn-on needs finite q and beta > 0, got q = {q}, beta = {beta}"
                    )));
                }
            }
            WallTrajectory::PiecewiseReversal { period, q, .. } => {
                if !(period.is_finite() && period > 0.0) || !q.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "piecewise reversal needs finite q and T > 0, got q = {q}, T = {period}"
                    )));
                }
            }
            WallTrajectory::Linear { q, .. } if !q.is_finite() => {
                return Err(Error::InvalidParameter(format!("q must be finite, got {q}")));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn l0(&self) -> f64 {
        match *self {
            WallTrajectory::Static { l0 }
            | WallTrajectory::Linear { l0, .. }
            | WallTrajectory::SmoothTurnOn { l0, .. }
            | WallTrajectory::PiecewiseReversal { l0, .. } => l0,
        }
    }

    /// Asymptotic wall speed (zero for static walls).
    pub fn speed(&self) -> f64 {
        match *self {
            WallTrajectory::Static { .. } => 0.0,
            WallTrajectory::Linear { q, .. }
            | WallTrajectory::SmoothTurnOn { q, .. }
            | WallTrajectory::PiecewiseReversal { q, .. } => q,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WallTrajectory::Static { .. } => "static",
            WallTrajectory::Linear { .. } => "linear",
            WallTrajectory::SmoothTurnOn { .. } => "smooth-turn-on",
            WallTrajectory::PiecewiseReversal { .. } => "piecewise-reversal",
        }
    }

    /// Same law with the wall speed set to zero; used for static-wall controls
    /// that must share every other setting.
    pub fn with_speed(&self, new_q: f64) -> Self {
        let mut out = *self;
        match &mut out {
            WallTrajectory::Static { .. } => {}
            WallTrajectory::Linear { q, .. }
            | WallTrajectory::SmoothTurnOn { q, .. }
            | WallTrajectory::PiecewiseReversal { q, .. } => *q = new_q,
        }
        out
    }

    /// The smooth piece of the law in force at `t`, as a law valid for all
    /// times. Only the reversal law has more than one piece.
    pub fn smooth_piece(&self, t: f64) -> WallTrajectory {
        match *self {
            WallTrajectory::PiecewiseReversal { l0, q, period } => {
                if t < 0.5 * period {
                    WallTrajectory::Linear { l0, q }
                } else {
                    WallTrajectory::Linear { l0: l0 + q * period, q: -q }
                }
            }
            other => other,
        }
    }

    /// `L(t)` and `dL/dt` by the analytic formulas, without domain checks.
    /// Time-stepping schemes with negative substeps evaluate these slightly
    /// outside the simulated span, on a single smooth piece.
    pub(crate) fn continued(&self, t: f64) -> (f64, f64) {
        (self.raw_length(t), self.velocity_unchecked(t, Side::After))
    }

    fn raw_length(&self, t: f64) -> f64 {
        match *self {
            WallTrajectory::Static { l0 } => l0,
            WallTrajectory::Linear { l0, q } => l0 + q * t,
            WallTrajectory::SmoothTurnOn { l0, q, beta } => l0 - q * t * (-beta * t).exp_m1(),
            WallTrajectory::PiecewiseReversal { l0, q, period } => {
                if t <= 0.5 * period {
                    l0 + q * t
                } else {
                    l0 + q * (period - t)
                }
            }
        }
    }

    /// `L(t)`; fails if the wall has collapsed.
    pub fn length(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
        }
        let length = self.raw_length(t);
        if length > 0.0 {
            Ok(length)
        } else {
            Err(Error::WallCollapse { t, length })
        }
    }

    /// Analytic `dL/dt`. For the reversal law the value at exactly `T/2` is
    /// ambiguous and rejected; see [`WallTrajectory::velocity_one_sided`].
    pub fn velocity(&self, t: f64) -> Result<f64> {
        if let WallTrajectory::PiecewiseReversal { period, .. } = *self {
            if t == 0.5 * period {
                return Err(Error::VelocityJump { t });
            }
        }
        self.length(t)?;
        Ok(self.velocity_unchecked(t, Side::After))
    }

    pub fn velocity_one_sided(&self, t: f64, side: Side) -> Result<f64> {
        self.length(t)?;
        Ok(self.velocity_unchecked(t, side))
    }

    fn velocity_unchecked(&self, t: f64, side: Side) -> f64 {
        match *self {
            WallTrajectory::Static { .. } => 0.0,
            WallTrajectory::Linear { q, .. } => q,
            WallTrajectory::SmoothTurnOn { q, beta, .. } => {
                let e = (-beta * t).exp();
                // q (1 - e) + q beta t e, with 1 - e computed without cancellation
                -q * (-beta * t).exp_m1() + q * beta * t * e
            }
            WallTrajectory::PiecewiseReversal { q, period, .. } => {
                let half = 0.5 * period;
                if t < half || (t == half && side == Side::Before) {
                    q
                } else {
                    -q
                }
            }
        }
    }

    /// `∫_0^t L(t')^-2 dt'`.
    pub fn phase_integral(&self, t: f64) -> Result<f64> {
        let length = self.length(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        match *self {
            WallTrajectory::Static { l0 } => Ok(t / (l0 * l0)),
            WallTrajectory::Linear { l0, .. } => Ok(t / (l0 * length)),
            WallTrajectory::SmoothTurnOn { .. } => {
                quad::integrate(|s| self.raw_length(s).powi(-2), 0.0, t, PHASE_INTEGRAL_REL_TOL)
            }
            WallTrajectory::PiecewiseReversal { period, .. } => {
                let half = 0.5 * period;
                let f = |s: f64| self.raw_length(s).powi(-2);
                if t <= half {
                    quad::integrate(f, 0.0, t, PHASE_INTEGRAL_REL_TOL)
                } else {
                    // the law is only piecewise smooth: split at the kink
                    self.length(t)?;
                    Ok(quad::integrate(f, 0.0, half, PHASE_INTEGRAL_REL_TOL)?
                        + quad::integrate(f, half, t, PHASE_INTEGRAL_REL_TOL)?)
                }
            }
        }
    }

    /// Smallest width reached on `[t0, t1]`. All supported laws are monotone
    /// on each smooth piece, so the endpoints and the reversal time suffice.
    pub fn min_length(&self, t0: f64, t1: f64) -> Result<f64> {
        let mut m = self.length(t0)?.min(self.length(t1)?);
        if let WallTrajectory::PiecewiseReversal { period, .. } = *self {
            let half = 0.5 * period;
            if half > t0 && half < t1 {
                m = m.min(self.length(half)?);
            }
        }
        Ok(m)
    }
}

/// Which frame a grid samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// The moving box `[-L(t)/2, L(t)/2]` at time `t`.
    Physical { t: f64 },
    /// The fixed interval `[-L0/2, L0/2]` of the dilated problem.
    Transformed,
}

/// Uniform grid on `[-W/2, W/2]` with exact endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    half_width: f64,
    x: Vec<f64>,
    domain: Domain,
}

impl Grid {
    pub fn new(n_points: usize, width: f64, domain: Domain) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::InvalidParameter(format!("grid needs at least 3 points, got {n_points}")));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter(format!("grid width must be positive, got {width}")));
        }
        let h = width / (n_points - 1) as f64;
        let centre = 0.5 * (n_points - 1) as f64;
        // symmetric construction: x[i] == -x[n-1-i] bit for bit
        let mut x: Vec<f64> = (0..n_points).map(|i| h * (i as f64 - centre)).collect();
        x[0] = -0.5 * width;
        x[n_points - 1] = 0.5 * width;
        Ok(Self {
            half_width: 0.5 * width,
            x,
            domain,
        })
    }

    /// Grid of the fixed interval `[-L0/2, L0/2]`.
    pub fn transformed(n_points: usize, l0: f64) -> Result<Self> {
        Self::new(n_points, l0, Domain::Transformed)
    }

    /// Grid of the physical box at time `t`.
    pub fn physical(n_points: usize, traj: &WallTrajectory, t: f64) -> Result<Self> {
        Self::new(n_points, traj.length(t)?, Domain::Physical { t })
    }

    pub fn n_points(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.width() / (self.n_points() - 1) as f64
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// True when both grids sample the same interval with the same count.
    pub fn same_samples(&self, other: &Grid) -> bool {
        self.n_points() == other.n_points() && rel_eq(self.half_width, other.half_width, 1e-12)
    }

    pub fn spans(&self, length: f64) -> bool {
        rel_eq(self.width(), length, 1e-12)
    }
}

pub(crate) fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Complex samples of a wavefunction on a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: Grid,
    pub t: f64,
    pub samples: Vec<Complex64>,
}

impl WaveField {
    /// Builds a field and pins both endpoint samples to zero.
    pub fn new(grid: Grid, t: f64, mut samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}-point grid",
                samples.len(),
                grid.n_points()
            )));
        }
        let n = samples.len();
        samples[0] = Complex64::new(0.0, 0.0);
        samples[n - 1] = Complex64::new(0.0, 0.0);
        Ok(Self { grid, t, samples })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: Grid, t: f64, f: F) -> Result<Self> {
        let samples = grid.x().iter().map(|&x| f(x)).collect();
        Self::new(grid, t, samples)
    }

    pub fn norm_sqr(&self) -> f64 {
        simpson(&self.samples.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>(), self.grid.spacing())
    }

    pub fn scale(&mut self, factor: Complex64) {
        for s in &mut self.samples {
            *s *= factor;
        }
    }

    /// Largest pointwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &WaveField) -> Result<f64> {
        check_compatible(self, other)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Label of a fixed-wall eigenstate; `n` counts from zero within each parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisIndex {
    pub n: usize,
    pub parity: Parity,
}

impl BasisIndex {
    pub fn even(n: usize) -> Self {
        Self { n, parity: Parity::Even }
    }

    pub fn odd(n: usize) -> Self {
        Self { n, parity: Parity::Odd }
    }

    /// Wavenumber multiplier: `2n+1` (even) or `2(n+1)` (odd), in units of `π/L`.
    pub fn harmonic(&self) -> f64 {
        match self.parity {
            Parity::Even => (2 * self.n + 1) as f64,
            Parity::Odd => (2 * (self.n + 1)) as f64,
        }
    }

    /// Value of the eigenfunction at `x` in a box of width `length`.
    pub fn profile(&self, x: f64, length: f64) -> f64 {
        let arg = self.harmonic() * PI * x / length;
        let amp = (2.0 / length).sqrt();
        match self.parity {
            Parity::Even => amp * arg.cos(),
            Parity::Odd => amp * arg.sin(),
        }
    }
}

/// Fixed-wall eigenstate of a box of width `length`, sampled on `grid`.
pub fn eigenstate(idx: BasisIndex, length: f64, grid: &Grid) -> Result<WaveField> {
    if !grid.spans(length) {
        return Err(Error::GridMismatch(format!(
            "grid spans {} but the box has width {length}",
            grid.width()
        )));
    }
    WaveField::from_fn(grid.clone(), 0.0, |x| Complex64::new(idx.profile(x, length), 0.0))
        .map(|mut f| {
            if let Domain::Physical { t } = grid.domain() {
                f.t = t;
            }
            f
        })
}

/// Eigenvalue of [`eigenstate`]: `(kπħ)² / 2mL²` with `k` the harmonic.
pub fn eigenvalue(idx: BasisIndex, length: f64, params: &PhysicalParams) -> Result<f64> {
    if !(length > 0.0) {
        return Err(Error::InvalidParameter(format!("box width must be positive, got {length}")));
    }
    let k = idx.harmonic() * PI * params.hbar / length;
    Ok(k * k / (2.0 * params.mass))
}

fn check_compatible(a: &WaveField, b: &WaveField) -> Result<()> {
    if !a.grid.same_samples(&b.grid) {
        return Err(Error::GridMismatch(format!(
            "{} points on half-width {} vs {} points on half-width {}",
            a.grid.n_points(),
            a.grid.half_width(),
            b.grid.n_points(),
            b.grid.half_width()
        )));
    }
    if a.t != b.t {
        return Err(Error::GridMismatch(format!("time stamps differ: {} vs {}", a.t, b.t)));
    }
    Ok(())
}

/// `∫ a* b dx` by composite Simpson.
pub fn inner_product(a: &WaveField, b: &WaveField) -> Result<Complex64> {
    check_compatible(a, b)?;
    let h = a.grid.spacing();
    let w = simpson_weights(a.samples.len());
    Ok(a
        .samples
        .iter()
        .zip(&b.samples)
        .zip(&w)
        .map(|((x, y), &wi)| x.conj() * y * wi)
        .sum::<Complex64>()
        * h)
}

/// Trapezoid variant of [`inner_product`]; diagnostics only.
pub fn inner_product_trapezoid(a: &WaveField, b: &WaveField) -> Result<Complex64> {
    check_compatible(a, b)?;
    let n = a.samples.len();
    let h = a.grid.spacing();
    let mut s: Complex64 = a.samples.iter().zip(&b.samples).map(|(x, y)| x.conj() * y).sum();
    s -= 0.5 * (a.samples[0].conj() * b.samples[0] + a.samples[n - 1].conj() * b.samples[n - 1]);
    Ok(s * h)
}

/// Composite Simpson weights (in units of the spacing) for `n >= 3` uniform
/// samples. An even sample count leaves an odd number of intervals; the last
/// three intervals then use the 3/8 rule.
pub fn simpson_weights(n: usize) -> Vec<f64> {
    assert!(n >= 3, "Simpson needs at least three samples");
    let mut w = vec![0.0; n];
    let intervals = n - 1;
    let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    for i in (0..simpson_end).step_by(2) {
        w[i] += 1.0 / 3.0;
        w[i + 1] += 4.0 / 3.0;
        w[i + 2] += 1.0 / 3.0;
    }
    if simpson_end != intervals {
        let i = simpson_end;
        w[i] += 3.0 / 8.0;
        w[i + 1] += 9.0 / 8.0;
        w[i + 2] += 9.0 / 8.0;
        w[i + 3] += 3.0 / 8.0;
    }
    w
}

pub fn simpson(values: &[f64], h: f64) -> f64 {
    simpson_weights(values.len()).iter().zip(values).map(|(w, v)| w * v).sum::<f64>() * h
}
