//! Exact solutions for linearly moving walls.
//!
//! The moving-wall basis (even parity) evolves in closed form; a Gaussian
//! initial state sums to a single θ₂ evaluation. A static wall is treated as
//! the `q = 0` linear law.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{simpson_weights, Domain, Grid, Parity, PhysicalParams, WallTrajectory, WaveField};
use crate::theta::{self, ThetaArgument};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coefficients below this squared modulus terminate an expansion.
pub const TAIL_TOL: f64 = 1e-12;
pub const MAX_COEFFS: usize = 512;
/// `|ψ|` below this is treated as a node.
pub const NODE_GUARD: f64 = 1e-30;

/// A linear law `L(τ) = l0 + q τ` with local time `τ = t - t_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBranch {
    pub l0: f64,
    pub q: f64,
}

impl LinearBranch {
    pub fn from_trajectory(traj: &WallTrajectory, op: &'static str) -> Result<Self> {
        traj.validate()?;
        match *traj {
            WallTrajectory::Static { l0 } => Ok(Self { l0, q: 0.0 }),
            WallTrajectory::Linear { l0, q } => Ok(Self { l0, q }),
            _ => Err(Error::UnsupportedTrajectory { op, traj: traj.name() }),
        }
    }

    pub fn trajectory(&self) -> WallTrajectory {
        WallTrajectory::Linear { l0: self.l0, q: self.q }
    }

    pub fn length(&self, tau: f64) -> Result<f64> {
        self.trajectory().length(tau)
    }

    /// `∫_0^τ L⁻²`.
    pub fn phase_integral(&self, tau: f64) -> Result<f64> {
        Ok(tau / (self.l0 * self.length(tau)?))
    }
}

/// Harmonic `2n+1` of an even basis state.
fn harmonic(n: usize) -> f64 {
    (2 * n + 1) as f64
}

/// Time-dependent global phase `−ħπ²(2n+1)²Φ/2m` of basis state `n`.
fn basis_phase(n: usize, phi: f64, params: &PhysicalParams) -> f64 {
    let k = harmonic(n);
    -params.hbar * PI * PI * k * k * phi / (2.0 * params.mass)
}

/// Moving-wall basis state on the fixed interval, at `y ∈ [-l0/2, l0/2]`.
pub fn basis_tilde_at(n: usize, branch: LinearBranch, y: f64, tau: f64, params: &PhysicalParams) -> Result<Complex64> {
    let l = branch.length(tau)?;
    let phi = branch.phase_integral(tau)?;
    let chirp = params.mass * y * y * l * branch.q / (2.0 * params.hbar * branch.l0 * branch.l0);
    let amp = (2.0 / branch.l0).sqrt() * (harmonic(n) * PI * y / branch.l0).cos();
    Ok(Complex64::from_polar(amp, chirp + basis_phase(n, phi, params)))
}

/// Moving-wall basis state in the physical box, at `x ∈ [-L/2, L/2]`.
pub fn basis_physical_at(n: usize, branch: LinearBranch, x: f64, tau: f64, params: &PhysicalParams) -> Result<Complex64> {
    Ok(basis_physical_with_derivative(n, branch, x, tau, params)?.0)
}

/// Value and `∂/∂x` of [`basis_physical_at`].
pub fn basis_physical_with_derivative(
    n: usize,
    branch: LinearBranch,
    x: f64,
    tau: f64,
    params: &PhysicalParams,
) -> Result<(Complex64, Complex64)> {
    let l = branch.length(tau)?;
    let phi = branch.phase_integral(tau)?;
    let k = harmonic(n) * PI / l;
    let chirp_rate = params.mass * branch.q / (params.hbar * l);
    let phase = Complex64::from_polar((2.0 / l).sqrt(), 0.5 * chirp_rate * x * x + basis_phase(n, phi, params));
    let (s, c) = (k * x).sin_cos();
    let value = phase * c;
    let deriv = phase * (I * chirp_rate * x * c - k * s);
    Ok((value, deriv))
}

fn require_even(parity: Parity, op: &'static str) -> Result<()> {
    match parity {
        Parity::Even => Ok(()),
        Parity::Odd => Err(Error::OddParity(op)),
    }
}

fn require_transformed(grid: &Grid, l0: f64) -> Result<()> {
    if grid.domain() != Domain::Transformed || !grid.spans(l0) {
        return Err(Error::GridMismatch(format!(
            "expected a transformed grid of width {l0}, got {:?} of width {}",
            grid.domain(),
            grid.width()
        )));
    }
    Ok(())
}

fn require_physical(grid: &Grid, length: f64, t: f64) -> Result<()> {
    match grid.domain() {
        Domain::Physical { t: gt } if gt == t && grid.spans(length) => Ok(()),
        other => Err(Error::GridMismatch(format!(
            "expected a physical grid of width {length} at t = {t}, got {other:?} of width {}",
            grid.width()
        ))),
    }
}

/// Samples an even moving-wall basis state on the transformed grid.
pub fn basis_tilde(
    idx: crate::model::BasisIndex,
    traj: &WallTrajectory,
    t: f64,
    grid: &Grid,
    params: &PhysicalParams,
) -> Result<WaveField> {
    require_even(idx.parity, "basis_tilde")?;
    let branch = LinearBranch::from_trajectory(traj, "basis_tilde")?;
    require_transformed(grid, branch.l0)?;
    let samples = grid
        .x()
        .iter()
        .map(|&y| basis_tilde_at(idx.n, branch, y, t, params))
        .collect::<Result<Vec<_>>>()?;
    WaveField::new(grid.clone(), t, samples)
}

/// Samples an even moving-wall basis state on the physical grid at `t`.
pub fn basis_physical(
    idx: crate::model::BasisIndex,
    traj: &WallTrajectory,
    t: f64,
    grid: &Grid,
    params: &PhysicalParams,
) -> Result<WaveField> {
    require_even(idx.parity, "basis_physical")?;
    let branch = LinearBranch::from_trajectory(traj, "basis_physical")?;
    require_physical(grid, branch.length(t)?, t)?;
    let samples = grid
        .x()
        .iter()
        .map(|&x| basis_physical_at(idx.n, branch, x, t, params))
        .collect::<Result<Vec<_>>>()?;
    WaveField::new(grid.clone(), t, samples)
}

/// Expansion over the even moving-wall basis of one linear branch.
///
/// Entry `n` multiplies basis state `n` of `branch`; the branch's local time
/// is `t - t_ref`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoefficients {
    pub coeffs: Vec<Complex64>,
    pub parity: Parity,
    pub traj: WallTrajectory,
    pub t_ref: f64,
    pub params: PhysicalParams,
}

impl SpectralCoefficients {
    pub fn branch(&self) -> Result<LinearBranch> {
        LinearBranch::from_trajectory(&self.traj, "spectral coefficients")
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    fn local_time(&self, t: f64) -> Result<f64> {
        let tau = t - self.t_ref;
        if tau < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "t = {t} precedes the expansion time {}",
                self.t_ref
            )));
        }
        Ok(tau)
    }

    /// Width of the box at absolute time `t`.
    pub fn length(&self, t: f64) -> Result<f64> {
        self.branch()?.length(self.local_time(t)?)
    }

    /// `ψ(x, t)` and `∂ψ/∂x` in the physical box.
    pub fn eval_physical(&self, x: f64, t: f64) -> Result<(Complex64, Complex64)> {
        let branch = self.branch()?;
        let tau = self.local_time(t)?;
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for (n, c) in self.coeffs.iter().enumerate() {
            let (bv, bd) = basis_physical_with_derivative(n, branch, x, tau, &self.params)?;
            v += c * bv;
            d += c * bd;
        }
        Ok((v, d))
    }
}

/// Largest `|c|²` over the upper quarter of the coefficients; isolated zeros
/// in a sparse expansion would otherwise pass the tail test too early.
fn tail_size(coeffs: &[Complex64]) -> f64 {
    let start = coeffs.len() - coeffs.len().div_ceil(4);
    coeffs[start..].iter().map(|c| c.norm_sqr()).fold(0.0, f64::max)
}

/// Grows `n` from `n_start` (doubling, capped at [`MAX_COEFFS`]) until the
/// tail of `coeff(0..n)` is below [`TAIL_TOL`].
fn adaptive_expansion<F>(n_start: usize, total_weight: f64, coeff: F) -> Result<Vec<Complex64>>
where
    F: Fn(usize) -> Result<Complex64>,
{
    let mut n = n_start.clamp(4, MAX_COEFFS);
    let mut coeffs: Vec<Complex64> = Vec::with_capacity(n);
    loop {
        for k in coeffs.len()..n {
            coeffs.push(coeff(k)?);
        }
        let tail = tail_size(&coeffs);
        if tail <= TAIL_TOL {
            return Ok(coeffs);
        }
        if n == MAX_COEFFS {
            let captured: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
            return Err(Error::TailBound {
                cap: MAX_COEFFS,
                tail,
                missing: (total_weight - captured).max(0.0),
            });
        }
        n = (2 * n).min(MAX_COEFFS);
    }
}

/// Projects `psi0` (transformed grid, `t = 0`) onto the moving-wall basis.
pub fn expand_initial(
    psi0: &WaveField,
    traj: &WallTrajectory,
    n_start: usize,
    params: &PhysicalParams,
) -> Result<SpectralCoefficients> {
    let branch = LinearBranch::from_trajectory(traj, "expand_initial")?;
    require_transformed(&psi0.grid, branch.l0)?;
    if psi0.t != 0.0 {
        return Err(Error::InvalidParameter(format!("initial state must be at t = 0, got {}", psi0.t)));
    }
    let h = psi0.grid.spacing();
    let weights = simpson_weights(psi0.grid.n_points());
    let coeffs = adaptive_expansion(n_start, psi0.norm_sqr(), |n| {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((&y, &p), &w) in psi0.grid.x().iter().zip(&psi0.samples).zip(&weights) {
            acc += basis_tilde_at(n, branch, y, 0.0, params)?.conj() * p * w;
        }
        Ok(acc * h)
    })?;
    Ok(SpectralCoefficients {
        coeffs,
        parity: Parity::Even,
        traj: branch.trajectory(),
        t_ref: 0.0,
        params: *params,
    })
}

/// Width of the initial Gaussian `G(x, 0) = (2πd²)^{-1/4} e^{-x²/4d²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianParams {
    pub d: f64,
}

impl GaussianParams {
    pub fn new(d: f64) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParameter(format!("Gaussian width must be positive, got {d}")));
        }
        Ok(Self { d })
    }

    /// Rejects widths above a tenth of the box.
    pub fn check_localized(&self, l0: f64) -> Result<()> {
        if self.d > l0 / 10.0 {
            return Err(Error::Localization { d: self.d, limit: l0 / 10.0 });
        }
        Ok(())
    }

    pub fn normalization(&self) -> f64 {
        (2.0 * PI * self.d * self.d).powf(-0.25)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.normalization() * (-x * x / (4.0 * self.d * self.d)).exp()
    }
}

/// Closed-form evolution of the Gaussian under a linear branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianEvolution {
    pub gauss: GaussianParams,
    pub branch: LinearBranch,
    pub params: PhysicalParams,
    /// `1/4d² + imq/2ħL0`: the Gaussian exponent including the basis chirp.
    b: Complex64,
}

impl GaussianEvolution {
    pub fn new(gauss: GaussianParams, traj: &WallTrajectory, params: &PhysicalParams) -> Result<Self> {
        let branch = LinearBranch::from_trajectory(traj, "gaussian evolution")?;
        gauss.check_localized(branch.l0)?;
        let d2 = gauss.d * gauss.d;
        let b = Complex64::new(0.25 / d2, params.mass * branch.q / (2.0 * params.hbar * branch.l0));
        Ok(Self {
            gauss,
            branch,
            params: *params,
            b,
        })
    }

    /// Overlap of basis state `n` at `t = 0` with the Gaussian, taking the
    /// integral over the whole line.
    pub fn coefficient(&self, n: usize) -> Complex64 {
        let l0 = self.branch.l0;
        let k = harmonic(n) * PI / l0;
        (2.0 / l0).sqrt() * self.gauss.normalization() * (PI / self.b).sqrt() * (-k * k / (4.0 * self.b)).exp()
    }

    pub fn kappa(&self, t: f64) -> Result<Complex64> {
        let LinearBranch { l0, q } = self.branch;
        let PhysicalParams { mass: m, hbar, .. } = self.params;
        let d2 = self.gauss.d * self.gauss.d;
        let denom = l0 * Complex64::new(2.0 * d2 * m * q, -hbar * l0);
        let kappa = 4.0 * PI * hbar * d2 / denom - 2.0 * PI * hbar / m * self.branch.phase_integral(t)?;
        if !(kappa.im > 0.0) {
            return Err(Error::KappaDomain { re: kappa.re, im: kappa.im });
        }
        Ok(kappa)
    }

    pub fn theta_argument(&self, x: f64, t: f64) -> Result<ThetaArgument> {
        let z = Complex64::new(PI * x / self.branch.length(t)?, 0.0);
        ThetaArgument::new(z, self.kappa(t)?)
    }

    /// Logarithm of everything multiplying θ₂ in `ψ(x, t)`.
    fn log_prefactor(&self, x: f64, t: f64) -> Result<Complex64> {
        let l0 = self.branch.l0;
        let l = self.branch.length(t)?;
        let chirp = self.params.mass * self.branch.q * x * x / (2.0 * self.params.hbar * l);
        Ok(Complex64::new(0.5 * (l0 / l).ln() + (self.gauss.normalization() / l0).ln(), chirp)
            + 0.5 * (PI / self.b).ln())
    }

    /// `ψ(x, t)` through θ₂.
    pub fn eval(&self, x: f64, t: f64) -> Result<Complex64> {
        let arg = self.theta_argument(x, t)?;
        Ok(self.log_prefactor(x, t)?.exp() * theta::theta2(arg)?)
    }

    /// `ψ(x, t)` written as `exp(log_amplitude) · θ₄(z/κ, −1/κ)`, the form in
    /// which the dual series has collapsed to its leading term.
    pub fn reduced(&self, x: f64, t: f64) -> Result<(Complex64, Complex64)> {
        let arg = self.theta_argument(x, t)?;
        let (z, kappa) = (arg.z, arg.kappa);
        let log_amp = self.log_prefactor(x, t)? - I * z * z / (PI * kappa) - 0.5 * (-I * kappa).ln();
        let t4 = theta::theta4(ThetaArgument::new(z / kappa, arg.dual_kappa())?)?;
        Ok((log_amp, t4))
    }
}

/// Closed-form Gaussian coefficients, truncated by the tail rule.
pub fn gaussian_coefficients(
    g: GaussianParams,
    traj: &WallTrajectory,
    n_start: usize,
    params: &PhysicalParams,
) -> Result<SpectralCoefficients> {
    let evo = GaussianEvolution::new(g, traj, params)?;
    let coeffs = adaptive_expansion(n_start, 1.0, |n| Ok(evo.coefficient(n)))?;
    Ok(SpectralCoefficients {
        coeffs,
        parity: Parity::Even,
        traj: evo.branch.trajectory(),
        t_ref: 0.0,
        params: *params,
    })
}

/// `Σ c_n ψ_n(t)` on either a transformed or a physical grid.
pub fn propagate_spectral(coeffs: &SpectralCoefficients, t: f64, grid: &Grid) -> Result<WaveField> {
    let branch = coeffs.branch()?;
    let tau = coeffs.local_time(t)?;
    let params = &coeffs.params;
    let phi = branch.phase_integral(tau)?;
    let l = branch.length(tau)?;
    let (width, chirp_rate, amp) = match grid.domain() {
        Domain::Transformed => {
            require_transformed(grid, branch.l0)?;
            let rate = params.mass * l * branch.q / (params.hbar * branch.l0 * branch.l0);
            (branch.l0, rate, (2.0 / branch.l0).sqrt())
        }
        Domain::Physical { .. } => {
            require_physical(grid, l, t)?;
            (l, params.mass * branch.q / (params.hbar * l), (2.0 / l).sqrt())
        }
    };
    let phases: Vec<Complex64> = coeffs
        .coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| c * Complex64::from_polar(amp, basis_phase(n, phi, params)))
        .collect();
    let samples = grid
        .x()
        .iter()
        .map(|&x| {
            let theta = PI * x / width;
            // cos((2n+1)θ) by the Chebyshev recurrence in steps of 2θ
            let step = 2.0 * (2.0 * theta).cos();
            let (mut prev, mut cur) = (theta.cos(), (3.0 * theta).cos());
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, p) in phases.iter().enumerate() {
                let c = match n {
                    0 => prev,
                    1 => cur,
                    _ => {
                        let next = step * cur - prev;
                        prev = cur;
                        cur = next;
                        next
                    }
                };
                acc += p * c;
            }
            acc * Complex64::from_polar(1.0, 0.5 * chirp_rate * x * x)
        })
        .collect();
    WaveField::new(grid.clone(), t, samples)
}

/// `ψ(x, t)` of the evolved Gaussian sampled on a physical grid.
pub fn gaussian_closed_form(
    g: GaussianParams,
    traj: &WallTrajectory,
    t: f64,
    grid: &Grid,
    params: &PhysicalParams,
) -> Result<WaveField> {
    let evo = GaussianEvolution::new(g, traj, params)?;
    require_physical(grid, evo.branch.length(t)?, t)?;
    let samples = grid.x().iter().map(|&x| evo.eval(x, t)).collect::<Result<Vec<_>>>()?;
    WaveField::new(grid.clone(), t, samples)
}

/// `ψ(x,t;0)/ψ(x,t;q)` by two routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ratio {
    /// Quotient of the two θ₂ closed forms.
    pub theta2_form: Complex64,
    /// Quotient of prefactors in log space times the ratio of θ₄ factors.
    pub theta4_form: Complex64,
    /// `Im(−1/κ)` of the static and moving states.
    pub dual_im_static: f64,
    pub dual_im_moving: f64,
}

impl Ratio {
    pub fn route_gap(&self) -> f64 {
        (self.theta2_form - self.theta4_form).norm()
    }
}

/// Ratio of the static-wall to the moving-wall Gaussian at `(x, t)`.
pub fn ratio_static_moving(
    g: GaussianParams,
    traj: &WallTrajectory,
    x: f64,
    t: f64,
    params: &PhysicalParams,
) -> Result<Ratio> {
    let moving = GaussianEvolution::new(g, traj, params)?;
    let fixed = GaussianEvolution::new(g, &WallTrajectory::Static { l0: moving.branch.l0 }, params)?;
    let (psi_q, psi_0) = (moving.eval(x, t)?, fixed.eval(x, t)?);
    for psi in [psi_q, psi_0] {
        if psi.norm() < NODE_GUARD {
            return Err(Error::Node { x, magnitude: psi.norm() });
        }
    }
    let (la_q, t4_q) = moving.reduced(x, t)?;
    let (la_0, t4_0) = fixed.reduced(x, t)?;
    Ok(Ratio {
        theta2_form: psi_0 / psi_q,
        theta4_form: (la_0 - la_q).exp() * (t4_0 / t4_q),
        dual_im_static: (-1.0 / fixed.kappa(t)?).im,
        dual_im_moving: (-1.0 / moving.kappa(t)?).im,
    })
}

/// Sample count for the re-expansion quadrature at the reversal.
pub const REBASE_POINTS: usize = (1 << 15) + 1;

/// Re-expands the state at `T/2` in the contracting branch's basis.
///
/// The contracting branch is the linear law `L_m − q τ` with
/// `L_m = L0 + qT/2` and `τ = t − T/2`.
pub fn rebase_at_reversal(coeffs: &SpectralCoefficients, traj: &WallTrajectory) -> Result<SpectralCoefficients> {
    let WallTrajectory::PiecewiseReversal { l0, q, period } = *traj else {
        return Err(Error::UnsupportedTrajectory {
            op: "rebase_at_reversal",
            traj: traj.name(),
        });
    };
    traj.validate()?;
    let expanding = coeffs.branch()?;
    if coeffs.t_ref != 0.0 || expanding.l0 != l0 || expanding.q != q {
        return Err(Error::InvalidParameter(
            "coefficients must refer to the expanding branch from t = 0".into(),
        ));
    }
    let half = 0.5 * period;
    let lm = traj.length(half)?;
    let contracting = LinearBranch { l0: lm, q: -q };

    let grid = Grid::new(REBASE_POINTS, lm, Domain::Physical { t: half })?;
    let psi = propagate_spectral(coeffs, half, &grid)?;
    let h = grid.spacing();
    let weights = simpson_weights(grid.n_points());
    let params = coeffs.params;
    let new = adaptive_expansion(coeffs.coeffs.len(), psi.norm_sqr(), |n| {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((&x, &p), &w) in grid.x().iter().zip(&psi.samples).zip(&weights) {
            acc += basis_physical_at(n, contracting, x, 0.0, &params)?.conj() * p * w;
        }
        Ok(acc * h)
    })?;
    Ok(SpectralCoefficients {
        coeffs: new,
        parity: Parity::Even,
        traj: contracting.trajectory(),
        t_ref: half,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eigenstate, inner_product, BasisIndex};

    const L0: f64 = 100.0;
    const Q: f64 = 1e-4;

    fn p() -> PhysicalParams {
        PhysicalParams::default()
    }

    fn lin(q: f64) -> WallTrajectory {
        WallTrajectory::Linear { l0: L0, q }
    }

    #[test]
    fn basis_tilde_at_zero_is_chirped_cosine() {
        let g = Grid::transformed(257, L0).unwrap();
        let f = basis_tilde(BasisIndex::even(3), &lin(Q), 0.0, &g, &p()).unwrap();
        for (&y, v) in g.x().iter().zip(&f.samples).skip(1).take(255) {
            let expected = (2.0 / L0).sqrt()
                * Complex64::from_polar(1.0, Q * y * y / (2.0 * L0))
                * (7.0 * PI * y / L0).cos();
            assert!((v - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn static_limit_is_stationary_state() {
        let g = Grid::transformed(129, L0).unwrap();
        let t = 37.5;
        let f = basis_tilde(BasisIndex::even(2), &lin(0.0), t, &g, &p()).unwrap();
        let e = crate::model::eigenvalue(BasisIndex::even(2), L0, &p()).unwrap();
        let phi = eigenstate(BasisIndex::even(2), L0, &g).unwrap();
        for (a, b) in f.samples.iter().zip(&phi.samples) {
            assert!((a - b * Complex64::from_polar(1.0, -e * t)).norm() < 1e-14);
        }
    }

    #[test]
    fn odd_and_nonlinear_rejected() {
        let g = Grid::transformed(33, L0).unwrap();
        assert!(matches!(basis_tilde(BasisIndex::odd(0), &lin(Q), 0.0, &g, &p()), Err(Error::OddParity(_))));
        let smooth = WallTrajectory::SmoothTurnOn { l0: L0, q: Q, beta: 1e3 };
        assert!(matches!(
            basis_tilde(BasisIndex::even(0), &smooth, 0.0, &g, &p()),
            Err(Error::UnsupportedTrajectory { .. })
        ));
    }

    #[test]
    fn basis_physical_is_normalized() {
        for &t in &[0.0, 1e3, 1e5] {
            let l = lin(Q).length(t).unwrap();
            let g = Grid::new(4097, l, Domain::Physical { t }).unwrap();
            let f = basis_physical(BasisIndex::even(4), &lin(Q), t, &g, &p()).unwrap();
            assert!((f.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn basis_derivative_matches_finite_difference() {
        let b = LinearBranch { l0: L0, q: 1e-2 };
        for &x in &[-30.0, 0.0, 12.5, 41.0] {
            let (_, d) = basis_physical_with_derivative(3, b, x, 50.0, &p()).unwrap();
            let h = 1e-5;
            let fd = (basis_physical_at(3, b, x + h, 50.0, &p()).unwrap()
                - basis_physical_at(3, b, x - h, 50.0, &p()).unwrap())
                / (2.0 * h);
            assert!((d - fd).norm() < 1e-9, "{d} {fd}");
        }
    }

    #[test]
    fn expansion_of_basis_state_is_delta() {
        let g = Grid::transformed(4096, L0).unwrap();
        let psi0 = basis_tilde(BasisIndex::even(5), &lin(Q), 0.0, &g, &p()).unwrap();
        let c = expand_initial(&psi0, &lin(Q), 16, &p()).unwrap();
        for (n, v) in c.coeffs.iter().enumerate() {
            let expected = if n == 5 { 1.0 } else { 0.0 };
            assert!((v - expected).norm() < 1e-10, "{n} {v}");
        }
    }

    #[test]
    fn expansion_of_superposition() {
        let g = Grid::transformed(4096, L0).unwrap();
        let a = eigenstate(BasisIndex::even(10), L0, &g).unwrap();
        let b = eigenstate(BasisIndex::even(1), L0, &g).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let samples = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y) * s).collect();
        let psi0 = WaveField::new(g, 0.0, samples).unwrap();
        let c = expand_initial(&psi0, &lin(0.0), 8, &p()).unwrap();
        for (n, v) in c.coeffs.iter().enumerate() {
            let expected = match n {
                1 => -s,
                10 => s,
                _ => 0.0,
            };
            assert!((v - expected).norm() < 1e-10, "{n} {v}");
        }
    }

    #[test]
    fn gaussian_coefficients_match_quadrature() {
        let gp = GaussianParams::new(1.0).unwrap();
        let closed = gaussian_coefficients(gp, &lin(Q), 16, &p()).unwrap();
        let g = Grid::transformed(4096, L0).unwrap();
        let psi0 = WaveField::from_fn(g, 0.0, |y| Complex64::new(gp.eval(y), 0.0)).unwrap();
        let quad = expand_initial(&psi0, &lin(Q), 16, &p()).unwrap();
        let n = closed.coeffs.len().min(quad.coeffs.len());
        for k in 0..n {
            assert!((closed.coeffs[k] - quad.coeffs[k]).norm() < 1e-10, "{k}");
        }
        assert!((closed.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn static_gaussian_coefficients_are_real() {
        let c = gaussian_coefficients(GaussianParams::new(1.0).unwrap(), &lin(0.0), 16, &p()).unwrap();
        assert!(c.coeffs.iter().all(|v| v.im == 0.0 && v.re > 0.0));
    }

    #[test]
    fn localization_enforced() {
        assert!(matches!(
            gaussian_coefficients(GaussianParams::new(11.0).unwrap(), &lin(Q), 16, &p()),
            Err(Error::Localization { .. })
        ));
    }

    #[test]
    fn spectral_propagation_at_zero_reproduces_input() {
        let gp = GaussianParams::new(1.0).unwrap();
        let c = gaussian_coefficients(gp, &lin(Q), 16, &p()).unwrap();
        let g = Grid::transformed(4096, L0).unwrap();
        let psi = propagate_spectral(&c, 0.0, &g).unwrap();
        for (&y, v) in g.x().iter().zip(&psi.samples).skip(1).take(4094) {
            let expected = gp.eval(y);
            assert!((v - expected).norm() < 1e-8);
        }
    }

    #[test]
    fn single_coefficient_is_basis_state() {
        let c = SpectralCoefficients {
            coeffs: vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            parity: Parity::Even,
            traj: lin(Q),
            t_ref: 0.0,
            params: p(),
        };
        let t = 2500.0;
        let g = Grid::physical(1001, &lin(Q), t).unwrap();
        let a = propagate_spectral(&c, t, &g).unwrap();
        let b = basis_physical(BasisIndex::even(2), &lin(Q), t, &g, &p()).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-13);
    }

    #[test]
    fn closed_form_matches_spectral_sum() {
        let gp = GaussianParams::new(1.0).unwrap();
        for &q in &[0.0, 1e-4, -1e-3, 1e-2] {
            let c = gaussian_coefficients(gp, &lin(q), 16, &p()).unwrap();
            for &t in &[0.0, 3.0, 50.0, 1e3, 1e4] {
                let g = Grid::physical(801, &lin(q), t).unwrap();
                let a = propagate_spectral(&c, t, &g).unwrap();
                let b = gaussian_closed_form(gp, &lin(q), t, &g, &p()).unwrap();
                let err = a.max_abs_diff(&b).unwrap();
                assert!(err < 1e-8, "q={q} t={t} err={err}");
            }
        }
    }

    #[test]
    fn closed_form_at_zero_is_initial_gaussian() {
        let gp = GaussianParams::new(1.0).unwrap();
        let g = Grid::physical(2001, &lin(Q), 0.0).unwrap();
        let psi = gaussian_closed_form(gp, &lin(Q), 0.0, &g, &p()).unwrap();
        for (&x, v) in g.x().iter().zip(&psi.samples) {
            assert!((v - gp.eval(x)).norm() < 1e-8);
        }
    }

    #[test]
    fn kappa_examples() {
        let gp = GaussianParams::new(1.0).unwrap();
        let fixed = GaussianEvolution::new(gp, &lin(0.0), &p()).unwrap();
        let k = fixed.kappa(0.0).unwrap();
        assert!(k.re.abs() < 1e-18);
        assert!((k.im - 4.0 * PI / (L0 * L0)).abs() < 1e-16);

        let moving = GaussianEvolution::new(gp, &lin(Q), &p()).unwrap();
        let dual = (-1.0 / moving.kappa(0.0).unwrap()).im;
        assert!((dual - 1e4 / (4.0 * PI)).abs() < 1e-6 * dual);
        assert_eq!(moving.theta_argument(0.0, 10.0).unwrap().z, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn ratio_routes_agree_in_localized_regime() {
        let gp = GaussianParams::new(1.0).unwrap();
        for &t in &[0.0, 1.0, 10.0] {
            for &x in &[-5.0, 0.0, 2.5, 8.0] {
                let r = ratio_static_moving(gp, &lin(Q), x, t, &p()).unwrap();
                assert!(r.route_gap() < 1e-12, "{x} {t} {r:?}");
                assert!((r.theta4_form - 1.0).norm() < 1e-8, "{x} {t} {r:?}");
            }
        }
        let same = ratio_static_moving(gp, &lin(0.0), 3.0, 5.0, &p()).unwrap();
        assert_eq!(same.theta2_form, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn ratio_rejects_nodes() {
        let gp = GaussianParams::new(1.0).unwrap();
        assert!(matches!(
            ratio_static_moving(gp, &lin(Q), 30.0, 0.0, &p()),
            Err(Error::Node { .. })
        ));
    }

    #[test]
    fn rebase_mixes_and_preserves_norm() {
        let traj = WallTrajectory::PiecewiseReversal { l0: L0, q: Q, period: 2e4 };
        let c = SpectralCoefficients {
            coeffs: vec![Complex64::new(1.0, 0.0)],
            parity: Parity::Even,
            traj: lin(Q),
            t_ref: 0.0,
            params: p(),
        };
        let r = rebase_at_reversal(&c, &traj).unwrap();
        assert!((r.norm_sqr() - 1.0).abs() < 1e-8, "{}", r.norm_sqr());
        assert!(r.coeffs[0].norm() < 1.0);
        assert!(r.coeffs.iter().filter(|v| v.norm() > 1e-6).count() > 1);
    }

    #[test]
    fn rebase_is_trivial_without_motion() {
        let traj = WallTrajectory::PiecewiseReversal { l0: L0, q: 0.0, period: 100.0 };
        let c = SpectralCoefficients {
            coeffs: vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)],
            parity: Parity::Even,
            traj: lin(0.0),
            t_ref: 0.0,
            params: p(),
        };
        let r = rebase_at_reversal(&c, &traj).unwrap();
        for (n, v) in r.coeffs.iter().enumerate() {
            let e = crate::model::eigenvalue(BasisIndex::even(n), L0, &p()).unwrap();
            let expected = c.coeffs.get(n).copied().unwrap_or_default() * Complex64::from_polar(1.0, -e * 50.0);
            assert!((v - expected).norm() < 1e-10, "{n}");
        }
        // after the kink the two descriptions coincide
        let g = Grid::physical(501, &traj, 80.0).unwrap();
        let g0 = Grid::new(501, L0, Domain::Physical { t: 80.0 }).unwrap();
        let a = propagate_spectral(&r, 80.0, &g).unwrap();
        let b = propagate_spectral(&c, 80.0, &g0).unwrap();
        assert!(a.max_abs_diff(&WaveField { grid: g.clone(), ..b }).unwrap() < 1e-10);
    }

    #[test]
    fn inner_product_of_basis_states_stays_orthonormal() {
        let t = 4000.0;
        let g = Grid::physical(4096, &lin(Q), t).unwrap();
        let a = basis_physical(BasisIndex::even(0), &lin(Q), t, &g, &p()).unwrap();
        let b = basis_physical(BasisIndex::even(3), &lin(Q), t, &g, &p()).unwrap();
        assert!(inner_product(&a, &b).unwrap().norm() < 1e-10);
    }
}
