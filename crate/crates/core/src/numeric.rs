//! Finite-difference propagation on the dilated fixed domain.
//!
//! With `y = L0 x / L(t)` and `ψ(x,t) = √(L0/L) ψ̃(y,t)` the moving box maps to
//! `[-L0/2, L0/2]` and
//!
//! ```text
//! iħ ∂t ψ̃ = −(ħ²/2m)(L0/L)² ∂y² ψ̃ + iħ (L̇/L)(y ∂y + ½) ψ̃.
//! ```
//!
//! The Laplacian uses a sixth-order stencil and the dilation term a
//! fourth-order one, both closed at the walls by odd reflection. The
//! dilation matrix is antisymmetrized so the discrete generator is exactly
//! Hermitian. Each substep is a Cayley (implicit midpoint) step with
//! coefficients taken at the substep's midpoint time; higher orders in time
//! come from symmetric compositions of that step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp;
use crate::model::{Domain, Grid, PhysicalParams, WallTrajectory, WaveField};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Half bandwidth of both stencils.
const BW: usize = 3;
const WIDTH: usize = 2 * BW + 1;

/// Sixth-order second-derivative stencil, offsets 0..=3 (times 1/h²).
const LAP: [f64; 4] = [-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
/// Fourth-order first-derivative stencil, offsets 1..=2 (times 1/h).
const GRAD: [f64; 2] = [2.0 / 3.0, -1.0 / 12.0];
/// Largest magnitude of the Laplacian stencil's symbol (times 1/h²).
pub const LAP_SYMBOL_MAX: f64 = 49.0 / 18.0 + 3.0 + 0.3 + 1.0 / 45.0;

/// Norm drift that aborts a propagation.
pub const NORM_ABORT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// One Cayley step per time step: second order in time.
    Midpoint,
    /// Five-stage symmetric composition: fourth order.
    Suzuki4,
    /// Seven-stage symmetric composition: sixth order.
    Yoshida6,
}

impl Scheme {
    pub fn weights(&self) -> Vec<f64> {
        match self {
            Scheme::Midpoint => vec![1.0],
            Scheme::Suzuki4 => {
                let p = 1.0 / (4.0 - 4f64.cbrt());
                vec![p, p, 1.0 - 4.0 * p, p, p]
            }
            Scheme::Yoshida6 => {
                let (w1, w2, w3) = (0.784_513_610_477_560, 0.235_573_213_359_357, -1.177_679_984_178_87);
                let w0 = 1.0 - 2.0 * (w1 + w2 + w3);
                vec![w3, w2, w1, w0, w1, w2, w3]
            }
        }
    }

    pub fn order(&self) -> u32 {
        match self {
            Scheme::Midpoint => 2,
            Scheme::Suzuki4 => 4,
            Scheme::Yoshida6 => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub n_points: usize,
    pub scheme: Scheme,
}

/// Midpoint stepping on 4096 points; `dt` sits inside the step-size rule
/// for a box of width 100 with unit mass.
impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: 5e-5,
            n_points: 4096,
            scheme: Scheme::Midpoint,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_points < 16 {
            return Err(Error::InvalidParameter(format!(
                "the propagator needs at least 16 grid points, got {}",
                self.n_points
            )));
        }
        Ok(())
    }
}

/// Largest kinetic eigenvalue the grid can represent while the box is at
/// its narrowest on `[t0, t1]`.
pub fn max_kinetic_energy(traj: &WallTrajectory, grid: &Grid, t0: f64, t1: f64, params: &PhysicalParams) -> Result<f64> {
    let scale = traj.l0() / traj.min_length(t0, t1)?;
    let h = grid.spacing();
    Ok(params.hbar * params.hbar / (2.0 * params.mass) * scale * scale * LAP_SYMBOL_MAX / (h * h))
}

/// Rejects `dt` with `dt · E_max / ħ ≥ 0.5`.
pub fn check_cfl(dt: f64, e_max: f64, params: &PhysicalParams) -> Result<()> {
    if dt * e_max / params.hbar >= 0.5 {
        return Err(Error::Cfl { dt, e_max });
    }
    Ok(())
}

/// Real band matrix over the interior unknowns, row-major with `WIDTH`
/// entries per row; entry `(r, c)` lives at `r * WIDTH + c + BW - r`.
#[derive(Debug, Clone)]
struct RealBand {
    m: usize,
    data: Vec<f64>,
}

impl RealBand {
    fn zeros(m: usize) -> Self {
        Self { m, data: vec![0.0; m * WIDTH] }
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * WIDTH + c + BW - r] += v;
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        if c + BW < r || c > r + BW {
            0.0
        } else {
            self.data[r * WIDTH + c + BW - r]
        }
    }

    /// `(self ± selfᵀ)/2`.
    fn symmetrized(&self, sign: f64) -> Self {
        let mut out = Self::zeros(self.m);
        for r in 0..self.m {
            for c in r.saturating_sub(BW)..(r + BW + 1).min(self.m) {
                out.add(r, c, 0.5 * (self.get(r, c) + sign * self.get(c, r)));
            }
        }
        out
    }

    /// `y += alpha · A x`.
    fn mul_add(&self, alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        let m = self.m;
        for r in 0..m {
            let row = &self.data[r * WIDTH..(r + 1) * WIDTH];
            let lo = r.saturating_sub(BW);
            let hi = (r + BW + 1).min(m);
            let mut acc = ZERO;
            for c in lo..hi {
                acc += row[c + BW - r] * x[c];
            }
            y[r] += alpha * acc;
        }
    }
}

/// Maps a stencil neighbour `j` (full-grid index, possibly a ghost) to an
/// interior unknown and a sign, or `None` for a wall node.
fn fold(j: isize, n: usize) -> Option<(usize, f64)> {
    let last = n as isize - 1;
    let (k, sign) = if j < 0 {
        (-j, -1.0)
    } else if j > last {
        (2 * last - j, -1.0)
    } else {
        (j, 1.0)
    };
    if k <= 0 || k >= last {
        None
    } else {
        Some(((k - 1) as usize, sign))
    }
}

/// The two spatial operators on the interior of a transformed grid.
#[derive(Debug, Clone)]
struct Stencils {
    /// `∂y²`, symmetric.
    lap: RealBand,
    /// `y ∂y + ½`, antisymmetric.
    dil: RealBand,
}

impl Stencils {
    fn new(grid: &Grid) -> Self {
        let n = grid.n_points();
        let m = n - 2;
        let h = grid.spacing();
        let y0 = grid.x()[0];
        let pos = |j: isize| y0 + j as f64 * h;
        let mut lap = RealBand::zeros(m);
        let mut grad_y = RealBand::zeros(m);
        for i in 1..n - 1 {
            let r = i - 1;
            let ii = i as isize;
            lap.add(r, r, LAP[0] / (h * h));
            for (k, &c) in LAP.iter().enumerate().skip(1) {
                for j in [ii - k as isize, ii + k as isize] {
                    if let Some((col, s)) = fold(j, n) {
                        lap.add(r, col, s * c / (h * h));
                    }
                }
            }
            // symmetric product ½(y∂ + ∂y): entry c_k (y_i + y_j)/2
            let yi = grid.x()[i];
            for (k, &c) in GRAD.iter().enumerate() {
                let off = k as isize + 1;
                for (j, sgn) in [(ii + off, 1.0), (ii - off, -1.0)] {
                    if let Some((col, s)) = fold(j, n) {
                        grad_y.add(r, col, s * sgn * c / h * 0.5 * (yi + pos(j)));
                    }
                }
            }
        }
        Self {
            lap: lap.symmetrized(1.0),
            dil: grad_y.symmetrized(-1.0),
        }
    }

    /// Restriction to states of definite parity (`sign` = +1 even, −1 odd)
    /// on a grid with an even number of points: the unknowns are the
    /// interior samples right of the centre, and columns left of it fold onto
    /// their mirror images.
    fn folded(&self, sign: f64) -> Self {
        let m = self.lap.m;
        let n = m + 2;
        debug_assert!(n.is_multiple_of(2));
        let half = n / 2;
        let mh = half - 1;
        let fold_band = |band: &RealBand| {
            let mut out = RealBand::zeros(mh);
            for hr in 0..mh {
                let r = hr + half - 1;
                for c in r.saturating_sub(BW)..(r + BW + 1).min(m) {
                    let v = band.get(r, c);
                    if v == 0.0 {
                        continue;
                    }
                    let i_c = c + 1;
                    if i_c >= half {
                        out.add(hr, i_c - half, v);
                    } else {
                        out.add(hr, n - 1 - i_c - half, sign * v);
                    }
                }
            }
            out
        };
        Self {
            lap: fold_band(&self.lap),
            dil: fold_band(&self.dil),
        }
    }
}

/// `Some(±1)` when every state is even (+1) or every state is odd (−1)
/// about the centre of a grid with an even number of points.
fn common_parity(states: &[WaveField]) -> Option<f64> {
    let n = states.first()?.grid.n_points();
    if n % 2 != 0 {
        return None;
    }
    let sym = |f: &WaveField, sign: f64| {
        let scale = f.samples.iter().map(|c| c.norm()).fold(0.0, f64::max);
        (0..n / 2).all(|i| (f.samples[i] - sign * f.samples[n - 1 - i]).norm() <= 1e-13 * scale)
    };
    [1.0, -1.0].into_iter().find(|&sign| states.iter().all(|f| sym(f, sign)))
}

/// Instantaneous generator `H̃(t)` of the transformed problem.
#[derive(Debug, Clone)]
pub struct TransformedOperator {
    /// `(L0/L)² ħ²/2m`.
    pub kinetic: f64,
    /// `L̇/L`.
    pub dilation: f64,
    pub grid: Grid,
    pub t: f64,
    hbar: f64,
    stencils: Stencils,
}

impl TransformedOperator {
    pub fn new(traj: &WallTrajectory, t: f64, grid: &Grid, params: &PhysicalParams) -> Result<Self> {
        check_transformed(grid, traj)?;
        let (l, ldot) = coefficients_at(traj, t)?;
        Ok(Self {
            kinetic: kinetic_coefficient(traj.l0(), l, params),
            dilation: ldot / l,
            grid: grid.clone(),
            t,
            hbar: params.hbar,
            stencils: Stencils::new(grid),
        })
    }

    /// `H̃ψ̃`; the wall samples of the result are zero.
    pub fn apply(&self, psi: &WaveField) -> Result<WaveField> {
        if !psi.grid.same_samples(&self.grid) {
            return Err(Error::GridMismatch("operator and field grids differ".into()));
        }
        let n = self.grid.n_points();
        let x = &psi.samples[1..n - 1];
        let mut out = vec![ZERO; n];
        let y = &mut out[1..n - 1];
        self.stencils.lap.mul_add(Complex64::new(-self.kinetic, 0.0), x, y);
        self.stencils.dil.mul_add(I * self.hbar * self.dilation, x, y);
        WaveField::new(psi.grid.clone(), psi.t, out)
    }

    /// `⟨a|H̃b⟩` in the grid's Euclidean inner product (times the spacing).
    pub fn matrix_element(&self, a: &WaveField, b: &WaveField) -> Result<Complex64> {
        let hb = self.apply(b)?;
        let h = self.grid.spacing();
        Ok(a.samples.iter().zip(&hb.samples).map(|(x, y)| x.conj() * y).sum::<Complex64>() * h)
    }

    /// `⟨a|(y∂ + ½) b⟩` with the discrete dilation operator.
    pub fn dilation_element(&self, a: &WaveField, b: &WaveField) -> Result<Complex64> {
        let n = self.grid.n_points();
        let mut db = vec![ZERO; n - 2];
        self.stencils.dil.mul_add(Complex64::new(1.0, 0.0), &b.samples[1..n - 1], &mut db);
        let h = self.grid.spacing();
        Ok(a.samples[1..n - 1].iter().zip(&db).map(|(x, y)| x.conj() * y).sum::<Complex64>() * h)
    }
}

fn kinetic_coefficient(l0: f64, l: f64, params: &PhysicalParams) -> f64 {
    let s = l0 / l;
    s * s * params.hbar * params.hbar / (2.0 * params.mass)
}

/// `L` and `L̇` at `t`; at the reversal instant the post-reversal velocity.
fn coefficients_at(traj: &WallTrajectory, t: f64) -> Result<(f64, f64)> {
    let l = traj.length(t)?;
    let ldot = traj.velocity_one_sided(t, crate::model::Side::After)?;
    Ok((l, ldot))
}

fn check_transformed(grid: &Grid, traj: &WallTrajectory) -> Result<()> {
    if grid.domain() != Domain::Transformed || !grid.spans(traj.l0()) {
        return Err(Error::GridMismatch(format!(
            "expected a transformed grid of width {}, got {:?} of width {}",
            traj.l0(),
            grid.domain(),
            grid.width()
        )));
    }
    Ok(())
}

/// `H̃ψ̃` at time `t`: the right-hand side of `iħ ∂t ψ̃ = H̃ ψ̃`.
pub fn transformed_rhs(psi: &WaveField, traj: &WallTrajectory, t: f64, params: &PhysicalParams) -> Result<WaveField> {
    TransformedOperator::new(traj, t, &psi.grid, params)?.apply(psi)
}

/// One Cayley substep `(I − B) ψ' = (I + B) ψ` with `B = i a ∂y² + b D`,
/// factored by band LU without pivoting. The Hermitian part of `I − B` is the
/// identity, so every leading minor is nonsingular.
#[derive(Debug, Clone)]
struct CayleySolver {
    /// `B` row by row; later overwritten by the LU factors of `I − B`.
    b: Vec<[Complex64; WIDTH]>,
    lu: Vec<[Complex64; WIDTH]>,
    inv_diag: Vec<Complex64>,
}

impl CayleySolver {
    fn new(m: usize) -> Self {
        Self {
            b: vec![[ZERO; WIDTH]; m],
            lu: vec![[ZERO; WIDTH]; m],
            inv_diag: vec![ZERO; m],
        }
    }

    fn resize(&mut self, m: usize) {
        if self.b.len() != m {
            *self = Self::new(m);
        }
    }

    fn factor(&mut self, st: &Stencils, a: f64, b: f64) -> Result<()> {
        let m = self.b.len();
        debug_assert_eq!(m, st.lap.m);
        for r in 0..m {
            let lap = &st.lap.data[r * WIDTH..(r + 1) * WIDTH];
            let dil = &st.dil.data[r * WIDTH..(r + 1) * WIDTH];
            let row = &mut self.b[r];
            let out = &mut self.lu[r];
            for o in 0..WIDTH {
                row[o] = Complex64::new(b * dil[o], a * lap[o]);
                out[o] = -row[o];
            }
            out[BW] += 1.0;
        }
        for k in 0..m {
            let piv = self.lu[k][BW];
            if piv.norm_sqr() == 0.0 || !piv.is_finite() {
                return Err(Error::Solve { row: k });
            }
            let inv = piv.inv();
            self.inv_diag[k] = inv;
            let hi = (k + BW + 1).min(m);
            let (head, tail) = self.lu.split_at_mut(k + 1);
            let pivot_row = &head[k];
            for (d, row) in tail[..hi - k - 1].iter_mut().enumerate() {
                // row i = k + 1 + d holds column k at offset BW - (d + 1)
                let off = BW - d - 1;
                let l = row[off] * inv;
                row[off] = l;
                for e in 1..=BW {
                    row[off + e] -= l * pivot_row[BW + e];
                }
            }
        }
        Ok(())
    }

    /// Overwrites `x` with `(I − B)⁻¹ (I + B) x`, using `work` as scratch.
    fn step(&self, x: &mut [Complex64], work: &mut [Complex64]) {
        let m = x.len();
        for r in 0..m {
            let row = &self.b[r];
            let mut acc = x[r];
            let lo = r.saturating_sub(BW);
            let hi = (r + BW + 1).min(m);
            for c in lo..hi {
                acc += row[c + BW - r] * x[c];
            }
            work[r] = acc;
        }
        for i in 1..m {
            let row = &self.lu[i];
            let mut acc = work[i];
            for k in i.saturating_sub(BW)..i {
                acc -= row[k + BW - i] * work[k];
            }
            work[i] = acc;
        }
        for i in (0..m).rev() {
            let row = &self.lu[i];
            let mut acc = work[i];
            for j in i + 1..(i + BW + 1).min(m) {
                acc -= row[j + BW - i] * work[j];
            }
            work[i] = acc * self.inv_diag[i];
        }
        x.copy_from_slice(work);
    }
}

/// Summary of a finished propagation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PropagationStats {
    pub steps: usize,
    pub substeps: usize,
    /// Largest `|‖ψ‖² / ‖ψ0‖² − 1|` seen over all states and steps.
    pub max_norm_drift: f64,
    pub t_final: f64,
}

/// Time stepper for any number of states sharing one transformed grid.
#[derive(Debug, Clone)]
pub struct Propagator {
    traj: WallTrajectory,
    params: PhysicalParams,
    cfg: PropagatorConfig,
    grid: Grid,
    stencils: Stencils,
    /// Parity-restricted stencils, built on first use.
    folded: Option<(f64, Stencils)>,
    solver: CayleySolver,
    weights: Vec<f64>,
    work: Vec<Complex64>,
}

impl Propagator {
    pub fn new(traj: &WallTrajectory, grid: &Grid, cfg: &PropagatorConfig, params: &PhysicalParams) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        traj.validate()?;
        check_transformed(grid, traj)?;
        if grid.n_points() != cfg.n_points {
            return Err(Error::GridMismatch(format!(
                "configured for {} points, grid has {}",
                cfg.n_points,
                grid.n_points()
            )));
        }
        let m = grid.n_points() - 2;
        Ok(Self {
            traj: *traj,
            params: *params,
            cfg: *cfg,
            grid: grid.clone(),
            stencils: Stencils::new(grid),
            folded: None,
            solver: CayleySolver::new(m),
            weights: cfg.scheme.weights(),
            work: vec![ZERO; m],
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Applies the step-size sanity rule. Only the single-stage scheme is
    /// subject to it; the composed schemes are used deliberately with steps
    /// far above it, their accuracy resting on the smoothness of the state.
    pub fn check_step(&self, t0: f64, t1: f64) -> Result<()> {
        if self.cfg.scheme == Scheme::Midpoint {
            let e_max = max_kinetic_energy(&self.traj, &self.grid, t0, t1, &self.params)?;
            check_cfl(self.cfg.dt, e_max, &self.params)?;
        }
        Ok(())
    }

    /// One composed step of size `h` from `t` for every state. With a
    /// `parity` sign only the right half is evolved and then mirrored.
    fn step(&mut self, states: &mut [WaveField], t: f64, h: f64, parity: Option<f64>) -> Result<()> {
        // all substeps use the smooth piece of the law that contains the step
        let piece = self.traj.smooth_piece(t + 0.5 * h);
        let l0 = self.traj.l0();
        let n = self.grid.n_points();
        let (stencils, range) = match (parity, &self.folded) {
            (Some(_), Some((_, folded))) => (folded, n / 2..n - 1),
            _ => (&self.stencils, 1..n - 1),
        };
        self.solver.resize(range.len());
        let work = &mut self.work[..range.len()];
        let mut s = t;
        for &w in &self.weights {
            let sub = w * h;
            let mid = s + 0.5 * sub;
            let (l, ldot) = piece.continued(mid);
            if !(l > 0.0) {
                return Err(Error::WallCollapse { t: mid, length: l });
            }
            let a = sub * kinetic_coefficient(l0, l, &self.params) / (2.0 * self.params.hbar);
            let b = 0.5 * sub * ldot / l;
            self.solver.factor(stencils, a, b)?;
            for st in states.iter_mut() {
                self.solver.step(&mut st.samples[range.clone()], work);
            }
            s += sub;
        }
        if let Some(sign) = parity {
            for st in states.iter_mut() {
                for i in 1..n / 2 {
                    st.samples[i] = sign * st.samples[n - 1 - i];
                }
            }
        }
        Ok(())
    }

    /// Advances every state from their common time to each of `times` in
    /// turn, landing exactly on each, and calls `visit` there.
    pub fn run<F>(&mut self, states: &mut [WaveField], times: &[f64], mut visit: F) -> Result<PropagationStats>
    where
        F: FnMut(&[WaveField]) -> Result<()>,
    {
        let Some(first) = states.first() else {
            return Err(Error::InvalidParameter("no states to propagate".into()));
        };
        let t0 = first.t;
        for st in states.iter() {
            if !st.grid.same_samples(&self.grid) || st.grid.domain() != Domain::Transformed {
                return Err(Error::GridMismatch("state is not on the propagator's grid".into()));
            }
            if st.t != t0 {
                return Err(Error::InvalidParameter("states must share a time stamp".into()));
            }
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < t0) {
            return Err(Error::InvalidParameter("output times must be sorted and not precede the start".into()));
        }
        if let Some(&t_end) = times.last() {
            self.check_step(t0, t_end)?;
        }

        // extra landing points where the law is not smooth
        let mut kinks = Vec::new();
        if let WallTrajectory::PiecewiseReversal { period, .. } = self.traj {
            kinks.push(0.5 * period);
        }

        let parity = common_parity(states);
        if let Some(sign) = parity {
            if self.folded.as_ref().is_none_or(|(s, _)| *s != sign) {
                self.folded = Some((sign, self.stencils.folded(sign)));
            }
        }

        let norms0: Vec<f64> = states.iter().map(euclidean_norm_sqr).collect();
        let mut stats = PropagationStats {
            t_final: t0,
            ..Default::default()
        };
        let mut t = t0;
        for &target in times {
            let mut stops: Vec<f64> = kinks.iter().copied().filter(|&k| k > t && k < target).collect();
            stops.push(target);
            for stop in stops {
                let span = stop - t;
                if span > 0.0 {
                    let n_steps = ((span / self.cfg.dt) - 1e-9).ceil().max(1.0) as usize;
                    let h = span / n_steps as f64;
                    for k in 0..n_steps {
                        let ts = t + k as f64 * h;
                        self.step(states, ts, h, parity)?;
                        stats.steps += 1;
                        stats.substeps += self.weights.len();
                        for (st, &n0) in states.iter().zip(&norms0) {
                            let drift = (euclidean_norm_sqr(st) / n0 - 1.0).abs();
                            stats.max_norm_drift = stats.max_norm_drift.max(drift);
                            if drift > NORM_ABORT {
                                return Err(Error::NormDrift {
                                    t: ts + h,
                                    drift,
                                    limit: NORM_ABORT,
                                });
                            }
                        }
                    }
                }
                t = stop;
                for st in states.iter_mut() {
                    st.t = stop;
                }
            }
            stats.t_final = t;
            visit(states)?;
        }
        Ok(stats)
    }
}

/// `h Σ|ψ|²`: the quantity the Cayley step conserves exactly.
fn euclidean_norm_sqr(f: &WaveField) -> f64 {
    f.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() * f.grid.spacing()
}

/// Propagates one state from `t0` to `t1`.
pub fn propagate_numeric(
    psi0: &WaveField,
    traj: &WallTrajectory,
    t0: f64,
    t1: f64,
    cfg: &PropagatorConfig,
    params: &PhysicalParams,
) -> Result<(WaveField, PropagationStats)> {
    if psi0.t != t0 {
        return Err(Error::InvalidParameter(format!("state is at t = {}, not t0 = {t0}", psi0.t)));
    }
    if t1 < t0 {
        return Err(Error::InvalidParameter(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    let mut prop = Propagator::new(traj, &psi0.grid, cfg, params)?;
    let mut states = vec![psi0.clone()];
    let stats = prop.run(&mut states, &[t1], |_| Ok(()))?;
    Ok((states.pop().expect("one state"), stats))
}

fn interpolate_onto(src: &WaveField, positions: impl Iterator<Item = f64>, amp: f64) -> Result<Vec<Complex64>> {
    let hw = src.grid.half_width();
    positions
        .map(|p| {
            // endpoints map onto the source endpoints up to rounding
            let p = p.clamp(-hw, hw);
            Ok(interp::cubic(&src.grid, &src.samples, p)? * amp)
        })
        .collect()
}

fn check_extent(x: f64, half_width: f64) -> Result<()> {
    if x.abs() > half_width * (1.0 + 1e-12) {
        return Err(Error::Extrapolation { x, half_width });
    }
    Ok(())
}

/// `ψ(x,t) = √(L0/L) ψ̃(L0 x/L, t)` on a physical grid of the box at `t`.
///
/// Grids with equal sample counts are scaled images of each other and map
/// sample by sample; otherwise ψ̃ is interpolated by cubics, with error
/// `O(h⁴ ψ̃⁗)`.
pub fn to_physical(psi_tilde: &WaveField, traj: &WallTrajectory, t: f64, grid_phys: &Grid) -> Result<WaveField> {
    check_transformed(&psi_tilde.grid, traj)?;
    if psi_tilde.t != t {
        return Err(Error::GridMismatch(format!("field is at t = {}, requested t = {t}", psi_tilde.t)));
    }
    let l = traj.length(t)?;
    let l0 = traj.l0();
    match grid_phys.domain() {
        Domain::Physical { t: gt } if gt == t => {}
        other => {
            return Err(Error::GridMismatch(format!("expected a physical grid at t = {t}, got {other:?}")));
        }
    }
    for &x in [grid_phys.x()[0], *grid_phys.x().last().expect("non-empty")].iter() {
        check_extent(x * l0 / l, 0.5 * l0)?;
    }
    let amp = (l0 / l).sqrt();
    let samples = if grid_phys.n_points() == psi_tilde.grid.n_points() && grid_phys.spans(l) {
        psi_tilde.samples.iter().map(|c| c * amp).collect()
    } else {
        interpolate_onto(psi_tilde, grid_phys.x().iter().map(|&x| x * l0 / l), amp)?
    };
    WaveField::new(grid_phys.clone(), t, samples)
}

/// Inverse of [`to_physical`].
pub fn to_transformed(psi: &WaveField, traj: &WallTrajectory, t: f64, grid_tilde: &Grid) -> Result<WaveField> {
    check_transformed(grid_tilde, traj)?;
    if psi.t != t {
        return Err(Error::GridMismatch(format!("field is at t = {}, requested t = {t}", psi.t)));
    }
    let l = traj.length(t)?;
    let l0 = traj.l0();
    if !psi.grid.spans(l) {
        return Err(Error::GridMismatch(format!(
            "field spans {} but the box has width {l} at t = {t}",
            psi.grid.width()
        )));
    }
    let amp = (l / l0).sqrt();
    let samples = if grid_tilde.n_points() == psi.grid.n_points() {
        psi.samples.iter().map(|c| c * amp).collect()
    } else {
        interpolate_onto(psi, grid_tilde.x().iter().map(|&y| y * l / l0), amp)?
    };
    let mut out = WaveField::new(grid_tilde.clone(), t, samples)?;
    out.t = t;
    Ok(out)
}

/// `ψ(x, t)` and `∂xψ` at an arbitrary physical point from a transformed
/// snapshot, by eight-point Lagrange interpolation. Points on or beyond the
/// walls give zero.
pub fn sample_physical(psi_tilde: &WaveField, traj: &WallTrajectory, x: f64) -> Result<(Complex64, Complex64)> {
    let t = psi_tilde.t;
    let l = traj.length(t)?;
    let l0 = traj.l0();
    if x.abs() >= 0.5 * l {
        return Ok((ZERO, ZERO));
    }
    let s = l0 / l;
    let (v, d) = interp::lagrange(&psi_tilde.grid, &psi_tilde.samples, x * s, 8)?;
    let amp = s.sqrt();
    Ok((v * amp, d * amp * s))
}
