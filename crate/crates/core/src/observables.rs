//! Density, current, Bohmian velocity, weak momentum values, light-cone
//! bookkeeping and Bohmian trajectories.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{LinearBranch, NODE_GUARD};
use crate::error::{Error, Result};
use crate::interp;
use crate::model::{BasisIndex, Domain, Grid, Parity, PhysicalParams, WallTrajectory, WaveField};
use crate::numeric::sample_physical;

/// Largest disagreement allowed between the two weak-value routes.
pub const WEAK_ROUTE_TOL: f64 = 1e-8;

/// Points used for local interpolation of `ψ` and `∂xψ`.
const LOCAL_POINTS: usize = 8;

/// `|ψ|²` at every sample.
pub fn density(psi: &WaveField) -> Vec<f64> {
    psi.samples.iter().map(|c| c.norm_sqr()).collect()
}

/// Fourth-order first derivative of uniformly spaced samples; one-sided
/// fourth-order closures on the two outermost points at each end.
pub fn gradient<T>(samples: &[T], h: f64) -> Vec<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = samples.len();
    assert!(n >= 5, "gradient needs at least five samples");
    let f = samples;
    let s = 1.0 / (12.0 * h);
    let left = |i: usize, sign: f64, at: &dyn Fn(usize) -> T| -> T {
        let r = if i == 0 {
            at(1) * 48.0 - at(0) * 25.0 - at(2) * 36.0 + at(3) * 16.0 - at(4) * 3.0
        } else {
            at(2) * 18.0 - at(0) * 3.0 - at(1) * 10.0 - at(3) * 6.0 + at(4)
        };
        r * (sign * s)
    };
    let mut out = Vec::with_capacity(n);
    out.push(left(0, 1.0, &|k| f[k]));
    out.push(left(1, 1.0, &|k| f[k]));
    for i in 2..n - 2 {
        out.push(((f[i + 1] - f[i - 1]) * 8.0 - (f[i + 2] - f[i - 2])) * s);
    }
    out.push(left(1, -1.0, &|k| f[n - 1 - k]));
    out.push(left(0, -1.0, &|k| f[n - 1 - k]));
    out
}

fn require_physical(psi: &WaveField) -> Result<()> {
    match psi.grid.domain() {
        Domain::Physical { .. } => Ok(()),
        Domain::Transformed => Err(Error::GridMismatch("observables need a physical-domain field".into())),
    }
}

/// `j = (ℏ/m) Im(ψ* ∂xψ)` at every sample.
pub fn current(psi: &WaveField, params: &PhysicalParams) -> Result<Vec<f64>> {
    require_physical(psi)?;
    let d = gradient(&psi.samples, psi.grid.spacing());
    let k = params.hbar / params.mass;
    Ok(psi.samples.iter().zip(&d).map(|(p, dp)| k * (p.conj() * dp).im).collect())
}

/// Closed-form current of an even moving-wall basis state,
/// `2 q x cos²((2n+1)πx/L) / L²` with `L = L0 + q t`.
pub fn current_basis_closed(idx: BasisIndex, traj: &WallTrajectory, x: f64, t: f64) -> Result<f64> {
    if idx.parity != Parity::Even {
        return Err(Error::OddParity("current_basis_closed"));
    }
    let branch = LinearBranch::from_trajectory(traj, "current_basis_closed")?;
    let l = branch.length(t)?;
    let c = (idx.harmonic() * std::f64::consts::PI * x / l).cos();
    Ok(2.0 * branch.q * x * c * c / (l * l))
}

/// `ψ` and `∂xψ` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalState {
    pub psi: Complex64,
    pub dpsi: Complex64,
}

impl LocalState {
    pub fn density(&self) -> f64 {
        self.psi.norm_sqr()
    }

    pub fn current(&self, params: &PhysicalParams) -> f64 {
        params.hbar / params.mass * (self.psi.conj() * self.dpsi).im
    }

    fn check_node(&self, x: f64) -> Result<()> {
        if self.density() < NODE_GUARD {
            Err(Error::Node { x, magnitude: self.psi.norm() })
        } else {
            Ok(())
        }
    }

    /// `v = j / |ψ|²`.
    pub fn bohm_velocity(&self, x: f64, params: &PhysicalParams) -> Result<f64> {
        self.check_node(x)?;
        Ok(self.current(params) / self.density())
    }

    /// Both routes to `Re P_w`: `m v` and `Re[-iℏ ψ'/ψ]`.
    pub fn weak_momentum_routes(&self, x: f64, params: &PhysicalParams) -> Result<(f64, f64)> {
        let via_velocity = params.mass * self.bohm_velocity(x, params)?;
        let via_derivative = (-Complex64::i() * params.hbar * self.dpsi / self.psi).re;
        Ok((via_velocity, via_derivative))
    }

    /// `Re P_w = m v`, cross-checked against the direct derivative route.
    pub fn weak_momentum(&self, x: f64, params: &PhysicalParams) -> Result<f64> {
        let (a, b) = self.weak_momentum_routes(x, params)?;
        if (a - b).abs() > WEAK_ROUTE_TOL * a.abs().max(1.0) {
            return Err(Error::Tolerance(format!("weak value routes disagree at x = {x}: {a:e} vs {b:e}")));
        }
        Ok(a)
    }
}

/// A state at one instant that can be evaluated at arbitrary physical points.
pub trait Sampler {
    fn time(&self) -> f64;

    fn local(&self, x: f64) -> Result<LocalState>;

    /// Bohmian velocity at `x`, by default from the local values.
    fn velocity(&self, x: f64, params: &PhysicalParams) -> Result<f64> {
        self.local(x)?.bohm_velocity(x, params)
    }
}

/// A physical-domain field. Local values use eight-point Lagrange
/// interpolation; velocities are cubic interpolants of the nodal velocities.
impl Sampler for WaveField {
    fn time(&self) -> f64 {
        self.t
    }

    fn local(&self, x: f64) -> Result<LocalState> {
        require_physical(self)?;
        let (psi, dpsi) = interp::lagrange(&self.grid, &self.samples, x, LOCAL_POINTS)?;
        Ok(LocalState { psi, dpsi })
    }

    fn velocity(&self, x: f64, params: &PhysicalParams) -> Result<f64> {
        require_physical(self)?;
        let g = &self.grid;
        let hw = g.half_width();
        if !(x.abs() < hw) {
            return Err(Error::Extrapolation { x, half_width: hw });
        }
        let n = g.n_points();
        let h = g.spacing();
        let cell = (((x + hw) / h).floor() as usize).min(n - 2);
        let first = cell.saturating_sub(1).min(n - 4);
        let k = params.hbar / params.mass;
        let mut xs = [0.0; 4];
        let mut vs = [0.0; 4];
        for (j, i) in (first..first + 4).enumerate() {
            let (psi, dpsi) = nodal(&self.samples, h, i);
            let rho = psi.norm_sqr();
            if rho < NODE_GUARD {
                return Err(Error::Node { x: g.x()[i], magnitude: psi.norm() });
            }
            xs[j] = g.x()[i];
            vs[j] = k * (psi.conj() * dpsi).im / rho;
        }
        Ok(lagrange4(&xs, &vs, x))
    }
}

/// Sample and fourth-order derivative at node `i`.
fn nodal(f: &[Complex64], h: f64, i: usize) -> (Complex64, Complex64) {
    let n = f.len();
    let window = if i < 2 {
        0
    } else if i + 2 >= n {
        n - 5
    } else {
        i - 2
    };
    let d = gradient(&f[window..window + 5], h);
    (f[i], d[i - window])
}

fn lagrange4(xs: &[f64; 4], ys: &[f64; 4], x: f64) -> f64 {
    let mut out = 0.0;
    for j in 0..4 {
        let mut w = 1.0;
        for m in 0..4 {
            if m != j {
                w *= (x - xs[m]) / (xs[j] - xs[m]);
            }
        }
        out += ys[j] * w;
    }
    out
}

/// A transformed-domain snapshot read through the dilation map.
#[derive(Debug, Clone, Copy)]
pub struct TransformedSnapshot<'a> {
    pub field: &'a WaveField,
    pub traj: &'a WallTrajectory,
}

impl Sampler for TransformedSnapshot<'_> {
    fn time(&self) -> f64 {
        self.field.t
    }

    fn local(&self, x: f64) -> Result<LocalState> {
        let (psi, dpsi) = sample_physical(self.field, self.traj, x)?;
        Ok(LocalState { psi, dpsi })
    }
}

/// A state given pointwise by a closure returning `(ψ, ∂xψ)`.
pub struct PointwiseSnapshot<F> {
    pub t: f64,
    pub eval: F,
}

impl<F: Fn(f64) -> Result<(Complex64, Complex64)>> Sampler for PointwiseSnapshot<F> {
    fn time(&self) -> f64 {
        self.t
    }

    fn local(&self, x: f64) -> Result<LocalState> {
        let (psi, dpsi) = (self.eval)(x)?;
        Ok(LocalState { psi, dpsi })
    }
}

/// Bohmian velocity of a physical field at `x`.
pub fn bohm_velocity(psi: &WaveField, x: f64, params: &PhysicalParams) -> Result<f64> {
    psi.local(x)?.bohm_velocity(x, params)
}

/// `Re P_w` of a physical field at `x`.
pub fn weak_momentum(psi: &WaveField, x: f64, params: &PhysicalParams) -> Result<f64> {
    psi.local(x)?.weak_momentum(x, params)
}

/// Arrival time at `x` of a luminal signal emitted by the wall at `t = 0`.
pub fn light_cone_time(x: f64, l0: f64, params: &PhysicalParams) -> Result<f64> {
    if !(x.abs() <= 0.5 * l0) {
        return Err(Error::InvalidParameter(format!("probe x = {x} lies outside the box of width {l0}")));
    }
    Ok((0.5 * l0 - x.abs()) / params.c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub x: f64,
    pub t_c: f64,
}

impl ProbePoint {
    pub fn new(x: f64, l0: f64, params: &PhysicalParams) -> Result<Self> {
        if !(x.abs() < 0.5 * l0) {
            return Err(Error::InvalidParameter(format!("probe x = {x} must lie strictly inside the box")));
        }
        Ok(Self { x, t_c: light_cone_time(x, l0, params)? })
    }
}

/// One probe reading. `v` and `re_pw` are `None` near nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub density: f64,
    pub j: f64,
    pub v: Option<f64>,
    pub re_pw: Option<f64>,
    pub inside_light_cone: bool,
}

impl ObservableRecord {
    pub fn defined(&self) -> bool {
        self.re_pw.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub probe: ProbePoint,
    pub records: Vec<ObservableRecord>,
}

impl ObservableSeries {
    /// Largest defined `|Re P_w|` over records with `t < t_max`.
    pub fn max_abs_re_pw_before(&self, t_max: f64) -> f64 {
        self.records
            .iter()
            .filter(|r| r.t < t_max)
            .filter_map(|r| r.re_pw)
            .fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Collects probe readings snapshot by snapshot; feed it from a propagation
/// callback or through [`weak_scan`].
#[derive(Debug, Clone)]
pub struct ScanAccumulator {
    params: PhysicalParams,
    series: Vec<ObservableSeries>,
    last_t: Option<f64>,
}

impl ScanAccumulator {
    pub fn new(probes: &[ProbePoint], params: &PhysicalParams) -> Self {
        Self {
            params: *params,
            series: probes.iter().map(|&probe| ObservableSeries { probe, records: Vec::new() }).collect(),
            last_t: None,
        }
    }

    pub fn push<S: Sampler + ?Sized>(&mut self, state: &S) -> Result<()> {
        let t = state.time();
        match self.last_t {
            None if t != 0.0 => {
                return Err(Error::InvalidParameter(format!("scan must start at t = 0, got {t}")));
            }
            Some(prev) if !(t > prev) => {
                return Err(Error::InvalidParameter(format!("scan times must increase: {t} after {prev}")));
            }
            _ => {}
        }
        for s in &mut self.series {
            let x = s.probe.x;
            let local = state.local(x)?;
            let (v, re_pw) = match local.bohm_velocity(x, &self.params) {
                Ok(v) => (Some(v), Some(local.weak_momentum(x, &self.params)?)),
                Err(Error::Node { .. }) => (None, None),
                Err(e) => return Err(e),
            };
            s.records.push(ObservableRecord {
                t,
                density: local.density(),
                j: local.current(&self.params),
                v,
                re_pw,
                inside_light_cone: t >= s.probe.t_c,
            });
        }
        self.last_t = Some(t);
        Ok(())
    }

    pub fn finish(self) -> Vec<ObservableSeries> {
        self.series
    }
}

/// Weak momentum values at every probe and time. `provider` is called once
/// per time, in order.
pub fn weak_scan<S, F>(
    mut provider: F,
    probes: &[ProbePoint],
    times: &[f64],
    params: &PhysicalParams,
) -> Result<Vec<ObservableSeries>>
where
    S: Sampler,
    F: FnMut(f64) -> Result<S>,
{
    let mut acc = ScanAccumulator::new(probes, params);
    for &t in times {
        let state = provider(t)?;
        acc.push(&state)?;
    }
    Ok(acc.finish())
}

/// Positions `(t, x)` of a Bohmian particle, by classical fourth-order
/// Runge-Kutta on `dx/dt = v(x, t)`. `provider` is called at step ends and
/// midpoints.
pub fn bohm_trajectory<S, F>(
    mut provider: F,
    traj: &WallTrajectory,
    x0: f64,
    t0: f64,
    t1: f64,
    dt: f64,
    params: &PhysicalParams,
) -> Result<Vec<(f64, f64)>>
where
    S: Sampler,
    F: FnMut(f64) -> Result<S>,
{
    if !(dt > 0.0 && t1 >= t0) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and t1 >= t0 (dt = {dt}, [{t0}, {t1}])")));
    }
    let inside = |t: f64, x: f64| -> Result<()> {
        if x.abs() < 0.5 * traj.length(t)? {
            Ok(())
        } else {
            Err(Error::TrajectoryNode { t, x })
        }
    };
    let velocity = |s: &S, x: f64| -> Result<f64> {
        inside(s.time(), x)?;
        s.velocity(x, params).map_err(|e| match e {
            Error::Node { .. } | Error::Extrapolation { .. } => Error::TrajectoryNode { t: s.time(), x },
            other => other,
        })
    };

    inside(t0, x0)?;
    let mut path = vec![(t0, x0)];
    let steps = ((t1 - t0) / dt).ceil().max(0.0) as usize;
    let mut x = x0;
    let mut start = provider(t0)?;
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let t_next = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * dt };
        let h = t_next - t;
        let mid = provider(t + 0.5 * h)?;
        let end = provider(t_next)?;
        let k1 = velocity(&start, x)?;
        let k2 = velocity(&mid, x + 0.5 * h * k1)?;
        let k3 = velocity(&mid, x + 0.5 * h * k2)?;
        let k4 = velocity(&end, x + h * k3)?;
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        inside(t_next, x)?;
        path.push((t_next, x));
        start = end;
    }
    Ok(path)
}

/// L¹ norm over `grid` of `∂t|ψ|² + ∂x j` at the time of `now`, with the
/// time derivative from the snapshots `before` and `after` placed
/// symmetrically around it.
pub fn continuity_residual<S: Sampler>(
    before: &S,
    now: &S,
    after: &S,
    grid: &Grid,
    params: &PhysicalParams,
) -> Result<f64> {
    let (t0, t, t1) = (before.time(), now.time(), after.time());
    let delta = t1 - t;
    if !(delta > 0.0) || ((t - t0) - delta).abs() > 1e-9 * delta.max(t.abs()) {
        return Err(Error::InvalidParameter(format!(
            "continuity snapshots must be symmetric about t = {t} (got {t0}, {t1})"
        )));
    }
    let xs = grid.x();
    let mut j = Vec::with_capacity(xs.len());
    let mut drho = Vec::with_capacity(xs.len());
    for &x in xs {
        let a = before.local(x)?.density();
        let b = after.local(x)?.density();
        drho.push((b - a) / (2.0 * delta));
        j.push(now.local(x)?.current(params));
    }
    let dj = gradient(&j, grid.spacing());
    let r: Vec<f64> = drho.iter().zip(&dj).map(|(a, b)| (a + b).abs()).collect();
    let h = grid.spacing();
    Ok(h * (r.iter().sum::<f64>() - 0.5 * (r[0] + r[r.len() - 1])))
}
