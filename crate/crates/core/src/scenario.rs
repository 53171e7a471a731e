//! Scenario configuration, orchestration and data emission.
//!
//! A scenario is described by one TOML file; unknown keys are rejected.
//! Every run writes its data files, a `report.txt` with one PASS/FAIL line
//! per check and a `manifest.json` holding the resolved configuration and
//! the achieved tolerances. Output is deterministic: the same configuration
//! always yields byte-identical files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    basis_physical, basis_tilde, expand_initial, gaussian_closed_form, propagate_spectral, ratio_static_moving,
    rebase_at_reversal, GaussianParams, LinearBranch, SpectralCoefficients,
};
use crate::error::{Error, Result};
use crate::model::{eigenstate, BasisIndex, Grid, Parity, PhysicalParams, WallTrajectory, WaveField};
use crate::numeric::{to_physical, PropagationStats, Propagator, PropagatorConfig};
use crate::observables::{
    continuity_residual, ObservableSeries, PointwiseSnapshot, ProbePoint, ScanAccumulator,
    TransformedSnapshot,
};
use crate::theta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    StrongCheck,
    WeakScan,
    OracleCompare,
    ThetaSelftest,
    Reversal,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::StrongCheck,
        ScenarioKind::WeakScan,
        ScenarioKind::OracleCompare,
        ScenarioKind::ThetaSelftest,
        ScenarioKind::Reversal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::StrongCheck => "strong-check",
            ScenarioKind::WeakScan => "weak-scan",
            ScenarioKind::OracleCompare => "oracle-compare",
            ScenarioKind::ThetaSelftest => "theta-selftest",
            ScenarioKind::Reversal => "reversal",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

/// One weighted eigenstate of the initial superposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperpositionTerm {
    pub n: usize,
    #[serde(default = "even")]
    pub parity: Parity,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn even() -> Parity {
    Parity::Even
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    Gaussian { d: f64 },
    /// Fixed-wall eigenstates of the initial box.
    EigenSuperposition { terms: Vec<SuperpositionTerm> },
    /// Even moving-wall basis state `n` at `t = 0`.
    BasisState { n: usize },
}

impl InitialState {
    /// `(φ₁₀ − φ₁)/√2`.
    pub fn fig1() -> Self {
        let w = std::f64::consts::FRAC_1_SQRT_2;
        InitialState::EigenSuperposition {
            terms: vec![
                SuperpositionTerm { n: 10, parity: Parity::Even, re: w, im: 0.0 },
                SuperpositionTerm { n: 1, parity: Parity::Even, re: -w, im: 0.0 },
            ],
        }
    }

    fn validate(&self, l0: f64) -> Result<()> {
        match self {
            InitialState::Gaussian { d } => {
                let g = GaussianParams::new(*d).map_err(config)?;
                g.check_localized(l0).map_err(config)
            }
            InitialState::EigenSuperposition { terms } => {
                if terms.is_empty() {
                    return Err(Error::Config("initial_state.terms must not be empty".into()));
                }
                let mut seen = std::collections::HashSet::new();
                for t in terms {
                    if !seen.insert((t.n, t.parity)) {
                        return Err(Error::Config(format!("initial_state.terms lists state {} twice", t.n)));
                    }
                }
                let w: f64 = terms.iter().map(|t| t.re * t.re + t.im * t.im).sum();
                if (w - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!("initial_state weights have total weight {w}, not 1")));
                }
                Ok(())
            }
            InitialState::BasisState { .. } => Ok(()),
        }
    }

    fn has_odd_terms(&self) -> bool {
        matches!(self, InitialState::EigenSuperposition { terms } if terms.iter().any(|t| t.parity == Parity::Odd))
    }

    /// The state at `t = 0` on the transformed grid.
    pub fn sample(&self, traj: &WallTrajectory, grid: &Grid, params: &PhysicalParams) -> Result<WaveField> {
        let l0 = traj.l0();
        match self {
            InitialState::Gaussian { d } => {
                let g = GaussianParams::new(*d)?;
                WaveField::from_fn(grid.clone(), 0.0, |x| Complex64::new(g.eval(x), 0.0))
            }
            InitialState::EigenSuperposition { terms } => {
                let mut samples = vec![Complex64::new(0.0, 0.0); grid.n_points()];
                for t in terms {
                    let phi = eigenstate(BasisIndex { n: t.n, parity: t.parity }, l0, grid)?;
                    let w = Complex64::new(t.re, t.im);
                    for (s, p) in samples.iter_mut().zip(&phi.samples) {
                        *s += w * p;
                    }
                }
                WaveField::new(grid.clone(), 0.0, samples)
            }
            InitialState::BasisState { n } => {
                let branch = LinearBranch::from_trajectory(&traj.smooth_piece(0.0), "basis-state initial state")?;
                basis_tilde(BasisIndex::even(*n), &branch.trajectory(), 0.0, grid, params)
            }
        }
    }
}

/// Output times: an explicit list or a uniform range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    List(Vec<f64>),
    Uniform(UniformTimes),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformTimes {
    #[serde(default)]
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec::Uniform(UniformTimes { start: 0.0, stop: 0.1, step: 1e-4 })
    }
}

impl TimeSpec {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        let times = match self {
            TimeSpec::List(v) => v.clone(),
            TimeSpec::Uniform(u) => {
                if !(u.step > 0.0 && u.stop >= u.start && u.start >= 0.0) {
                    return Err(Error::Config(format!("times: invalid range {u:?}")));
                }
                let n = ((u.stop - u.start) / u.step).round();
                if n > 1e7 || ((u.start + n * u.step) - u.stop).abs() > 1e-9 * u.stop.abs().max(u.step) {
                    return Err(Error::Config("times: stop - start must be a whole number of steps".into()));
                }
                (0..=n as usize).map(|k| u.start + k as f64 * u.step).collect()
            }
        };
        if times.is_empty() {
            return Err(Error::Config("times must not be empty".into()));
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("times must be finite, non-negative and strictly increasing".into()));
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Analytic where the trajectory allows it, numeric otherwise.
    #[default]
    Auto,
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrongCheckSettings {
    /// Wall speeds compared against the static box.
    pub speeds: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub x_samples: usize,
    pub t_max: f64,
    pub t_samples: usize,
}

impl Default for StrongCheckSettings {
    fn default() -> Self {
        Self {
            speeds: vec![1e-4, 1e-3, 1e-2],
            x_min: -25.0,
            x_max: 25.0,
            x_samples: 1000,
            t_max: 1e3,
            t_samples: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaSettings {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ThetaSettings {
    fn default() -> Self {
        Self { samples: 1000, seed: 2024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakScanSettings {
    /// Also run the same state with the walls held fixed.
    pub control: bool,
    /// Required ratio of the moving-wall signal to the control before `t_c`.
    pub signature_factor: f64,
}

impl Default for WeakScanSettings {
    fn default() -> Self {
        Self { control: true, signature_factor: 1e3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub strong: f64,
    pub oracle: f64,
    pub norm_drift: f64,
    pub continuity: f64,
    pub theta: f64,
    pub rebase_norm: f64,
    pub rebase_coefficient: f64,
    /// Half-width of the time window used for `∂t|ψ|²`.
    pub continuity_delta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            strong: 1e-8,
            oracle: 1e-6,
            norm_drift: 1e-8,
            continuity: 1e-5,
            theta: 1e-12,
            rebase_norm: 1e-8,
            rebase_coefficient: 1e-6,
            continuity_delta: 1e-3,
        }
    }
}

fn default_trajectory() -> WallTrajectory {
    WallTrajectory::SmoothTurnOn { l0: 100.0, q: 1e-4, beta: 1e3 }
}

fn default_probes() -> Vec<f64> {
    vec![35.0, 40.0, 45.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Must match the scenario named on the command line when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioKind>,
    #[serde(default)]
    pub params: PhysicalParams,
    #[serde(default = "default_trajectory")]
    pub trajectory: WallTrajectory,
    #[serde(default = "InitialState::fig1")]
    pub initial_state: InitialState,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub propagator: PropagatorConfig,
    #[serde(default = "default_probes")]
    pub probes: Vec<f64>,
    #[serde(default)]
    pub times: TimeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub strong_check: StrongCheckSettings,
    #[serde(default)]
    pub weak_scan: WeakScanSettings,
    #[serde(default)]
    pub theta: ThetaSettings,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

fn config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ScenarioConfig {
    /// Parses a TOML document after applying `key=value` overrides; keys
    /// are dotted paths and values are TOML literals (bare words are taken
    /// as strings).
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            // straight from the text so errors carry line and column
            return toml::from_str(text).map_err(|e: toml::de::Error| Error::Config(e.to_string()));
        }
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ScenarioConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    /// Parameter and compatibility checks for `kind`.
    pub fn validate(&self, kind: ScenarioKind) -> Result<()> {
        if let Some(k) = self.scenario {
            if k != kind {
                return Err(Error::Config(format!("config is for scenario '{k}', not '{kind}'")));
            }
        }
        self.params.validate().map_err(config)?;
        self.trajectory.validate().map_err(config)?;
        self.tolerances_positive()?;
        if kind == ScenarioKind::ThetaSelftest {
            if self.theta.samples == 0 {
                return Err(Error::Config("theta.samples must be positive".into()));
            }
            return Ok(());
        }
        self.propagator.validate().map_err(config)?;
        let l0 = self.trajectory.l0();
        self.initial_state.validate(l0)?;
        let linear = matches!(self.trajectory, WallTrajectory::Static { .. } | WallTrajectory::Linear { .. });
        match kind {
            ScenarioKind::StrongCheck => {
                if !linear {
                    return Err(Error::Config("strong-check requires a static or linear trajectory".into()));
                }
                if !matches!(self.initial_state, InitialState::Gaussian { .. }) {
                    return Err(Error::Config("strong-check requires a gaussian initial state".into()));
                }
                let s = &self.strong_check;
                if s.speeds.is_empty() || s.x_samples < 2 || s.t_samples < 2 || !(s.x_max > s.x_min) || !(s.t_max > 0.0) {
                    return Err(Error::Config("strong_check: need speeds, x_max > x_min, t_max > 0 and >= 2 samples".into()));
                }
                if s.x_min.abs().max(s.x_max.abs()) >= 0.5 * l0 {
                    return Err(Error::Config("strong_check: sample window must lie inside the box".into()));
                }
                for &q in &s.speeds {
                    self.trajectory.with_speed(q).validate().map_err(config)?;
                }
            }
            ScenarioKind::OracleCompare => {
                if !linear {
                    return Err(Error::Config("oracle-compare requires a static or linear trajectory".into()));
                }
                if self.engine != Engine::Auto {
                    return Err(Error::Config("oracle-compare always runs both engines; leave engine unset".into()));
                }
                self.times.resolve()?;
            }
            ScenarioKind::WeakScan => {
                if self.engine == Engine::Analytic && !linear {
                    return Err(Error::Config(format!(
                        "weak-scan with the {} trajectory requires the numeric engine",
                        self.trajectory.name()
                    )));
                }
                if self.engine == Engine::Analytic && self.initial_state.has_odd_terms() {
                    return Err(Error::Config("the analytic engine supports even states only".into()));
                }
                let times = self.times.resolve()?;
                if times[0] != 0.0 {
                    return Err(Error::Config("weak-scan times must start at 0".into()));
                }
                if self.probes.is_empty() {
                    return Err(Error::Config("weak-scan needs at least one probe".into()));
                }
                for &x in &self.probes {
                    ProbePoint::new(x, l0, &self.params).map_err(config)?;
                }
            }
            ScenarioKind::Reversal => {
                if !matches!(self.trajectory, WallTrajectory::PiecewiseReversal { .. }) {
                    return Err(Error::Config("reversal requires the piecewise-reversal trajectory".into()));
                }
                if !matches!(self.initial_state, InitialState::BasisState { .. }) {
                    return Err(Error::Config("reversal requires a basis-state initial state".into()));
                }
            }
            ScenarioKind::ThetaSelftest => unreachable!(),
        }
        Ok(())
    }

    fn tolerances_positive(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("strong", t.strong),
            ("oracle", t.oracle),
            ("norm_drift", t.norm_drift),
            ("continuity", t.continuity),
            ("theta", t.theta),
            ("rebase_norm", t.rebase_norm),
            ("rebase_coefficient", t.rebase_coefficient),
            ("continuity_delta", t.continuity_delta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("tolerances.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn use_analytic(&self) -> bool {
        let linear = matches!(self.trajectory, WallTrajectory::Static { .. } | WallTrajectory::Linear { .. });
        match self.engine {
            Engine::Analytic => true,
            Engine::Numeric => false,
            Engine::Auto => linear && !self.initial_state.has_odd_terms(),
        }
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key '{key}' is malformed")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}': '{part}' is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// One PASS/FAIL line of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Result of a scenario run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunOutcome {
    pub checks: Vec<Check>,
    /// Achieved tolerances and other headline numbers.
    pub metrics: BTreeMap<String, f64>,
    /// Data files written, relative to the output directory.
    pub files: Vec<String>,
    /// Weak-scan series, when the scenario produces them.
    #[serde(skip)]
    pub series: Vec<ObservableSeries>,
    #[serde(skip)]
    pub control_series: Vec<ObservableSeries>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    scenario: ScenarioKind,
    engine_version: &'static str,
    config: &'a ScenarioConfig,
    metrics: &'a BTreeMap<String, f64>,
    checks: &'a [Check],
    files: &'a [String],
}

/// Runs `kind`, writing every output into `out_dir`.
///
/// Engine errors abort the run. Failed checks do not: the outcome reports
/// them and the caller decides the exit status.
pub fn run_scenario(kind: ScenarioKind, cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate(kind)?;
    fs::create_dir_all(out_dir)?;
    let mut outcome = match kind {
        ScenarioKind::ThetaSelftest => theta_selftest(cfg)?,
        ScenarioKind::StrongCheck => strong_check(cfg, out_dir)?,
        ScenarioKind::OracleCompare => oracle_compare(cfg, out_dir)?,
        ScenarioKind::WeakScan => weak_scan(cfg, out_dir)?,
        ScenarioKind::Reversal => reversal(cfg, out_dir)?,
    };

    let mut report = String::new();
    report.push_str(&format!("scenario {kind}\n"));
    for c in &outcome.checks {
        report.push_str(&format!("{c}\n"));
    }
    for (k, v) in &outcome.metrics {
        report.push_str(&format!("metric {k} = {}\n", fmt_f64(*v)));
    }
    fs::write(out_dir.join("report.txt"), report)?;
    outcome.files.push("report.txt".into());

    let manifest = Manifest {
        scenario: kind,
        engine_version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        metrics: &outcome.metrics,
        checks: &outcome.checks,
        files: &outcome.files,
    };
    let mut f = fs::File::create(out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(outcome)
}

/// Seventeen significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn theta_selftest(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let s = theta::self_test(cfg.theta.samples, cfg.theta.seed)?;
    let tol = cfg.tolerances.theta;
    let mut out = RunOutcome::default();
    out.checks.push(Check::new(
        "jacobi transformation",
        s.max_transform_residual < tol,
        format!("max relative residual {:e} over {} samples (< {tol:e})", s.max_transform_residual, s.samples),
    ));
    out.checks.push(Check::new(
        "parity",
        s.max_parity_residual < tol,
        format!("max residual {:e}", s.max_parity_residual),
    ));
    out.checks.push(Check::new(
        "half-period shift",
        s.max_periodicity_residual < tol,
        format!("max residual {:e}", s.max_periodicity_residual),
    ));
    let e = (-std::f64::consts::PI).exp();
    let t2 = 2.0 * e * (1.0 + e.powi(8));
    out.checks.push(Check::new(
        "theta2(0, 4i)",
        (s.theta2_4i - t2).abs() < 1e-15,
        format!("{} vs series {}", fmt_f64(s.theta2_4i), fmt_f64(t2)),
    ));
    out.metric("max_transform_residual", s.max_transform_residual);
    out.metric("max_parity_residual", s.max_parity_residual);
    out.metric("max_periodicity_residual", s.max_periodicity_residual);
    out.metric("theta2_0_4i", s.theta2_4i);
    out.metric("theta4_0_i", s.theta4_i);
    Ok(out)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Per-speed summary of the strong-nonlocality comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrongSpeedSummary {
    pub q: f64,
    pub max_deviation: f64,
    pub x_at_max: f64,
    pub t_at_max: f64,
    pub evaluated: usize,
    /// Points skipped because either state is numerically zero there.
    pub node_guarded: usize,
    pub max_route_gap: f64,
}

/// `max |ψ(x,t;q)/ψ(x,t;0) − 1|` over the configured window, per speed,
/// with one row per `(q, t)` in `rows`.
pub fn strong_summary(
    cfg: &ScenarioConfig,
    mut rows: impl FnMut(f64, f64, f64, f64, usize) -> Result<()>,
) -> Result<Vec<StrongSpeedSummary>> {
    let InitialState::Gaussian { d } = cfg.initial_state else {
        return Err(Error::Config("strong-check requires a gaussian initial state".into()));
    };
    let g = GaussianParams::new(d)?;
    let s = &cfg.strong_check;
    let xs = linspace(s.x_min, s.x_max, s.x_samples);
    let ts = linspace(0.0, s.t_max, s.t_samples);
    let mut out = Vec::new();
    for &q in &s.speeds {
        let traj = WallTrajectory::Linear { l0: cfg.trajectory.l0(), q };
        let mut sum = StrongSpeedSummary {
            q,
            max_deviation: 0.0,
            x_at_max: f64::NAN,
            t_at_max: f64::NAN,
            evaluated: 0,
            node_guarded: 0,
            max_route_gap: 0.0,
        };
        for &t in &ts {
            let (mut row_max, mut row_x, mut guarded) = (0.0f64, f64::NAN, 0usize);
            for &x in &xs {
                match ratio_static_moving(g, &traj, x, t, &cfg.params) {
                    Ok(r) => {
                        sum.evaluated += 1;
                        let dev = (1.0 / r.theta2_form - 1.0).norm();
                        sum.max_route_gap = sum.max_route_gap.max(r.route_gap() / r.theta2_form.norm());
                        if !(dev <= row_max) {
                            row_max = dev;
                            row_x = x;
                        }
                    }
                    Err(Error::Node { .. }) => guarded += 1,
                    Err(e) => return Err(e),
                }
            }
            sum.node_guarded += guarded;
            if !(row_max <= sum.max_deviation) {
                sum.max_deviation = row_max;
                sum.x_at_max = row_x;
                sum.t_at_max = t;
            }
            rows(q, t, row_max, row_x, guarded)?;
        }
        out.push(sum);
    }
    Ok(out)
}

fn strong_check(cfg: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let mut w = csv::Writer::from_path(dir.join("strong_check.csv"))?;
    w.write_record(["q", "t", "max_deviation", "x_at_max", "node_guarded"])?;
    let summary = strong_summary(cfg, |q, t, dev, x, guarded| {
        w.write_record([fmt_f64(q), fmt_f64(t), fmt_f64(dev), fmt_f64(x), guarded.to_string()])?;
        Ok(())
    })?;
    w.flush()?;
    let tol = cfg.tolerances.strong;
    let mut out = RunOutcome::default();
    out.files.push("strong_check.csv".into());
    for s in &summary {
        out.checks.push(Check::new(
            format!("ratio q={:e}", s.q),
            s.max_deviation < tol,
            format!(
                "max |ratio - 1| = {:e} at x = {}, t = {} (< {tol:e}); {} points node-guarded",
                s.max_deviation, s.x_at_max, s.t_at_max, s.node_guarded
            ),
        ));
        out.metric(&format!("max_deviation_q{:e}", s.q), s.max_deviation);
        out.metric(&format!("node_guarded_q{:e}", s.q), s.node_guarded as f64);
        out.metric(&format!("route_gap_q{:e}", s.q), s.max_route_gap);
    }
    Ok(out)
}

/// Analytic reference for one initial state on a linear trajectory.
enum Oracle {
    Basis(usize),
    Gaussian(GaussianParams),
    Spectral(SpectralCoefficients),
}

impl Oracle {
    fn new(cfg: &ScenarioConfig, psi0: &WaveField) -> Result<Self> {
        Ok(match cfg.initial_state {
            InitialState::BasisState { n } => Oracle::Basis(n),
            InitialState::Gaussian { d } => Oracle::Gaussian(GaussianParams::new(d)?),
            InitialState::EigenSuperposition { .. } => {
                if cfg.initial_state.has_odd_terms() {
                    return Err(Error::OddParity("the analytic engine"));
                }
                Oracle::Spectral(expand_initial(psi0, &cfg.trajectory, 32, &cfg.params)?)
            }
        })
    }

    fn physical(&self, cfg: &ScenarioConfig, t: f64, grid: &Grid) -> Result<WaveField> {
        match self {
            Oracle::Basis(n) => basis_physical(BasisIndex::even(*n), &cfg.trajectory, t, grid, &cfg.params),
            Oracle::Gaussian(g) => gaussian_closed_form(*g, &cfg.trajectory, t, grid, &cfg.params),
            Oracle::Spectral(c) => propagate_spectral(c, t, grid),
        }
    }

    fn local(&self, cfg: &ScenarioConfig, x: f64, t: f64) -> Result<(Complex64, Complex64)> {
        let coeffs;
        let c = match self {
            Oracle::Spectral(c) => c,
            Oracle::Basis(n) => {
                let mut v = vec![Complex64::new(0.0, 0.0); n + 1];
                v[*n] = Complex64::new(1.0, 0.0);
                coeffs = SpectralCoefficients {
                    coeffs: v,
                    parity: Parity::Even,
                    traj: cfg.trajectory,
                    t_ref: 0.0,
                    params: cfg.params,
                };
                &coeffs
            }
            Oracle::Gaussian(_) => {
                return Err(Error::UnsupportedTrajectory { op: "pointwise gaussian derivative", traj: "any" });
            }
        };
        if x.abs() >= 0.5 * c.length(t)? {
            return Ok((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
        }
        c.eval_physical(x, t)
    }
}

/// Continuity residuals and norm drift of one numeric propagation.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NumericHealth {
    pub max_norm_drift: f64,
    /// `(t, L¹ residual)` at each checked time.
    pub continuity: Vec<(f64, f64)>,
}

impl NumericHealth {
    pub fn max_continuity(&self) -> f64 {
        self.continuity.iter().map(|c| c.1).fold(0.0, f64::max)
    }
}

/// Propagates `states` through `times` (visited in order) and additionally
/// evaluates the continuity residual at each of `continuity_at`, from
/// snapshots at `t ± delta`; the recorded value is the largest over states.
pub fn propagate_with_checks<F>(
    cfg: &ScenarioConfig,
    states: &mut [WaveField],
    times: &[f64],
    continuity_at: &[f64],
    mut visit: F,
) -> Result<(PropagationStats, NumericHealth)>
where
    F: FnMut(&[WaveField]) -> Result<()>,
{
    let delta = cfg.tolerances.continuity_delta;
    let traj = cfg.trajectory;
    let grid = states[0].grid.clone();
    let mut prop = Propagator::new(&traj, &grid, &cfg.propagator, &cfg.params)?;

    let mut all: Vec<f64> = times.to_vec();
    for &t in continuity_at {
        if t < delta {
            return Err(Error::InvalidParameter(format!("continuity check at t = {t} needs t >= {delta}")));
        }
        all.extend([t - delta, t, t + delta]);
    }
    all.retain(|&t| t > states[0].t);
    all.sort_by(f64::total_cmp);
    all.dedup();

    let mut health = NumericHealth::default();
    // (t, snapshot at t - delta, snapshot at t)
    type Pending = (f64, Option<Vec<WaveField>>, Option<Vec<WaveField>>);
    let mut pending: Vec<Pending> = continuity_at.iter().map(|&t| (t, None, None)).collect();
    if times.first() == Some(&states[0].t) {
        visit(states)?;
    }
    let stats = prop.run(states, &all, |s| {
        let t = s[0].t;
        if times.binary_search_by(|v| v.total_cmp(&t)).is_ok() {
            visit(s)?;
        }
        for (tc, before, now) in pending.iter_mut() {
            if t == *tc - delta {
                *before = Some(s.to_vec());
            } else if t == *tc {
                *now = Some(s.to_vec());
            } else if t == *tc + delta {
                let (b, n) = (before.take(), now.take());
                let (Some(b), Some(n)) = (b, n) else {
                    return Err(Error::InvalidParameter("continuity snapshots out of order".into()));
                };
                let gp = Grid::physical(grid.n_points(), &traj, t - delta)?;
                let snap = |field| TransformedSnapshot { field, traj: &traj };
                let mut r = 0.0f64;
                for ((b, n), a) in b.iter().zip(&n).zip(s) {
                    r = r.max(continuity_residual(&snap(b), &snap(n), &snap(a), &gp, &cfg.params)?);
                }
                health.continuity.push((*tc, r));
            }
        }
        Ok(())
    })?;
    health.max_norm_drift = stats.max_norm_drift;
    Ok((stats, health))
}

fn oracle_compare(cfg: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let traj = cfg.trajectory;
    let n = cfg.propagator.n_points;
    let grid = Grid::transformed(n, traj.l0())?;
    let psi0 = cfg.initial_state.sample(&traj, &grid, &cfg.params)?;
    let oracle = Oracle::new(cfg, &psi0)?;
    let times: Vec<f64> = cfg.times.resolve()?;
    let checks: Vec<f64> = times.iter().copied().filter(|&t| t >= cfg.tolerances.continuity_delta).collect();

    let mut rows: Vec<(f64, f64)> = Vec::new();
    let mut states = vec![psi0];
    let (_, health) = propagate_with_checks(cfg, &mut states, &times, &checks, |s| {
        let t = s[0].t;
        let gp = Grid::physical(n, &traj, t)?;
        let num = to_physical(&s[0], &traj, t, &gp)?;
        let exact = oracle.physical(cfg, t, &gp)?;
        rows.push((t, num.max_abs_diff(&exact)?));
        Ok(())
    })?;

    let mut w = csv::Writer::from_path(dir.join("oracle_compare.csv"))?;
    w.write_record(["t", "linf_error", "continuity_l1"])?;
    for &(t, e) in &rows {
        let c = health.continuity.iter().find(|c| c.0 == t).map_or(f64::NAN, |c| c.1);
        w.write_record([fmt_f64(t), fmt_f64(e), fmt_f64(c)])?;
    }
    w.flush()?;

    let tol = &cfg.tolerances;
    let max_err = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut out = RunOutcome::default();
    out.files.push("oracle_compare.csv".into());
    out.checks.push(Check::new(
        "analytic vs numeric",
        max_err < tol.oracle,
        format!("max L-inf error {max_err:e} over {} times (< {:e})", rows.len(), tol.oracle),
    ));
    push_health_checks(&mut out, &health, tol, "");
    out.metric("max_linf_error", max_err);
    Ok(out)
}

fn push_health_checks(out: &mut RunOutcome, health: &NumericHealth, tol: &Tolerances, label: &str) {
    out.checks.push(Check::new(
        format!("{label}norm drift"),
        health.max_norm_drift < tol.norm_drift,
        format!("{:e} (< {:e})", health.max_norm_drift, tol.norm_drift),
    ));
    if !health.continuity.is_empty() {
        let c = health.max_continuity();
        out.checks.push(Check::new(
            format!("{label}continuity"),
            c < tol.continuity,
            format!("max L1 residual {c:e} over {} checks (< {:e})", health.continuity.len(), tol.continuity),
        ));
    }
    let prefix = label.trim_end_matches(": ").replace(' ', "_");
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}_{k}") };
    out.metric(&key("max_norm_drift"), health.max_norm_drift);
    if !health.continuity.is_empty() {
        out.metric(&key("max_continuity_l1"), health.max_continuity());
    }
}

/// Weak-value series of one run, by the configured engine.
pub fn scan_series(cfg: &ScenarioConfig, traj: &WallTrajectory) -> Result<(Vec<ObservableSeries>, Option<NumericHealth>)> {
    let l0 = traj.l0();
    let probes: Vec<ProbePoint> =
        cfg.probes.iter().map(|&x| ProbePoint::new(x, l0, &cfg.params)).collect::<Result<_>>()?;
    let times = cfg.times.resolve()?;
    let grid = Grid::transformed(cfg.propagator.n_points, l0)?;
    let run_cfg = ScenarioConfig { trajectory: *traj, ..cfg.clone() };
    let psi0 = cfg.initial_state.sample(traj, &grid, &cfg.params)?;
    let mut acc = ScanAccumulator::new(&probes, &cfg.params);

    if run_cfg.use_analytic() {
        let oracle = Oracle::new(&run_cfg, &psi0)?;
        for &t in &times {
            acc.push(&PointwiseSnapshot { t, eval: |x| oracle.local(&run_cfg, x, t) })?;
        }
        return Ok((acc.finish(), None));
    }

    let last = *times.last().expect("times are non-empty");
    let mid = times[times.len() / 2];
    let delta = cfg.tolerances.continuity_delta;
    let checks: Vec<f64> = [mid, last].into_iter().filter(|&t| t >= delta).collect::<Vec<_>>();
    let mut checks = checks;
    checks.dedup();
    let mut states = vec![psi0];
    let (_, health) = propagate_with_checks(&run_cfg, &mut states, &times, &checks, |s| {
        acc.push(&TransformedSnapshot { field: &s[0], traj })
    })?;
    Ok((acc.finish(), Some(health)))
}

/// Writes `series` as CSV with the standard observable columns.
pub fn write_series_csv(path: &Path, series: &[ObservableSeries]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "density", "j", "v", "re_pw", "inside_light_cone", "defined"])?;
    for s in series {
        for r in &s.records {
            w.write_record([
                fmt_f64(r.t),
                fmt_f64(s.probe.x),
                fmt_f64(r.density),
                fmt_f64(r.j),
                fmt_f64(r.v.unwrap_or(f64::NAN)),
                fmt_f64(r.re_pw.unwrap_or(f64::NAN)),
                u8::from(r.inside_light_cone).to_string(),
                u8::from(r.defined()).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-probe comparison of a moving-wall scan with its fixed-wall control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignatureSummary {
    pub x: f64,
    pub t_c: f64,
    /// `max |Re P_w|` before `t_c` with moving walls.
    pub moving_max: f64,
    /// The same for the control run.
    pub control_max: f64,
    /// `max |Re P_w(q) − Re P_w(0)|` before `t_c`: the part caused by the walls.
    pub wall_induced_max: f64,
    /// `max |Re P_w|` difference before `t_c` between the control run and
    /// the exact fixed-wall evolution; NaN when no exact control exists.
    pub noise_floor: f64,
}

impl SignatureSummary {
    pub fn literal_ratio(&self) -> f64 {
        self.moving_max / self.control_max
    }
}

fn max_gap_before(a: &ObservableSeries, b: &ObservableSeries, t_c: f64) -> f64 {
    a.records
        .iter()
        .zip(&b.records)
        .filter(|(r, _)| r.t < t_c)
        .filter_map(|(r, s)| Some((r.re_pw? - s.re_pw?).abs()))
        .fold(0.0, f64::max)
}

/// Compares a moving-wall scan with its control, and the control with its
/// exact evolution when one is given.
pub fn signature(
    moving: &[ObservableSeries],
    control: &[ObservableSeries],
    exact_control: Option<&[ObservableSeries]>,
) -> Vec<SignatureSummary> {
    moving
        .iter()
        .zip(control)
        .enumerate()
        .map(|(i, (m, c))| {
            let t_c = m.probe.t_c;
            SignatureSummary {
                x: m.probe.x,
                t_c,
                moving_max: m.max_abs_re_pw_before(t_c),
                control_max: c.max_abs_re_pw_before(t_c),
                wall_induced_max: max_gap_before(m, c, t_c),
                noise_floor: exact_control.map_or(f64::NAN, |e| max_gap_before(c, &e[i], t_c)),
            }
        })
        .collect()
}

/// `ψ` and `∂xψ` of an eigenstate superposition in a box held at `l0`.
pub fn static_superposition_local(
    terms: &[SuperpositionTerm],
    l0: f64,
    params: &PhysicalParams,
    x: f64,
    t: f64,
) -> Result<(Complex64, Complex64)> {
    let zero = Complex64::new(0.0, 0.0);
    if x.abs() >= 0.5 * l0 {
        return Ok((zero, zero));
    }
    let amp = (2.0 / l0).sqrt();
    let (mut v, mut d) = (zero, zero);
    for term in terms {
        let idx = BasisIndex { n: term.n, parity: term.parity };
        let k = idx.harmonic() * std::f64::consts::PI / l0;
        let e = crate::model::eigenvalue(idx, l0, params)?;
        let w = Complex64::new(term.re, term.im) * Complex64::from_polar(amp, -e * t / params.hbar);
        let (s, c) = (k * x).sin_cos();
        let (f, df) = match term.parity {
            Parity::Even => (c, -k * s),
            Parity::Odd => (s, k * c),
        };
        v += w * f;
        d += w * df;
    }
    Ok((v, d))
}

fn probe_file_name(prefix: &str, x: f64) -> String {
    format!("{prefix}_x{x}.csv")
}

fn weak_scan(cfg: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let traj = cfg.trajectory;
    let (series, health) = scan_series(cfg, &traj)?;
    let mut out = RunOutcome::default();

    write_series_csv(&dir.join("weak_scan.csv"), &series)?;
    out.files.push("weak_scan.csv".into());
    for s in &series {
        let name = probe_file_name("weak_scan", s.probe.x);
        write_series_csv(&dir.join(&name), std::slice::from_ref(s))?;
        out.files.push(name);
    }

    let first: Vec<f64> = series.iter().filter_map(|s| s.records.first().and_then(|r| r.re_pw)).collect();
    let zero_start = first.len() == series.len() && first.iter().all(|v| *v == 0.0);
    if cfg.times.resolve()?[0] == 0.0 && is_real_state(&cfg.initial_state) {
        out.checks.push(Check::new(
            "re_pw(t=0) = 0",
            zero_start,
            format!("values at t = 0: {first:?}"),
        ));
    }
    if let Some(h) = &health {
        push_health_checks(&mut out, h, &cfg.tolerances, "");
    }

    let moving = traj.speed() != 0.0;
    if cfg.weak_scan.control && moving {
        let still = traj.with_speed(0.0);
        let (control, ch) = scan_series(cfg, &still)?;
        write_series_csv(&dir.join("control.csv"), &control)?;
        out.files.push("control.csv".into());
        if let Some(h) = &ch {
            push_health_checks(&mut out, h, &cfg.tolerances, "control: ");
        }
        let exact = match &cfg.initial_state {
            InitialState::EigenSuperposition { terms } => {
                let probes: Vec<ProbePoint> = series.iter().map(|s| s.probe).collect();
                let l0 = still.l0();
                Some(crate::observables::weak_scan(
                    |t| {
                        Ok(PointwiseSnapshot {
                            t,
                            eval: move |x| static_superposition_local(terms, l0, &cfg.params, x, t),
                        })
                    },
                    &probes,
                    &cfg.times.resolve()?,
                    &cfg.params,
                )?)
            }
            _ => None,
        };
        let factor = cfg.weak_scan.signature_factor;
        for s in signature(&series, &control, exact.as_deref()) {
            out.checks.push(Check::new(
                format!("signature x={}", s.x),
                s.moving_max > factor * s.control_max,
                format!(
                    "max |re_pw| before t_c = {:.6}: moving {:e}, control {:e} (ratio {:e}, need > {factor:e}); wall-induced part {:e}, control noise floor {:e}",
                    s.t_c,
                    s.moving_max,
                    s.control_max,
                    s.literal_ratio(),
                    s.wall_induced_max,
                    s.noise_floor
                ),
            ));
            if s.noise_floor.is_finite() {
                out.metric(&format!("noise_floor_x{}", s.x), s.noise_floor);
            }
            out.metric(&format!("moving_max_x{}", s.x), s.moving_max);
            out.metric(&format!("control_max_x{}", s.x), s.control_max);
            out.metric(&format!("wall_induced_max_x{}", s.x), s.wall_induced_max);
        }
        out.control_series = control;
    }
    out.series = series;
    Ok(out)
}

fn is_real_state(s: &InitialState) -> bool {
    match s {
        InitialState::Gaussian { .. } => true,
        InitialState::EigenSuperposition { terms } => terms.iter().all(|t| t.im == 0.0),
        InitialState::BasisState { .. } => false,
    }
}

/// Outcome of re-expanding an expanding-branch basis state at `T/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversalSummary {
    pub coefficients: Vec<Complex64>,
    pub norm_sqr: f64,
    pub above_threshold: usize,
}

pub fn reversal_summary(traj: &WallTrajectory, n: usize, threshold: f64, params: &PhysicalParams) -> Result<ReversalSummary> {
    let WallTrajectory::PiecewiseReversal { l0, q, .. } = *traj else {
        return Err(Error::UnsupportedTrajectory { op: "reversal", traj: traj.name() });
    };
    let mut coeffs = vec![Complex64::new(0.0, 0.0); (n + 1).max(8)];
    coeffs[n] = Complex64::new(1.0, 0.0);
    let start = SpectralCoefficients {
        coeffs,
        parity: Parity::Even,
        traj: WallTrajectory::Linear { l0, q },
        t_ref: 0.0,
        params: *params,
    };
    let rebased = rebase_at_reversal(&start, traj)?;
    Ok(ReversalSummary {
        norm_sqr: rebased.norm_sqr(),
        above_threshold: rebased.coeffs.iter().filter(|c| c.norm() > threshold).count(),
        coefficients: rebased.coeffs,
    })
}

fn reversal(cfg: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let InitialState::BasisState { n } = cfg.initial_state else {
        return Err(Error::Config("reversal requires a basis-state initial state".into()));
    };
    let tol = &cfg.tolerances;
    let s = reversal_summary(&cfg.trajectory, n, tol.rebase_coefficient, &cfg.params)?;
    let mut w = csv::Writer::from_path(dir.join("reversal.csv"))?;
    w.write_record(["n", "re", "im", "abs"])?;
    for (k, c) in s.coefficients.iter().enumerate() {
        w.write_record([k.to_string(), fmt_f64(c.re), fmt_f64(c.im), fmt_f64(c.norm())])?;
    }
    w.flush()?;
    let mut out = RunOutcome::default();
    out.files.push("reversal.csv".into());
    out.checks.push(Check::new(
        "spread over contracting basis",
        s.above_threshold > 1,
        format!("{} coefficients above {:e}", s.above_threshold, tol.rebase_coefficient),
    ));
    let drift = (s.norm_sqr - 1.0).abs();
    out.checks.push(Check::new(
        "rebased norm",
        drift < tol.rebase_norm,
        format!("|norm^2 - 1| = {drift:e} (< {:e})", tol.rebase_norm),
    ));
    out.metric("coefficients_above_threshold", s.above_threshold as f64);
    out.metric("rebased_norm_drift", drift);
    Ok(out)
}

/// Output directory: the command-line value, else the config's, else
/// `out/<scenario>`.
pub fn resolve_output_dir(kind: ScenarioKind, cfg: &ScenarioConfig, cli: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(kind.name()))
}
