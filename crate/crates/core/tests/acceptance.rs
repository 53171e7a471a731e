//! Acceptance suite: one PASS/FAIL line per criterion, INFO lines for
//! supporting measurements. Exits non-zero when any criterion fails.
//!
//! Arguments select criteria by number, e.g.
//! `cargo test --test acceptance -- 1 4 7`; none runs all eight.

use std::process::ExitCode;
use std::time::Instant;

use boxdyn::analytic::{basis_physical, gaussian_closed_form, GaussianParams, SpectralCoefficients};
use boxdyn::model::{BasisIndex, Grid, Parity, PhysicalParams, WallTrajectory};
use boxdyn::numeric::{to_physical, PropagatorConfig, Scheme};
use boxdyn::observables::{bohm_trajectory, current, current_basis_closed, weak_scan, PointwiseSnapshot, ProbePoint};
use boxdyn::scenario::{
    propagate_with_checks, reversal_summary, scan_series, signature, static_superposition_local, strong_summary, Engine,
    InitialState, NumericHealth, ScenarioConfig, SignatureSummary, TimeSpec,
};
use boxdyn::theta;
use num_complex::Complex64;

const THETA_TOL: f64 = 1e-12;
const STRONG_TOL: f64 = 1e-8;
const ORACLE_TOL: f64 = 1e-6;
const NORM_TOL: f64 = 1e-8;
const CURRENT_TOL: f64 = 1e-8;
const SIGNATURE_FACTOR: f64 = 1e3;
const CONTINUITY_TOL: f64 = 1e-5;
const REBASE_COEFF: f64 = 1e-6;
const REBASE_NORM_TOL: f64 = 1e-8;
const COMOVING_TOL: f64 = 1e-6;

#[derive(Default)]
struct Report {
    failed: Vec<String>,
    passed: usize,
}

impl Report {
    fn check(&mut self, id: &str, name: &str, ok: bool, detail: String) {
        println!("{} [{id}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(format!("[{id}] {name}"));
        }
    }

    fn error(&mut self, id: &str, name: &str, e: boxdyn::Error) {
        self.check(id, name, false, format!("error: {e}"));
    }
}

fn info(id: &str, msg: String) {
    println!("INFO [{id}] {msg}");
}

/// Norm and continuity results of every numeric propagation in criteria 3 and 5.
#[derive(Default)]
struct HealthLog(Vec<(String, NumericHealth)>);

fn main() -> ExitCode {
    let mut report = Report::default();
    let mut health = HealthLog::default();
    let params = PhysicalParams::default();
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let want = |id: &str| selected.is_empty() || selected.iter().any(|s| s == id);

    if want("1") {
        timed("1", || theta_identity(&mut report));
    }
    if want("2") {
        timed("2", || strong_null(&mut report));
    }
    if want("3") {
        timed("3", || oracle(&mut report, &mut health));
    }
    if want("4") {
        timed("4", || current_equivalence(&mut report, &params));
    }
    if want("5") {
        timed("5", || fig1_signature(&mut report, &mut health));
    }
    if want("6") {
        timed("6", || continuity_and_unitarity(&mut report, &health));
    }
    if want("7") {
        timed("7", || reversal(&mut report, &params));
    }
    if want("8") {
        timed("8", || comoving(&mut report, &params));
    }

    println!(
        "acceptance: {} passed, {} failed{}",
        report.passed,
        report.failed.len(),
        if report.failed.is_empty() { String::new() } else { format!(" ({})", report.failed.join(", ")) }
    );
    if report.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn timed(id: &str, f: impl FnOnce()) {
    let start = Instant::now();
    f();
    info(id, format!("elapsed {:.2} s", start.elapsed().as_secs_f64()));
}

fn theta_identity(r: &mut Report) {
    let (name, samples) = ("jacobi transformation of theta2", 4000);
    let mut worst = 0.0f64;
    for seed in [2024, 1, 2, 3] {
        match theta::self_test(samples / 4, seed) {
            Ok(s) => worst = worst.max(s.max_transform_residual),
            Err(e) => return r.error("1", name, e),
        }
    }
    r.check(
        "1",
        name,
        worst < THETA_TOL,
        format!("max relative residual {worst:e} over {samples} random (z, kappa), Im kappa in [0.05, 50] (< {THETA_TOL:e})"),
    );
}

fn strong_null(r: &mut Report) {
    let name = "strong nonlocality null result";
    let cfg = ScenarioConfig {
        trajectory: WallTrajectory::Linear { l0: 100.0, q: 1e-4 },
        initial_state: InitialState::Gaussian { d: 1.0 },
        ..Default::default()
    };
    // deviation restricted to the window where the packet stays far from the walls
    let early_window = 15.0;
    let mut early = Vec::new();
    let summary = strong_summary(&cfg, |q, t, dev, _, _| {
        if t <= early_window {
            early.push((q, t, dev));
        }
        Ok(())
    });
    let summary = match summary {
        Ok(s) => s,
        Err(e) => return r.error("2", name, e),
    };
    for s in &summary {
        r.check(
            "2",
            &format!("{name}, q = {:e}", s.q),
            s.max_deviation < STRONG_TOL,
            format!(
                "max |psi(q)/psi(0) - 1| = {:e} at x = {}, t = {} over {} points, {} node-guarded (< {STRONG_TOL:e})",
                s.max_deviation, s.x_at_max, s.t_at_max, s.evaluated, s.node_guarded
            ),
        );
        let e = early.iter().filter(|e| e.0 == s.q).map(|e| e.2).fold(0.0, f64::max);
        info("2", format!("q = {:e}: max deviation for t <= {early_window} is {e:e}", s.q));
    }
}

fn oracle(r: &mut Report, health: &mut HealthLog) {
    let name = "analytic vs numeric to t = 1e4";
    let traj = WallTrajectory::Linear { l0: 100.0, q: 1e-4 };
    let cfg = ScenarioConfig {
        trajectory: traj,
        propagator: PropagatorConfig { dt: 0.05, n_points: 4096, scheme: Scheme::Yoshida6 },
        ..Default::default()
    };
    let run = || -> boxdyn::Result<(f64, f64, NumericHealth)> {
        let grid = Grid::transformed(4096, 100.0)?;
        let p = &cfg.params;
        let basis = InitialState::BasisState { n: 0 }.sample(&traj, &grid, p)?;
        let gauss = InitialState::Gaussian { d: 1.0 }.sample(&traj, &grid, p)?;
        let g = GaussianParams::new(1.0)?;
        let times: Vec<f64> = (0..=10).map(|k| 1e3 * k as f64).collect();
        let checks: Vec<f64> = times[1..].to_vec();
        let (mut eb, mut eg) = (0.0f64, 0.0f64);
        let mut states = vec![basis, gauss];
        let (_, h) = propagate_with_checks(&cfg, &mut states, &times, &checks, |s| {
            let t = s[0].t;
            let gp = Grid::physical(4096, &traj, t)?;
            eb = eb.max(to_physical(&s[0], &traj, t, &gp)?.max_abs_diff(&basis_physical(BasisIndex::even(0), &traj, t, &gp, p)?)?);
            eg = eg.max(to_physical(&s[1], &traj, t, &gp)?.max_abs_diff(&gaussian_closed_form(g, &traj, t, &gp, p)?)?);
            Ok(())
        })?;
        Ok((eb, eg, h))
    };
    match run() {
        Ok((eb, eg, h)) => {
            r.check(
                "3",
                &format!("{name}, basis state n = 0"),
                eb < ORACLE_TOL,
                format!("max L-inf error {eb:e} (< {ORACLE_TOL:e})"),
            );
            r.check(
                "3",
                &format!("{name}, gaussian d = 1"),
                eg < ORACLE_TOL,
                format!("max L-inf error {eg:e} (< {ORACLE_TOL:e})"),
            );
            r.check(
                "3",
                &format!("{name}, norm drift"),
                h.max_norm_drift < NORM_TOL,
                format!("{:e} (< {NORM_TOL:e}); 4096 points, yoshida6, dt = 0.05", h.max_norm_drift),
            );
            health.0.push(("oracle run".into(), h));
        }
        Err(e) => r.error("3", name, e),
    }
}

fn current_equivalence(r: &mut Report, params: &PhysicalParams) {
    let name = "closed-form basis current";
    let traj = WallTrajectory::Linear { l0: 100.0, q: 1e-4 };
    let run = || -> boxdyn::Result<f64> {
        let mut worst = 0.0f64;
        for n in [0, 1, 5, 10] {
            for t in [0.0, 1e3, 1e4] {
                let grid = Grid::physical(8193, &traj, t)?;
                let field = basis_physical(BasisIndex::even(n), &traj, t, &grid, params)?;
                let j = current(&field, params)?;
                for (&x, &ji) in grid.x().iter().zip(&j) {
                    worst = worst.max((ji - current_basis_closed(BasisIndex::even(n), &traj, x, t)?).abs());
                }
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(worst) => r.check(
            "4",
            &format!("{name} vs generic current"),
            worst < CURRENT_TOL,
            format!("max |j_closed - j| = {worst:e} over n in {{0,1,5,10}}, t in {{0,1e3,1e4}} (< {CURRENT_TOL:e})"),
        ),
        Err(e) => r.error("4", name, e),
    }
    match current_basis_closed(BasisIndex::even(0), &traj, 25.0, 0.0) {
        Ok(j) => r.check(
            "4",
            &format!("{name} spot value"),
            (j - 2.5e-7).abs() < 1e-15,
            format!("j_0(x = 25, t = 0) = {j:e} (expected 2.5e-7)"),
        ),
        Err(e) => r.error("4", name, e),
    }
}

fn fig1_config(beta: f64, n_points: usize, scheme: Scheme, dt: f64) -> ScenarioConfig {
    ScenarioConfig {
        trajectory: WallTrajectory::SmoothTurnOn { l0: 100.0, q: 1e-4, beta },
        initial_state: InitialState::fig1(),
        engine: Engine::Numeric,
        propagator: PropagatorConfig { dt, n_points, scheme },
        probes: vec![35.0, 40.0, 45.0],
        times: TimeSpec::default(),
        ..Default::default()
    }
}

struct WeakRun {
    first_values: Vec<Option<f64>>,
    signature: Vec<SignatureSummary>,
}

fn weak_run(cfg: &ScenarioConfig, label: &str, health: &mut HealthLog) -> boxdyn::Result<WeakRun> {
    let traj = cfg.trajectory;
    let still = traj.with_speed(0.0);
    let (moving, hm) = scan_series(cfg, &traj)?;
    let (control, hc) = scan_series(cfg, &still)?;
    health.0.extend(hm.map(|h| (format!("{label}, moving walls"), h)));
    health.0.extend(hc.map(|h| (format!("{label}, fixed walls"), h)));

    let InitialState::EigenSuperposition { terms } = &cfg.initial_state else {
        unreachable!("fig. 1 state is a superposition")
    };
    let probes: Vec<ProbePoint> = moving.iter().map(|s| s.probe).collect();
    let exact = weak_scan(
        |t| {
            Ok(PointwiseSnapshot {
                t,
                eval: move |x| static_superposition_local(terms, still.l0(), &cfg.params, x, t),
            })
        },
        &probes,
        &cfg.times.resolve()?,
        &cfg.params,
    )?;
    Ok(WeakRun {
        first_values: moving.iter().map(|s| s.records.first().and_then(|r| r.re_pw)).collect(),
        signature: signature(&moving, &control, Some(&exact)),
    })
}

fn literal_signature(sig: &[SignatureSummary]) -> bool {
    sig.iter().all(|s| s.moving_max > SIGNATURE_FACTOR * s.control_max)
}

fn signature_info(id: &str, label: &str, sig: &[SignatureSummary]) {
    for s in sig {
        info(
            id,
            format!(
                "{label}, x = {}: wall-induced max |Re P_w(q) - Re P_w(0)| before t_c = {:e}, control noise floor {:e} (ratio {:.3e})",
                s.x,
                s.wall_induced_max,
                s.noise_floor,
                s.wall_induced_max / s.noise_floor
            ),
        );
    }
}

fn fig1_signature(r: &mut Report, health: &mut HealthLog) {
    let label = "4096 points, midpoint, dt = 5e-5";
    let base = match weak_run(&fig1_config(1e3, 4096, Scheme::Midpoint, 5e-5), "beta = 1e3", health) {
        Ok(w) => w,
        Err(e) => return r.error("5", "fig. 1 signature", e),
    };

    let zero = base.first_values.iter().all(|v| *v == Some(0.0));
    r.check(
        "5a",
        "Re P_w(t = 0) = 0 at every probe",
        zero,
        format!("values {:?}", base.first_values),
    );

    for s in &base.signature {
        r.check(
            "5b",
            &format!("|Re P_w| exceeds 1e3 x control before t_c, x = {}", s.x),
            s.moving_max > SIGNATURE_FACTOR * s.control_max,
            format!(
                "max before t_c = {:.6}: moving {:e}, control {:e}, ratio {:e}",
                s.t_c,
                s.moving_max,
                s.control_max,
                s.literal_ratio()
            ),
        );
    }
    signature_info("5b", label, &base.signature);

    let fine_label = "16384 points, yoshida6, dt = 2e-5";
    match weak_run(&fig1_config(1e3, 16384, Scheme::Yoshida6, 2e-5), "beta = 1e3, 16384 points", health) {
        Ok(w) => signature_info("5b", fine_label, &w.signature),
        Err(e) => info("5b", format!("{fine_label}: error {e}")),
    }

    let mut persists = literal_signature(&base.signature);
    let mut detail = vec![format!("beta = 1e3: {}", ratios(&base.signature))];
    for beta in [1e2, 1e4] {
        match weak_run(&fig1_config(beta, 4096, Scheme::Midpoint, 5e-5), &format!("beta = {beta:e}"), health) {
            Ok(w) => {
                persists &= literal_signature(&w.signature);
                detail.push(format!("beta = {beta:e}: {}", ratios(&w.signature)));
                signature_info("5c", &format!("beta = {beta:e}, {label}"), &w.signature);
            }
            Err(e) => return r.error("5c", "signature across beta", e),
        }
    }
    r.check(
        "5c",
        "signature persists for beta in {1e2, 1e3, 1e4}",
        persists,
        format!("moving/control ratios per probe: {}", detail.join("; ")),
    );
}

fn ratios(sig: &[SignatureSummary]) -> String {
    sig.iter().map(|s| format!("{:.3e}", s.literal_ratio())).collect::<Vec<_>>().join(", ")
}

fn continuity_and_unitarity(r: &mut Report, health: &HealthLog) {
    if health.0.is_empty() {
        return r.check("6", "continuity and unitarity", false, "no numeric propagation completed".into());
    }
    for (label, h) in &health.0 {
        r.check(
            "6",
            &format!("norm drift, {label}"),
            h.max_norm_drift < NORM_TOL,
            format!("{:e} (< {NORM_TOL:e})", h.max_norm_drift),
        );
        let c = h.max_continuity();
        r.check(
            "6",
            &format!("continuity, {label}"),
            !h.continuity.is_empty() && c < CONTINUITY_TOL,
            format!("max L1 residual {c:e} over {} times (< {CONTINUITY_TOL:e})", h.continuity.len()),
        );
    }
}

fn reversal(r: &mut Report, params: &PhysicalParams) {
    let name = "reversal re-expansion";
    let traj = WallTrajectory::PiecewiseReversal { l0: 100.0, q: 1e-4, period: 2e4 };
    match reversal_summary(&traj, 0, REBASE_COEFF, params) {
        Ok(s) => {
            r.check(
                "7",
                &format!("{name} spreads over the contracting basis"),
                s.above_threshold > 1,
                format!("{} coefficients above {REBASE_COEFF:e}", s.above_threshold),
            );
            let drift = (s.norm_sqr - 1.0).abs();
            r.check(
                "7",
                &format!("{name} preserves the norm"),
                drift < REBASE_NORM_TOL,
                format!("|norm^2 - 1| = {drift:e} (< {REBASE_NORM_TOL:e})"),
            );
        }
        Err(e) => r.error("7", name, e),
    }
}

fn comoving(r: &mut Report, params: &PhysicalParams) {
    let name = "bohmian comoving law";
    let traj = WallTrajectory::Linear { l0: 100.0, q: 1e-4 };
    let run = || -> boxdyn::Result<f64> {
        let mut worst = 0.0f64;
        for (n, x0) in [(0, 10.0), (0, -30.0), (0, 45.0), (3, 10.0)] {
            let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
            coeffs[n] = Complex64::new(1.0, 0.0);
            let c = &SpectralCoefficients { coeffs, parity: Parity::Even, traj, t_ref: 0.0, params: *params };
            let path = bohm_trajectory(
                |t| Ok(PointwiseSnapshot { t, eval: move |x| c.eval_physical(x, t) }),
                &traj,
                x0,
                0.0,
                1e4,
                10.0,
                params,
            )?;
            for (t, x) in path {
                let expected = x0 * traj.length(t)? / 100.0;
                worst = worst.max(((x - expected) / expected).abs());
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(worst) => r.check(
            "8",
            name,
            worst < COMOVING_TOL,
            format!("max relative deviation from x0 L(t)/L0 over t in [0, 1e4]: {worst:e} (< {COMOVING_TOL:e})"),
        ),
        Err(e) => r.error("8", name, e),
    }
}
