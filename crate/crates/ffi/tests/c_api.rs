use std::ffi::{CStr, CString};
use std::ptr;

use boxdyn::model::{BasisIndex, WallTrajectory};
use boxdyn::observables::current_basis_closed;
use boxdyn_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(boxdyn_last_error_message()) }.to_string_lossy().into_owned()
}

fn linear(l0: f64, q: f64) -> *mut BoxdynTrajectory {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { boxdyn_trajectory_linear(l0, q, &mut t) }, BoxdynStatus::Ok);
    assert!(!t.is_null());
    t
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(boxdyn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn theta_routes_agree() {
    let (mut a_re, mut a_im, mut b_re, mut b_im) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(boxdyn_theta2(0.3, -0.1, 0.2, 0.7, &mut a_re, &mut a_im), BoxdynStatus::Ok);
        assert_eq!(boxdyn_jacobi_transform_theta2(0.3, -0.1, 0.2, 0.7, &mut b_re, &mut b_im), BoxdynStatus::Ok);
    }
    assert!((a_re - b_re).abs() < 1e-12 && (a_im - b_im).abs() < 1e-12);
}

#[test]
fn theta2_known_value() {
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { boxdyn_theta2(0.0, 0.0, 0.0, 4.0, &mut re, &mut im) }, BoxdynStatus::Ok);
    let pi = std::f64::consts::PI;
    let expected = 2.0 * (-pi).exp() * (1.0 + (-8.0 * pi).exp());
    assert!((re - expected).abs() < 1e-15 && im.abs() < 1e-15);
}

#[test]
fn kappa_outside_upper_half_plane_is_an_engine_error() {
    let (mut re, mut im) = (0.0, 0.0);
    let s = unsafe { boxdyn_theta4(0.0, 0.0, 0.0, -1.0, &mut re, &mut im) };
    assert_ne!(s, BoxdynStatus::Ok);
    assert!(!last_error().is_empty());
}

#[test]
fn null_pointers_are_rejected() {
    let mut re = 0.0;
    let s = unsafe { boxdyn_theta2(0.0, 0.0, 0.0, 1.0, &mut re, ptr::null_mut()) };
    assert_eq!(s, BoxdynStatus::InvalidArgument);
    assert!(last_error().contains("out_im"));
    let mut len = 0usize;
    assert_eq!(unsafe { boxdyn_field_len(ptr::null(), &mut len) }, BoxdynStatus::InvalidArgument);
    unsafe {
        boxdyn_field_free(ptr::null_mut());
        boxdyn_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn invalid_trajectory_is_a_config_error() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { boxdyn_trajectory_static(-1.0, &mut t) }, BoxdynStatus::Config);
    assert!(t.is_null());
}

#[test]
fn trajectory_handles_report_length() {
    let mut handles = [ptr::null_mut(); 3];
    unsafe {
        assert_eq!(boxdyn_trajectory_static(50.0, &mut handles[0]), BoxdynStatus::Ok);
        assert_eq!(boxdyn_trajectory_smooth_turn_on(50.0, 1e-3, 1e3, &mut handles[1]), BoxdynStatus::Ok);
        assert_eq!(boxdyn_trajectory_piecewise_reversal(50.0, 1e-3, 200.0, &mut handles[2]), BoxdynStatus::Ok);
        let mut l = 0.0;
        assert_eq!(boxdyn_trajectory_length(handles[2], 200.0, &mut l), BoxdynStatus::Ok);
        assert!((l - 50.0).abs() < 1e-12);
        assert_eq!(boxdyn_trajectory_length(handles[2], 100.0, &mut l), BoxdynStatus::Ok);
        assert!((l - 50.1).abs() < 1e-12);
        for h in handles {
            boxdyn_trajectory_free(h);
        }
    }
}

#[test]
fn basis_field_is_normalized_and_copyable() {
    let traj = linear(100.0, 1e-3);
    unsafe {
        let mut field = ptr::null_mut();
        assert_eq!(boxdyn_field_basis_physical(traj, ptr::null(), 0, 10.0, 1025, &mut field), BoxdynStatus::Ok);
        let mut len = 0;
        assert_eq!(boxdyn_field_len(field, &mut len), BoxdynStatus::Ok);
        assert_eq!(len, 1025);
        let (mut x, mut re, mut im) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        assert_eq!(
            boxdyn_field_copy(field, x.as_mut_ptr(), re.as_mut_ptr(), im.as_mut_ptr(), len),
            BoxdynStatus::Ok
        );
        assert!((x[len - 1] - 50.005).abs() < 1e-12);
        let h = x[1] - x[0];
        let norm: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum::<f64>() * h;
        assert!((norm - 1.0).abs() < 1e-6);
        assert_eq!(boxdyn_field_copy(field, ptr::null_mut(), re.as_mut_ptr(), ptr::null_mut(), 3), BoxdynStatus::Config);
        boxdyn_field_free(field);
        boxdyn_trajectory_free(traj);
    }
}

#[test]
fn weak_momentum_of_basis_state_matches_comoving_law() {
    let traj = linear(100.0, 1e-3);
    let params = BoxdynParams { mass: 1.0, hbar: 1.0, c: 137.035999084 };
    unsafe {
        let mut field = ptr::null_mut();
        assert_eq!(boxdyn_field_basis_physical(traj, &params, 0, 0.0, 4097, &mut field), BoxdynStatus::Ok);
        let mut pw = 0.0;
        assert_eq!(boxdyn_field_weak_momentum(field, &params, 20.0, &mut pw), BoxdynStatus::Ok);
        // Re P_w = m v with v = q x / L.
        let expected = 1e-3 * 20.0 / 100.0;
        assert!((pw - expected).abs() < 1e-6 * expected, "{pw} vs {expected}");
        boxdyn_field_free(field);
        boxdyn_trajectory_free(traj);
    }
}

#[test]
fn gaussian_field_at_start_is_the_initial_packet() {
    let traj = linear(100.0, 1e-4);
    unsafe {
        let mut field = ptr::null_mut();
        assert_eq!(boxdyn_field_gaussian(traj, ptr::null(), 1.0, 0.0, 2049, &mut field), BoxdynStatus::Ok);
        let mut re = vec![0.0; 2049];
        assert_eq!(boxdyn_field_copy(field, ptr::null_mut(), re.as_mut_ptr(), ptr::null_mut(), 2049), BoxdynStatus::Ok);
        let peak = re[1024];
        let expected = (2.0 * std::f64::consts::PI).powf(-0.25);
        assert!((peak.abs() - expected).abs() < 1e-8, "{peak}");
        boxdyn_field_free(field);
        boxdyn_trajectory_free(traj);
    }
}

#[test]
fn closed_current_matches_core() {
    let traj = linear(100.0, 1e-4);
    let mut j = 0.0;
    assert_eq!(unsafe { boxdyn_current_basis_closed(traj, 1, 12.5, 30.0, &mut j) }, BoxdynStatus::Ok);
    let core = current_basis_closed(BasisIndex::even(1), &WallTrajectory::Linear { l0: 100.0, q: 1e-4 }, 12.5, 30.0).unwrap();
    assert_eq!(j, core);
    unsafe { boxdyn_trajectory_free(traj) };
}

#[test]
fn run_scenario_theta_selftest() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = CString::new("theta-selftest").unwrap();
    let cfg = CString::new("[theta]\nsamples = 50\nseed = 7\n").unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut passed = -1;
    let s = unsafe { boxdyn_run_scenario(scenario.as_ptr(), cfg.as_ptr(), out.as_ptr(), &mut passed) };
    assert_eq!(s, BoxdynStatus::Ok, "{}", last_error());
    assert_eq!(passed, 1);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn run_scenario_reports_bad_config() {
    let scenario = CString::new("theta-selftest").unwrap();
    let cfg = CString::new("nonsense = 1\n").unwrap();
    let out = CString::new("unused").unwrap();
    let mut passed = -1;
    let s = unsafe { boxdyn_run_scenario(scenario.as_ptr(), cfg.as_ptr(), out.as_ptr(), &mut passed) };
    assert_eq!(s, BoxdynStatus::Config);
    assert!(last_error().contains("nonsense"));
    let bad = CString::new("no-such-scenario").unwrap();
    let s = unsafe { boxdyn_run_scenario(bad.as_ptr(), cfg.as_ptr(), out.as_ptr(), &mut passed) };
    assert_eq!(s, BoxdynStatus::Config);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/boxdyn.h")).unwrap();
    for name in [
        "BOXDYN_H",
        "BOXDYN_STATUS_OK = 0",
        "BOXDYN_STATUS_PANIC = 5",
        "typedef struct BoxdynTrajectory BoxdynTrajectory",
        "typedef struct BoxdynField BoxdynField",
        "boxdyn_last_error_message(void)",
        "boxdyn_theta2(",
        "boxdyn_trajectory_piecewise_reversal(",
        "boxdyn_field_weak_momentum(",
        "boxdyn_run_scenario(",
        "size_t",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
