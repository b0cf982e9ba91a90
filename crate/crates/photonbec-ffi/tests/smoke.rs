//! End-to-end exercise of the C ABI from Rust: handle lifecycle, error
//! reporting, and numeric plausibility of a solved state.

use std::ffi::CStr;
use std::ptr;

use photonbec_ffi::*;

#[test]
fn default_config_solves_and_reports() {
    unsafe {
        let cfg = pbec_config_default();
        assert!(!cfg.is_null());
        assert_eq!(pbec_config_n_modes(cfg), 6);

        let mut ss: *mut PbecSteady = ptr::null_mut();
        let st = pbec_solve(cfg, 1.0, &mut ss);
        assert_eq!(st, PbecStatus::Ok, "{:?}", CStr::from_ptr(pbec_last_error()));
        assert!(!ss.is_null());

        let mut n0 = 0.0;
        assert_eq!(pbec_steady_population(ss, 0, &mut n0), PbecStatus::Ok);
        assert!(n0 > 1.0, "condensed ground mode expected, n0 = {n0}");

        let mut n02 = 0.0;
        assert_eq!(pbec_steady_correlation(ss, 0, 2, &mut n02), PbecStatus::Ok);
        assert!(n02.is_finite());

        let mut clamp = 0.0;
        assert_eq!(pbec_steady_clamp_ratio(ss, &mut clamp), PbecStatus::Ok);
        assert!(clamp > 0.9 && clamp < 1.0, "clamp = {clamp}");

        let mut tau = 0.0;
        let mut tau_closed = 0.0;
        assert_eq!(pbec_steady_tau0(ss, &mut tau), PbecStatus::Ok);
        assert_eq!(pbec_steady_tau0_closed(ss, &mut tau_closed), PbecStatus::Ok);
        assert!(tau > 0.0 && tau_closed > 0.0);

        pbec_steady_free(ss);
        pbec_config_free(cfg);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        // Null pointers.
        assert_eq!(
            pbec_config_from_file(ptr::null(), ptr::null_mut()),
            PbecStatus::InvalidArgument
        );
        assert!(!CStr::from_ptr(pbec_last_error()).to_bytes().is_empty());

        // Missing file.
        let path = std::ffi::CString::new("/nonexistent/config.toml").unwrap();
        let mut cfg: *mut PbecConfig = ptr::null_mut();
        assert_eq!(pbec_config_from_file(path.as_ptr(), &mut cfg), PbecStatus::Config);
        assert!(cfg.is_null());

        // Out-of-range mode index.
        let cfg = pbec_config_default();
        let mut ss: *mut PbecSteady = ptr::null_mut();
        assert_eq!(pbec_solve(cfg, 0.5, &mut ss), PbecStatus::Ok);
        let mut v = 0.0;
        assert_eq!(pbec_steady_population(ss, 99, &mut v), PbecStatus::InvalidArgument);
        let msg = CStr::from_ptr(pbec_last_error()).to_str().unwrap();
        assert!(msg.contains("99"), "{msg}");

        // Invalid pump.
        let mut ss2: *mut PbecSteady = ptr::null_mut();
        assert_eq!(pbec_solve(cfg, -1.0, &mut ss2), PbecStatus::InvalidArgument);

        pbec_steady_free(ss);
        pbec_config_free(cfg);

        // Frees tolerate null.
        pbec_steady_free(ptr::null_mut());
        pbec_config_free(ptr::null_mut());
    }
}

#[test]
fn config_file_roundtrip() {
    unsafe {
        let dir = std::env::temp_dir().join("pbec_ffi_smoke");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cfg.toml");
        std::fs::write(&path, "[cavity]\nn_modes = 3\n").unwrap();
        let cpath = std::ffi::CString::new(path.to_str().unwrap()).unwrap();
        let mut cfg: *mut PbecConfig = ptr::null_mut();
        assert_eq!(pbec_config_from_file(cpath.as_ptr(), &mut cfg), PbecStatus::Ok);
        assert_eq!(pbec_config_n_modes(cfg), 3);
        pbec_config_free(cfg);
    }
}
