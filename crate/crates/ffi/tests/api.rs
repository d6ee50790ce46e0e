use std::ffi::{CStr, CString};
use std::ptr;

use cellfree_rpca::linalg::CMatrix;
use cellfree_rpca::subspace_rpca::{outlier_pursuit, SolverParams};
use cellfree_rpca_ffi::*;
use num_complex::Complex64;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = cf_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn config_text(cfg: *const CfConfig) -> String {
    let mut len = 0;
    unsafe {
        assert_eq!(cf_config_to_toml(cfg, ptr::null_mut(), 0, &mut len), CfStatus::BufferTooSmall);
        let mut buf = vec![0u8; len + 1];
        assert_eq!(cf_config_to_toml(cfg, buf.as_mut_ptr().cast(), buf.len(), &mut len), CfStatus::Ok);
        assert_eq!(buf[len], 0);
        String::from_utf8(buf[..len].to_vec()).unwrap()
    }
}

fn set(cfg: *mut CfConfig, key: &str, value: &str) -> CfStatus {
    unsafe { cf_config_set(cfg, c(key).as_ptr(), c(value).as_ptr()) }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(cf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let mut out = 0.0;
    assert_eq!(unsafe { cf_results_median_se(ptr::null(), CfKind::Sp, &mut out) }, CfStatus::NullPointer);
    assert!(last_error().contains("res"));
    assert_eq!(unsafe { cf_config_load(ptr::null(), &mut ptr::null_mut()) }, CfStatus::NullPointer);
    unsafe {
        cf_config_free(ptr::null_mut());
        cf_results_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_the_error() {
    let mut out = 0.0;
    unsafe { cf_results_median_se(ptr::null(), CfKind::Sp, &mut out) };
    assert!(!cf_last_error().is_null());
    let idx = [0usize];
    assert_eq!(unsafe { cf_power_efficiency(4, idx.as_ptr(), 1, idx.as_ptr(), 1, &mut out) }, CfStatus::Ok);
    assert!(cf_last_error().is_null());
}

#[test]
fn config_set_and_validate() {
    let cfg = cf_config_default();
    assert_eq!(set(cfg, "N", "29"), CfStatus::Ok);
    assert_eq!(set(cfg, "solver.max_iter", "123"), CfStatus::Ok);
    assert_eq!(set(cfg, "kinds", r#"["ideal", "pm"]"#), CfStatus::Ok);
    let text = config_text(cfg);
    let parsed: toml::Table = toml::from_str(&text).unwrap();
    assert_eq!(parsed["hopping_order"].as_integer(), Some(29));
    assert_eq!(parsed["solver"]["max_iter"].as_integer(), Some(123));
    assert_eq!(parsed["kinds"].as_array().unwrap().len(), 2);

    assert_eq!(set(cfg, "N", "20"), CfStatus::Config);
    assert!(last_error().contains("N must be prime"));
    assert_eq!(set(cfg, "antenas", "4"), CfStatus::Config);
    assert_eq!(set(cfg, "lambda", "not toml"), CfStatus::Config);
    assert_eq!(config_text(cfg), text, "failed sets must leave the config untouched");
    unsafe { cf_config_free(cfg) };
}

#[test]
fn load_reports_the_path() {
    let mut cfg = ptr::null_mut();
    let status = unsafe { cf_config_load(c("/nonexistent/exp.toml").as_ptr(), &mut cfg) };
    assert_eq!(status, CfStatus::Io);
    assert!(last_error().contains("/nonexistent/exp.toml"));
    assert!(cfg.is_null());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, "L = 3\nM = 4\nN = 7\n").unwrap();
    let path = c(path.to_str().unwrap());
    assert_eq!(unsafe { cf_config_load(path.as_ptr(), &mut cfg) }, CfStatus::Ok);
    let parsed: toml::Table = toml::from_str(&config_text(cfg)).unwrap();
    assert_eq!(parsed["rus"].as_integer(), Some(3));
    assert_eq!(parsed["hopping_order"].as_integer(), Some(7));
    unsafe { cf_config_free(cfg) };
}

#[test]
fn run_and_read_results() {
    let cfg = cf_config_default();
    for (k, v) in [("L", "4"), ("M", "4"), ("K", "8"), ("N", "5"), ("tau_p", "2"), ("area_side", "400.0"), ("layouts", "2"), ("fading", "4")] {
        assert_eq!(set(cfg, k, v), CfStatus::Ok, "{k}");
    }
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { cf_run(cfg, &mut res) }, CfStatus::Ok);

    let mut unserved = usize::MAX;
    assert_eq!(unsafe { cf_results_unserved(res, &mut unserved) }, CfStatus::Ok);
    let mut n = 0;
    assert_eq!(unsafe { cf_results_se(res, CfKind::Ideal, ptr::null_mut(), 0, &mut n) }, CfStatus::BufferTooSmall);
    assert_eq!(n + unserved, 16);

    for kind in [CfKind::Ideal, CfKind::Sp, CfKind::Pp, CfKind::Pm] {
        let mut se = vec![f64::NAN; n];
        let mut len = 0;
        assert_eq!(unsafe { cf_results_se(res, kind, se.as_mut_ptr(), se.len(), &mut len) }, CfStatus::Ok);
        assert_eq!(len, n);
        assert!(se.iter().all(|s| s.is_finite() && *s >= 0.0));

        let mut sorted = se.clone();
        sorted.sort_by(f64::total_cmp);
        let oracle = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        let mut median = f64::NAN;
        assert_eq!(unsafe { cf_results_median_se(res, kind, &mut median) }, CfStatus::Ok);
        assert_eq!(median, oracle);
    }
    for projected in [false, true] {
        let mut pe = f64::NAN;
        assert_eq!(unsafe { cf_results_mean_pe(res, projected, &mut pe) }, CfStatus::Ok);
        assert!((0.0..=1.0).contains(&pe));
    }

    let dir = tempfile::tempdir().unwrap();
    let out = c(dir.path().join("out").to_str().unwrap());
    assert_eq!(unsafe { cf_results_write(res, out.as_ptr()) }, CfStatus::Ok);
    for f in ["rates.csv", "subspace.csv", "summary.json", "config.toml"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    unsafe {
        cf_results_free(res);
        cf_config_free(cfg);
    }
}

#[test]
fn missing_kind_has_no_data() {
    let cfg = cf_config_default();
    for (k, v) in [("L", "3"), ("M", "4"), ("K", "4"), ("N", "5"), ("tau_p", "2"), ("area_side", "300.0"), ("layouts", "1"), ("fading", "2"), ("kinds", r#"["ideal"]"#)] {
        assert_eq!(set(cfg, k, v), CfStatus::Ok, "{k}");
    }
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { cf_run(cfg, &mut res) }, CfStatus::Ok);
    let mut x = 0.0;
    assert_eq!(unsafe { cf_results_median_se(res, CfKind::Pm, &mut x) }, CfStatus::NoData);
    assert_eq!(unsafe { cf_results_mean_pe(res, true, &mut x) }, CfStatus::NoData);
    unsafe {
        cf_results_free(res);
        cf_config_free(cfg);
    }
}

#[test]
fn outlier_pursuit_marshalling() {
    let (rows, cols) = (6, 12);
    let outliers = [2, 9];
    // rank one inliers u c_j with |c_j| = 1, outliers on a different direction
    let y = CMatrix::from_fn(rows, cols, |i, j| {
        if outliers.contains(&j) {
            Complex64::new(((i * 7 + j) % 5) as f64 - 2.0, (i as f64 - 2.5) * 0.3)
        } else {
            Complex64::from_polar(1.0 + 0.1 * i as f64, 0.4 * i as f64) * Complex64::from_polar(1.0, 0.9 * j as f64)
        }
    });
    let (re, im): (Vec<f64>, Vec<f64>) = y.iter().map(|z| (z.re, z.im)).unzip();
    // column-major: element (i, j) sits at j * rows + i
    assert_eq!(re[3 * rows + 1], y[(1, 3)].re);

    let mut params = cf_solver_params_default();
    params.max_iter = 2000;
    params.tol = 1e-9;
    let mut h = (vec![0.0; rows * cols], vec![0.0; rows * cols]);
    let mut e = (vec![0.0; rows * cols], vec![0.0; rows * cols]);
    let (mut iters, mut converged) = (0, false);
    let status = unsafe {
        cf_outlier_pursuit(
            re.as_ptr(), im.as_ptr(), rows, cols, 0.5, &params,
            h.0.as_mut_ptr(), h.1.as_mut_ptr(), e.0.as_mut_ptr(), e.1.as_mut_ptr(),
            &mut iters, &mut converged,
        )
    };
    assert_eq!(status, CfStatus::Ok, "{:?}", cf_last_error());
    assert!(iters > 0);

    let solver = SolverParams { max_iter: 2000, tol: 1e-9, ..Default::default() };
    let direct = outlier_pursuit(&y, 0.5, &solver).unwrap();
    assert_eq!(converged, direct.converged);
    assert_eq!(iters, direct.iterations);
    for (k, z) in direct.h.iter().enumerate() {
        assert_eq!((h.0[k], h.1[k]), (z.re, z.im));
    }
    for (k, z) in direct.e.iter().enumerate() {
        assert_eq!((e.0[k], e.1[k]), (z.re, z.im));
    }
    // ||Y - H - E||_F recomputed from the exported arrays
    let residual = (0..rows * cols)
        .map(|k| (re[k] - h.0[k] - e.0[k]).powi(2) + (im[k] - h.1[k] - e.1[k]).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!((residual - direct.residual).abs() <= 1e-9 * (1.0 + direct.residual), "{residual} vs {}", direct.residual);
}

#[test]
fn outlier_pursuit_bad_input() {
    let v = [0.0, f64::NAN];
    let mut out = [0.0; 2];
    let p = out.as_mut_ptr();
    let s = unsafe { cf_outlier_pursuit(v.as_ptr(), v.as_ptr(), 2, 1, 0.5, ptr::null(), p, p, p, p, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, CfStatus::NonFinite);
    let s = unsafe { cf_outlier_pursuit(v.as_ptr(), v.as_ptr(), 0, 1, 0.5, ptr::null(), p, p, p, p, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, CfStatus::InvalidArgument);
    let s = unsafe { cf_outlier_pursuit(v.as_ptr(), ptr::null(), 2, 1, 0.5, ptr::null(), p, p, p, p, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, CfStatus::NullPointer);
}

#[test]
fn power_efficiency_is_overlap_fraction() {
    // orthonormal DFT columns: tr(P_S P_E) = |S n E|, so E_PE = |S n E| / |E|
    let support = [1usize, 2, 3, 4];
    let mut pe = f64::NAN;
    for (est, expected) in [(vec![3usize, 4, 5], 2.0 / 3.0), (vec![1, 2, 3, 4], 1.0), (vec![6, 7], 0.0), (vec![2], 1.0)] {
        let s = unsafe { cf_power_efficiency(8, support.as_ptr(), 4, est.as_ptr(), est.len(), &mut pe) };
        assert_eq!(s, CfStatus::Ok);
        assert!((pe - expected).abs() < 1e-12, "{est:?}: {pe}");
    }
    let bad = [8usize];
    let s = unsafe { cf_power_efficiency(8, support.as_ptr(), 4, bad.as_ptr(), 1, &mut pe) };
    assert_eq!(s, CfStatus::InvalidArgument);
}

#[test]
fn mols_square_export() {
    let n = 5;
    let mut buf = vec![0u32; n * n];
    for t in 1..n {
        assert_eq!(unsafe { cf_mols_square(n, t, buf.as_mut_ptr(), buf.len()) }, CfStatus::Ok);
        for r in 0..n {
            for col in 0..n {
                assert_eq!(buf[r * n + col] as usize, (t * r + col) % n + 1);
            }
        }
    }
    assert_eq!(unsafe { cf_mols_square(n, 0, buf.as_mut_ptr(), buf.len()) }, CfStatus::InvalidArgument);
    assert_eq!(unsafe { cf_mols_square(n, 5, buf.as_mut_ptr(), buf.len()) }, CfStatus::InvalidArgument);
    assert_eq!(unsafe { cf_mols_square(n, 1, buf.as_mut_ptr(), 24) }, CfStatus::BufferTooSmall);
    assert_eq!(unsafe { cf_mols_square(6, 1, buf.as_mut_ptr(), buf.len()) }, CfStatus::InvalidArgument);
    assert!(last_error().contains("prime"));
}
