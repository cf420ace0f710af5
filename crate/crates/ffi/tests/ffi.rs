use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use pacomm_ffi::*;

fn rule(spec: &str) -> *mut PacommRule {
    let spec = CString::new(spec).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { pacomm_rule_parse(spec.as_ptr(), &mut out) },
        PacommStatus::Ok
    );
    out
}

fn structure(a: &[f64], mu: Option<&[f64]>, n: usize) -> *mut PacommStructure {
    let mut out = ptr::null_mut();
    let mu = mu.map_or(ptr::null(), |m| m.as_ptr());
    assert_eq!(
        unsafe { pacomm_structure_new(a.as_ptr(), mu, n, &mut out) },
        PacommStatus::Ok
    );
    out
}

fn last_error() -> String {
    let p = pacomm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(pacomm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn majority_rule_fixed_points() {
    let r = rule("majority:m=3");
    let mut m = 0;
    assert_eq!(unsafe { pacomm_rule_m(r, &mut m) }, PacommStatus::Ok);
    assert_eq!(m, 3);
    let mut v = 0.0;
    assert_eq!(
        unsafe { pacomm_rule_eval(r, 0.25, &mut v) },
        PacommStatus::Ok
    );
    // 3z^2 - 2z^3
    assert!((v - (3.0 * 0.0625 - 2.0 * 0.015625)).abs() < 1e-15);

    let mut count = 0;
    let status =
        unsafe { pacomm_rule_fixed_points(r, ptr::null_mut(), ptr::null_mut(), 0, &mut count) };
    assert_eq!(status, PacommStatus::BufferTooSmall);
    assert_eq!(count, 3);
    let mut z = [0.0; 3];
    let mut kinds = [PacommFixedPointKind::Stable; 3];
    let status =
        unsafe { pacomm_rule_fixed_points(r, z.as_mut_ptr(), kinds.as_mut_ptr(), 3, &mut count) };
    assert_eq!(status, PacommStatus::Ok);
    assert!(z[0].abs() < 1e-12 && (z[1] - 0.5).abs() < 1e-12 && (z[2] - 1.0).abs() < 1e-12);
    assert_eq!(
        kinds,
        [
            PacommFixedPointKind::BoundaryStable,
            PacommFixedPointKind::Unstable,
            PacommFixedPointKind::BoundaryStable
        ]
    );
    unsafe { pacomm_rule_free(r) };
}

#[test]
fn linear_rule_has_no_isolated_fixed_points() {
    let p = [0.0, 0.5, 1.0];
    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { pacomm_rule_explicit(p.as_ptr(), 3, &mut r) },
        PacommStatus::Ok
    );
    let mut linear = false;
    assert_eq!(
        unsafe { pacomm_rule_is_linear(r, &mut linear) },
        PacommStatus::Ok
    );
    assert!(linear);
    let mut count = 0;
    let status =
        unsafe { pacomm_rule_fixed_points(r, ptr::null_mut(), ptr::null_mut(), 0, &mut count) };
    assert_eq!(status, PacommStatus::Invalid);
    assert!(last_error().contains("linear"));
    unsafe { pacomm_rule_free(r) };
}

#[test]
fn error_statuses() {
    let bad = CString::new("nonsense:m=3").unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { pacomm_rule_parse(bad.as_ptr(), &mut r) },
        PacommStatus::Invalid
    );
    assert!(r.is_null());
    assert!(last_error().contains("nonsense"));
    assert_eq!(
        unsafe { pacomm_rule_parse(ptr::null(), &mut r) },
        PacommStatus::NullPointer
    );
    assert_eq!(
        unsafe { pacomm_rule_m(ptr::null(), ptr::null_mut()) },
        PacommStatus::NullPointer
    );

    let p = [0.0, 1.5];
    assert_eq!(
        unsafe { pacomm_rule_explicit(p.as_ptr(), 2, &mut r) },
        PacommStatus::Invalid
    );

    let negative = [1.0, -1.0, 0.0, 1.0];
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { pacomm_structure_new(negative.as_ptr(), ptr::null(), 2, &mut s) },
        PacommStatus::Invalid
    );

    let ok = rule("majority:m=3");
    let mut v = 0.0;
    assert_eq!(
        unsafe { pacomm_rule_eval(ok, 1.5, &mut v) },
        PacommStatus::Invalid
    );
    unsafe { pacomm_rule_free(ok) };
    unsafe { pacomm_rule_free(ptr::null_mut()) };
}

#[test]
fn nu_for_invisible_community() {
    // nu_1 solves 9 nu^2 - 13.2 nu + 4 = 0 on the admissible branch
    let s = structure(&[1.0, 0.0, 10.0, 1.0], Some(&[0.8, 0.2]), 2);
    let mut n = 0;
    assert_eq!(unsafe { pacomm_structure_n(s, &mut n) }, PacommStatus::Ok);
    assert_eq!(n, 2);
    let mut nu = [0.0; 2];
    let mut len = 0;
    assert_eq!(
        unsafe { pacomm_structure_solve_nu(s, nu.as_mut_ptr(), 2, &mut len) },
        PacommStatus::Ok
    );
    assert_eq!(len, 2);
    let expected = (13.2 - (13.2f64 * 13.2 - 144.0).sqrt()) / 18.0;
    assert!((nu[0] - expected).abs() < 1e-10, "{nu:?} vs {expected}");
    assert!((nu[0] + nu[1] - 1.0).abs() < 1e-12);
    unsafe { pacomm_structure_free(s) };
}

#[test]
fn stationary_points_of_symmetric_majority() {
    let r = rule("majority:m=3");
    let s = structure(&[1.0, 0.1, 0.1, 1.0], None, 2);
    let mut count = 0;
    let status = unsafe {
        pacomm_stationary_points(
            r,
            s,
            0,
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            0,
            &mut count,
        )
    };
    assert_eq!(status, PacommStatus::BufferTooSmall);
    assert_eq!(count, 9);
    let mut z = vec![0.0; 2 * count];
    let mut max_re = vec![0.0; count];
    let mut stab = vec![PacommStability::Marginal; count];
    let status = unsafe {
        pacomm_stationary_points(
            r,
            s,
            0,
            z.as_mut_ptr(),
            max_re.as_mut_ptr(),
            stab.as_mut_ptr(),
            count,
            &mut count,
        )
    };
    assert_eq!(status, PacommStatus::Ok);
    let centre = (0..count)
        .find(|&k| (z[2 * k] - 0.5).abs() < 1e-9 && (z[2 * k + 1] - 0.5).abs() < 1e-9)
        .unwrap();
    assert_eq!(stab[centre], PacommStability::LinearlyUnstable);
    assert!(max_re[centre] > 0.0);
    for k in 0..count {
        assert_eq!(stab[k] == PacommStability::LinearlyStable, max_re[k] < 0.0);
    }
    unsafe {
        pacomm_rule_free(r);
        pacomm_structure_free(s);
    }
}

fn run(seed: u64, steps: u64) -> (u64, Vec<f64>, Vec<f64>) {
    let r = rule("minority:m=3");
    let s = structure(&[1.0, 10.0, 10.0, 1.0], None, 2);
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { pacomm_simulation_new(r, s, seed, PacommColors::Balanced, &mut sim) },
        PacommStatus::Ok
    );
    // the simulation owns copies
    unsafe {
        pacomm_rule_free(r);
        pacomm_structure_free(s);
    }
    assert_eq!(
        unsafe { pacomm_simulation_step(sim, steps) },
        PacommStatus::Ok
    );
    let mut n = 0;
    assert_eq!(
        unsafe { pacomm_simulation_n(sim, &mut n) },
        PacommStatus::Ok
    );
    let (mut z, mut y) = (vec![0.0; 2], vec![0.0; 2]);
    let mut len = 0;
    assert_eq!(
        unsafe { pacomm_simulation_z(sim, ptr::null_mut(), 0, &mut len) },
        PacommStatus::BufferTooSmall
    );
    assert_eq!(len, 2);
    assert_eq!(
        unsafe { pacomm_simulation_z(sim, z.as_mut_ptr(), 2, ptr::null_mut()) },
        PacommStatus::Ok
    );
    assert_eq!(
        unsafe { pacomm_simulation_y(sim, y.as_mut_ptr(), 2, ptr::null_mut()) },
        PacommStatus::Ok
    );
    unsafe { pacomm_simulation_free(sim) };
    (n, z, y)
}

#[test]
fn simulation_is_deterministic_and_conservative() {
    let (n0, _, _) = run(5, 0);
    let (n, z, y) = run(5, 2000);
    assert_eq!(n, n0 + 2000);
    assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(z.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(run(5, 2000), (n, z.clone(), y));
    assert_ne!(run(6, 2000).1, z);
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let lib = [
        target_dir().join("libpacomm_ffi.a"),
        target_dir().join("deps/libpacomm_ffi.a"),
    ]
    .into_iter()
    .find(|p| p.exists());
    let Some(lib) = lib else {
        eprintln!("static library not built, skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "{}{}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
