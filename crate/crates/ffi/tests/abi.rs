use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use subord_ffi::*;

const HEAT: &str = "[grid]\npoints = 32\n[psi]\ndim = 1\nkind = \"quadratic\"\n[symbol]\nconstruction = \"psi\"\n";

fn last_error() -> String {
    unsafe { CStr::from_ptr(subord_last_error()) }.to_str().unwrap().to_owned()
}

fn heat() -> *mut SubordSymbol {
    let cfg = CString::new(HEAT).unwrap();
    let mut sym = ptr::null_mut();
    assert_eq!(unsafe { subord_symbol_from_config(cfg.as_ptr(), &mut sym) }, SubordStatus::Ok);
    sym
}

fn mode(k: i32, n: usize) -> *mut SubordGridFn {
    let h = std::f64::consts::TAU / n as f64;
    let re: Vec<f64> = (0..n).map(|j| (k as f64 * j as f64 * h).cos()).collect();
    let im: Vec<f64> = (0..n).map(|j| (k as f64 * j as f64 * h).sin()).collect();
    let mut u = ptr::null_mut();
    let status = unsafe { subord_gridfn_new(1, n, std::f64::consts::TAU, re.as_ptr(), im.as_ptr(), &mut u) };
    assert_eq!(status, SubordStatus::Ok, "{}", last_error());
    u
}

fn values(u: *const SubordGridFn) -> (Vec<f64>, Vec<f64>) {
    let mut len = 0;
    assert_eq!(unsafe { subord_gridfn_len(u, &mut len) }, SubordStatus::Ok);
    let (mut re, mut im) = (vec![0.0; len], vec![0.0; len]);
    assert_eq!(unsafe { subord_gridfn_values(u, re.as_mut_ptr(), im.as_mut_ptr(), len) }, SubordStatus::Ok);
    (re, im)
}

#[test]
fn eval_and_dim() {
    let sym = heat();
    let mut dim = 0;
    let mut v = 0.0;
    unsafe {
        assert_eq!(subord_symbol_dim(sym, &mut dim), SubordStatus::Ok);
        assert_eq!(dim, 1);
        assert_eq!(subord_symbol_eval(sym, &0.3, &3.0, 1, &mut v), SubordStatus::Ok);
        assert!((v - 9.0).abs() < 1e-12);
        assert_eq!(subord_symbol_eval(sym, &0.3, &3.0, 2, &mut v), SubordStatus::Input);
        subord_symbol_free(sym);
    }
}

#[test]
fn resolvent_on_a_mode() {
    let sym = heat();
    let f = mode(2, 32);
    let (mut u, mut iterations, mut residual) = (ptr::null_mut(), 0, f64::NAN);
    unsafe {
        let status = subord_resolvent_solve(sym, 1.0, f, 1e-12, 0, &mut u, &mut iterations, &mut residual);
        assert_eq!(status, SubordStatus::Ok, "{}", last_error());
        assert!(residual <= 1e-12);
        let (re, im) = values(u);
        let (fr, fi) = values(f);
        for j in 0..32 {
            assert!((re[j] - 0.2 * fr[j]).abs() < 1e-10 && (im[j] - 0.2 * fi[j]).abs() < 1e-10);
        }
        subord_gridfn_free(u);
        subord_gridfn_free(f);
        subord_symbol_free(sym);
    }
}

#[test]
fn apply_and_evolve_scale_a_mode() {
    let sym = heat();
    let f = mode(3, 32);
    let (mut pu, mut u) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(subord_apply(sym, f, &mut pu), SubordStatus::Ok);
        let (re, _) = values(pu);
        let (fr, _) = values(f);
        assert!((re[5] - 9.0 * fr[5]).abs() < 1e-9);
        let status = subord_evolve(sym, f, 1e-3, 100, SubordScheme::CrankNicolson as i32, &mut u);
        assert_eq!(status, SubordStatus::Ok, "{}", last_error());
        let (er, ei) = values(u);
        let decay = (er[0] * er[0] + ei[0] * ei[0]).sqrt();
        assert!((decay - (-0.9f64).exp()).abs() < 1e-4, "{decay}");
        assert_eq!(subord_evolve(sym, f, 1e-3, 1, 7, &mut u), SubordStatus::Input);
        assert!(last_error().contains("scheme"));
        subord_gridfn_free(pu);
        subord_gridfn_free(u);
        subord_gridfn_free(f);
        subord_symbol_free(sym);
    }
}

#[test]
fn null_and_bad_inputs_are_reported() {
    let mut sym = ptr::null_mut();
    unsafe {
        assert_eq!(subord_symbol_from_config(ptr::null(), &mut sym), SubordStatus::NullPointer);
        assert!(last_error().contains("config"));
        let bad = CString::new("[grid]\npoints = \"many\"\n").unwrap();
        assert_eq!(subord_symbol_from_config(bad.as_ptr(), &mut sym), SubordStatus::Config);
        assert!(last_error().contains("line 2"), "{}", last_error());
        assert_eq!(subord_symbol_dim(ptr::null(), &mut 0), SubordStatus::NullPointer);
        let mut u = ptr::null_mut();
        assert_eq!(subord_gridfn_new(1, 8, 1.0, ptr::null(), ptr::null(), &mut u), SubordStatus::NullPointer);
        subord_symbol_free(ptr::null_mut());
        subord_gridfn_free(ptr::null_mut());
        let sym = heat();
        assert!(last_error().is_empty());
        subord_symbol_free(sym);
    }
}

#[test]
fn experiment_through_the_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(std::fs::read_to_string(configs().join("solve.toml")).unwrap()).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut pass = -1;
    unsafe {
        let task = CString::new("solve").unwrap();
        let status = subord_run_experiment(cfg.as_ptr(), task.as_ptr(), out.as_ptr(), &mut pass);
        assert_eq!(status, SubordStatus::Ok, "{}", last_error());
        assert_eq!(pass, 1);
        assert!(dir.path().join("solve-u.tgf").exists());
        let wrong = CString::new("nope").unwrap();
        assert_eq!(subord_run_experiment(cfg.as_ptr(), wrong.as_ptr(), out.as_ptr(), &mut pass), SubordStatus::Config);
    }
    let version = unsafe { CStr::from_ptr(subord_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"subord.h\"\n\
         int main(void) {\n\
           SubordSymbol *s = 0;\n\
           enum SubordStatus st = subord_symbol_from_config(\"\", &s);\n\
           subord_symbol_free(s);\n\
           return st == SUBORD_STATUS_OK ? SUBORD_SCHEME_CRANK_NICOLSON - 1 : 1;\n\
         }\n",
    )
    .unwrap();
    let run = Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(&header).arg(&src).output();
    match run {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("cc not found; header check skipped"),
    }
}
