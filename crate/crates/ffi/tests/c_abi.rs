use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use market_asymptotics_ffi::*;

fn uniform() -> MaLawSpec {
    MaLawSpec {
        family: MaLawFamily::Uniform,
        param1: 0.0,
        param2: 1.0,
    }
}

fn last_error() -> String {
    let p = ma_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn approx_through_handle() {
    let mut m = ptr::null_mut();
    let power = MaLawSpec {
        family: MaLawFamily::Power,
        param1: 2.0,
        param2: 0.0,
    };
    unsafe {
        assert_eq!(
            ma_market_new(250, 500, &uniform(), &power, &mut m),
            MaStatus::Ok
        );
        let mut a = MaGaussianApprox::default();
        assert_eq!(ma_market_gaussian_approx(m, &mut a), MaStatus::Ok);
        assert!((a.t_alpha - 0.5).abs() < 1e-9);
        assert!((a.e_prime + 1.5).abs() < 1e-9);
        ma_market_free(m);
    }
}

#[test]
fn closed_form_and_pmf() {
    let mut p = MaClosedForm::default();
    let mut x = 0.0;
    unsafe {
        assert_eq!(ma_closed_form_params(1.0, &mut p), MaStatus::Ok);
        assert_eq!(p.sigma2, 0.125);
        assert_eq!(ma_hypergeometric_pmf(1, 2, 1, &mut x), MaStatus::Ok);
        assert!((x - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            ma_closed_form_params(-1.0, &mut p),
            MaStatus::InvalidArgument
        );
        assert!(last_error().contains("lambda"));
        assert_eq!(
            ma_hypergeometric_pmf(0, 2, 0, &mut x),
            MaStatus::InvalidArgument
        );
    }
}

#[test]
fn outcome_and_errors() {
    let v = [0.9, 0.6, 0.3];
    let c = [0.2, 0.5, 0.8];
    let mut o = MaOutcome::default();
    unsafe {
        assert_eq!(
            ma_efficient_outcome(v.as_ptr(), 3, c.as_ptr(), 3, &mut o),
            MaStatus::Ok
        );
        assert_eq!(o.quantity, 2);
        assert!((o.welfare - 0.8).abs() < 1e-15);
        assert_eq!(o.has_prices, 1);
        assert_eq!(
            ma_efficient_outcome(ptr::null(), 3, c.as_ptr(), 3, &mut o),
            MaStatus::NullPointer
        );
        let mut m = ptr::null_mut();
        let bad = MaLawSpec {
            family: MaLawFamily::Uniform,
            param1: 1.0,
            param2: 0.0,
        };
        assert_eq!(
            ma_market_new(3, 3, &bad, &uniform(), &mut m),
            MaStatus::InvalidArgument
        );
        assert!(m.is_null());
        assert!(!last_error().is_empty());
    }
}

#[test]
fn simulation_records_are_deterministic() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(
            ma_market_new(20, 30, &uniform(), &uniform(), &mut m),
            MaStatus::Ok
        );
        let run = |workers| {
            let mut s = ptr::null_mut();
            assert_eq!(ma_simulation_run(m, 64, 99, workers, &mut s), MaStatus::Ok);
            let n = ma_simulation_len(s);
            assert_eq!(n, 64);
            let mut k = vec![0usize; n];
            let mut w = vec![0.0f64; n];
            assert_eq!(
                ma_simulation_records(s, k.as_mut_ptr(), w.as_mut_ptr(), n - 1),
                MaStatus::BufferTooSmall
            );
            assert_eq!(
                ma_simulation_records(s, k.as_mut_ptr(), w.as_mut_ptr(), n),
                MaStatus::Ok
            );
            ma_simulation_free(s);
            (k, w)
        };
        assert_eq!(run(1), run(4));
        let mut s = ptr::null_mut();
        assert_eq!(
            ma_simulation_run(m, 0, 1, 1, &mut s),
            MaStatus::InvalidArgument
        );
        assert_eq!(ma_simulation_len(ptr::null()), 0);
        ma_market_free(m);
        ma_market_free(ptr::null_mut());
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(manifest_dir().join("include/market_asymptotics.h")).unwrap();
    for name in [
        "ma_market_new",
        "ma_market_free",
        "ma_market_gaussian_approx",
        "ma_efficient_outcome",
        "ma_closed_form_params",
        "ma_hypergeometric_pmf",
        "ma_simulation_run",
        "ma_simulation_records",
        "ma_simulation_free",
        "ma_last_error_message",
        "typedef struct MaMarket MaMarket;",
        "MA_STATUS_OK = 0",
    ] {
        assert!(h.contains(name), "missing {name}");
    }
}

/// Compiles and runs a small C program against the static library when a C
/// compiler is available.
#[test]
fn c_program_links_and_runs() {
    let target = manifest_dir().join("../../target/debug");
    let lib = target.join("libmarket_asymptotics_ffi.a");
    let have_cc = Command::new("cc").arg("--version").output().is_ok();
    if !have_cc || !lib.exists() {
        eprintln!("skipping: cc or {} unavailable", lib.display());
        return;
    }
    let dir = std::env::temp_dir().join(format!("ma_ffi_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"
#include <math.h>
#include <stdio.h>
#include "market_asymptotics.h"
int main(void) {
    MaLawSpec u = { MA_LAW_FAMILY_UNIFORM, 0.0, 1.0 };
    MaMarket *m = NULL;
    if (ma_market_new(100, 100, &u, &u, &m) != MA_STATUS_OK) return 1;
    MaGaussianApprox a;
    if (ma_market_gaussian_approx(m, &a) != MA_STATUS_OK) return 2;
    ma_market_free(m);
    if (fabs(a.t_alpha - 0.5) > 1e-9 || fabs(a.sigma2 - 0.125) > 1e-9) return 3;
    MaClosedForm p;
    if (ma_closed_form_params(0.0, &p) != MA_STATUS_INVALID_ARGUMENT) return 4;
    if (ma_last_error_message() == NULL) return 5;
    printf("ok %.3f\n", a.t_alpha);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok 0.500");
    let _ = std::fs::remove_dir_all(&dir);
}
