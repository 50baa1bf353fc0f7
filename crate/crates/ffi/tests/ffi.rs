use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use srb_core::data::{write_observations, write_tfr};
use srb_core::model::{ModelConfig, TransitionParams};
use srb_core::validation::{simulate_dataset, RegionTruth, SimulationDesign, SimulationTruth};
use srb_ffi::*;

fn last_error() -> String {
    let p = srb_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c(path: &Path) -> CString {
    CString::new(path.to_str().unwrap()).unwrap()
}

#[test]
fn primitives() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            srb_trapezoid_alpha(2003.0, 2000.0, 6.0, 4.0, 10.0, 0.06, &mut out),
            SrbStatus::Ok
        );
        assert!((out - 0.03).abs() < 1e-15);
        assert_eq!(srb_theta(1.049, 0.0, 1, 0.05, &mut out), SrbStatus::Ok);
        assert!((out - 1.099).abs() < 1e-12);
        assert_eq!(srb_obs_loglik(1.049, 0.02, 1.049, &mut out), SrbStatus::Ok);
        let expected = -(0.02f64).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((out - expected).abs() < 1e-12);
    }
    assert!(srb_last_error_message().is_null());
}

#[test]
fn argument_errors_set_message() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            srb_trapezoid_alpha(2000.0, 2000.0, -1.0, 1.0, 1.0, 0.06, &mut out),
            SrbStatus::InvalidArgument
        );
        assert!(last_error().contains("positive"));
        assert_eq!(
            srb_theta(1.0, 0.0, 0, 0.0, ptr::null_mut()),
            SrbStatus::NullPointer
        );
        assert_eq!(
            srb_obs_loglik(0.0, 0.02, 1.0, &mut out),
            SrbStatus::InvalidArgument
        );

        let mut data = ptr::null_mut();
        let missing = CString::new("/nonexistent/observations.csv").unwrap();
        assert_eq!(
            srb_data_load(missing.as_ptr(), missing.as_ptr(), ptr::null(), &mut data),
            SrbStatus::Io
        );
        assert!(data.is_null());
        assert!(last_error().contains("nonexistent"));
        srb_data_free(ptr::null_mut());
        srb_fit_free(ptr::null_mut());
    }
}

#[test]
fn load_fit_and_query() {
    let dir = tempfile::tempdir().unwrap();
    let config = ModelConfig::default();
    let truth = SimulationTruth {
        regions: ["A", "B"]
            .iter()
            .enumerate()
            .map(|(i, id)| RegionTruth {
                region_id: id.to_string(),
                delta: i == 0,
                transition: TransitionParams {
                    gamma: 1994.0,
                    lambda1: 12.0,
                    lambda2: 6.0,
                    lambda3: 12.0,
                    xi: 0.06,
                },
            })
            .collect(),
    };
    let design = SimulationDesign {
        year_start: 1980,
        year_end: 2016,
        observations_per_region: 12,
        births_per_observation: 10_000,
        clusters_per_observation: 40,
        record_level: false,
        survey_years: vec![],
    };
    let sim = simulate_dataset(&truth, &design, &config, 5).unwrap();
    let obs_path = dir.path().join("observations.csv");
    let tfr_path = dir.path().join("tfr.csv");
    write_observations(&obs_path, &sim.observations).unwrap();
    write_tfr(std::fs::File::create(&tfr_path).unwrap(), &sim.tfr).unwrap();

    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(
            srb_data_load(
                c(&obs_path).as_ptr(),
                c(&tfr_path).as_ptr(),
                ptr::null(),
                &mut data
            ),
            SrbStatus::Ok
        );
        let mut n = 0usize;
        assert_eq!(srb_data_region_count(data, &mut n), SrbStatus::Ok);
        assert_eq!(n, 2);

        let mut settings = srb_default_settings();
        settings.n_iterations = 3000;
        settings.n_burnin = 1500;
        settings.thin = 3;
        settings.seed = 11;
        settings.threads = 2;
        let mut fit = ptr::null_mut();
        assert_eq!(srb_fit_run(data, &settings, &mut fit), SrbStatus::Ok);

        let mut p = 0.0;
        let a = CString::new("A").unwrap();
        assert_eq!(
            srb_fit_inflation_probability(fit, a.as_ptr(), &mut p),
            SrbStatus::Ok
        );
        assert!(p > 0.5, "{p}");
        let z = CString::new("Z").unwrap();
        assert_eq!(
            srb_fit_inflation_probability(fit, z.as_ptr(), &mut p),
            SrbStatus::InvalidInput
        );

        let mut rhat = 0.0;
        assert_eq!(srb_fit_max_rhat(fit, &mut rhat), SrbStatus::Ok);
        assert!(rhat >= 1.0 && rhat.is_finite());

        let est = dir.path().join("estimates.csv");
        assert_eq!(
            srb_fit_write_estimates(fit, c(&est).as_ptr()),
            SrbStatus::Ok
        );
        let text = std::fs::read_to_string(&est).unwrap();
        assert!(text.starts_with("region_id,year,median,lower95,upper95\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 37);

        settings.n_burnin = settings.n_iterations;
        let mut bad = ptr::null_mut();
        assert_eq!(
            srb_fit_run(data, &settings, &mut bad),
            SrbStatus::InvalidArgument
        );
        assert!(bad.is_null());

        srb_fit_free(fit);
        srb_data_free(data);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/srb.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "srb_last_error_message",
        "srb_trapezoid_alpha",
        "srb_data_load",
        "srb_fit_run",
        "srb_fit_inflation_probability",
        "srb_fit_write_estimates",
        "srb_fit_max_rhat",
        "srb_fit_free",
        "SRB_STATUS_OK",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"srb.h\"\nint main(void) {\n  double a;\n  SrbMcmcSettings s = srb_default_settings();\n  (void)s;\n  return srb_trapezoid_alpha(2000.0, 1995.0, 5.0, 5.0, 5.0, 0.06, &a) == SRB_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            std::process::Command::new(c)
                .arg("--version")
                .output()
                .is_ok()
        })
        .ok_or(())
}
