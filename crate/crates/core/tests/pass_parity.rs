//! Pass-level properties of the simulator.

use leo_reciprocity::harness::{run_pass, ExperimentConfig, TrackerKind};

fn config(kind: &str, sigma2: f64) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&format!(
        r#"
scenario = "parity"
seed = 8

[orbit]
altitude_m = 1.0e6
window_start_s = -200.0
window_s = 0.05

[[orbit.satellites]]
along_track_deg = 0.0

[[orbit.satellites]]
along_track_deg = 1.5
cross_track_deg = 4.0

[array]
num_antennas = 3
spacing_m = 0.5
azimuth_deg = 20.0

[link]
f_c_down_hz = 30.0e9
f_c_up_hz = 20.0e9
sigma2 = {sigma2:e}

[tracker]
kind = "{kind}"
sample_period_s = 1.0e-6

[output]
record_every = 100
"#
    ))
    .unwrap()
}

#[test]
fn zero_noise_tracked_csit_matches_full_csit() {
    let cfg = config("naive", 0.0);
    assert_eq!(cfg.tracker.kind, TrackerKind::Naive);
    let run = run_pass(&cfg).unwrap();
    assert!(!run.sinr.is_empty());
    for s in &run.sinr {
        assert!(s.cond < 1e4);
        for (f, t) in s.full_db.iter().zip(&s.tracked_db) {
            // Unwrapped carrier phases near 1e9 rad carry ~1e-7 rad of round-off.
            assert!((f - t).abs() < 1e-4, "{f} vs {t}");
        }
    }
}

#[test]
fn noiseless_differential_tracking_has_no_slips() {
    let cfg = config("differential", 1e-3);
    let run = run_pass(&cfg).unwrap();
    assert!(run.summary.first_slip.iter().all(Option::is_none));
    assert!(run.rows.iter().all(|r| r.phi.abs() < 0.5));
    // Reference-antenna rows carry no differential phase.
    assert!(run
        .rows
        .iter()
        .filter(|r| r.antenna == 0)
        .all(|r| r.theta_u_est == 0.0 && r.theta_u_true == 0.0));
}

#[test]
fn mrc_and_zf_are_reported_for_every_satellite() {
    let run = run_pass(&config("dpll", 1e-3)).unwrap();
    for s in &run.sinr {
        assert_eq!(s.full_db.len(), 2);
        assert_eq!(s.mrc_db.len(), 2);
        assert!(s.mrc_db.iter().all(|v| v.is_finite()));
    }
    assert_eq!(run.rows.len(), run.sinr.len() * 6);
}
