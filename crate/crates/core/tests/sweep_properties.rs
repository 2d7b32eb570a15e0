//! Invariants of the slip sweeps.

use leo_reciprocity::harness::sweep::{run_trial, TrialSetup};
use leo_reciprocity::harness::{msl_sweep, ExperimentConfig};
use proptest::prelude::*;

fn config(trials: usize, horizon: Option<u64>) -> ExperimentConfig {
    let horizon = horizon.map_or(String::new(), |h| format!("horizon = {h}"));
    ExperimentConfig::from_toml_str(&format!(
        r#"
scenario = "sweep-props"
seed = 31

[orbit]
altitude_m = 1.0e6

[array]
num_antennas = 1
spacing_m = 0.5

[link]
f_c_down_hz = 30.0e9
f_c_up_hz = 20.0e9

[tracker]
kind = "dpll"
sample_period_s = 1.0e-8

[sweep]
snr_db = [-14.0, -11.0]
trials = {trials}
{horizon}
"#
    ))
    .unwrap()
}

#[test]
fn records_never_exceed_the_horizon() {
    let result = msl_sweep(&config(60, Some(5000))).unwrap();
    assert_eq!(result.records.len(), 120);
    for r in &result.records {
        assert!(r.first_slip_sample <= 5000);
        assert_eq!(r.censored, r.first_slip_sample == 5000);
    }
    let p = result.points[1];
    assert!(p.censored > 0 && p.heavily_censored());
}

#[test]
fn three_db_more_snr_lengthens_the_mean_first_slip() {
    let points = msl_sweep(&config(200, None)).unwrap().points;
    assert!(points[1].mean_first_slip > points[0].mean_first_slip);
    assert!(points.iter().all(|p| p.ci_low <= p.mean_first_slip && p.mean_first_slip <= p.ci_high));
}

#[test]
fn sweeps_are_reproducible() {
    let a = msl_sweep(&config(30, None)).unwrap();
    let b = msl_sweep(&config(30, None)).unwrap();
    assert_eq!(a.points, b.points);
    assert_eq!(a.records, b.records);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trial_outcome_depends_only_on_seed_and_id(seed in any::<u64>(), trial in 0u64..1000, horizon in 1u64..3000) {
        let setup = TrialSetup {
            differential: trial % 2 == 0,
            gain: 2.0e7,
            period: 1e-8,
            sigma2: 0.5,
            ramp_per_sample: 0.0,
            horizon,
        };
        let a = run_trial(&setup, seed, trial);
        prop_assert_eq!(a, run_trial(&setup, seed, trial));
        if let Some(k) = a {
            prop_assert!(k < horizon);
        }
    }
}
