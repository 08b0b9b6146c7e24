use dqec::experiments::{
    analytic_floor, bootstrap_ci, bootstrap_ci_bits, combine_ensemble, run_experiment, write_csv, CodeFamily,
    DropoutRule, ExperimentConfig, Mode, ResultRow, ShotPolicy, DEFAULT_LEVEL, DEFAULT_RESAMPLES,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn row(errors: usize, shots: usize) -> ResultRow {
    ResultRow {
        mode: "monolithic".into(),
        code: "toric".into(),
        d_or_lattice: "6".into(),
        n_q: None,
        p: 1e-5,
        p_dropout: 1e-4,
        rounds: 32,
        shots,
        errors_any: errors,
        errors_per_obs: vec![errors, 0],
        p_l: errors as f64 / shots as f64,
        ci_low: 0.0,
        ci_high: 1.0,
        seed: 0,
        wall_ms: 0,
    }
}

#[test]
fn floor_examples() {
    assert!((analytic_floor(1e-4, 32, None) - 3.1950e-3).abs() < 5e-8);
    // 0.75 × 3.19504e-3 = 2.39628e-3.
    assert!((analytic_floor(1e-4, 32, Some(2)) - 2.3963e-3).abs() < 5e-8);
    assert_eq!(analytic_floor(0.7, 0, None), 0.0);
    // Independent route: probability that at least one of r rounds fails.
    let mut survive = 1.0;
    for _ in 0..32 {
        survive *= 1.0 - 1e-4;
    }
    assert!((analytic_floor(1e-4, 32, None) - (1.0 - survive)).abs() < 1e-15);
}

#[test]
fn bootstrap_zero_errors_is_rule_of_three() {
    let (lo, hi) = bootstrap_ci(0, 10_000, DEFAULT_LEVEL, DEFAULT_RESAMPLES, 7).unwrap();
    assert_eq!(lo, 0.0);
    assert!(hi <= 7e-4 && hi >= 6.9e-4, "{hi}");
}

#[test]
fn bootstrap_half_matches_normal_approximation() {
    let (lo, hi) = bootstrap_ci(5000, 10_000, DEFAULT_LEVEL, DEFAULT_RESAMPLES, 7).unwrap();
    let half = 3.29 * (0.25f64 / 1e4).sqrt();
    assert!((lo - (0.5 - half)).abs() < 3e-3, "{lo}");
    assert!((hi - (0.5 + half)).abs() < 3e-3, "{hi}");
}

#[test]
fn bootstrap_is_seeded() {
    let a = bootstrap_ci(37, 1000, 0.99, 2000, 1).unwrap();
    let b = bootstrap_ci(37, 1000, 0.99, 2000, 1).unwrap();
    assert_eq!(a, b);
    let bits: Vec<bool> = (0..1000).map(|i| i < 37).collect();
    assert_eq!(bootstrap_ci_bits(&bits, 0.99, 2000, 1).unwrap(), a);
}

#[test]
fn bootstrap_rejects_bad_level() {
    assert!(bootstrap_ci(1, 10, 1.5, 100, 0).is_err());
    assert!(bootstrap_ci(1, 10, -0.1, 100, 0).is_err());
}

/// Synthetic binomial data: 10³ trials of 10³ shots at q = 0.1.
#[test]
fn bootstrap_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let q = 0.1;
    let mut covered = 0;
    for t in 0..1000 {
        let errors = (0..1000).filter(|_| rng.gen_bool(q)).count();
        let (lo, hi) = bootstrap_ci(errors, 1000, DEFAULT_LEVEL, 2000, t).unwrap();
        if lo <= q && q <= hi {
            covered += 1;
        }
    }
    assert!(covered >= 990, "{covered}");
}

#[test]
fn ensemble_single_member_is_identity() {
    let r = row(30, 1000);
    let e = combine_ensemble(&[(1.0, r.clone())], 3).unwrap();
    assert_eq!(e.row.p_l, r.p_l);
    assert_eq!(e.row.shots, r.shots);
    assert!(e.warning.is_none());
    let alone = bootstrap_ci(30, 1000, DEFAULT_LEVEL, DEFAULT_RESAMPLES, 3).unwrap();
    assert_eq!((e.row.ci_low, e.row.ci_high), alone);
}

#[test]
fn ensemble_weighted_sum() {
    let mut members = vec![(0.9968, row(1, 100_000))];
    for _ in 0..32 {
        members.push((0.0032 / 32.0, row(750, 1000)));
    }
    let e = combine_ensemble(&members, 5).unwrap();
    let expect = 0.9968 * 1e-5 + 0.0032 * 0.75;
    assert!((e.row.p_l - expect).abs() < 1e-12);
    assert!((e.row.p_l - 2.41e-3).abs() < 1e-5);
    assert!(e.row.ci_low <= e.row.p_l && e.row.p_l <= e.row.ci_high);
    assert!((e.row.p_l - analytic_floor(1e-4, 32, Some(2))).abs() / e.row.p_l < 0.01);
}

#[test]
fn ensemble_normalizes_with_warning() {
    let e = combine_ensemble(&[(2.0, row(10, 100)), (2.0, row(30, 100))], 1).unwrap();
    assert!((e.row.p_l - 0.2).abs() < 1e-12);
    assert!(e.warning.is_some());
    assert_eq!(e.weight_sum, 4.0);
    assert!(combine_ensemble(&[], 1).is_err());
    assert!(combine_ensemble(&[(-1.0, row(1, 10))], 1).is_err());
}

fn small(mode: Mode) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(CodeFamily::Toric { d: 4 }, Some(16), vec![0.0], mode);
    cfg.rounds = 4;
    cfg.shots = ShotPolicy::fixed(1000);
    cfg
}

#[test]
fn noiseless_point_has_no_errors() {
    let report = run_experiment(&small(Mode::Memory)).unwrap();
    assert!(report.failures.is_empty());
    let r = &report.rows[0];
    assert_eq!((r.shots, r.errors_any, r.p_l), (1000, 0, 0.0));
    assert!(r.ci_high > 0.0 && r.ci_high < 1e-2);
}

#[test]
fn csv_is_reproducible() {
    let mut cfg = small(Mode::Memory);
    cfg.p = vec![2e-3, 4e-3];
    cfg.dropout = DropoutRule::POver100;
    cfg.shots = ShotPolicy {
        max_shots: 3000,
        target_errors: 50,
    };
    cfg.seed = 9;
    let csv = |cfg: &ExperimentConfig| {
        let mut out = Vec::new();
        write_csv(&mut out, &run_experiment(cfg).unwrap().rows, false).unwrap();
        out
    };
    let a = csv(&cfg);
    assert_eq!(a, csv(&cfg));
    let text = String::from_utf8(a.clone()).unwrap();
    assert!(text.starts_with(
        "mode,code,d_or_lattice,n_q,p,p_dropout,rounds,shots,errors_any,errors_per_obs,P_L,ci_low,ci_high,seed,wall_ms\n"
    ));
    assert_eq!(text.lines().count(), 3);
    cfg.seed = 10;
    assert_ne!(a, csv(&cfg));
}

#[test]
fn failing_point_is_reported_with_context() {
    let mut cfg = small(Mode::Swapout);
    // Round 3 of 4 is valid; the grid value 1.0 makes p_nl = 10 invalid.
    cfg.swap_after = Some(3);
    cfg.p = vec![0.0, 1.0];
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.failures.len(), 1);
    assert!(report.failures[0].error.to_string().contains("p = 1"));
}

#[test]
fn config_validation() {
    let mut cfg = small(Mode::Memory);
    cfg.p.clear();
    assert!(cfg.validate().is_err());
    let mut cfg = small(Mode::Memory);
    cfg.n_q = Some(1);
    assert!(cfg.validate().is_err());
    let mut cfg = small(Mode::Memory);
    cfg.rounds = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = small(Mode::Monolithic);
    cfg.n_q = None;
    assert!(cfg.validate().is_ok());
}

#[test]
fn config_toml_round_trip() {
    let text = r#"
        n_q = 16
        p = [3e-4, 1e-3]
        dropout = "p-over100"
        mode = "swapout"
        seed = 4
        [code]
        family = "toric"
        d = 6
        [shots]
        max_shots = 30000
    "#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(cfg.code, CodeFamily::Toric { d: 6 });
    assert_eq!(cfg.rounds, 32);
    assert_eq!(cfg.pad, 2);
    assert_eq!(cfg.shots.target_errors, 100);
    assert!((cfg.dropout.at(3e-4) - 3e-6).abs() < 1e-18);
    assert_eq!(cfg.swap_round(), 16);
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    let fixed = ExperimentConfig::from_toml(&text.replace("\"p-over100\"", "{ fixed = 1e-4 }")).unwrap();
    assert_eq!(fixed.dropout, DropoutRule::Fixed(1e-4));
    assert!(ExperimentConfig::from_toml("p = []\n[code]\nfamily = \"toric\"\nd = 4\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn interval_contains_estimate(shots in 1usize..5000, frac in 0.0f64..=1.0, seed in 0u64..1000) {
        let errors = ((shots as f64) * frac).round() as usize;
        let (lo, hi) = bootstrap_ci(errors, shots, DEFAULT_LEVEL, 500, seed).unwrap();
        let q = errors as f64 / shots as f64;
        prop_assert!(0.0 <= lo && lo <= q && q <= hi && hi <= 1.0);
    }

    #[test]
    fn floor_is_monotone(p in 0.0f64..0.1, r in 0u32..100, k in 1u32..6) {
        let f = analytic_floor(p, r, None);
        prop_assert!(f <= analytic_floor(p, r + 1, None) + 1e-15);
        prop_assert!(analytic_floor(p, r, Some(k)) <= f);
        prop_assert!((0.0..=1.0).contains(&f));
    }
}
