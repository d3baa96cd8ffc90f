use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use rejaug::diagnostics::{
    compare_samplers, effective_sample_size, summarize, ChainTrace, DiagnosticsError, IterationMeta,
};
use rejaug::rng::chain_rng;

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = chain_rng(seed, 0);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn ar1(n: usize, rho: f64, seed: u64) -> Vec<f64> {
    let mut rng = chain_rng(seed, 0);
    let sd = (1.0 - rho * rho).sqrt();
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            x = rho * x + sd * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

fn trace(sampler: &str, series: &[Vec<f64>], seconds: f64) -> ChainTrace {
    let labels = (0..series.len()).map(|j| format!("theta_{j}")).collect();
    let mut t = ChainTrace::new(labels).with_sampler(sampler, false);
    for i in 0..series[0].len() {
        t.push(
            series.iter().map(|s| s[i]).collect(),
            IterationMeta {
                seconds,
                accepted: None,
                rejected: 0,
            },
        );
    }
    t
}

#[test]
fn independent_draws_have_full_ess() {
    let e = effective_sample_size(&normals(10_000, 1)).unwrap();
    assert!(!e.degenerate);
    assert!((9_000.0..=11_000.0).contains(&e.ess), "{}", e.ess);
}

#[test]
fn autoregressive_ess_matches_closed_form() {
    let rho = 0.9;
    let n = 100_000;
    let e = effective_sample_size(&ar1(n, rho, 2)).unwrap();
    let expected = n as f64 * (1.0 - rho) / (1.0 + rho);
    assert!((e.ess / expected - 1.0).abs() < 0.3, "{} vs {expected}", e.ess);
}

#[test]
fn constant_and_short_series() {
    let e = effective_sample_size(&[3.5; 50]).unwrap();
    assert!(e.degenerate);
    assert_eq!(e.ess, 50.0);
    assert!(matches!(
        effective_sample_size(&[1.0; 5]),
        Err(DiagnosticsError::TooShort { .. })
    ));
}

#[test]
fn same_law_chains_compare_equal() {
    let a = trace("a", &[normals(5_000, 3), ar1(5_000, 0.5, 4)], 1e-4);
    let b = trace("b", &[normals(5_000, 5), ar1(5_000, 0.5, 6)], 2e-4);
    let cmp = compare_samplers(&[a, b]).unwrap();
    assert_eq!(cmp.pairs.len(), 1);
    assert!(cmp.pairs[0].z.iter().all(|z| z.abs() < 3.0), "{:?}", cmp.pairs[0].z);
    // Same ESS scale, half the time per draw.
    let ratio = cmp.rows[0].median_ess_per_sec / cmp.rows[1].median_ess_per_sec;
    assert!((1.5..2.7).contains(&ratio), "{ratio}");
    let mut csv = Vec::new();
    cmp.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 2 * 2);
    assert!(cmp.to_markdown().contains("| a "));
}

#[test]
fn mismatched_labels_are_rejected() {
    let a = trace("a", &[normals(100, 7)], 0.0);
    let b = trace("b", &[normals(100, 8), normals(100, 9)], 0.0);
    assert!(matches!(
        compare_samplers(&[a.clone(), b]),
        Err(DiagnosticsError::LabelMismatch { .. })
    ));
    assert!(matches!(compare_samplers(&[a]), Err(DiagnosticsError::TooFewTraces(1))));
}

#[test]
fn trace_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.csv");
    let t = trace("hmc", &[ar1(200, 0.3, 10), normals(200, 11)], 0.25);
    t.write_csv(&path).unwrap();
    let back = ChainTrace::read_csv(&path).unwrap();
    assert_eq!(back.draws(), t.draws());
    assert_eq!(back.labels(), t.labels());
    assert!((back.total_seconds() - 50.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ess_is_affine_invariant(seed in any::<u64>(), rho in -0.5f64..0.95, a in 0.01f64..100.0, b in -1e3f64..1e3) {
        let x = ar1(2_000, rho, seed);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (ex, ey) = (effective_sample_size(&x).unwrap(), effective_sample_size(&y).unwrap());
        prop_assert!((ex.ess - ey.ess).abs() <= 1e-6 * ex.ess);
        let s = summarize(&y).unwrap();
        prop_assert!(s.q05 <= s.q50 && s.q50 <= s.q95);
        prop_assert!(s.ess > 0.0 && s.ess <= 2_000.0);
    }

    #[test]
    fn thinning_does_not_increase_ess(seed in any::<u64>(), rho in 0.0f64..0.95, k in 2usize..10) {
        let x = ar1(5_000, rho, seed);
        let thinned: Vec<f64> = x.iter().copied().step_by(k).collect();
        let full = effective_sample_size(&x).unwrap().ess;
        let thin = effective_sample_size(&thinned).unwrap().ess;
        // Allow estimator noise on nearly independent series.
        prop_assert!(thin <= full * 1.1, "thin {} > full {}", thin, full);
    }
}
