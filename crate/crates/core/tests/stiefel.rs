mod common;

use std::f64::consts::PI;

use common::{chi_square_pvalue, ks_pvalue};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rejaug::aug::RejectionSampler;
use rejaug::rng::chain_rng;
use rejaug::specfun::{log_bessel_i, log_z_asymptotic};
use rejaug::stiefel::{
    log_d_of_projections, log_dml_unnormalized, mc_log_z, nullspace_projections, propose_pseq, sample_haar_uniform,
    sample_matrix_langevin, sample_matrix_langevin_counted, LangevinParams, StiefelMatrix,
};

fn params(g: StiefelMatrix, kappa: &[f64]) -> LangevinParams {
    LangevinParams::unrotated(g, DVector::from_row_slice(kappa)).unwrap()
}

/// Probability of each of `bins` equal arcs under `exp(κ cos θ)`, by Simpson
/// quadrature normalized over the whole circle.
fn circle_bin_probabilities(kappa: f64, bins: usize) -> Vec<f64> {
    let per_bin = 400;
    let h = 2.0 * PI / (bins * per_bin) as f64;
    let mass: Vec<f64> = (0..bins)
        .map(|b| {
            let a = -PI + b as f64 * per_bin as f64 * h;
            (0..=per_bin)
                .map(|i| {
                    let w = if i == 0 || i == per_bin {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    w * (kappa * (a + i as f64 * h).cos()).exp()
                })
                .sum::<f64>()
                * h
                / 3.0
        })
        .collect();
    let total: f64 = mass.iter().sum();
    mass.iter().map(|m| m / total).collect()
}

fn angle_counts(thetas: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    for &t in thetas {
        let b = (((t + PI) / (2.0 * PI)) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1.0;
    }
    counts
}

#[test]
fn circle_draws_match_quadrature() {
    let bins = 36;
    let draws = 100_000;
    for (kappa, seed) in [(3.0, 1), (0.0, 2)] {
        let p = params(StiefelMatrix::identity(2, 1).unwrap(), &[kappa]);
        let mut rng = chain_rng(seed, 0);
        let thetas: Vec<f64> = (0..draws)
            .map(|_| {
                let x = sample_matrix_langevin(&p, &mut rng).unwrap();
                let m = x.as_matrix();
                m[(1, 0)].atan2(m[(0, 0)])
            })
            .collect();
        let expected: Vec<f64> = circle_bin_probabilities(kappa, bins)
            .iter()
            .map(|q| q * draws as f64)
            .collect();
        let pv = chi_square_pvalue(&angle_counts(&thetas, bins), &expected);
        assert!(pv > 0.01, "κ={kappa}: p={pv}");
    }
}

#[test]
fn sphere_cosine_has_exponential_law() {
    // On S², t = gᵀx has density ∝ exp(κ t) on [-1, 1].
    let kappa = 2.5;
    let g = StiefelMatrix::orthonormalize(DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0])).unwrap();
    let p = params(g.clone(), &[kappa]);
    let mut rng = chain_rng(5, 0);
    let ts: Vec<f64> = (0..20_000)
        .map(|_| {
            let x = sample_matrix_langevin(&p, &mut rng).unwrap();
            x.as_matrix().column(0).dot(&g.as_matrix().column(0))
        })
        .collect();
    let cdf = |t: f64| ((kappa * t).exp() - (-kappa).exp()) / (kappa.exp() - (-kappa).exp());
    let pv = ks_pvalue(&ts, cdf);
    assert!(pv > 0.01, "p={pv}");
}

#[test]
fn zero_concentration_is_haar_uniform() {
    let p = params(StiefelMatrix::identity(3, 2).unwrap(), &[0.0, 0.0]);
    let sampler = RejectionSampler::default();
    let mut rng = chain_rng(9, 0);
    let mut cols = [Vec::new(), Vec::new(), Vec::new()];
    let mut haar = Vec::new();
    for _ in 0..20_000 {
        let (x, rejected) = sample_matrix_langevin_counted(&p, &sampler, &mut rng).unwrap();
        assert_eq!(rejected, 0);
        let m = x.as_matrix();
        cols[0].push(m[(0, 0)]);
        cols[1].push(m[(2, 1)]);
        cols[2].push(m.column(0).dot(&m.column(1)));
        haar.push(sample_haar_uniform(3, 2, &mut rng).unwrap().as_matrix()[(1, 1)]);
    }
    // Each column of a uniform frame in R³ is uniform on S², so every
    // coordinate is uniform on [-1, 1].
    let uniform = |t: f64| ((t + 1.0) / 2.0).clamp(0.0, 1.0);
    for c in &cols[..2] {
        assert!(ks_pvalue(c, uniform) > 0.01);
    }
    assert!(ks_pvalue(&haar, uniform) > 0.01);
    assert!(cols[2].iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn certificates_bound_the_target_and_projections_stay_in_range() {
    let mut rng = chain_rng(13, 0);
    let g = sample_haar_uniform(5, 3, &mut rng).unwrap();
    let kappa = DVector::from_row_slice(&[12.0, 4.0, 0.5]);
    for _ in 0..10_000 {
        let (x, cert) = propose_pseq(&g, &kappa, &mut rng).unwrap();
        let log_f: f64 = (0..3)
            .map(|k| kappa[k] * g.as_matrix().column(k).dot(&x.as_matrix().column(k)))
            .sum();
        // f(X) ≤ D(κ) p_seq(X), in log space.
        assert!(cert.log_d_kappa + cert.log_density - log_f >= -1e-9);
        assert!(cert.log_acceptance() <= 1e-12);
        let a = nullspace_projections(&x, &g);
        assert!(a.iter().all(|v| (0.0..=1.0 + 1e-10).contains(v)));
        for (u, v) in a.iter().zip(&cert.nullspace_projections) {
            assert!((u - v).abs() < 1e-8);
        }
        let recomputed = log_d_of_projections(kappa.as_slice(), &a, 5);
        assert!((recomputed - cert.log_d_x).abs() < 1e-8);
    }
}

#[test]
fn mean_acceptance_certificate_predicts_the_observed_rate() {
    let mut rng = chain_rng(17, 0);
    let g = StiefelMatrix::identity(3, 2).unwrap();
    let kappa = DVector::from_row_slice(&[5.0, 2.0]);
    let n = 20_000;
    let probs: Vec<f64> = (0..n)
        .map(|_| propose_pseq(&g, &kappa, &mut rng).unwrap().1.log_acceptance().exp())
        .collect();
    assert!(probs.iter().all(|p| *p > 0.0 && *p <= 1.0));
    let mean = probs.iter().sum::<f64>() / n as f64;
    let var = probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;

    let p = params(g, &[5.0, 2.0]);
    let sampler = RejectionSampler::default();
    let draws = 5_000;
    let rejected: usize = (0..draws)
        .map(|_| sample_matrix_langevin_counted(&p, &sampler, &mut rng).unwrap().1)
        .sum();
    let rate = draws as f64 / (draws + rejected) as f64;
    let rate_se = (rate * (1.0 - rate) / (draws + rejected) as f64).sqrt();
    let se = (var / n as f64 + rate_se * rate_se).sqrt();
    assert!((mean - rate).abs() < 3.0 * se, "{mean} vs {rate}");
}

fn acceptance_rates(grid: &[[f64; 2]], seed: u64) -> Vec<(f64, f64)> {
    let g = StiefelMatrix::identity(4, 2).unwrap();
    let mut rng = chain_rng(seed, 0);
    let n = 20_000;
    grid.iter()
        .map(|k| {
            let kappa = DVector::from_row_slice(k);
            let probs: Vec<f64> = (0..n)
                .map(|_| propose_pseq(&g, &kappa, &mut rng).unwrap().1.log_acceptance().exp())
                .collect();
            let mean = probs.iter().sum::<f64>() / n as f64;
            let var = probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (mean, (var / n as f64).sqrt())
        })
        .collect()
}

#[test]
fn acceptance_falls_as_the_trailing_concentration_grows() {
    let rates = acceptance_rates(&[[4.0, 0.5], [4.0, 2.0], [4.0, 8.0], [4.0, 32.0]], 19);
    for w in rates.windows(2) {
        let se = (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
        assert!(w[1].0 <= w[0].0 + 5.0 * se, "{rates:?}");
    }
}

#[test]
fn acceptance_rises_as_the_leading_concentration_grows() {
    // A concentrated first column leaves the second column's nullspace
    // nearly aligned with g₂, so D(X) approaches D(κ).
    let rates = acceptance_rates(&[[0.5, 2.0], [2.0, 2.0], [8.0, 2.0], [32.0, 2.0]], 37);
    assert!(rates[3].0 > rates[0].0, "{rates:?}");
}

#[test]
fn concentrated_draws_point_along_the_mode() {
    let mut rng = chain_rng(23, 0);
    let g = sample_haar_uniform(4, 2, &mut rng).unwrap();
    let p = params(g.clone(), &[20.0, 20.0]);
    let mut sum = DMatrix::zeros(4, 2);
    for _ in 0..100_000 {
        sum += sample_matrix_langevin(&p, &mut rng).unwrap().as_matrix();
    }
    let svd = sum.svd(true, true);
    let polar = svd.u.unwrap() * svd.v_t.unwrap();
    let cosines = (polar.transpose() * g.as_matrix()).singular_values();
    for c in cosines.iter() {
        assert!(c.min(1.0).acos() < 0.05, "principal cosines {cosines}");
    }
    assert!((polar - g.as_matrix()).amax() < 0.05);
}

#[test]
fn haar_average_oracle() {
    let mut rng = chain_rng(29, 0);
    let zero = mc_log_z(&[0.0, 0.0], 4, 100, &mut rng).unwrap();
    assert_eq!(zero.estimate, 0.0);

    // On the circle Z(κ) = I₀(κ) under normalized Haar measure.
    let est = mc_log_z(&[2.0], 2, 200_000, &mut rng).unwrap();
    let truth = log_bessel_i(0.0, 2.0).unwrap();
    assert!((est.estimate - truth).abs() < 3.0 * est.std_error, "{est:?} vs {truth}");

    let a = mc_log_z(&[2.0, 5.0], 4, 200_000, &mut rng).unwrap();
    let b = mc_log_z(&[5.0, 2.0], 4, 200_000, &mut rng).unwrap();
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.estimate - b.estimate).abs() < 4.0 * se, "{a:?} {b:?}");
}

#[test]
fn asymptotic_normalizer_is_close_at_large_concentration() {
    let mut rng = chain_rng(31, 0);
    let est = mc_log_z(&[10.0], 3, 400_000, &mut rng).unwrap();
    // Exact value on S²: sinh(κ)/κ.
    let exact = 10.0 + (-(-20.0f64).exp()).ln_1p() - 20f64.ln();
    assert!((est.estimate - exact).abs() < 4.0 * est.std_error);
    let approx = log_z_asymptotic(&[10.0], 3).unwrap();
    assert!(
        ((approx - est.estimate) / est.estimate).abs() < 0.02,
        "{approx} vs {}",
        est.estimate
    );
}

fn haar(d: usize, p: usize, seed: u64) -> StiefelMatrix {
    sample_haar_uniform(d, p, &mut chain_rng(seed, 0)).unwrap()
}

proptest! {
    #[test]
    fn unnormalized_density_is_rotation_invariant(
        seed in any::<u64>(),
        k1 in 0.0f64..30.0,
        k2 in 0.0f64..30.0,
    ) {
        let (x, g, q) = (haar(4, 2, seed), haar(4, 2, seed ^ 1), haar(4, 4, seed ^ 2));
        let h = haar(2, 2, seed ^ 3);
        let kappa = DVector::from_row_slice(&[k1, k2]);
        let rotated = LangevinParams::new(g.clone(), kappa.clone(), h.clone()).unwrap();
        let base = log_dml_unnormalized(&x, &rotated).unwrap();

        let qx = StiefelMatrix::new(q.as_matrix() * x.as_matrix()).unwrap();
        let qg = StiefelMatrix::new(q.as_matrix() * g.as_matrix()).unwrap();
        let left = LangevinParams::new(qg, kappa.clone(), h.clone()).unwrap();
        prop_assert!((log_dml_unnormalized(&qx, &left).unwrap() - base).abs() < 1e-9);

        // tr(HκGᵀX) = tr(κGᵀXH).
        let xh = StiefelMatrix::new(x.as_matrix() * h.as_matrix()).unwrap();
        let plain = LangevinParams::unrotated(g.clone(), kappa.clone()).unwrap();
        prop_assert!((log_dml_unnormalized(&xh, &plain).unwrap() - base).abs() < 1e-9);

        let from_f = LangevinParams::from_exponent(&rotated.exponent()).unwrap();
        prop_assert!((log_dml_unnormalized(&x, &from_f).unwrap() - base).abs() < 1e-8);

        let at_mode = log_dml_unnormalized(&g, &plain).unwrap();
        prop_assert!((at_mode - (k1 + k2)).abs() < 1e-9);
        let zero = LangevinParams::unrotated(g, DVector::zeros(2)).unwrap();
        prop_assert_eq!(log_dml_unnormalized(&x, &zero).unwrap(), 0.0);
    }

    #[test]
    fn accepted_draws_are_orthonormal(seed in any::<u64>(), k in 0.0f64..50.0) {
        let mut rng = chain_rng(seed, 0);
        let g = sample_haar_uniform(5, 3, &mut rng).unwrap();
        let p = params(g, &[k, k / 2.0, k / 4.0]);
        let x = sample_matrix_langevin(&p, &mut rng).unwrap();
        prop_assert!(x.orthogonality_error() < 1e-10);
    }
}
