mod common;

use common::ks_pvalue;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rejaug::aug::RejectionSampler;
use rejaug::langevin::{
    fit_langevin, grad_log_joint_kappa, log_joint_kappa, simulate_observations, update_h, AugmentedLangevinData,
    HmcConfig, HmcParametrization, KappaSampler, LangevinFitConfig, LangevinPosteriorState, LangevinPriors,
};
use rejaug::rng::chain_rng;
use rejaug::stiefel::{sample_haar_uniform, LangevinParams, LangevinRejectionModel, StiefelMatrix};
use statrs::distribution::{ContinuousCDF, Gamma};

/// Observations from `ML(Gκ)` plus one round of rejected proposals at a
/// perturbed `κ`, as a Gibbs sweep would produce.
fn random_state<R: Rng>(d: usize, p: usize, rng: &mut R) -> (AugmentedLangevinData, Vec<StiefelMatrix>, Vec<f64>) {
    let g = sample_haar_uniform(d, p, rng).unwrap();
    let kappa: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..15.0)).collect();
    let params = LangevinParams::unrotated(g.clone(), DVector::from_vec(kappa.clone())).unwrap();
    let n = rng.random_range(1..30);
    let obs = simulate_observations(&params, n, rng).unwrap();
    let model = LangevinRejectionModel::new(g.clone(), DVector::from_vec(kappa.clone())).unwrap();
    let rejected: Vec<StiefelMatrix> = RejectionSampler::default()
        .resample_rejected(&model, n, rng)
        .unwrap()
        .into_iter()
        .flatten()
        .collect();
    let sum = obs.iter().fold(DMatrix::zeros(d, p), |acc, x| acc + x.as_matrix());
    let aug = AugmentedLangevinData::new(&g, &sum, n, rejected.clone());
    (aug, rejected, kappa)
}

/// Fourth-order central difference.
fn finite_difference(aug: &AugmentedLangevinData, kappa: &[f64], k: usize, h: f64) -> f64 {
    let at = |t: f64| {
        let mut v = kappa.to_vec();
        v[k] += t;
        log_joint_kappa(aug, &v)
    };
    (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = chain_rng(41, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (aug, _, kappa) = random_state(4, 2, &mut rng);
        let grad = grad_log_joint_kappa(&aug, &kappa).unwrap();
        for k in 0..2 {
            let fd = finite_difference(&aug, &kappa, k, 1e-3 * kappa[k]);
            worst = worst.max((grad[k] - fd).abs() / grad[k].abs().max(1.0));
        }
    }
    assert!(worst <= 1e-5, "max relative error {worst:e}");
}

#[test]
fn cached_projections_match_recomputation() {
    let mut rng = chain_rng(43, 0);
    for _ in 0..20 {
        let (aug, rejected, _) = random_state(5, 3, &mut rng);
        assert_eq!(aug.rejected(), rejected.len());
        assert_eq!(aug.total(), aug.observations() + rejected.len());
        assert!(aug.cache_discrepancy(&rejected) < 1e-12);
    }
}

#[test]
fn rotation_keeps_the_sufficient_statistic_in_sync() {
    let mut rng = chain_rng(47, 0);
    let g = sample_haar_uniform(4, 2, &mut rng).unwrap();
    let params = LangevinParams::unrotated(g, DVector::from_row_slice(&[6.0, 3.0])).unwrap();
    let obs = simulate_observations(&params, 20, &mut rng).unwrap();
    let mut state = LangevinPosteriorState::new(params, LangevinPriors::default_for(4, 2), obs.clone()).unwrap();
    for _ in 0..5 {
        update_h(&mut state, &mut rng).unwrap();
        let direct = obs.iter().fold(DMatrix::zeros(4, 2), |acc, x| {
            acc + x.as_matrix() * state.params.h.as_matrix()
        });
        assert!((state.s() - direct).amax() < 1e-12);
    }
}

fn samplers() -> Vec<KappaSampler> {
    vec![
        KappaSampler::Hmc(HmcConfig::default()),
        KappaSampler::Hmc(HmcConfig {
            step_size: 0.1,
            leapfrog_steps: 5,
            parametrization: HmcParametrization::Log,
        }),
        KappaSampler::Rw { proposal_sd: 1.0 },
        KappaSampler::Exchange { proposal_sd: 1.0 },
        KappaSampler::Approx { proposal_sd: 1.0 },
    ]
}

#[test]
fn every_sampler_keeps_kappa_positive() {
    let mut rng = chain_rng(53, 0);
    let g = sample_haar_uniform(3, 2, &mut rng).unwrap();
    let params = LangevinParams::unrotated(g, DVector::from_row_slice(&[0.5, 0.2])).unwrap();
    let obs = simulate_observations(&params, 10, &mut rng).unwrap();
    for sampler in samplers() {
        let mut cfg = LangevinFitConfig::new(sampler, 300, 0);
        cfg.update_h = true;
        let fit = fit_langevin(&obs, (3, 2), &cfg, &mut rng).unwrap();
        assert_eq!(fit.trace.len(), 300);
        assert!(
            fit.trace.draws().iter().all(|row| row[0] > 0.0 && row[1] > 0.0),
            "{}",
            sampler.name()
        );
        assert!(fit.final_state.g.orthogonality_error() < 1e-10);
    }
}

#[test]
fn without_data_the_chain_samples_the_prior() {
    let priors = LangevinPriors {
        gamma_shape: 2.0,
        gamma_rate: 0.5,
        ..LangevinPriors::default_for(3, 2)
    };
    let gamma = Gamma::new(2.0, 0.5).unwrap();
    let samplers = [
        KappaSampler::Rw { proposal_sd: 4.0 },
        KappaSampler::Hmc(HmcConfig {
            step_size: 0.5,
            leapfrog_steps: 10,
            parametrization: HmcParametrization::Direct,
        }),
    ];
    for (i, sampler) in samplers.into_iter().enumerate() {
        let mut cfg = LangevinFitConfig::new(sampler, 100_000, 1_000);
        cfg.priors = Some(priors.clone());
        cfg.trace_g = false;
        let fit = fit_langevin(&[], (3, 2), &cfg, &mut chain_rng(59, i as u64)).unwrap();
        for k in 0..2 {
            let thinned: Vec<f64> = fit.trace.column(k).into_iter().step_by(50).collect();
            let p = ks_pvalue(&thinned, |x| gamma.cdf(x));
            assert!(p > 0.01, "{} κ_{k}: p={p}", sampler.name());
        }
    }
}

#[test]
fn credible_intervals_cover_the_truth() {
    let truth = [8.0, 3.0];
    let replicates = 100;
    let mut covered = 0;
    for r in 0..replicates {
        let mut rng = chain_rng(61, r);
        let g = sample_haar_uniform(3, 2, &mut rng).unwrap();
        let params = LangevinParams::unrotated(g, DVector::from_row_slice(&truth)).unwrap();
        let obs = simulate_observations(&params, 40, &mut rng).unwrap();
        let mut cfg = LangevinFitConfig::new(KappaSampler::Hmc(HmcConfig::default()), 1_000, 200);
        cfg.trace_g = false;
        let fit = fit_langevin(&obs, (3, 2), &cfg, &mut rng).unwrap();
        for (k, &t) in truth.iter().enumerate() {
            let mut col = fit.trace.column(k);
            col.sort_by(f64::total_cmp);
            let lo = col[col.len() / 20];
            let hi = col[col.len() * 19 / 20];
            covered += usize::from(lo <= t && t <= hi);
        }
    }
    let rate = covered as f64 / (2 * replicates) as f64;
    assert!(rate >= 0.8, "coverage {rate}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn joint_is_finite_and_gradient_defined_at_positive_kappa(seed in any::<u64>(), scale in 0.2f64..3.0) {
        let mut rng = chain_rng(seed, 0);
        let (aug, _, kappa) = random_state(3, 2, &mut rng);
        // Moving κ upward keeps every D(Y) below D(κ).
        let up: Vec<f64> = kappa.iter().map(|k| k * scale.max(1.0)).collect();
        prop_assert!(log_joint_kappa(&aug, &up).is_finite());
        let g = grad_log_joint_kappa(&aug, &up).unwrap();
        prop_assert!(g.iter().all(|v| v.is_finite()));
        prop_assert!(grad_log_joint_kappa(&aug, &[0.0, kappa[1]]).is_err());
    }
}
