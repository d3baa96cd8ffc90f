mod common;

use common::{chi_square_pvalue, ks_pvalue, normal_cdf};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rejaug::aug::RejectionSampler;
use rejaug::gpds::{
    fit_gpds, gpds_conditional_f, gpds_generate, update_latent_f, FixedFunctionModel, GpConditioner, GpdsConfig,
    LabelCounts, LatentUpdate, NormalBase, SquaredExponential,
};
use rejaug::rng::chain_rng;

fn sigmoid(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

fn one_d(points: &[f64]) -> Vec<Vec<f64>> {
    points.iter().map(|&x| vec![x]).collect()
}

#[test]
fn saturated_function_accepts_everything() {
    let kernel = SquaredExponential::new(0.0, 1.0).unwrap();
    let mut gp = GpConditioner::new(kernel, 20.0, 1);
    let base = NormalBase::new(vec![1.0], 4.0).unwrap();
    let out = gpds_generate(&mut gp, &base, 1500, 1000, &mut chain_rng(1, 0)).unwrap();
    let rate = 1500.0 / (1500 + out.y.len()) as f64;
    assert!(rate >= 0.999, "{rate}");
    let xs: Vec<f64> = out.x.iter().map(|x| x[0]).collect();
    assert!(ks_pvalue(&xs, |x| normal_cdf(x, 1.0, 2.0)) > 0.01);
}

#[test]
fn zero_function_thins_by_half() {
    let kernel = SquaredExponential::new(0.0, 1.0).unwrap();
    let mut gp = GpConditioner::new(kernel, 0.0, 1);
    let base = NormalBase::new(vec![0.0], 1.0).unwrap();
    let n = 1200;
    let out = gpds_generate(&mut gp, &base, n, 1000, &mut chain_rng(2, 0)).unwrap();
    // Proposals until n acceptances are negative binomial with mean n / p.
    let total = (n + out.y.len()) as f64;
    let rejected = out.y.len() as f64;
    let sd = (n as f64 * 0.5).sqrt() / 0.5;
    assert!((rejected - n as f64).abs() < 3.5 * sd, "total {total}");
    let xs: Vec<f64> = out.x.iter().map(|x| x[0]).collect();
    assert!(ks_pvalue(&xs, |x| normal_cdf(x, 0.0, 1.0)) > 0.01);
}

fn wavy(x: f64) -> f64 {
    2.0 * (3.0 * x).sin()
}

/// Bin probabilities of `g₀ σ(h)` by fine midpoint quadrature.
fn quadrature_bins(base: &NormalBase, edges: &[f64]) -> Vec<f64> {
    let (lo, hi) = (edges[0] - 20.0, edges[edges.len() - 1] + 20.0);
    let n = 400_000;
    let h = (hi - lo) / n as f64;
    let mut bins = vec![0.0; edges.len() + 1];
    for i in 0..n {
        let x = lo + (i as f64 + 0.5) * h;
        let w = base.log_pdf(&[x]).exp() * sigmoid(wavy(x)) * h;
        let b = edges.iter().position(|&e| x < e).unwrap_or(edges.len());
        bins[b] += w;
    }
    let z: f64 = bins.iter().sum();
    bins.iter().map(|b| b / z).collect()
}

fn histogram(xs: &[f64], edges: &[f64]) -> Vec<f64> {
    let mut bins = vec![0.0; edges.len() + 1];
    for &x in xs {
        bins[edges.iter().position(|&e| x < e).unwrap_or(edges.len())] += 1.0;
    }
    bins
}

#[test]
fn fixed_function_sampler_matches_quadrature() {
    let base = NormalBase::new(vec![0.5], 1.0).unwrap();
    let model = FixedFunctionModel {
        base: base.clone(),
        function: |x: &[f64]| wavy(x[0]),
    };
    let sampler = RejectionSampler::default();
    let mut rng = chain_rng(3, 0);
    let xs: Vec<f64> = (0..100_000)
        .map(|_| sampler.sample(&model, &mut rng).unwrap().accepted[0])
        .collect();
    let edges: Vec<f64> = (0..=24).map(|i| -2.5 + 0.25 * i as f64).collect();
    let probs = quadrature_bins(&base, &edges);
    let expected: Vec<f64> = probs.iter().map(|p| p * xs.len() as f64).collect();
    assert!(chi_square_pvalue(&histogram(&xs, &edges), &expected) > 0.01);
}

#[test]
fn retrospective_generation_with_dense_history_matches_fixed_function() {
    let base = NormalBase::new(vec![0.5], 1.0).unwrap();
    let kernel = SquaredExponential::new(4.0, 0.5).unwrap();
    let grid: Vec<Vec<f64>> = (0..=360).map(|i| vec![-5.5 + i as f64 / 30.0]).collect();
    let mut gp = GpConditioner::from_points(kernel, 0.0, 1, grid.iter().map(|x| (x.as_slice(), wavy(x[0])))).unwrap();
    let mut rng = chain_rng(4, 0);
    let out = gpds_generate(&mut gp, &base, 1500, 1000, &mut rng).unwrap();
    for (y, f) in out.y.iter().zip(&out.f_y) {
        assert!((f - wavy(y[0])).abs() < 1e-2);
    }
    let xs: Vec<f64> = out.x.iter().map(|x| x[0]).collect();
    let edges: Vec<f64> = (0..=12).map(|i| -2.5 + 0.5 * i as f64).collect();
    let probs = quadrature_bins(&base, &edges);
    let expected: Vec<f64> = probs.iter().map(|p| p * xs.len() as f64).collect();
    assert!(chi_square_pvalue(&histogram(&xs, &edges), &expected) > 0.01);
}

#[test]
fn conditional_interpolates_and_decays() {
    let kernel = SquaredExponential::new(1.5, 0.8).unwrap();
    let pts = one_d(&[-1.0, 0.3, 1.4]);
    let vals = [0.2, -0.7, 1.1];
    let gp = GpConditioner::from_points(kernel, 0.0, 1, pts.iter().map(|p| p.as_slice()).zip(vals)).unwrap();

    let (m, c) = gpds_conditional_f(&gp, &one_d(&[0.3])).unwrap();
    assert_eq!(m[0], -0.7);
    assert!(c[(0, 0)] <= 1e-6);

    let (m, c) = gpds_conditional_f(&gp, &one_d(&[40.0])).unwrap();
    assert!(m[0].abs() < 1e-8);
    assert!((c[(0, 0)] - 1.5).abs() < 0.015);

    // Direct solve of the 3x3 system.
    let k = DMatrix::from_fn(3, 3, |i, j| {
        kernel.eval(&pts[i], &pts[j]) + if i == j { 1e-8 } else { 0.0 }
    });
    let new = one_d(&[0.0, 0.9]);
    let ks = DMatrix::from_fn(3, 2, |i, j| kernel.eval(&pts[i], &new[j]));
    let kinv_ks = k.clone().lu().solve(&ks).unwrap();
    let mean = kinv_ks.transpose() * DVector::from_row_slice(&vals);
    let kss = DMatrix::from_fn(2, 2, |i, j| {
        kernel.eval(&new[i], &new[j]) + if i == j { 1e-8 } else { 0.0 }
    });
    let cov = kss - ks.transpose() * kinv_ks;
    let (m, c) = gpds_conditional_f(&gp, &new).unwrap();
    assert!((m - mean).amax() < 1e-10);
    assert!((c - cov).amax() < 1e-10);
}

#[test]
fn latent_update_separates_accepted_and_rejected_regions() {
    let kernel = SquaredExponential::default();
    let locs: Vec<Vec<f64>> = (0..5)
        .map(|i| vec![2.0 + 0.1 * i as f64])
        .chain((0..5).map(|i| vec![-2.0 - 0.1 * i as f64]))
        .collect();
    let mut gp = GpConditioner::from_points(kernel, 0.0, 1, locs.iter().map(|x| (x.as_slice(), 0.0))).unwrap();
    let counts = LabelCounts {
        accepted: (0..10).map(|i| u32::from(i < 5)).collect(),
        rejected: (0..10).map(|i| u32::from(i >= 5)).collect(),
    };
    for method in [
        LatentUpdate::EllipticalSlice,
        LatentUpdate::Hmc {
            step_size: 0.2,
            leapfrog_steps: 10,
        },
    ] {
        let mut rng = chain_rng(6, 0);
        let (mut pos, mut neg) = (0.0, 0.0);
        for _ in 0..1000 {
            update_latent_f(&mut gp, &counts, &method, &mut rng);
            pos += gp.values()[..5].iter().sum::<f64>();
            neg += gp.values()[5..].iter().sum::<f64>();
        }
        assert!(pos > 0.0 && neg < 0.0, "{method:?}: {pos} {neg}");
    }
}

#[test]
fn latent_updates_leave_the_one_point_posterior_invariant() {
    // p(f) ∝ N(f; 0, 1) σ(f)²(1 - σ(f)): its mean by quadrature.
    let dens = |f: f64| (-0.5 * f * f).exp() * sigmoid(f).powi(2) * (1.0 - sigmoid(f));
    let h = 1e-3;
    let grid: Vec<f64> = (0..20_000).map(|i| -10.0 + (i as f64 + 0.5) * h).collect();
    let z: f64 = grid.iter().map(|&f| dens(f)).sum();
    let exact: f64 = grid.iter().map(|&f| f * dens(f)).sum::<f64>() / z;
    let counts = LabelCounts {
        accepted: vec![2],
        rejected: vec![1],
    };
    for method in [
        LatentUpdate::EllipticalSlice,
        LatentUpdate::Hmc {
            step_size: 0.5,
            leapfrog_steps: 3,
        },
    ] {
        let mut gp = GpConditioner::from_points(SquaredExponential::default(), 0.0, 1, [(&[0.0][..], 0.0)]).unwrap();
        let mut rng = chain_rng(7, 0);
        let n = 40_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                update_latent_f(&mut gp, &counts, &method, &mut rng);
                gp.values()[0]
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let ess = rejaug::diagnostics::effective_sample_size(&draws).unwrap().ess;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!(
            (mean - exact).abs() < 4.0 * sd / ess.sqrt(),
            "{method:?}: {mean} vs {exact}"
        );
    }
}

#[test]
fn well_specified_base_keeps_function_near_zero() {
    let mut rng = chain_rng(8, 0);
    let data: Vec<Vec<f64>> = (0..80)
        .map(|_| vec![Normal::new(2.0, 1.0).unwrap().sample(&mut rng)])
        .collect();
    let cfg = GpdsConfig {
        iterations: 300,
        burn_in: 50,
        grid_size: 200,
        ..Default::default()
    };
    let fit = fit_gpds(&data, &cfg, &mut rng).unwrap();
    let pred = fit.predictive.unwrap();
    let covered = pred
        .f_q10
        .iter()
        .zip(&pred.f_q90)
        .filter(|(lo, hi)| **lo <= 0.0 && 0.0 <= **hi)
        .count();
    assert!(covered as f64 >= 0.9 * pred.xs.len() as f64, "{covered}");
    assert!((pred.integral() - 1.0).abs() < 0.02);

    let state = &fit.final_state;
    assert_eq!(state.counts.len(), state.gp.len());
    assert_eq!(
        state.counts.total_rejected(),
        fit.trace.rejected_counts().last().copied().unwrap()
    );
    let rows: usize = state.counts.accepted.iter().map(|&a| a as usize).sum();
    assert_eq!(rows, data.len());
    assert_eq!(fit.histogram.counts.iter().sum::<usize>(), cfg.iterations);
}

#[test]
fn rejects_bad_inputs() {
    let mut rng = chain_rng(9, 0);
    assert!(fit_gpds(&[], &GpdsConfig::default(), &mut rng).is_err());
    assert!(fit_gpds(&[vec![0.0, 1.0, 2.0]], &GpdsConfig::default(), &mut rng).is_err());
    assert!(fit_gpds(&[vec![0.0], vec![0.0, 1.0]], &GpdsConfig::default(), &mut rng).is_err());
    let _ = rng.random::<f64>();
}
