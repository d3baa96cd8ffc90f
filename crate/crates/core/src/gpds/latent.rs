use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::gp::GpConditioner;
use super::{log_sigmoid, sigmoid};

/// How many accepted and rejected proposals sit at each stored location.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelCounts {
    pub accepted: Vec<u32>,
    pub rejected: Vec<u32>,
}

impl LabelCounts {
    pub fn with_len(m: usize) -> Self {
        Self {
            accepted: vec![0; m],
            rejected: vec![0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    /// Grows to cover index `i` and records one label there.
    pub fn record(&mut self, i: usize, accepted: bool) {
        if i >= self.len() {
            self.accepted.resize(i + 1, 0);
            self.rejected.resize(i + 1, 0);
        }
        if accepted {
            self.accepted[i] += 1;
        } else {
            self.rejected[i] += 1;
        }
    }

    pub fn total_rejected(&self) -> usize {
        self.rejected.iter().map(|&r| r as usize).sum()
    }
}

/// `Σ ln σ(f(x)) + Σ ln(1 - σ(f(y)))`.
pub fn log_likelihood(values: &[f64], counts: &LabelCounts) -> f64 {
    values
        .iter()
        .zip(counts.accepted.iter().zip(&counts.rejected))
        .map(|(&f, (&a, &r))| {
            let mut s = 0.0;
            if a > 0 {
                s += a as f64 * log_sigmoid(f);
            }
            if r > 0 {
                s += r as f64 * log_sigmoid(-f);
            }
            s
        })
        .sum()
}

fn grad_log_likelihood(values: &[f64], counts: &LabelCounts) -> Vec<f64> {
    values
        .iter()
        .zip(counts.accepted.iter().zip(&counts.rejected))
        .map(|(&f, (&a, &r))| {
            let s = sigmoid(f);
            a as f64 * (1.0 - s) - r as f64 * s
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum LatentUpdate {
    #[default]
    EllipticalSlice,
    /// HMC on the whitened coordinates `w`, `f = mean + L w`.
    Hmc { step_size: f64, leapfrog_steps: usize },
}

/// One transition leaving `p(f | labels) ∝ GP(f) · likelihood` invariant.
/// Returns whether the state moved (always true for elliptical slice).
pub fn update_latent_f<R: Rng + ?Sized>(
    gp: &mut GpConditioner,
    counts: &LabelCounts,
    method: &LatentUpdate,
    rng: &mut R,
) -> bool {
    assert_eq!(gp.len(), counts.len(), "labels must cover every stored location");
    if gp.is_empty() {
        return true;
    }
    match *method {
        LatentUpdate::EllipticalSlice => {
            elliptical_slice(gp, counts, rng);
            true
        }
        LatentUpdate::Hmc {
            step_size,
            leapfrog_steps,
        } => whitened_hmc(gp, counts, step_size, leapfrog_steps, rng),
    }
}

fn normals<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    (0..m).map(|_| StandardNormal.sample(rng)).collect()
}

fn elliptical_slice<R: Rng + ?Sized>(gp: &mut GpConditioner, counts: &LabelCounts, rng: &mut R) {
    let m = gp.len();
    let nu = normals(m, rng);
    let w0 = gp.whitened().to_vec();
    let threshold = log_likelihood(gp.values(), counts) + rng.random::<f64>().ln();
    let mut theta = rng.random::<f64>() * std::f64::consts::TAU;
    let (mut lo, mut hi) = (theta - std::f64::consts::TAU, theta);
    let mean = gp.prior_mean();
    loop {
        let (s, c) = theta.sin_cos();
        let w: Vec<f64> = w0.iter().zip(&nu).map(|(a, b)| a * c + b * s).collect();
        let values: Vec<f64> = gp.apply_chol(&w).into_iter().map(|v| mean + v).collect();
        if log_likelihood(&values, counts) > threshold {
            gp.set_whitened(w);
            return;
        }
        if theta < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        theta = lo + rng.random::<f64>() * (hi - lo);
    }
}

fn whitened_hmc<R: Rng + ?Sized>(
    gp: &mut GpConditioner,
    counts: &LabelCounts,
    eps: f64,
    steps: usize,
    rng: &mut R,
) -> bool {
    let mean = gp.prior_mean();
    let values_of = |w: &[f64]| -> Vec<f64> { gp.apply_chol(w).into_iter().map(|v| mean + v).collect() };
    let potential = |w: &[f64], f: &[f64]| 0.5 * w.iter().map(|a| a * a).sum::<f64>() - log_likelihood(f, counts);
    let grad = |w: &[f64], f: &[f64]| -> Vec<f64> {
        let g = gp.apply_chol_transpose(&grad_log_likelihood(f, counts));
        w.iter().zip(g).map(|(a, b)| a - b).collect()
    };

    let w0 = gp.whitened().to_vec();
    let f0 = gp.values().to_vec();
    let mut p = normals(w0.len(), rng);
    let h0 = potential(&w0, &f0) + 0.5 * p.iter().map(|a| a * a).sum::<f64>();

    let mut w = w0;
    let mut f = f0;
    let mut g = grad(&w, &f);
    for _ in 0..steps {
        p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi -= 0.5 * eps * gi);
        w.iter_mut().zip(&p).for_each(|(wi, pi)| *wi += eps * pi);
        f = values_of(&w);
        g = grad(&w, &f);
        p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi -= 0.5 * eps * gi);
    }
    let h1 = potential(&w, &f) + 0.5 * p.iter().map(|a| a * a).sum::<f64>();
    let u: f64 = rng.random();
    if u.ln() < h0 - h1 {
        gp.set_whitened(w);
        true
    } else {
        false
    }
}
