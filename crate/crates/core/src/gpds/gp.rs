use std::cell::RefCell;

use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::GpdsError;

/// Diagonal nugget added to every covariance matrix.
pub const GP_JITTER: f64 = 1e-8;
/// Locations closer than this share one function value.
pub const COALESCE_TOL: f64 = 1e-9;
/// Points appended per blocked factor update.
pub(crate) const BLOCK: usize = 64;
/// Blocks at most this wide skip the matrix-product path.
const NARROW: usize = 8;

/// `k(x, y) = variance · exp(-|x - y|² / 2ℓ²)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SquaredExponential {
    pub variance: f64,
    pub length_scale: f64,
}

impl Default for SquaredExponential {
    fn default() -> Self {
        Self {
            variance: 1.0,
            length_scale: 1.0,
        }
    }
}

impl SquaredExponential {
    pub fn new(variance: f64, length_scale: f64) -> Result<Self, GpdsError> {
        if !(variance >= 0.0 && variance.is_finite() && length_scale > 0.0 && length_scale.is_finite()) {
            return Err(GpdsError::InvalidParameter(format!(
                "kernel variance {variance}, length-scale {length_scale}"
            )));
        }
        Ok(Self { variance, length_scale })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.variance * (-0.5 * sq / (self.length_scale * self.length_scale)).exp()
    }
}

/// Dot product with independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f64>() + tail
}

/// Function values of a GP at a growing set of locations, with the Cholesky
/// factor of their covariance extended as points arrive, so conditioning on
/// new points never refactors the old ones.
#[derive(Debug)]
pub struct GpConditioner {
    kernel: SquaredExponential,
    mean: f64,
    dim: usize,
    locs: Vec<f64>,
    values: Vec<f64>,
    /// `L⁻¹ (values - mean)`.
    whitened: Vec<f64>,
    /// Lower Cholesky factor, row-major with row stride `cap`.
    chol: Vec<f64>,
    cap: usize,
}

impl Clone for GpConditioner {
    fn clone(&self) -> Self {
        let mut out = Self {
            chol: Vec::new(),
            cap: 0,
            locs: self.locs.clone(),
            values: self.values.clone(),
            whitened: self.whitened.clone(),
            ..*self
        };
        out.regrow(self.len() + BLOCK, self);
        out
    }
}

impl GpConditioner {
    pub fn new(kernel: SquaredExponential, mean: f64, dim: usize) -> Self {
        Self {
            kernel,
            mean,
            dim,
            locs: Vec::new(),
            values: Vec::new(),
            whitened: Vec::new(),
            chol: Vec::new(),
            cap: 0,
        }
    }

    /// Conditioner holding the given evaluations. Coalesced locations keep
    /// the first value.
    pub fn from_points<'a>(
        kernel: SquaredExponential,
        mean: f64,
        dim: usize,
        points: impl IntoIterator<Item = (&'a [f64], f64)>,
    ) -> Result<Self, GpdsError> {
        let mut gp = Self::new(kernel, mean, dim);
        let (locs, vals): (Vec<&[f64]>, Vec<f64>) = points.into_iter().unzip();
        for (l, v) in locs.chunks(BLOCK).zip(vals.chunks(BLOCK)) {
            gp.push_many(l, v)?;
        }
        Ok(gp)
    }

    pub fn kernel(&self) -> SquaredExponential {
        self.kernel
    }

    pub fn prior_mean(&self) -> f64 {
        self.mean
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.locs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn whitened(&self) -> &[f64] {
        &self.whitened
    }

    /// Row `i` of the Cholesky factor, up to the diagonal.
    pub fn chol_row(&self, i: usize) -> &[f64] {
        &self.chol[i * self.cap..i * self.cap + i + 1]
    }

    /// Copies the factor rows of `src` into fresh storage of stride `cap`.
    fn regrow(&mut self, cap: usize, src: &GpConditioner) {
        let mut chol = vec![0.0; cap * cap];
        for i in 0..src.len() {
            chol[i * cap..i * cap + i + 1].copy_from_slice(src.chol_row(i));
        }
        self.chol = chol;
        self.cap = cap;
    }

    fn reserve(&mut self, extra: usize) {
        let need = self.len() + extra;
        if need > self.cap {
            let cap = need.max(self.cap + self.cap / 2).max(BLOCK);
            let mut chol = vec![0.0; cap * cap];
            for i in 0..self.len() {
                chol[i * cap..i * cap + i + 1].copy_from_slice(self.chol_row(i));
            }
            self.chol = chol;
            self.cap = cap;
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GpdsError> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(GpdsError::Dimension {
                expected: self.dim,
                got: x.len(),
            })
        }
    }

    pub fn find(&self, x: &[f64]) -> Option<usize> {
        let tol2 = COALESCE_TOL * COALESCE_TOL;
        (0..self.len()).find(|&i| {
            let d2: f64 = self.location(i).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 < tol2
        })
    }

    /// `L⁻¹ k(locs, x)`.
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let row = self.chol_row(i);
            let k = self.kernel.eval(self.location(i), x);
            v.push((k - dot(&row[..i], &v)) / row[i]);
        }
        v
    }

    /// Conditional mean and variance of `f(x)`. Stored locations return
    /// their value with zero variance.
    pub fn conditional(&self, x: &[f64]) -> Result<(f64, f64), GpdsError> {
        self.check_dim(x)?;
        if let Some(i) = self.find(x) {
            return Ok((self.values[i], 0.0));
        }
        let v = self.project(x);
        let mean = self.mean + dot(&v, &self.whitened);
        let var = self.kernel.variance + GP_JITTER - dot(&v, &v);
        Ok((mean, var.max(0.0)))
    }

    /// `(V, L_bb)` for appending `locs` (pairwise distinct and not stored):
    /// `V = L⁻¹ K(stored, locs)` and `L_bb` the Cholesky factor of the
    /// conditional covariance of `locs`. The solve runs in row blocks so the
    /// bulk of the work is a matrix product.
    fn factor_block(&self, locs: &[&[f64]]) -> Result<(DMatrix<f64>, DMatrix<f64>), GpdsError> {
        let m = self.len();
        let b = locs.len();
        let mut v = DMatrix::from_fn(m, b, |i, k| self.kernel.eval(self.location(i), locs[k]));
        if b <= NARROW {
            for col in v.as_mut_slice().chunks_exact_mut(m.max(1)).take(b) {
                for i in 0..m {
                    let row = self.chol_row(i);
                    col[i] = (col[i] - dot(&row[..i], &col[..i])) / row[i];
                }
            }
        } else {
            let mut i0 = 0;
            while i0 < m {
                let i1 = (i0 + BLOCK).min(m);
                if i0 > 0 && i1 - i0 <= NARROW {
                    for col in v.as_mut_slice().chunks_exact_mut(m) {
                        for i in i0..i1 {
                            col[i] -= dot(&self.chol_row(i)[..i0], &col[..i0]);
                        }
                    }
                } else if i0 > 0 {
                    let start = i0 * self.cap;
                    let len = (i1 - i0 - 1) * self.cap + i0;
                    let lblk =
                        DMatrixView::from_slice_with_strides(&self.chol[start..start + len], i1 - i0, i0, self.cap, 1);
                    let (top, mut bottom) = v.rows_range_pair_mut(0..i0, i0..i1);
                    bottom.gemm(-1.0, &lblk, &top, 1.0);
                }
                for col in v.as_mut_slice().chunks_exact_mut(m) {
                    for i in i0..i1 {
                        let row = self.chol_row(i);
                        col[i] = (col[i] - dot(&row[i0..i], &col[i0..i])) / row[i];
                    }
                }
                i0 = i1;
            }
        }
        let mut s = DMatrix::from_fn(b, b, |r, c| self.kernel.eval(locs[r], locs[c]));
        for r in 0..b {
            s[(r, r)] += GP_JITTER;
        }
        if m > 0 {
            s.gemm_tr(-1.0, &v, &v, 1.0);
        }
        let lbb = s
            .cholesky()
            .ok_or(GpdsError::NotPositiveDefinite { size: m + b })?
            .unpack();
        Ok((v, lbb))
    }

    /// Appends `locs` with whitened coordinates `w_new`.
    fn commit_block(&mut self, locs: &[&[f64]], v: &DMatrix<f64>, lbb: &DMatrix<f64>, w_new: &[f64]) -> Vec<usize> {
        let m = self.len();
        let b = locs.len();
        self.reserve(b);
        let cap = self.cap;
        for k in 0..b {
            let col = v.column(k);
            let prefix = dot(col.as_slice(), &self.whitened[..m]);
            let own: f64 = (0..=k).map(|j| lbb[(k, j)] * w_new[j]).sum();
            let row = &mut self.chol[(m + k) * cap..(m + k) * cap + m + k + 1];
            row[..m].copy_from_slice(col.as_slice());
            for j in 0..=k {
                row[m + j] = lbb[(k, j)];
            }
            self.locs.extend_from_slice(locs[k]);
            self.values.push(self.mean + prefix + own);
        }
        self.whitened.extend_from_slice(w_new);
        (m..m + b).collect()
    }

    /// Splits `points` into runs of new, pairwise distinct locations and
    /// hands each run to `flush`; coalesced points are reported through
    /// `stored` with their index.
    fn for_each_run<F, S>(&mut self, points: &[&[f64]], mut flush: F, mut stored: S) -> Result<(), GpdsError>
    where
        F: FnMut(&mut Self, &[usize]) -> Result<(), GpdsError>,
        S: FnMut(&Self, usize, usize),
    {
        let tol2 = COALESCE_TOL * COALESCE_TOL;
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() < tol2;
        let mut run: Vec<usize> = Vec::new();
        for (k, x) in points.iter().enumerate() {
            self.check_dim(x)?;
            if run.iter().any(|&r| close(points[r], x)) {
                flush(self, &run)?;
                run.clear();
            }
            if let Some(i) = self.find(x) {
                if !run.is_empty() {
                    flush(self, &run)?;
                    run.clear();
                }
                stored(self, k, i);
            } else {
                run.push(k);
            }
        }
        if !run.is_empty() {
            flush(self, &run)?;
        }
        Ok(())
    }

    /// Draws `f` jointly at `points` given all stored evaluations, storing
    /// the draws in order. Returns `(value, index)` per point.
    pub fn sample_many<R: Rng + ?Sized>(
        &mut self,
        points: &[&[f64]],
        rng: &mut R,
    ) -> Result<Vec<(f64, usize)>, GpdsError> {
        let out = RefCell::new(vec![(0.0, 0); points.len()]);
        self.for_each_run(
            points,
            |gp, run| {
                let locs: Vec<&[f64]> = run.iter().map(|&k| points[k]).collect();
                let (v, lbb) = gp.factor_block(&locs)?;
                let z: Vec<f64> = (0..run.len()).map(|_| StandardNormal.sample(rng)).collect();
                let idx = gp.commit_block(&locs, &v, &lbb, &z);
                let mut out = out.borrow_mut();
                for (&k, i) in run.iter().zip(idx) {
                    out[k] = (gp.values[i], i);
                }
                Ok(())
            },
            |gp, k, i| out.borrow_mut()[k] = (gp.values[i], i),
        )?;
        Ok(out.into_inner())
    }

    /// Stores known values at `points`; coalesced points keep the stored
    /// value. Returns the index of each point.
    pub fn push_many(&mut self, points: &[&[f64]], values: &[f64]) -> Result<Vec<usize>, GpdsError> {
        assert_eq!(points.len(), values.len());
        let out = RefCell::new(vec![0; points.len()]);
        self.for_each_run(
            points,
            |gp, run| {
                let locs: Vec<&[f64]> = run.iter().map(|&k| points[k]).collect();
                let (v, lbb) = gp.factor_block(&locs)?;
                // Forward solve L_bb w = values - mean - Vᵀ w_old.
                let mut w = vec![0.0; run.len()];
                for r in 0..run.len() {
                    let prefix = dot(v.column(r).as_slice(), &gp.whitened);
                    let lower: f64 = (0..r).map(|j| lbb[(r, j)] * w[j]).sum();
                    w[r] = (values[run[r]] - gp.mean - prefix - lower) / lbb[(r, r)];
                }
                let idx = gp.commit_block(&locs, &v, &lbb, &w);
                let mut out = out.borrow_mut();
                for (r, i) in idx.into_iter().enumerate() {
                    gp.values[i] = values[run[r]];
                    out[run[r]] = i;
                }
                Ok(())
            },
            |_, k, i| out.borrow_mut()[k] = i,
        )?;
        Ok(out.into_inner())
    }

    /// Adds one evaluation, returning its index. A coalesced location keeps
    /// its stored value.
    pub fn push(&mut self, x: &[f64], value: f64) -> Result<usize, GpdsError> {
        Ok(self.push_many(&[x], &[value])?[0])
    }

    /// Draws `f(x)` given all stored evaluations and stores it.
    pub fn sample_at<R: Rng + ?Sized>(&mut self, x: &[f64], rng: &mut R) -> Result<(f64, usize), GpdsError> {
        Ok(self.sample_many(&[x], rng)?[0])
    }

    /// Keeps only the first `m` evaluations.
    pub fn truncate(&mut self, m: usize) {
        if m >= self.len() {
            return;
        }
        self.locs.truncate(m * self.dim);
        self.values.truncate(m);
        self.whitened.truncate(m);
    }

    /// `L z`.
    pub fn apply_chol(&self, z: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| dot(self.chol_row(i), z)).collect()
    }

    /// `Lᵀ g`.
    pub fn apply_chol_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, gi) in g.iter().enumerate().take(self.len()) {
            for (o, a) in out[..=i].iter_mut().zip(self.chol_row(i)) {
                *o += a * gi;
            }
        }
        out
    }

    /// Replaces the values by `mean + L w`.
    pub fn set_whitened(&mut self, w: Vec<f64>) {
        assert_eq!(w.len(), self.len());
        let lw = self.apply_chol(&w);
        self.values = lw.into_iter().map(|v| self.mean + v).collect();
        self.whitened = w;
    }

    /// `ln N(values; mean, K + jitter·I)`.
    pub fn log_prior_density(&self) -> f64 {
        let m = self.len();
        let log_det: f64 = (0..m).map(|i| self.chol_row(i)[i].ln()).sum();
        -0.5 * dot(&self.whitened, &self.whitened) - log_det - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// `K⁻¹ (values - mean)`, for repeated posterior-mean evaluation.
    pub fn dual_weights(&self) -> Vec<f64> {
        let mut a = self.whitened.clone();
        for i in (0..self.len()).rev() {
            let row = self.chol_row(i);
            a[i] /= row[i];
            let ai = a[i];
            for (aj, l) in a[..i].iter_mut().zip(&row[..i]) {
                *aj -= l * ai;
            }
        }
        a
    }

    /// Conditional mean at `x` given precomputed [`Self::dual_weights`].
    pub fn mean_with(&self, x: &[f64], dual: &[f64]) -> f64 {
        self.mean
            + (0..self.len())
                .map(|i| self.kernel.eval(self.location(i), x) * dual[i])
                .sum::<f64>()
    }
}

/// Joint conditional law of `f` at `new_points` given the stored
/// evaluations. Stored locations get their value and zero (co)variance.
pub fn gpds_conditional_f(
    gp: &GpConditioner,
    new_points: &[Vec<f64>],
) -> Result<(DVector<f64>, DMatrix<f64>), GpdsError> {
    let k = new_points.len();
    let mut mean = DVector::zeros(k);
    let mut proj: Vec<Option<Vec<f64>>> = Vec::with_capacity(k);
    for (a, x) in new_points.iter().enumerate() {
        gp.check_dim(x)?;
        if let Some(i) = gp.find(x) {
            mean[a] = gp.values()[i];
            proj.push(None);
        } else {
            let v = gp.project(x);
            mean[a] = gp.prior_mean() + dot(&v, gp.whitened());
            proj.push(Some(v));
        }
    }
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..=a {
            let (Some(va), Some(vb)) = (&proj[a], &proj[b]) else {
                continue;
            };
            let mut c = gp.kernel().eval(&new_points[a], &new_points[b]) - dot(va, vb);
            if a == b {
                c = (c + GP_JITTER).max(0.0);
            }
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    Ok((mean, cov))
}
