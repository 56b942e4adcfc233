//! Symmetric tridiagonal eigenvalues by Sturm counts, plus a few dense helpers.

use crate::error::{Result, SpinlabError};
use nalgebra::DMatrix;

/// `diag[i]` on the diagonal, `off[i]` coupling `i` and `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(SpinlabError::DimensionMismatch { expected: diag.len().saturating_sub(1), got: off.len() });
        }
        Ok(SymTridiagonal { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::EPSILON * self.norm_bound().max(f64::MIN_POSITIVE);
        let mut count = 0;
        let mut pivot = 1.0;
        for i in 0..self.len() {
            let coupling = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] / pivot };
            let mut q = self.diag[i] - x - coupling;
            if q.abs() < tiny {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
            pivot = q;
        }
        count
    }

    /// The `k` smallest eigenvalues in ascending order, each bracketed to width `tol`.
    pub fn lowest(&self, k: usize, tol: f64) -> Vec<f64> {
        let k = k.min(self.len());
        let (lo0, hi0) = self.gershgorin();
        let mut out = Vec::with_capacity(k);
        let mut lo_floor = lo0;
        for j in 0..k {
            let (mut lo, mut hi) = (lo_floor, hi0);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.count_below(mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            out.push(0.5 * (lo + hi));
            lo_floor = lo;
        }
        out
    }

    /// The `k`-th smallest eigenvalue (from 0), bracketed to width `tol`.
    pub fn kth(&self, k: usize, tol: f64) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T − σ)x = b` by LU with partial pivoting; zero pivots are nudged.
    pub fn shifted_solve(&self, sigma: f64, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let tiny = f64::EPSILON * self.norm_bound().max(f64::MIN_POSITIVE);
        // rows hold (d, u1, u2) of U after elimination
        let mut d: Vec<f64> = self.diag.iter().map(|a| a - sigma).collect();
        let mut u1: Vec<f64> = self.off.clone();
        u1.push(0.0);
        let mut u2 = vec![0.0; n];
        let mut lower = self.off.clone();
        let mut x = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if lower[i].abs() > d[i].abs() {
                // swap rows i and i + 1
                let (di, u1i, u2i) = (d[i], u1[i], u2[i]);
                d[i] = lower[i];
                u1[i] = d[i + 1];
                u2[i] = u1[i + 1];
                let m = di / d[i];
                d[i + 1] = u1i - m * u1[i];
                u1[i + 1] = u2i - m * u2[i];
                x.swap(i, i + 1);
                x[i + 1] -= m * x[i];
                lower[i] = m;
            } else {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let m = lower[i] / d[i];
                d[i + 1] -= m * u1[i];
                x[i + 1] -= m * x[i];
                lower[i] = m;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / d[i];
        }
        x
    }

    /// Unit eigenvectors for the ascending eigenvalues `values` by inverse iteration,
    /// reorthogonalized within clusters closer than `1e-7·‖T‖`.
    pub fn eigenvectors(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let n = self.len();
        let norm = self.norm_bound().max(f64::MIN_POSITIVE);
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut cluster_start = 0;
        for (k, &lam) in values.iter().enumerate() {
            if k > 0 && lam - values[k - 1] > 1e-7 * norm {
                cluster_start = k;
            }
            let sigma = lam + 4.0 * f64::EPSILON * norm * (k - cluster_start) as f64;
            let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919 + k * 104729) % 1000) as f64 * 1e-3).collect();
            for _ in 0..4 {
                x = self.shifted_solve(sigma, &x);
                for prev in &out[cluster_start..k] {
                    let dot: f64 = prev.iter().zip(&x).map(|(a, b)| a * b).sum();
                    for (xi, pi) in x.iter_mut().zip(prev) {
                        *xi -= dot * pi;
                    }
                }
                let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                for xi in x.iter_mut() {
                    *xi /= nx;
                }
            }
            out.push(x);
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }
}

/// Largest singular value by power iteration on `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>, iters: usize) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut x = nalgebra::DVector::from_fn(m.ncols(), |i, _| 1.0 + (i % 7) as f64 * 0.1);
    let mut est = 0.0;
    for _ in 0..iters {
        let y = m.tr_mul(&(m * &x));
        let n = y.norm();
        if n == 0.0 {
            return 0.0;
        }
        est = n.sqrt() * (1.0 / x.norm()).sqrt();
        x = y / n;
    }
    est
}
