//! Supersymmetric and pseudo-supersymmetric harmonic oscillators `D + t h` on
//! forms over `ℝ^m`, solved exactly through the Hermite ladder and on a
//! staggered grid.
//!
//! Grid model in one variable: degree-0 values live on the nodes, degree-1
//! values on the midpoints, and `A = ∂ + t V·avg` maps nodes to midpoints, so
//! `D + t h = [[0, Aᵀ], [A, 0]]`. Its square splits into the tridiagonal blocks
//! `AᵀA` (even) and `AAᵀ` (odd), whose nonzero spectra agree exactly. The
//! degree-1 values vanish at the box ends. Fibers `ℝ^m` are products of
//! identical one-variable factors.

use crate::clifford::{graded_tensor, CliffordModule};
use crate::error::{Result, SpinlabError};
use crate::exterior::InnerProductSpace;
use crate::linalg::SymTridiagonal;
use crate::op::{AntiLinear, Op};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `6u⁵ − 15u⁴ + 10u³` clamped to `[0, 1]`.
pub fn smoothstep5(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (u * (6.0 * u - 15.0) + 10.0)
    }
}

fn smoothstep5_deriv(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        30.0 * u * u * (1.0 - u) * (1.0 - u)
    }
}

/// Bump cutoff: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, C² in between.
pub fn rho_bump(r: f64) -> f64 {
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        1.0 - smoothstep5(2.0 * r - 1.0)
    }
}

pub fn rho_bump_deriv(r: f64) -> f64 {
    -2.0 * smoothstep5_deriv(2.0 * r - 1.0)
}

/// Length cutoff: `r` on `[0, 1/2]`, exactly 1 on `[1, ∞)`.
pub fn rho_len(r: f64) -> f64 {
    if r >= 1.0 {
        1.0
    } else if r <= 0.5 {
        r
    } else {
        let b = rho_bump(r);
        b * r + 1.0 - b
    }
}

pub fn rho_len_deriv(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else if r <= 0.5 {
        1.0
    } else {
        rho_bump_deriv(r) * (r - 1.0) + rho_bump(r)
    }
}

/// `ρ_len(r)/r` with its limit 1 at `r = 0`.
fn rho_len_ratio(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        rho_len(r) / r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Metric {
    Flat,
    /// Cylindrical end outside the ball of radius `r0`.
    CylindricalEnd { r0: f64 },
}

impl Metric {
    /// Profile `V` of the Hermitian family along one axis, `h = V(x)(dx∧ + dx⌟)`.
    pub fn potential(&self, x: f64) -> f64 {
        match *self {
            Metric::Flat => x,
            Metric::CylindricalEnd { r0 } => {
                if x == 0.0 {
                    0.0
                } else {
                    r0 * rho_len(x.abs() / r0) * x.signum()
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Metric::Flat => Ok(()),
            Metric::CylindricalEnd { r0 } if r0 > 0.0 && r0.is_finite() => Ok(()),
            Metric::CylindricalEnd { r0 } => Err(SpinlabError::Input(format!("cylinder radius {r0}"))),
        }
    }
}

/// Symmetric grid on `[−L, L]` with `2 n_r + 1` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_r: usize,
    pub half_width: f64,
}

impl Grid {
    pub fn new(n_r: usize, half_width: f64) -> Result<Self> {
        if n_r < 2 || !(half_width > 0.0 && half_width.is_finite()) {
            return Err(SpinlabError::Input(format!("grid n_r = {n_r}, half width {half_width}")));
        }
        Ok(Grid { n_r, half_width })
    }

    pub fn dx(&self) -> f64 {
        self.half_width / self.n_r as f64
    }

    pub fn node_count(&self) -> usize {
        2 * self.n_r + 1
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - self.n_r as f64) * self.dx()
    }

    pub fn mid(&self, j: usize) -> f64 {
        (j as f64 + 0.5 - self.n_r as f64) * self.dx()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorProblem {
    pub m: usize,
    pub t: f64,
    pub metric: Metric,
    pub grid: Grid,
    /// Number of eigenvalues of `(D + t h)²` to report.
    pub n_eigs: usize,
}

impl OscillatorProblem {
    pub fn pseudo(m: usize, t: f64, n_r: usize) -> Result<Self> {
        Ok(OscillatorProblem {
            m,
            t,
            metric: Metric::CylindricalEnd { r0: 1.0 },
            grid: Grid::new(n_r, 6.0)?,
            n_eigs: 8,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > 8 {
            return Err(SpinlabError::Precondition(format!("fiber dimension {} outside 1..=8", self.m)));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(SpinlabError::Precondition(format!("t = {} must be positive", self.t)));
        }
        self.metric.validate()
    }
}

/// A kernel vector of `D + t h`, concentrated in degree 0.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelState {
    /// `(t/π)^{m/4} e^{−t|x|²/2}`.
    Gaussian { t: f64, m: usize },
    /// `⊗ factors[a]`, each factor sampled on the grid nodes with unit discrete L² norm.
    Sampled { grid: Grid, factors: Vec<Vec<f64>> },
}

fn gaussian_1d(t: f64, x: f64) -> f64 {
    (t / std::f64::consts::PI).powf(0.25) * (-0.5 * t * x * x).exp()
}

impl KernelState {
    pub fn dim(&self) -> usize {
        match self {
            KernelState::Gaussian { m, .. } => *m,
            KernelState::Sampled { factors, .. } => factors.len(),
        }
    }

    fn factor_value(&self, axis: usize, grid: &Grid, i: usize) -> f64 {
        match self {
            KernelState::Gaussian { t, .. } => gaussian_1d(*t, grid.node(i)),
            KernelState::Sampled { factors, .. } => factors[axis][i],
        }
    }

    /// Discrete overlap `|⟨u, g⟩| / (‖u‖‖g‖)` with the Gaussian `e^{−t|x|²/2}`.
    pub fn gaussian_overlap(&self, t: f64) -> f64 {
        match self {
            KernelState::Gaussian { t: s, m } => {
                // closed form for two normalized Gaussians
                (2.0 * (s * t).sqrt() / (s + t)).powf(0.5 * *m as f64)
            }
            KernelState::Sampled { grid, factors } => factors
                .iter()
                .map(|u| {
                    let g: Vec<f64> = (0..grid.node_count()).map(|i| gaussian_1d(t, grid.node(i))).collect();
                    let dot: f64 = u.iter().zip(&g).map(|(a, b)| a * b).sum();
                    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
                    let ng: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
                    dot.abs() / (nu * ng)
                })
                .product(),
        }
    }

    /// `τ`: reflection `x ↦ −x` with complex conjugation; on real degree-0 data it reverses each factor.
    pub fn tau(&self) -> KernelState {
        match self {
            KernelState::Gaussian { .. } => self.clone(),
            KernelState::Sampled { grid, factors } => KernelState::Sampled {
                grid: *grid,
                factors: factors.iter().map(|f| f.iter().rev().copied().collect()).collect(),
            },
        }
    }

    fn negated(&self) -> KernelState {
        match self {
            KernelState::Gaussian { .. } => panic!("the Gaussian kernel is positive"),
            KernelState::Sampled { grid, factors } => {
                let mut factors = factors.clone();
                for x in factors[0].iter_mut() {
                    *x = -*x;
                }
                KernelState::Sampled { grid: *grid, factors }
            }
        }
    }

    /// `‖τu − u‖` in the discrete L² norm.
    pub fn tau_defect(&self) -> f64 {
        match self {
            KernelState::Gaussian { .. } => 0.0,
            KernelState::Sampled { grid, factors } => {
                let dx = grid.dx();
                // unit factors a, b: ⟨a, b⟩ = 1 − ‖a − b‖²/2, and ‖⊗a − ⊗b‖² = 2 − 2∏⟨a, b⟩
                let log_prod: f64 = factors
                    .iter()
                    .map(|f| {
                        let d2: f64 = f.iter().zip(f.iter().rev()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * dx;
                        (-0.5 * d2).ln_1p()
                    })
                    .sum();
                (-2.0 * log_prod.exp_m1()).max(0.0).sqrt()
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralResult {
    /// Lowest eigenvalues of `(D + t h)²`, ascending, with multiplicity.
    pub eigenvalues: Vec<f64>,
    /// Whether each eigenvector is odd for `ε`.
    pub odd: Vec<bool>,
    pub kernel_dim: usize,
    /// Smallest nonzero eigenvalue.
    pub gap: f64,
    pub problem: Option<OscillatorProblem>,
    #[serde(skip)]
    pub kernel: Vec<KernelState>,
}

impl SpectralResult {
    /// Largest mismatch between the even and odd copies of each nonzero eigenvalue.
    pub fn pairing_defect(&self, zero_tol: f64) -> f64 {
        let split = |odd: bool| -> Vec<f64> {
            self.eigenvalues
                .iter()
                .zip(&self.odd)
                .filter(|(l, o)| **o == odd && **l > zero_tol)
                .map(|(l, _)| *l)
                .collect()
        };
        let (even, odd) = (split(false), split(true));
        // only the levels fully captured on both sides are comparable
        let top = self.eigenvalues.last().copied().unwrap_or(0.0);
        let cut = top - 1e-6 * top.abs().max(1.0);
        let even: Vec<f64> = even.into_iter().filter(|l| *l < cut).collect();
        let odd: Vec<f64> = odd.into_iter().filter(|l| *l < cut).collect();
        if even.len() != odd.len() {
            return f64::INFINITY;
        }
        even.iter().zip(&odd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Exact spectrum on flat `ℝ^m`: `(D + t h)² = Σ_a (−∂_a² + t²x_a² ± t)`, so the
/// level `N` has eigenvalue `2tN`, realized by Hermite degrees `k` and form
/// degrees `s ∈ {0,1}^m` with `|k| + |s| = N`.
pub fn flat_susy_spectrum(m: usize, t: f64, k_max: usize) -> Result<SpectralResult> {
    if m == 0 || m > 4 {
        return Err(SpinlabError::Precondition(format!("fiber dimension {m} outside 1..=4")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(SpinlabError::Precondition(format!("t = {t} must be positive")));
    }
    let mut eigenvalues = Vec::new();
    let mut odd = Vec::new();
    for level in 0..=k_max.max(1) {
        for mask in 0u32..(1 << m) {
            let s = mask.count_ones() as usize;
            if s > level {
                continue;
            }
            let count = binomial(level - s + m - 1, m - 1);
            for _ in 0..count {
                eigenvalues.push(2.0 * t * level as f64);
                odd.push(s % 2 == 1);
            }
        }
    }
    let kernel_dim = eigenvalues.iter().filter(|l| **l == 0.0).count();
    if kernel_dim != 1 {
        return Err(SpinlabError::Convergence(format!("ladder produced kernel dimension {kernel_dim}")));
    }
    Ok(SpectralResult {
        eigenvalues,
        odd,
        kernel_dim,
        gap: 2.0 * t,
        problem: None,
        kernel: vec![KernelState::Gaussian { t, m }],
    })
}

/// The one-variable staggered operator `[[0, Aᵀ], [A, 0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredOperator {
    pub grid: Grid,
    pub t: f64,
    /// `V` at the midpoints.
    pub potential: Vec<f64>,
}

impl StaggeredOperator {
    pub fn assemble(metric: Metric, t: f64, grid: Grid) -> Result<Self> {
        metric.validate()?;
        let potential: Vec<f64> = (0..grid.node_count() - 1).map(|j| metric.potential(grid.mid(j))).collect();
        let vmax = potential.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        // the kernel recurrence ratio (1 − a)/(1 + a), a = t V dx / 2, must stay a decaying exponential
        if t * vmax * grid.dx() >= 1.0 {
            return Err(SpinlabError::Convergence(format!(
                "grid too coarse: t·max|V|·dx = {:.3} ≥ 1",
                t * vmax * grid.dx()
            )));
        }
        Ok(StaggeredOperator { grid, t, potential })
    }

    pub fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    /// Coefficients `(a_j, b_j)` of row `j` of `A`: `(Au)_j = a_j u_j + b_j u_{j+1}`.
    pub fn row(&self, j: usize) -> (f64, f64) {
        let inv = 1.0 / self.grid.dx();
        let half = 0.5 * self.t * self.potential[j];
        (-inv + half, inv + half)
    }

    pub fn apply_a(&self, u: &[f64]) -> Vec<f64> {
        (0..self.potential.len())
            .map(|j| {
                let (a, b) = self.row(j);
                a * u[j] + b * u[j + 1]
            })
            .collect()
    }

    pub fn apply_at(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.node_count()];
        for (j, wj) in w.iter().enumerate() {
            let (a, b) = self.row(j);
            out[j] += a * wj;
            out[j + 1] += b * wj;
        }
        out
    }

    /// `AᵀA` on degree 0.
    pub fn even_square(&self) -> SymTridiagonal {
        let n = self.node_count();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        for j in 0..n - 1 {
            let (a, b) = self.row(j);
            diag[j] += a * a;
            diag[j + 1] += b * b;
            off[j] = a * b;
        }
        SymTridiagonal { diag, off }
    }

    /// `AAᵀ` on degree 1.
    pub fn odd_square(&self) -> SymTridiagonal {
        let n = self.node_count() - 1;
        let rows: Vec<(f64, f64)> = (0..n).map(|j| self.row(j)).collect();
        let diag = rows.iter().map(|(a, b)| a * a + b * b).collect();
        let off = (0..n - 1).map(|j| rows[j].1 * rows[j + 1].0).collect();
        SymTridiagonal { diag, off }
    }

    /// The solution of `Au = 0`, positive, with unit discrete L² norm.
    pub fn even_kernel(&self) -> Vec<f64> {
        let n = self.node_count();
        let c = self.grid.n_r;
        let mut u = vec![0.0; n];
        u[c] = 1.0;
        for j in c..n - 1 {
            let (a, b) = self.row(j);
            u[j + 1] = -a / b * u[j];
        }
        for j in (0..c).rev() {
            let (a, b) = self.row(j);
            u[j] = -b / a * u[j + 1];
        }
        let norm = (u.iter().map(|x| x * x).sum::<f64>() * self.grid.dx()).sqrt();
        u.iter().map(|x| x / norm).collect()
    }

    /// Dense `D + t h`, degree-0 block first.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut q = DMatrix::zeros(2 * n - 1, 2 * n - 1);
        for j in 0..n - 1 {
            let (a, b) = self.row(j);
            q[(n + j, j)] = a;
            q[(n + j, j + 1)] = b;
            q[(j, n + j)] = a;
            q[(j + 1, n + j)] = b;
        }
        q
    }

    /// Dense `(D, h)` with `D + t h` the assembled operator.
    pub fn parts(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let d = StaggeredOperator { t: 0.0, ..self.clone() }.to_dense();
        let h = (self.to_dense() - &d) / self.t;
        (d, h)
    }

    /// Sup norm of the order-0 operator `{D, h}` away from the box ends.
    pub fn anticommutator_bound(&self) -> f64 {
        let dx = self.grid.dx();
        let v = &self.potential;
        let mut best = 0.0f64;
        // degree 0: diagonal −(V_j − V_{j−1})/dx; degree 1: off-diagonals (V_{j+1} − V_j)/(2dx)
        for j in 1..v.len() {
            best = best.max((v[j] - v[j - 1]).abs() / dx);
        }
        for j in 1..v.len().saturating_sub(1) {
            best = best.max(((v[j + 1] - v[j]).abs() + (v[j] - v[j - 1]).abs()) / (2.0 * dx));
        }
        best
    }
}

/// Two-variable complex `d_t + d_tᵀ` for the product of two staggered factors,
/// ordered as degree 0, `dx`, `dy`, `dx∧dy`; returns the operator and the
/// oddness of each basis vector.
pub fn product_complex(x: &StaggeredOperator, y: &StaggeredOperator) -> (DMatrix<f64>, Vec<bool>) {
    let (nx, ny) = (x.node_count(), y.node_count());
    let (mx, my) = (nx - 1, ny - 1);
    let off1 = nx * ny;
    let off2 = off1 + mx * ny;
    let off3 = off2 + nx * my;
    let total = off3 + mx * my;
    let mut d = DMatrix::zeros(total, total);
    // index conventions: (i, k) ↦ i + nx k with i along x
    for k in 0..ny {
        for j in 0..mx {
            let (a, b) = x.row(j);
            d[(off1 + j + mx * k, j + nx * k)] += a;
            d[(off1 + j + mx * k, j + 1 + nx * k)] += b;
        }
    }
    for l in 0..my {
        let (a, b) = y.row(l);
        for i in 0..nx {
            d[(off2 + i + nx * l, i + nx * l)] += a;
            d[(off2 + i + nx * l, i + nx * (l + 1))] += b;
        }
    }
    // dx-part p at (mid j, node k), dy-part q at (node i, mid l); d(p dx + q dy) = (A_x q − A_y p) dx∧dy
    for l in 0..my {
        for j in 0..mx {
            let row = off3 + j + mx * l;
            let (a, b) = x.row(j);
            d[(row, off2 + j + nx * l)] += a;
            d[(row, off2 + j + 1 + nx * l)] += b;
            let (a, b) = y.row(l);
            d[(row, off1 + j + mx * l)] -= a;
            d[(row, off1 + j + mx * (l + 1))] -= b;
        }
    }
    let q = &d + d.transpose();
    let odd = (0..total).map(|i| (off1..off3).contains(&i)).collect();
    (q, odd)
}

/// Localization threshold from `A(t)² = (λ̄ + 2t‖{D,h}‖)‖h⁻¹‖²/t²` with `λ̄ = 0`,
/// `F` the ball of radius `r0/2` and `A(t) ≤ 1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Threshold {
    pub anticommutator_norm: f64,
    pub inverse_norm: f64,
    pub t_min: f64,
}

impl Threshold {
    pub fn a_of_t(&self, lambda_bar: f64, t: f64) -> f64 {
        ((lambda_bar + 2.0 * t * self.anticommutator_norm) * self.inverse_norm.powi(2) / (t * t)).sqrt()
    }
}

pub fn localization_threshold(metric: Metric, grid: Grid) -> Result<Threshold> {
    metric.validate()?;
    let op = StaggeredOperator { grid, t: 1.0, potential: (0..grid.node_count() - 1).map(|j| metric.potential(grid.mid(j))).collect() };
    let c = op.anticommutator_bound();
    let radius = match metric {
        Metric::Flat => 0.5,
        Metric::CylindricalEnd { r0 } => 0.5 * r0,
    };
    let min_h = (0..grid.node_count())
        .map(|i| grid.node(i))
        .chain((0..grid.node_count() - 1).map(|j| grid.mid(j)))
        .filter(|x| x.abs() >= radius)
        .map(|x| metric.potential(x).abs())
        .fold(f64::INFINITY, f64::min);
    if !(min_h > 0.0 && min_h.is_finite()) {
        return Err(SpinlabError::Precondition("h does not vanish only inside F".into()));
    }
    let k = 1.0 / min_h;
    Ok(Threshold { anticommutator_norm: c, inverse_norm: k, t_min: 8.0 * c * k * k })
}

fn combine_axes(even: &[f64], odd: &[f64], m: usize, keep: usize) -> Vec<(f64, bool)> {
    let mut acc = vec![(0.0, false)];
    for _ in 0..m {
        let mut next: Vec<(f64, bool)> = Vec::with_capacity(acc.len() * (even.len() + odd.len()));
        for &(l, p) in &acc {
            next.extend(even.iter().map(|e| (l + e, p)));
            next.extend(odd.iter().map(|o| (l + o, !p)));
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        next.truncate(keep);
        acc = next;
    }
    acc
}

/// Spectrum of the assembled grid operator, with no threshold check.
pub fn grid_spectrum(problem: &OscillatorProblem) -> Result<SpectralResult> {
    problem.validate()?;
    let op = StaggeredOperator::assemble(problem.metric, problem.t, problem.grid)?;
    let (even_sq, odd_sq) = (op.even_square(), op.odd_square());
    let scale = even_sq.norm_bound().max(odd_sq.norm_bound());
    let zero_tol = 1e-10 * scale;
    let bisect_tol = 4.0 * f64::EPSILON * scale;
    let keep = problem.n_eigs.max(2);
    let even = even_sq.lowest(keep, bisect_tol);
    let odd = odd_sq.lowest(keep, bisect_tol);
    let combined = combine_axes(&even, &odd, problem.m, keep);
    let kernel_1d = even_sq.count_below(zero_tol);
    let odd_kernel = odd_sq.count_below(zero_tol);
    let kernel_dim = (kernel_1d + odd_kernel).pow(problem.m as u32);
    let gap = combined.iter().map(|c| c.0).find(|l| *l > zero_tol).unwrap_or(f64::INFINITY);
    let kernel = if kernel_1d == 1 && odd_kernel == 0 {
        let u = op.even_kernel();
        vec![KernelState::Sampled { grid: problem.grid, factors: vec![u; problem.m] }]
    } else {
        Vec::new()
    };
    Ok(SpectralResult {
        eigenvalues: combined.iter().map(|c| c.0.max(0.0)).collect(),
        odd: combined.iter().map(|c| c.1).collect(),
        kernel_dim,
        gap,
        problem: Some(*problem),
        kernel,
    })
}

/// Pseudo-supersymmetric oscillator with the cylindrical end, refused below the localization threshold.
pub fn pseudo_susy_spectrum(problem: &OscillatorProblem) -> Result<SpectralResult> {
    let th = pseudo_threshold(problem)?;
    if problem.t < th.t_min {
        return Err(SpinlabError::NotLocalized(format!(
            "t = {} below threshold {:.3} (A(t) = {:.3} > 1/2)",
            problem.t,
            th.t_min,
            th.a_of_t(0.0, problem.t)
        )));
    }
    grid_spectrum(problem)
}

/// Same operator without the threshold check.
pub fn pseudo_susy_spectrum_unchecked(problem: &OscillatorProblem) -> Result<SpectralResult> {
    pseudo_threshold(problem)?;
    grid_spectrum(problem)
}

fn pseudo_threshold(problem: &OscillatorProblem) -> Result<Threshold> {
    if !matches!(problem.metric, Metric::CylindricalEnd { .. }) {
        return Err(SpinlabError::Precondition("pseudo oscillator needs the cylindrical-end metric".into()));
    }
    problem.validate()?;
    localization_threshold(problem.metric, problem.grid)
}

#[derive(Clone, Debug)]
pub struct Correspondence {
    /// `c` with `pseudo|_B = c · flat|_B` in the least-squares sense; real and positive.
    pub coefficient: f64,
    /// Cosine of the angle between the two restrictions to `B_{1/2}`.
    pub overlap: f64,
    /// The pseudo kernel vector of unit norm matched to the Gaussian.
    pub standard_solution: KernelState,
    pub tau_defect: f64,
    pub ball_points: usize,
}

const BALL_POINT_CAP: usize = 20_000_000;

/// Matches the one-dimensional kernels of the flat and pseudo oscillators on `B_{1/2}`.
pub fn kernel_correspondence(flat: &SpectralResult, pseudo: &SpectralResult) -> Result<Correspondence> {
    for (name, r) in [("flat", flat), ("pseudo", pseudo)] {
        if r.kernel_dim != 1 || r.kernel.len() != 1 {
            return Err(SpinlabError::Precondition(format!("{name} kernel has dimension {}", r.kernel_dim)));
        }
    }
    let (f, p) = (&flat.kernel[0], &pseudo.kernel[0]);
    if f.dim() != p.dim() {
        return Err(SpinlabError::DimensionMismatch { expected: f.dim(), got: p.dim() });
    }
    let grid = match (f, p) {
        (KernelState::Sampled { grid: a, .. }, KernelState::Sampled { grid: b, .. }) if a != b => {
            return Err(SpinlabError::Precondition("kernels sampled on different grids".into()))
        }
        (_, KernelState::Sampled { grid, .. }) | (KernelState::Sampled { grid, .. }, _) => *grid,
        _ => Grid::new(200, 1.0)?,
    };
    let m = f.dim();
    let lo = (0..grid.node_count()).find(|&i| grid.node(i) >= -0.5).unwrap_or(0);
    let hi = (0..grid.node_count()).rev().find(|&i| grid.node(i) <= 0.5).unwrap_or(0);
    let per_axis = hi + 1 - lo;
    if (per_axis as f64).powi(m as i32) > BALL_POINT_CAP as f64 {
        return Err(SpinlabError::TooLarge(format!("{per_axis}^{m} lattice points in B_1/2")));
    }
    let (mut ff, mut fp, mut pp) = (0.0, 0.0, 0.0);
    let mut count = 0usize;
    let mut idx = vec![lo; m];
    loop {
        let r2: f64 = idx.iter().map(|&i| grid.node(i).powi(2)).sum();
        if r2 <= 0.25 {
            let (mut a, mut b) = (1.0, 1.0);
            for (axis, &i) in idx.iter().enumerate() {
                a *= f.factor_value(axis, &grid, i);
                b *= p.factor_value(axis, &grid, i);
            }
            ff += a * a;
            fp += a * b;
            pp += b * b;
            count += 1;
        }
        let mut k = 0;
        while k < m {
            idx[k] += 1;
            if idx[k] <= hi {
                break;
            }
            idx[k] = lo;
            k += 1;
        }
        if k == m {
            break;
        }
    }
    if ff == 0.0 || pp == 0.0 {
        return Err(SpinlabError::Precondition("a kernel vanishes on B_1/2".into()));
    }
    let (standard, fp) = if fp < 0.0 { (p.negated(), -fp) } else { (p.clone(), fp) };
    Ok(Correspondence {
        coefficient: fp / ff,
        overlap: fp / (ff.sqrt() * pp.sqrt()),
        tau_defect: standard.tau_defect(),
        standard_solution: standard,
        ball_points: count,
    })
}

/// `Λ*V ⊗ Λ*V′ ⊗ ℂ` for `V = ℝ^{dim_v}`, `V′ = ℝ^{dim_v2}`, with `τ′(ω) = (−1)^{deg ω} ω̄` covering `𝒗 ↦ −𝒗`.
pub fn stabilization_module(dim_v: usize, dim_v2: usize) -> Result<CliffordModule<Complex64>> {
    if dim_v + dim_v2 > 10 {
        return Err(SpinlabError::TooLarge(format!("real dimension {}", dim_v + dim_v2)));
    }
    let a = CliffordModule::exterior(&Arc::new(InnerProductSpace::euclidean(dim_v)), "V")?;
    let b = CliffordModule::exterior(&Arc::new(InnerProductSpace::euclidean(dim_v2)), "V'")?;
    let mut m = graded_tensor(&a, &b);
    m.tau = AntiLinear::new(m.epsilon.clone(), true);
    Ok(m)
}

/// `H(s, 𝒗) = (h⊗1)(ρ(a_s) v/a_s) + (ε⊗h̄)(ρ(b_s) v′/b_s)` with
/// `a_s = (1−s)|𝒗| + s|v|`, `b_s = (1−s)|𝒗| + s|v′|` and `ρ = ρ_len`.
/// A zero radius uses the limit `ρ(r)/r → 1`.
pub fn real_stabilization_homotopy(s: f64, v: &[f64], v2: &[f64]) -> Result<Op<Complex64>> {
    let m = stabilization_module(v.len(), v2.len())?;
    homotopy_on(&m, s, v, v2)
}

fn homotopy_on(m: &CliffordModule<Complex64>, s: f64, v: &[f64], v2: &[f64]) -> Result<Op<Complex64>> {
    if !(0.0..=1.0).contains(&s) {
        return Err(SpinlabError::Precondition(format!("s = {s} outside [0, 1]")));
    }
    if v.iter().chain(v2).any(|x| !x.is_finite()) {
        return Err(SpinlabError::Input("non-finite vector entry".into()));
    }
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (nv, nv2) = (norm(v), norm(v2));
    let joint = nv.hypot(nv2);
    let a = (1.0 - s) * joint + s * nv;
    let b = (1.0 - s) * joint + s * nv2;
    let (fa, fb) = (rho_len_ratio(a), rho_len_ratio(b));
    let coeffs: Vec<Complex64> = v
        .iter()
        .map(|x| Complex64::new(fa * x, 0.0))
        .chain(v2.iter().map(|x| Complex64::new(fb * x, 0.0)))
        .collect();
    Ok(m.hermitian_of(&coeffs))
}

/// `max |τ′ H(s, 𝒗) − H(s, −𝒗) τ′|` together with the self-adjointness defect of `H(s, 𝒗)`.
pub fn homotopy_defects(s: f64, v: &[f64], v2: &[f64]) -> Result<(f64, f64)> {
    let m = stabilization_module(v.len(), v2.len())?;
    let h = homotopy_on(&m, s, v, v2)?;
    let neg = |x: &[f64]| x.iter().map(|a| -a).collect::<Vec<_>>();
    let h_neg = homotopy_on(&m, s, &neg(v), &neg(v2))?;
    let lhs = m.tau.after(&h);
    let rhs = h_neg.mul(&m.tau.matrix);
    Ok((lhs.max_abs_diff(&rhs), h.max_abs_diff(&h.adjoint())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoffs_have_the_stated_shape() {
        assert_eq!(rho_bump(0.3), 1.0);
        assert_eq!(rho_bump(1.0), 0.0);
        assert_eq!(rho_len(0.25), 0.25);
        assert_eq!(rho_len(1.7), 1.0);
        for k in 0..=100 {
            let r = 0.5 + k as f64 / 200.0;
            assert!((0.0..=1.0).contains(&rho_len(r)));
            let h = 1e-6;
            let fd = (rho_len(r + h) - rho_len(r - h)) / (2.0 * h);
            assert!((fd - rho_len_deriv(r)).abs() < 1e-5, "{r}");
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(3, 0), 1);
        assert_eq!(binomial(0, 0), 1);
    }

    #[test]
    fn ladder_levels_pair_up() {
        let r = flat_susy_spectrum(2, 1.5, 4).unwrap();
        assert_eq!(r.kernel_dim, 1);
        assert_eq!(r.gap, 3.0);
        assert!(r.pairing_defect(1e-12) == 0.0);
    }

    #[test]
    fn grid_kernel_solves_a() {
        let g = Grid::new(100, 5.0).unwrap();
        let op = StaggeredOperator::assemble(Metric::Flat, 2.0, g).unwrap();
        let u = op.even_kernel();
        assert!(op.apply_a(&u).iter().all(|x| x.abs() < 1e-12));
        let w: Vec<f64> = (0..op.node_count() - 1).map(|j| (j as f64).sin()).collect();
        let lhs: f64 = op.apply_a(&u).iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(op.apply_at(&w)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn coarse_grid_is_refused() {
        let g = Grid::new(4, 8.0).unwrap();
        assert!(matches!(StaggeredOperator::assemble(Metric::Flat, 8.0, g), Err(SpinlabError::Convergence(_))));
    }
}
