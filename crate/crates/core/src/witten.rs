//! Witten deformation on an interval: tame tuples `(D, h, F, λ̄, T)`, the
//! localization bounds `A(t)`, `B(t)`, the distance `d_H` on Grassmannians and
//! the comparison map `Φ_{λ,t}(φ) = Π ρφ` between glued models.
//!
//! The bundle has rank 2 with `c = [[0, −1], [1, 0]]` and `h = f(x)·diag(1, −1)`.
//! Sections are node values weighted by trapezoid weights `w`; all linear algebra
//! runs in the isometric coordinates `w^{1/2}·φ`, where the forward difference
//! `Ã = w^{1/2} ∂₊ w^{−1/2}` gives `D = [[0, Ãᵀ], [Ã, 0]]`. That `D` is exactly
//! symmetric, and the second component is differenced backwards, so no doubler
//! modes appear. Coordinates interleave the components, `2i + k` for `(x_i, k)`,
//! which makes `D + th` symmetric tridiagonal.

use crate::error::{Result, SpinlabError};
use crate::linalg::SymTridiagonal;
use crate::oscillator::smoothstep5;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Linear continuation of `f` past `|x| = radius` with `|f|` growing at `slope`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub radius: f64,
    pub slope: f64,
}

/// `f(x) = Σ poly[k] x^k`, optionally continued linearly by `tail`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub poly: Vec<f64>,
    #[serde(default)]
    pub tail: Option<Tail>,
}

impl Potential {
    pub fn polynomial(poly: Vec<f64>) -> Self {
        Potential { poly, tail: None }
    }

    pub fn with_tail(mut self, radius: f64, slope: f64) -> Self {
        self.tail = Some(Tail { radius, slope });
        self
    }

    fn poly_at(&self, x: f64) -> f64 {
        self.poly.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.tail {
            Some(Tail { radius, slope }) if x.abs() > radius => {
                let edge = radius.copysign(x);
                let f0 = self.poly_at(edge);
                f0 + slope * (x.abs() - radius) * f0.signum()
            }
            _ => self.poly_at(x),
        }
    }
}

/// `ρ = 1` within `inner` of `F`, `0` beyond `outer`, quintic smoothstep between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    pub fn eval(&self, dist_to_f: f64) -> f64 {
        1.0 - smoothstep5((dist_to_f - self.inner) / (self.outer - self.inner))
    }
}

/// Serializable description of a model; `t_min` is filled in by [`suggest_t`] when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub half_width: f64,
    pub nodes: usize,
    pub potential: Potential,
    /// Closed intervals whose union is `F`.
    pub f_set: Vec<(f64, f64)>,
    pub lambda_bar: f64,
    #[serde(default)]
    pub t_min: Option<f64>,
    pub cutoff: Cutoff,
}

impl ModelSpec {
    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    pub fn dist_to_f(&self, x: f64) -> f64 {
        self.f_set
            .iter()
            .map(|&(a, b)| if x < a { a - x } else if x > b { x - b } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn in_f(&self, x: f64) -> bool {
        self.dist_to_f(x) == 0.0
    }
}

#[derive(Clone, Debug)]
pub struct TameTupleModel {
    pub spec: ModelSpec,
    pub t_min: f64,
    pub x: Vec<f64>,
    pub weights: Vec<f64>,
    pub f: Vec<f64>,
    /// Off-diagonal of `D` in interleaved coordinates: `Ã_{ii}`, `Ã_{i,i+1}`, ….
    d_off: Vec<f64>,
    pub c_norm: f64,
    /// Operator norm of the discrete `{D, h}`.
    pub anticommutator_norm: f64,
    /// `max 1/|f|` over nodes outside `F`; infinite if `f` vanishes there.
    pub h_inv_norm: f64,
}

/// Smallest `T` with condition (5) on the grid and `A(T) ≤ 1`.
pub fn suggest_t(spec: &ModelSpec) -> f64 {
    let x: Vec<f64> = (0..spec.nodes).map(|i| spec.node(i)).collect();
    let f: Vec<f64> = x.iter().map(|&x| spec.potential.eval(x)).collect();
    let dx = spec.dx();
    let mut t5: f64 = 0.0;
    for i in 0..spec.nodes {
        if spec.in_f(x[i]) {
            continue;
        }
        let fp = if i + 1 < spec.nodes { (f[i + 1] - f[i]) / dx } else { 0.0 };
        let f2 = f[i] * f[i];
        if f2 == 0.0 {
            return f64::INFINITY;
        }
        t5 = t5.max((fp.abs() + (fp * fp + 4.0 * spec.lambda_bar * f2).sqrt()) / (2.0 * f2));
    }
    let (k, h) = (anticommutator_norm_of(&f, dx), h_inv_norm_of(spec, &x, &f));
    let h2 = h * h;
    let ta = k * h2 + (k * k * h2 * h2 + spec.lambda_bar * h2).sqrt();
    t5.max(ta)
}

fn trapezoid(n: usize, dx: f64) -> Vec<f64> {
    (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * dx } else { dx }).collect()
}

fn anticommutator_norm_of(f: &[f64], dx: f64) -> f64 {
    // [Ã, F] has one superdiagonal, so its norm is the largest entry
    let w = trapezoid(f.len(), dx);
    (0..f.len() - 1).map(|i| ((f[i + 1] - f[i]) / dx * (w[i] / w[i + 1]).sqrt()).abs()).fold(0.0, f64::max)
}

fn h_inv_norm_of(spec: &ModelSpec, x: &[f64], f: &[f64]) -> f64 {
    x.iter()
        .zip(f)
        .filter(|(x, _)| !spec.in_f(**x))
        .map(|(_, f)| 1.0 / f.abs())
        .fold(0.0, f64::max)
}

impl TameTupleModel {
    pub fn assemble(spec: ModelSpec) -> Result<Self> {
        if spec.nodes < 3 || spec.half_width <= 0.0 {
            return Err(SpinlabError::Input(format!("grid {} nodes on [−{1}, {1}]", spec.nodes, spec.half_width)));
        }
        if !(spec.lambda_bar > 0.0) {
            return Err(SpinlabError::Input("lambda_bar must be positive".into()));
        }
        if !(spec.cutoff.inner >= 0.0 && spec.cutoff.outer > spec.cutoff.inner) {
            return Err(SpinlabError::Input("cutoff needs 0 <= inner < outer".into()));
        }
        let n = spec.nodes;
        let dx = spec.dx();
        let x: Vec<f64> = (0..n).map(|i| spec.node(i)).collect();
        let f: Vec<f64> = x.iter().map(|&x| spec.potential.eval(x)).collect();
        let weights = trapezoid(n, dx);
        let mut d_off = Vec::with_capacity(2 * n - 1);
        for i in 0..n {
            // (v_i, u_i) then (v_i, u_{i+1})
            d_off.push(if i + 1 < n { -1.0 / dx } else { 0.0 });
            if i + 1 < n {
                d_off.push((weights[i] / weights[i + 1]).sqrt() / dx);
            }
        }
        let t_min = match spec.t_min {
            Some(t) => t,
            None => suggest_t(&spec),
        };
        if !(t_min.is_finite() && t_min > 0.0) {
            return Err(SpinlabError::Precondition(format!("no admissible T (got {t_min})")));
        }
        Ok(TameTupleModel {
            anticommutator_norm: anticommutator_norm_of(&f, dx),
            h_inv_norm: h_inv_norm_of(&spec, &x, &f),
            c_norm: 1.0,
            spec,
            t_min,
            x,
            weights,
            f,
            d_off,
        })
    }

    pub fn node_count(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.x.len()
    }

    /// Node of coordinate `k`.
    pub fn node_of(&self, k: usize) -> usize {
        k / 2
    }

    /// `D + t h` as a symmetric tridiagonal matrix.
    pub fn deformed_tridiagonal(&self, t: f64) -> SymTridiagonal {
        let diag = (0..self.dim()).map(|k| t * self.h_at(k)).collect();
        SymTridiagonal { diag, off: self.d_off.clone() }
    }

    /// `h` on coordinate `k`: `f` on the first component, `−f` on the second.
    pub fn h_at(&self, k: usize) -> f64 {
        if k % 2 == 0 {
            self.f[k / 2]
        } else {
            -self.f[k / 2]
        }
    }

    pub fn dirac(&self) -> DMatrix<f64> {
        self.deformed_tridiagonal(0.0).to_dense()
    }

    /// `D + t h` as a dense matrix.
    pub fn deformed(&self, t: f64) -> DMatrix<f64> {
        self.deformed_tridiagonal(t).to_dense()
    }

    pub fn anticommutator(&self) -> DMatrix<f64> {
        let d = self.dirac();
        let h = DMatrix::from_diagonal(&DVector::from_fn(self.dim(), |k, _| self.h_at(k)));
        &d * &h + &h * &d
    }

    /// `ρ` on each coordinate.
    pub fn rho(&self, cutoff: &Cutoff) -> DVector<f64> {
        DVector::from_fn(self.dim(), |k, _| cutoff.eval(self.spec.dist_to_f(self.x[k / 2])))
    }

    /// Squared `L²` norm over `M ∖ F`.
    pub fn outside_norm2(&self, v: &[f64]) -> f64 {
        v.iter().enumerate().filter(|(k, _)| !self.spec.in_f(self.x[k / 2])).map(|(_, a)| a * a).sum()
    }

    /// Node values `(u(x_i), v(x_i))` from isometric coordinates.
    pub fn node_values(&self, v: &[f64]) -> Vec<(f64, f64)> {
        (0..self.node_count())
            .map(|i| {
                let s = self.weights[i].sqrt();
                (v[2 * i] / s, v[2 * i + 1] / s)
            })
            .collect()
    }
}

/// Eigenpairs of `(D + th)²` up to `threshold`, ascending, unit `L²` norm.
#[derive(Clone, Debug)]
pub struct EigenspacePacket {
    pub threshold: f64,
    pub t: f64,
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub max_residual: f64,
    op: SymTridiagonal,
}

impl EigenspacePacket {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of eigenvalues of `(D + th)²` in `[0, x]`.
    pub fn count_le(&self, x: f64) -> usize {
        if x < 0.0 {
            return 0;
        }
        let s = x.sqrt();
        let up = s + f64::EPSILON * (s + self.op.norm_bound());
        self.op.count_below(up) - self.op.count_below(-s)
    }

    /// Number of eigenvalues of `(D + th)²` in the open interval `(lo, hi)`.
    pub fn count_between(&self, lo: f64, hi: f64) -> usize {
        if hi <= lo.max(0.0) {
            return 0;
        }
        let (a, b) = (lo.max(0.0).sqrt(), hi.sqrt());
        let inner = if lo < 0.0 { 0 } else { self.op.count_below(a + f64::EPSILON * (a + self.op.norm_bound())) - self.op.count_below(-a) };
        self.op.count_below(b) - self.op.count_below(-b + f64::EPSILON * (b + self.op.norm_bound())) - inner
    }

    /// Smallest eigenvalue of `(D + th)²` above the threshold.
    pub fn next_above(&self) -> f64 {
        let n = self.op.len();
        let lo = self.op.count_below(-self.threshold.sqrt());
        let hi = n - self.op.count_below(self.threshold.sqrt() + f64::EPSILON * self.op.norm_bound());
        let tol = 4.0 * f64::EPSILON * self.op.norm_bound();
        let below = if lo > 0 { self.op.kth(lo - 1, tol).powi(2) } else { f64::INFINITY };
        let above = if hi > 0 { self.op.kth(n - hi, tol).powi(2) } else { f64::INFINITY };
        below.min(above)
    }

    /// `(D + th)² v`.
    pub fn apply_square(&self, v: &[f64]) -> Vec<f64> {
        self.op.apply(&self.op.apply(v))
    }
}

fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if let Some(first) = v.iter().find(|a| a.abs() > 1e-9 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
    }
}

/// Eigenpairs of `D + th` with `|q| ≤ √threshold` by bisection and inverse iteration.
pub fn eigenpacket(model: &TameTupleModel, t: f64, threshold: f64) -> EigenspacePacket {
    let op = model.deformed_tridiagonal(t);
    let s = threshold.max(0.0).sqrt();
    let norm = op.norm_bound();
    let tol = 4.0 * f64::EPSILON * norm;
    let k0 = op.count_below(-s);
    let k1 = op.count_below(s + f64::EPSILON * (s + norm));
    let q: Vec<f64> = (k0..k1).map(|k| op.kth(k, tol)).collect();
    let vecs = op.eigenvectors(&q);
    let mut pairs: Vec<(f64, Vec<f64>)> = q.iter().map(|q| q * q).zip(vecs).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut vectors = DMatrix::zeros(model.dim(), pairs.len());
    let mut max_residual: f64 = 0.0;
    let mut packet = EigenspacePacket { threshold, t, eigenvalues: vec![], vectors: DMatrix::zeros(0, 0), max_residual: 0.0, op };
    for (c, (mu, v)) in pairs.iter_mut().enumerate() {
        fix_sign(v);
        let r: f64 = packet.apply_square(v).iter().zip(v.iter()).map(|(a, b)| (a - *mu * b).powi(2)).sum::<f64>().sqrt();
        max_residual = max_residual.max(r);
        vectors.set_column(c, &DVector::from_column_slice(v));
    }
    packet.eigenvalues = pairs.iter().map(|p| p.0).collect();
    packet.vectors = vectors;
    packet.max_residual = max_residual;
    packet
}

#[derive(Clone, Debug, Serialize)]
pub enum Witness {
    Node { index: usize, x: f64, value: f64 },
    Eigenvector { index: usize, eigenvalue: f64, defect: f64 },
    Trial { index: usize, dim: usize, rayleigh_max: f64, eigenvalues_below: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub condition: u8,
    pub passed: bool,
    pub value: f64,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TameReport {
    pub model: String,
    pub t: f64,
    pub conditions: Vec<ConditionReport>,
}

impl TameReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, k: u8) -> &ConditionReport {
        &self.conditions[k as usize - 1]
    }
}

const RESIDUAL_TOL: f64 = 1e-8;

/// Conditions (1)–(6) at `t = T`; (4) and (6) from the discrete eigendecomposition.
pub fn check_tame(model: &TameTupleModel) -> TameReport {
    check_tame_at(model, model.t_min, 8, 0x7a3e)
}

fn mat_apply_square(packet: &EigenspacePacket, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        out.set_column(c, &DVector::from_vec(packet.apply_square(m.column(c).as_slice())));
    }
    out
}

pub fn check_tame_at(model: &TameTupleModel, t: f64, trials: usize, seed: u64) -> TameReport {
    let lb = model.spec.lambda_bar;
    let mut out = Vec::with_capacity(6);
    out.push(ConditionReport { condition: 1, passed: model.c_norm.is_finite(), value: model.c_norm, witness: None });
    let k = model.anticommutator_norm;
    out.push(ConditionReport { condition: 2, passed: k.is_finite(), value: k, witness: None });

    let n = model.node_count();
    let outside: Vec<usize> = (0..n).filter(|&i| !model.spec.in_f(model.x[i])).collect();
    let weakest = outside.iter().copied().min_by(|&a, &b| model.f[a].abs().total_cmp(&model.f[b].abs()));
    let min_f = weakest.map_or(f64::INFINITY, |i| model.f[i].abs());
    let passed3 = min_f > 1e-12;
    out.push(ConditionReport {
        condition: 3,
        passed: passed3,
        value: model.h_inv_norm,
        witness: (!passed3).then(|| {
            let i = weakest.unwrap();
            Witness::Node { index: i, x: model.x[i], value: model.f[i] }
        }),
    });

    let packet = eigenpacket(model, t, lb);
    let scale = packet.op.norm_bound().powi(2).max(1.0);
    let mut worst4: Option<Witness> = None;
    let mut value4: f64 = 0.0;
    for c in 0..packet.dim() {
        let v = packet.vectors.column(c);
        let mu = packet.eigenvalues[c];
        let defect = packet.apply_square(v.as_slice()).iter().zip(v.iter()).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt() / scale;
        if defect > value4 {
            value4 = defect;
            if defect > RESIDUAL_TOL {
                worst4 = Some(Witness::Eigenvector { index: c, eigenvalue: mu, defect });
            }
        }
    }
    // the complement starts at the first eigenvalue above λ̄; quadratic-form orthogonality
    let complement_min = packet.next_above();
    let cross = if packet.dim() > 0 {
        let p = &packet.vectors;
        let qp = mat_apply_square(&packet, p);
        (&qp - p * (p.transpose() * &qp)).norm() / scale
    } else {
        0.0
    };
    value4 = value4.max(cross);
    out.push(ConditionReport {
        condition: 4,
        passed: worst4.is_none() && complement_min >= lb && cross <= RESIDUAL_TOL,
        value: value4,
        witness: worst4,
    });

    let dx = model.spec.dx();
    let mut worst5: Option<(usize, f64)> = None;
    for &i in &outside {
        let fp = if i + 1 < n { (model.f[i + 1] - model.f[i]) / dx } else { 0.0 };
        let m = t * t * model.f[i] * model.f[i] - t * fp.abs();
        if worst5.is_none_or(|(_, w)| m < w) {
            worst5 = Some((i, m));
        }
    }
    let (passed5, value5, witness5) = match worst5 {
        Some((i, m)) if m < lb => (false, m, Some(Witness::Node { index: i, x: model.x[i], value: m })),
        Some((_, m)) => (true, m, None),
        None => (true, f64::INFINITY, None),
    };
    out.push(ConditionReport { condition: 5, passed: passed5, value: value5, witness: witness5 });

    out.push(check_minmax(model, &packet, trials, seed));
    TameReport { model: model.spec.name.clone(), t, conditions: out }
}

/// Max Rayleigh quotient of `(D + th)²` on `span(trial)` and the number of eigenvalues up to it.
pub fn minmax_certificate(packet: &EigenspacePacket, trial: &DMatrix<f64>) -> Result<(f64, usize)> {
    let basis = orthonormal_basis(trial)?;
    let form = basis.transpose() * mat_apply_square(packet, &basis);
    let form = (&form + form.transpose()) * 0.5;
    let top = SymmetricEigen::new(form).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((top, packet.count_le(top * (1.0 + 1e-9) + 1e-12)))
}

fn check_minmax(model: &TameTupleModel, packet: &EigenspacePacket, trials: usize, seed: u64) -> ConditionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = model.rho(&model.spec.cutoff);
    let n2 = model.dim();
    let mut worst_margin = f64::INFINITY;
    for k in 0..trials {
        // localized trials: ρ·(low eigenvectors) plus a small random admixture
        let dim = 1 + k % packet.dim().max(1);
        let eps = 1e-3 * (k as f64 + 1.0);
        let trial = DMatrix::from_fn(n2, dim, |i, c| {
            let base = if c < packet.dim() { rho[i] * packet.vectors[(i, c)] } else { 0.0 };
            base + eps * rng.random_range(-1.0..1.0)
        });
        let Ok((top, below)) = minmax_certificate(packet, &trial) else { continue };
        if top >= model.spec.lambda_bar {
            continue;
        }
        let margin = below as f64 - dim as f64;
        if below < dim {
            return ConditionReport {
                condition: 6,
                passed: false,
                value: margin,
                witness: Some(Witness::Trial { index: k, dim, rayleigh_max: top, eigenvalues_below: below }),
            };
        }
        worst_margin = worst_margin.min(margin);
    }
    ConditionReport { condition: 6, passed: true, value: worst_margin, witness: None }
}

/// `A(t)² = (λ̄ + 2t‖{D,h}‖)‖h⁻¹‖²/t²`, `B(t) = max{0, 1 − A(t)}`.
pub fn ab_bounds(lambda_bar: f64, anticommutator_norm: f64, h_inv_norm: f64, t: f64) -> (f64, f64) {
    let a = ((lambda_bar + 2.0 * t * anticommutator_norm) * h_inv_norm * h_inv_norm / (t * t)).sqrt();
    (a, (1.0 - a).max(0.0))
}

pub fn localization_bounds(model: &TameTupleModel, t: f64) -> Result<(f64, f64)> {
    if t < model.t_min {
        return Err(SpinlabError::Precondition(format!("t = {t} below T = {}", model.t_min)));
    }
    Ok(ab_bounds(model.spec.lambda_bar, model.anticommutator_norm, model.h_inv_norm, t))
}

#[derive(Clone, Debug, Serialize)]
pub struct VectorBounds {
    pub eigenvalue: f64,
    pub outside_norm: f64,
    pub rho_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationReport {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub vectors: Vec<VectorBounds>,
    /// `min A − ‖φ‖_{M∖F}` over the packet.
    pub slack_a: f64,
    /// `min ‖ρφ‖ − B` over the packet.
    pub slack_b: f64,
    pub passed: bool,
}

pub fn verify_localization(model: &TameTupleModel, t: f64, lambda: f64) -> Result<LocalizationReport> {
    if lambda > model.spec.lambda_bar {
        return Err(SpinlabError::Precondition(format!("lambda {lambda} above lambda_bar")));
    }
    let packet = eigenpacket(model, t, lambda);
    verify_localization_packet(model, &packet)
}

pub fn verify_localization_packet(model: &TameTupleModel, packet: &EigenspacePacket) -> Result<LocalizationReport> {
    let (a, b) = localization_bounds(model, packet.t)?;
    let rho = model.rho(&model.spec.cutoff);
    let mut vectors = Vec::with_capacity(packet.dim());
    let (mut slack_a, mut slack_b) = (f64::INFINITY, f64::INFINITY);
    let mut passed = true;
    for c in 0..packet.dim() {
        let v = packet.vectors.column(c);
        let norm = v.norm();
        let outside = model.outside_norm2(v.as_slice()).sqrt();
        let rho_norm = v.component_mul(&rho).norm();
        slack_a = slack_a.min(a * norm - outside);
        slack_b = slack_b.min(rho_norm - b * norm);
        passed &= outside <= a * norm + 1e-12 && b * norm <= rho_norm + 1e-12 && rho_norm <= norm + 1e-12;
        vectors.push(VectorBounds { eigenvalue: packet.eigenvalues[c], outside_norm: outside / norm, rho_norm: rho_norm / norm });
    }
    Ok(LocalizationReport { t: packet.t, a, b, vectors, slack_a, slack_b, passed })
}

fn orthonormal_basis(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = m.ncols();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let qr = m.clone().qr();
    let rr = qr.r();
    if (0..r).any(|i| rr[(i, i)].abs() <= 1e-12 * scale) {
        return Err(SpinlabError::Precondition("basis is rank deficient".into()));
    }
    Ok(qr.q())
}

#[derive(Clone, Debug, Serialize)]
pub struct GrassmannDistance {
    /// `d_H`; the two bounds coincide up to rounding.
    pub value: f64,
    /// `(Σ 2(1 − cos θ_i))^{1/2}` from the principal angles.
    pub lower: f64,
    /// `(Σ ‖e_i − e′_i‖²)^{1/2}` for the explicit best-matching bases.
    pub upper: f64,
    pub principal_angles: Vec<f64>,
}

/// `d_H(span E1, span E2)`. For a fixed orthonormal `e`, the best `e′ = E2·R` solves an
/// orthogonal Procrustes problem whose optimum `2r − 2Σ cos θ_i` does not depend on `e`,
/// so the infimum is attained and symmetric.
pub fn grassmann_distance(e1: &DMatrix<f64>, e2: &DMatrix<f64>) -> Result<GrassmannDistance> {
    if e1.nrows() != e2.nrows() {
        return Err(SpinlabError::SpaceMismatch);
    }
    if e1.ncols() != e2.ncols() {
        return Err(SpinlabError::DimensionMismatch { expected: e1.ncols(), got: e2.ncols() });
    }
    if e1.ncols() == 0 {
        return Ok(GrassmannDistance { value: 0.0, lower: 0.0, upper: 0.0, principal_angles: vec![] });
    }
    let q1 = orthonormal_basis(e1)?;
    let q2 = orthonormal_basis(e2)?;
    let m = q1.transpose() * &q2;
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let cosines: Vec<f64> = svd.singular_values.iter().map(|s| s.clamp(0.0, 1.0)).collect();
    let r = vt.transpose() * u.transpose();
    let upper = (&q1 - &q2 * r).norm();
    let lower = cosines.iter().map(|c| 2.0 * (1.0 - c)).sum::<f64>().max(0.0).sqrt();
    let mut angles: Vec<f64> = cosines.iter().map(|c| c.acos()).collect();
    angles.sort_by(f64::total_cmp);
    Ok(GrassmannDistance { value: upper, lower, upper, principal_angles: angles })
}

/// Bound on `d_H(E, E_{≤λ}(A))` from restricted eigenvalues.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceCertificate {
    pub delta: f64,
    pub gap: f64,
    /// `2δ/(λ − max Λ)`, the bound on `‖f(v_r)‖²` at each induction step.
    pub per_step: f64,
    /// `(2 Σ |μ_k − Λ_k| / (λ − max Λ))^{1/2}`.
    pub d_bound: f64,
}

/// Certificate for `d_H(E, E_{≤λ}(A))` given the `r` eigenvalues `Λ` of `A` below `λ` and the
/// restricted eigenvalues `μ` of the form on `E`. With `s = Σ sin²θ_i`, orthogonality of the
/// form gives `Σμ ≥ ΣΛ + (λ − max Λ)s`, and `d_H² = Σ 2(1 − cos θ_i) ≤ 2s`.
pub fn eigenvalue_to_distance(lambda: f64, reference: &[f64], perturbed: &[f64]) -> Result<DistanceCertificate> {
    if reference.len() != perturbed.len() {
        return Err(SpinlabError::DimensionMismatch { expected: reference.len(), got: perturbed.len() });
    }
    let mut a = reference.to_vec();
    let mut b = perturbed.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let delta = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let sum: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    let max_lambda = a.last().copied().unwrap_or(0.0);
    let gap = lambda - max_lambda;
    if !(gap > 2.0 * delta) {
        return Err(SpinlabError::GapViolated { gap, two_delta: 2.0 * delta });
    }
    Ok(DistanceCertificate { delta, gap, per_step: 2.0 * delta / gap, d_bound: (2.0 * sum / gap).sqrt() })
}

/// Identification of `U ⊂ M` with `U′ ⊂ M′` by equal node coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Glue {
    pub u: (f64, f64),
}

/// For each node of the first model inside `U`, the matching node of the second.
fn node_map(m1: &TameTupleModel, m2: &TameTupleModel, glue: &Glue) -> Result<Vec<Option<usize>>> {
    let dx = m1.spec.dx();
    if (dx - m2.spec.dx()).abs() > 1e-12 * dx {
        return Err(SpinlabError::Precondition("glued models need equal spacing".into()));
    }
    let offset = ((m1.x[0] - m2.x[0]) / dx).round() as isize;
    let n1 = m1.node_count();
    let mut map = vec![None; n1];
    for (i, slot) in map.iter_mut().enumerate() {
        let x = m1.x[i];
        if x < glue.u.0 || x > glue.u.1 {
            continue;
        }
        let j = i as isize + offset;
        if j < 0 || j as usize >= m2.node_count() {
            return Err(SpinlabError::Precondition(format!("U leaves the second model at x = {x}")));
        }
        let j = j as usize;
        if (m2.x[j] - x).abs() > 1e-9 * dx {
            return Err(SpinlabError::Precondition("node coordinates do not align on U".into()));
        }
        // equal weights keep D equal on U, including at box ends
        if m1.weights[i] != m2.weights[j] {
            return Err(SpinlabError::Precondition(format!("U reaches a box end at x = {x}")));
        }
        if (m1.f[i] - m2.f[j]).abs() > 1e-12 * m1.f[i].abs().max(1.0) {
            return Err(SpinlabError::Precondition(format!("h differs on U at x = {x}")));
        }
        *slot = Some(j);
    }
    Ok(map)
}

fn transport(m2: &TameTupleModel, map: &[Option<usize>], rho: &DVector<f64>, v: &[f64], x1: &[f64]) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(m2.dim());
    for (k, (r, a)) in rho.iter().zip(v).enumerate() {
        let a = r * a;
        if a == 0.0 {
            continue;
        }
        match map[k / 2] {
            Some(j) => out[2 * j + k % 2] = a,
            None => return Err(SpinlabError::Precondition(format!("supp ρ leaves U at x = {}", x1[k / 2]))),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct PhiReport {
    pub t: f64,
    pub lambda: f64,
    pub dim_source: usize,
    pub dim_target: usize,
    pub singular_values: Vec<f64>,
    /// `d_{L²}(ρ·E_{≤λ}, E′_{≤λ})` when the dimensions agree.
    pub distance: Option<f64>,
    pub is_isomorphism: bool,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

fn collision(packet: &EigenspacePacket, lambda: f64, margin: f64) -> Result<()> {
    if packet.count_between(lambda - margin, lambda + margin) > 0 {
        let near = match packet.eigenvalues.last() {
            Some(&m) if lambda - m < margin && packet.threshold == lambda => m,
            _ => packet.next_above(),
        };
        return Err(SpinlabError::SpectralCollision { lambda, eigenvalue: near, margin });
    }
    Ok(())
}

/// `Φ_{λ,t}` as the matrix `⟨ψ′_k, ρφ_l⟩` between eigenpacket bases.
pub fn phi_from_packets(
    m1: &TameTupleModel,
    p1: &EigenspacePacket,
    m2: &TameTupleModel,
    p2: &EigenspacePacket,
    glue: &Glue,
    cutoff: &Cutoff,
) -> Result<PhiReport> {
    let lambda = p1.threshold;
    if lambda >= m1.spec.lambda_bar.min(m2.spec.lambda_bar) {
        return Err(SpinlabError::Precondition("lambda must lie below both lambda_bar".into()));
    }
    collision(p1, lambda, 1e-6 * m1.spec.lambda_bar)?;
    collision(p2, lambda, 1e-6 * m2.spec.lambda_bar)?;
    let map = node_map(m1, m2, glue)?;
    let rho = m1.rho(cutoff);
    let mut moved = DMatrix::zeros(m2.dim(), p1.dim());
    for c in 0..p1.dim() {
        moved.set_column(c, &transport(m2, &map, &rho, p1.vectors.column(c).as_slice(), &m1.x)?);
    }
    let matrix = p2.vectors.transpose() * &moved;
    let mut sv: Vec<f64> = if matrix.nrows() > 0 && matrix.ncols() > 0 {
        matrix.clone().svd(false, false).singular_values.iter().copied().collect()
    } else {
        vec![]
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    let square = p1.dim() == p2.dim();
    let distance = if square && p1.dim() > 0 { Some(grassmann_distance(&moved, &p2.vectors)?.value) } else { None };
    let is_isomorphism = square && sv.len() == p1.dim() && sv.last().is_none_or(|&s| s > 1e-8);
    Ok(PhiReport {
        t: p1.t,
        lambda,
        dim_source: p1.dim(),
        dim_target: p2.dim(),
        singular_values: sv,
        distance,
        is_isomorphism,
        matrix,
    })
}

pub fn phi_map(m1: &TameTupleModel, m2: &TameTupleModel, glue: &Glue, cutoff: &Cutoff, lambda: f64, t: f64) -> Result<PhiReport> {
    if t < m1.t_min.max(m2.t_min) {
        return Err(SpinlabError::Precondition(format!("t = {t} below max(T, T')")));
    }
    let p1 = eigenpacket(m1, t, lambda);
    let p2 = eigenpacket(m2, t, lambda);
    phi_from_packets(m1, &p1, m2, &p2, glue, cutoff)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepStep {
    pub t: f64,
    pub localization: [LocalizationReport; 2],
    pub phi: PhiReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub steps: Vec<SweepStep>,
    /// First swept `t` with `Φ` an isomorphism, `σ_min ≥ 1 − δ` and distance below `ε`.
    pub t0: Option<f64>,
}

pub const DOUBLING_CAP: u32 = 10;

/// Doubling search from `max{T, T′}` for the first `t` where `Φ_{λ,t}` is a `δ`-near isometry
/// and `d(ρ·E, E′) < ε`, checking both localization bounds at every step.
pub fn t0_search(
    m1: &TameTupleModel,
    m2: &TameTupleModel,
    glue: &Glue,
    cutoff: &Cutoff,
    lambda: f64,
    delta: f64,
    eps: f64,
) -> Result<SweepReport> {
    let start = m1.t_min.max(m2.t_min);
    let mut steps = Vec::new();
    for k in 0..=DOUBLING_CAP {
        let t = start * f64::from(1u32 << k);
        let (p1, p2) = rayon::join(|| eigenpacket(m1, t, m1.spec.lambda_bar), || eigenpacket(m2, t, m2.spec.lambda_bar));
        let localization = [verify_localization_packet(m1, &p1)?, verify_localization_packet(m2, &p2)?];
        let phi = phi_from_packets(m1, &cut(&p1, lambda), m2, &cut(&p2, lambda), glue, cutoff)?;
        let good = phi.is_isomorphism
            && phi.singular_values.iter().all(|&s| s >= 1.0 - delta && s <= 1.0 + delta)
            && phi.distance.is_some_and(|d| d < eps);
        steps.push(SweepStep { t, localization, phi });
        if good {
            return Ok(SweepReport { steps, t0: Some(t) });
        }
    }
    Err(SpinlabError::Convergence(format!("no T0 up to 2^{DOUBLING_CAP}·{start}")))
}

/// Restricts a packet to eigenvalues up to `lambda`.
pub fn cut(p: &EigenspacePacket, lambda: f64) -> EigenspacePacket {
    let r = p.eigenvalues.iter().take_while(|&&m| m <= lambda).count();
    EigenspacePacket {
        threshold: lambda,
        t: p.t,
        eigenvalues: p.eigenvalues[..r].to_vec(),
        vectors: p.vectors.columns(0, r).into_owned(),
        max_residual: p.max_residual,
        op: p.op.clone(),
    }
}

/// `‖Φ₃₁ − Φ₃₂Φ₂₁‖` for three models glued pairwise by coordinates on `glue`.
pub fn phi_coherence(models: [&TameTupleModel; 3], glue: &Glue, cutoff: &Cutoff, lambda: f64, t: f64) -> Result<f64> {
    let p: Vec<EigenspacePacket> = models.iter().map(|m| eigenpacket(m, t, lambda)).collect();
    let f21 = phi_from_packets(models[0], &p[0], models[1], &p[1], glue, cutoff)?;
    let f32 = phi_from_packets(models[1], &p[1], models[2], &p[2], glue, cutoff)?;
    let f31 = phi_from_packets(models[0], &p[0], models[2], &p[2], glue, cutoff)?;
    if f21.matrix.nrows() != f32.matrix.ncols() {
        return Err(SpinlabError::DimensionMismatch { expected: f21.matrix.nrows(), got: f32.matrix.ncols() });
    }
    Ok((&f31.matrix - &f32.matrix * &f21.matrix).norm())
}

/// One of the three reference models together with two partners that differ from it only
/// outside `glue.u`.
#[derive(Clone, Debug)]
pub struct ModelFamily {
    pub name: &'static str,
    pub base: ModelSpec,
    pub partners: [ModelSpec; 2],
    pub glue: Glue,
    pub lambda: f64,
}

fn spec(name: &str, half_width: f64, dx: f64, potential: Potential, f_set: Vec<(f64, f64)>, cutoff: Cutoff) -> ModelSpec {
    ModelSpec {
        name: name.into(),
        half_width,
        nodes: (2.0 * half_width / dx).round() as usize + 1,
        potential,
        f_set,
        lambda_bar: 4.0,
        t_min: None,
        cutoff,
    }
}

/// Single well `f = x`, double well `f = x² − 1`, triple well `f = x(x² − 4)/4`.
pub fn reference_models() -> Vec<ModelFamily> {
    let cut = Cutoff { inner: 0.1, outer: 0.35 };
    let single = Potential::polynomial(vec![0.0, 1.0]);
    let double = Potential::polynomial(vec![-1.0, 0.0, 1.0]);
    let triple = Potential::polynomial(vec![0.0, -1.0, 0.0, 0.25]);
    let f1 = vec![(-1.0, 1.0)];
    let f2 = vec![(-1.5, -0.5), (0.5, 1.5)];
    let f3 = vec![(-2.5, -1.5), (-0.5, 0.5), (1.5, 2.5)];
    let dx = 0.0025;
    vec![
        ModelFamily {
            name: "single",
            base: spec("single", 4.0, dx, single.clone().with_tail(2.0, 1.0), f1.clone(), cut),
            partners: [
                spec("single'", 5.0, dx, single.clone().with_tail(1.5, 3.0), f1.clone(), cut),
                spec("single''", 4.5, dx, single.with_tail(1.5, 0.5), f1, cut),
            ],
            glue: Glue { u: (-1.5, 1.5) },
            lambda: 1.0,
        },
        ModelFamily {
            name: "double",
            base: spec("double", 4.0, dx, double.clone().with_tail(2.0, 1.0), f2.clone(), cut),
            partners: [
                spec("double'", 4.5, dx, double.clone().with_tail(1.9, 0.5), f2.clone(), cut),
                spec("double''", 3.5, dx, double.with_tail(1.9, 2.0), f2, cut),
            ],
            glue: Glue { u: (-1.9, 1.9) },
            lambda: 1.0,
        },
        ModelFamily {
            name: "triple",
            base: spec("triple", 4.5, dx, triple.clone().with_tail(3.0, 1.0), f3.clone(), cut),
            partners: [
                spec("triple'", 5.0, dx, triple.clone().with_tail(2.9, 0.5), f3.clone(), cut),
                spec("triple''", 4.0, dx, triple.with_tail(2.9, 2.0), f3, cut),
            ],
            glue: Glue { u: (-2.9, 2.9) },
            lambda: 1.0,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ab_example() {
        let (a, b) = ab_bounds(1.0, 1.0, 1.0, 10.0);
        assert!((a * a - 0.21).abs() < 1e-15);
        assert!((a - 0.4583).abs() < 1e-4 && (b - 0.5417).abs() < 1e-4);
        assert_eq!(ab_bounds(1.0, 1.0, 0.0, 3.0), (0.0, 1.0));
    }

    #[test]
    fn tail_continues_monotonically() {
        let p = Potential::polynomial(vec![-1.0, 0.0, 1.0]).with_tail(2.0, 0.5);
        assert_eq!(p.eval(2.0), 3.0);
        assert_eq!(p.eval(3.0), 3.5);
        assert_eq!(p.eval(-3.0), 3.5);
        assert_eq!(p.eval(1.0), 0.0);
    }

    #[test]
    fn dirac_is_symmetric() {
        let m = TameTupleModel::assemble(reference_models()[0].base.clone()).unwrap();
        let d = m.dirac();
        assert_eq!(d, d.transpose());
    }
}
