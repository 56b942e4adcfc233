//! Models of finite-dimensional approximations over a point: `Pin(2)`-equivariant data
//! `(E, V_ℍ ⊕ V_ℝ, W_ℍ ⊕ W_ℝ, i, D, F)`, axiom checks, the rescaled map `𝓕′`, the index
//! integrand in `ℚ[ω, x]/(ω², x^{m+1})` and a simplicial mapping-degree engine.
//!
//! Quaternionic spaces carry the right `ℍ`-action. `Pin(2) = U(1) ∪ jU(1)` acts on them by
//! right multiplication and on `E`, `V_ℝ`, `W_ℝ` through `Pin(2) → {±1}`.

use crate::error::{Result, SpinlabError};
use crate::oscillator::smoothstep5;
use nalgebra::{DMatrix, DVector, Quaternion};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub type Quat = Quaternion<f64>;

fn quat(c: [f64; 4]) -> Quat {
    Quat::new(c[0], c[1], c[2], c[3])
}

const QI: Quat = Quaternion { coords: nalgebra::Vector4::new(1.0, 0.0, 0.0, 0.0) };

/// How `j` acts on `W_ℝ`; `Trivial` exists to exercise the equivariance checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealAction {
    #[default]
    Sign,
    Trivial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `F = D − Δ`.
    Linear,
    /// `F = D + Q − Δ` with `Q(φ, ρ) = (Σ ρ_k C_k φ i, −κ i(q_map μ(φ)))` and `μ(φ) = Σ φ_l i φ̄_l`.
    SwQuadratic {
        kappa: f64,
        /// One `dim W_ℍ × dim V_ℍ` quaternion matrix per coordinate of `V_ℝ`.
        clifford: Vec<Vec<Vec<[f64; 4]>>>,
        /// `rank E × 3`, applied to `μ(φ) ∈ Im ℍ ≅ ℝ³`.
        q_map: Vec<Vec<f64>>,
    },
    /// `F = D − Δ + (Σ c_k |φ|^{2k+2}) D_ℍ φ`.
    CustomPolynomial { coefficients: Vec<f64> },
}

/// Over a point. Matrices are row-major; quaternions are `[w, i, j, k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdaModel {
    pub name: String,
    pub e_rank: usize,
    /// Orientation of `E` relative to its coordinate orientation.
    pub orientation: Option<i8>,
    pub vh: usize,
    pub vr: usize,
    pub wh: usize,
    pub wr: usize,
    /// `wr × e_rank`.
    pub i: Vec<Vec<f64>>,
    /// `wr × vr`.
    pub d_real: Vec<Vec<f64>>,
    /// `wh × vh`.
    pub d_quat: Vec<Vec<[f64; 4]>>,
    /// `Δ(e) = delta · i(e)`.
    pub delta: f64,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub w_real_action: RealAction,
}

fn shape_err(what: &str) -> SpinlabError {
    SpinlabError::Input(format!("{what} has the wrong shape"))
}

fn check_shape<T>(m: &[Vec<T>], rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(shape_err(what));
    }
    Ok(())
}

fn real_matrix(m: &[Vec<f64>], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |r, c| m[r][c])
}

fn quat_matvec(m: &[Vec<[f64; 4]>], v: &[Quat]) -> Vec<Quat> {
    m.iter().map(|row| row.iter().zip(v).fold(Quat::identity() * 0.0, |acc, (a, b)| acc + quat(*a) * b)).collect()
}

fn qnorm2(v: &[Quat]) -> f64 {
    v.iter().map(|q| q.norm_squared()).sum()
}

/// `μ(φ) = Σ φ_l i φ̄_l`, read in `ℝ³` through `(a, b, c) ↦ ci + bj − ak`.
pub fn moment(v: &[Quat]) -> [f64; 3] {
    let s = v.iter().fold(Quat::identity() * 0.0, |acc, q| acc + q * QI * q.conjugate());
    [-s.k, s.j, s.i]
}

/// `Pin(2) → {±1}`.
pub fn pin_sign(g: &Quat) -> f64 {
    if g.j.abs() + g.k.abs() < 1e-12 {
        1.0
    } else {
        -1.0
    }
}

/// `e^{2πik/8}` and `j e^{2πik/8}`.
pub fn pin2_samples() -> Vec<Quat> {
    let u: Vec<Quat> = (0..8)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / 8.0;
            Quat::new(th.cos(), th.sin(), 0.0, 0.0)
        })
        .collect();
    let j = Quat::new(0.0, 0.0, 1.0, 0.0);
    u.iter().copied().chain(u.iter().map(|g| j * g)).collect()
}

impl FdaModel {
    pub fn validate(&self) -> Result<()> {
        check_shape(&self.i, self.wr, self.e_rank, "i")?;
        check_shape(&self.d_real, self.wr, self.vr, "d_real")?;
        check_shape(&self.d_quat, self.wh, self.vh, "d_quat")?;
        if let Some(o) = self.orientation {
            if o.abs() != 1 {
                return Err(SpinlabError::Input("orientation must be ±1".into()));
            }
        }
        match &self.nonlinearity {
            Nonlinearity::SwQuadratic { clifford, q_map, .. } => {
                if clifford.len() != self.vr {
                    return Err(shape_err("clifford"));
                }
                for c in clifford {
                    check_shape(c, self.wh, self.vh, "clifford")?;
                }
                check_shape(q_map, self.e_rank, 3, "q_map")?;
            }
            Nonlinearity::Linear | Nonlinearity::CustomPolynomial { .. } => {}
        }
        Ok(())
    }

    fn w_sign(&self, g: &Quat) -> f64 {
        match self.w_real_action {
            RealAction::Sign => pin_sign(g),
            RealAction::Trivial => 1.0,
        }
    }

    pub fn i_matrix(&self) -> DMatrix<f64> {
        real_matrix(&self.i, self.wr, self.e_rank)
    }

    pub fn d_real_matrix(&self) -> DMatrix<f64> {
        real_matrix(&self.d_real, self.wr, self.vr)
    }

    /// `F(e, v_ℍ, v_ℝ) = (W_ℍ part, W_ℝ part)`.
    pub fn eval(&self, e: &[f64], vh: &[Quat], vr: &[f64]) -> (Vec<Quat>, Vec<f64>) {
        let dh = quat_matvec(&self.d_quat, vh);
        let mut wh = dh.clone();
        let mut wr: Vec<f64> = (0..self.wr)
            .map(|r| {
                (0..self.vr).map(|c| self.d_real[r][c] * vr[c]).sum::<f64>()
                    - self.delta * (0..self.e_rank).map(|c| self.i[r][c] * e[c]).sum::<f64>()
            })
            .collect();
        match &self.nonlinearity {
            Nonlinearity::Linear => {}
            Nonlinearity::SwQuadratic { kappa, clifford, q_map } => {
                for (k, c) in clifford.iter().enumerate() {
                    for (w, cv) in wh.iter_mut().zip(quat_matvec(c, vh)) {
                        *w += cv * QI * vr[k];
                    }
                }
                let mu = moment(vh);
                let emu: Vec<f64> = q_map.iter().map(|row| row.iter().zip(&mu).map(|(a, b)| a * b).sum()).collect();
                for (r, w) in wr.iter_mut().enumerate() {
                    *w -= kappa * (0..self.e_rank).map(|c| self.i[r][c] * emu[c]).sum::<f64>();
                }
            }
            Nonlinearity::CustomPolynomial { coefficients } => {
                let r2 = qnorm2(vh);
                let f: f64 = coefficients.iter().enumerate().map(|(k, c)| c * r2.powi(k as i32 + 1)).sum();
                for (w, d) in wh.iter_mut().zip(&dh) {
                    *w += d * f;
                }
            }
        }
        (wh, wr)
    }

    fn eval_norm(&self, e: &[f64], vh: &[Quat], vr: &[f64]) -> f64 {
        let (a, b) = self.eval(e, vh, vr);
        (qnorm2(&a) + b.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    /// `𝓕′(e, u, t, v_ℝ) = F(e, ((t + 1)/2) u, v_ℝ)` for `u ∈ S(V_ℍ)`, `t ∈ [−1, 1]`.
    pub fn reparametrized(&self, e: &[f64], u: &[Quat], t: f64, vr: &[f64]) -> (Vec<Quat>, Vec<f64>) {
        let r = (t + 1.0) / 2.0;
        let vh: Vec<Quat> = u.iter().map(|q| q * r).collect();
        self.eval(e, &vh, vr)
    }

    /// `𝓕′` precomposed with the length adjustment `ℝ⁺ × V_ℝ → B(ℝ⁺) × B(V_ℝ)`.
    pub fn normalized(&self, e: &[f64], u: &[Quat], t: f64, vr: &[f64]) -> (Vec<Quat>, Vec<f64>) {
        let n = vr.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vr: Vec<f64> = if n > 0.0 { vr.iter().map(|x| x * length_adjust(n) / n).collect() } else { vr.to_vec() };
        self.reparametrized(e, u, t.signum() * length_adjust(t.abs()), &vr)
    }

    /// Direct sum with the identity on `ℝ^extra ⊂ V_ℝ, W_ℝ`.
    pub fn stabilize(&self, extra: usize) -> FdaModel {
        let mut m = self.clone();
        m.name = format!("{}+id{extra}", self.name);
        let (vr, wr) = (self.vr + extra, self.wr + extra);
        m.i = (0..wr).map(|r| (0..self.e_rank).map(|c| if r < self.wr { self.i[r][c] } else { 0.0 }).collect()).collect();
        m.d_real = (0..wr)
            .map(|r| {
                (0..vr)
                    .map(|c| match (r < self.wr, c < self.vr) {
                        (true, true) => self.d_real[r][c],
                        (false, false) => f64::from(u8::from(r - self.wr == c - self.vr)),
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        if let Nonlinearity::SwQuadratic { clifford, .. } = &mut m.nonlinearity {
            clifford.extend((0..extra).map(|_| vec![vec![[0.0; 4]; self.vh]; self.wh]));
        }
        m.vr = vr;
        m.wr = wr;
        m
    }
}

/// `ρ(s) = s` near 0, `1` for `s ≥ 1`, values in `[0, 1]`.
pub fn length_adjust(s: f64) -> f64 {
    let w = smoothstep5((s - 0.25) / 0.75);
    s.min(1.0) * (1.0 - w) + w
}

/// SW-shaped toy with `E = ℝ³`, `W_ℝ = E ⊕ V_ℝ`, `D_ℍ = [1 0 …]` and a fixed Clifford coupling.
pub fn sw_toy(vh: usize, vr: usize, wh: usize) -> FdaModel {
    let wr = 3 + vr;
    let coupling = [[0.3, 0.0, 0.2, 0.0], [0.0, 0.1, 0.0, 0.25], [0.15, -0.1, 0.05, 0.0]];
    FdaModel {
        name: format!("sw_toy({vh},{vr},{wh},{wr})"),
        e_rank: 3,
        orientation: Some(1),
        vh,
        vr,
        wh,
        wr,
        i: (0..wr).map(|r| (0..3).map(|c| f64::from(u8::from(r == c))).collect()).collect(),
        d_real: (0..wr).map(|r| (0..vr).map(|c| f64::from(u8::from(r == c + 3))).collect()).collect(),
        d_quat: (0..wh).map(|r| (0..vh).map(|c| if r == c { [1.0, 0.0, 0.0, 0.0] } else { [0.0; 4] }).collect()).collect(),
        delta: 0.5,
        nonlinearity: Nonlinearity::SwQuadratic {
            kappa: 1.0,
            clifford: (0..vr).map(|k| (0..wh).map(|r| (0..vh).map(|c| coupling[(k + r + c) % 3]).collect()).collect()).collect(),
            q_map: (0..3).map(|r| (0..3).map(|c| f64::from(u8::from(r == c))).collect()).collect(),
        },
        w_real_action: RealAction::Sign,
    }
}

/// The same shape with `Q = 0`.
pub fn linear_toy(vh: usize, vr: usize, wh: usize) -> FdaModel {
    let mut m = sw_toy(vh, vr, wh);
    m.name = format!("linear_toy({vh},{vr},{wh},{})", m.wr);
    m.nonlinearity = Nonlinearity::Linear;
    m
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomCheck {
    pub axiom: usize,
    pub passed: bool,
    pub value: f64,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub model: String,
    pub samples: usize,
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn axiom(&self, k: usize) -> &AxiomCheck {
        &self.checks[k - 1]
    }
}

pub const EQUIVARIANCE_TOL: f64 = 1e-10;
pub const ISOMETRY_TOL: f64 = 1e-12;
const NONVANISHING_TOL: f64 = 1e-9;

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn unit_quats(rng: &mut ChaCha8Rng, n: usize) -> Vec<Quat> {
    let v = unit_vector(rng, 4 * n);
    v.chunks(4).map(|c| Quat::new(c[0], c[1], c[2], c[3])).collect()
}

fn ball_quats(rng: &mut ChaCha8Rng, n: usize) -> Vec<Quat> {
    let r: f64 = rng.random_range(0.0..1.0);
    unit_quats(rng, n).into_iter().map(|q| q * r).collect()
}

fn ball_real(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let r: f64 = rng.random_range(0.0..1.0);
    unit_vector(rng, n).into_iter().map(|x| x * r).collect()
}

struct Sample {
    e: Vec<f64>,
    vh: Vec<Quat>,
    vr: Vec<f64>,
}

fn check(axiom: usize, passed: bool, value: f64, witness: Option<String>) -> AxiomCheck {
    AxiomCheck { axiom, passed, value, witness }
}

fn worst(values: impl Iterator<Item = (f64, String)>) -> (f64, Option<String>) {
    values.fold((0.0, None), |(m, w), (v, s)| if v > m { (v, Some(s)) } else { (m, w) })
}

/// Axioms (1)–(9) at `samples` random points per check, `Pin(2)` sampled on the `U(1)` grid and `jU(1)`.
pub fn check_axioms(model: &FdaModel, samples: usize, seed: u64) -> AxiomReport {
    let mut checks = vec![check(1, true, 0.0, None), check(2, model.e_rank >= 1, model.e_rank as f64, None)];
    if let Err(e) = model.validate() {
        checks.push(check(3, false, 0.0, Some(e.to_string())));
        for k in 4..=9 {
            checks.push(check(k, false, f64::NAN, Some("not evaluated".into())));
        }
        return AxiomReport { model: model.name.clone(), samples, checks };
    }
    checks.push(check(3, true, 0.0, None));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group = pin2_samples();
    let pts: Vec<Sample> = (0..samples)
        .map(|_| Sample { e: unit_vector(&mut rng, model.e_rank), vh: ball_quats(&mut rng, model.vh), vr: ball_real(&mut rng, model.vr) })
        .collect();
    let act_h = |v: &[Quat], g: &Quat| -> Vec<Quat> { v.iter().map(|q| q * g).collect() };
    let scale = |v: &[f64], s: f64| -> Vec<f64> { v.iter().map(|x| x * s).collect() };
    let dist_h = |a: &[Quat], b: &[Quat]| a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>();
    let dist_r = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();

    // (4) invariant metrics
    let (r4, w4) = worst(pts.iter().flat_map(|p| {
        group.iter().map(move |g| {
            let moved = qnorm2(&act_h(&p.vh, g));
            ((moved - qnorm2(&p.vh)).abs(), format!("g = {g:?}"))
        })
    }));
    checks.push(check(4, r4 < EQUIVARIANCE_TOL, r4, w4));

    // (5) i injective and equivariant
    let im = model.i_matrix();
    let smin = if model.e_rank == 0 { 1.0 } else { im.clone().svd(false, false).singular_values.min() };
    let (r5, w5) = worst(pts.iter().flat_map(|p| {
        let im = &im;
        group.iter().map(move |g| {
            let e = DVector::from_vec(p.e.clone());
            let lhs = im * (&e * pin_sign(g));
            let rhs = im * &e * model.w_sign(g);
            ((lhs - rhs).norm(), format!("i(e·g) ≠ i(e)·g at g = {g:?}"))
        })
    }));
    let w5 = if smin <= ISOMETRY_TOL { Some(format!("i is not injective (σ_min = {smin:.3e})")) } else { w5 };
    checks.push(check(5, smin > ISOMETRY_TOL && r5 < EQUIVARIANCE_TOL, r5, w5));

    // (6) D_ℍ and D_ℝ equivariant
    let dr = model.d_real_matrix();
    let (r6, w6) = worst(pts.iter().flat_map(|p| {
        let dr = &dr;
        group.iter().map(move |g| {
            let a = quat_matvec(&model.d_quat, &act_h(&p.vh, g));
            let b = act_h(&quat_matvec(&model.d_quat, &p.vh), g);
            let v = DVector::from_vec(p.vr.clone());
            let c = dr * (&v * pin_sign(g)) - dr * &v * model.w_sign(g);
            ((dist_h(&a, &b) + c.norm_squared()).sqrt(), format!("D(v·g) ≠ D(v)·g at g = {g:?}"))
        })
    }));
    checks.push(check(6, r6 < EQUIVARIANCE_TOL, r6, w6));

    // (7) i + D_ℝ metric-preserving isomorphism
    let cert = split_vw(&im, &dr);
    checks.push(match cert {
        Ok(c) => check(7, c.isometric, c.max_deviation, c.witness.map(|(r, s)| format!("Gram entry ({r}, {s})"))),
        Err(e) => check(7, false, f64::NAN, Some(e.to_string())),
    });

    // (8) F smooth with bounded derivative and equivariant
    let mut r8: f64 = 0.0;
    let mut w8 = None;
    let mut lip: f64 = 0.0;
    for p in &pts {
        let (fh, fr) = model.eval(&p.e, &p.vh, &p.vr);
        for g in &group {
            let (gh, gr) = model.eval(&scale(&p.e, pin_sign(g)), &act_h(&p.vh, g), &scale(&p.vr, pin_sign(g)));
            let res = (dist_h(&gh, &act_h(&fh, g)) + dist_r(&gr, &scale(&fr, model.w_sign(g)))).sqrt();
            if res > r8 {
                r8 = res;
                w8 = Some(format!("F(g·x) ≠ F(x)·g at g = {g:?}, e = {:?}", p.e));
            }
        }
        let h = 1e-6;
        let dv = unit_quats(&mut rng, model.vh);
        let shifted: Vec<Quat> = p.vh.iter().zip(&dv).map(|(a, b)| a + b * h).collect();
        let (sh, sr) = model.eval(&p.e, &shifted, &p.vr);
        lip = lip.max((dist_h(&sh, &fh) + dist_r(&sr, &fr)).sqrt() / h);
    }
    let w8 = if lip.is_finite() { w8 } else { Some("unbounded difference quotient".into()) };
    checks.push(check(8, r8 < EQUIVARIANCE_TOL && lip.is_finite(), r8, w8));

    // (9) nonvanishing on S(E) × ∂B′(V) and on the v_ℍ = 0 slice
    let mut margin = f64::INFINITY;
    let mut w9 = None;
    let zero_h = vec![Quat::identity() * 0.0; model.vh];
    for k in 0..samples {
        let e = unit_vector(&mut rng, model.e_rank);
        let mut candidates = vec![
            ("|v_ℍ| = 1", unit_quats(&mut rng, model.vh), ball_real(&mut rng, model.vr)),
            ("v_ℍ = 0", zero_h.clone(), ball_real(&mut rng, model.vr)),
        ];
        if k == 0 {
            candidates.push(("v = 0", zero_h.clone(), vec![0.0; model.vr]));
        }
        if model.vr > 0 {
            candidates.push(("|v_ℝ| = 1", ball_quats(&mut rng, model.vh), unit_vector(&mut rng, model.vr)));
        }
        for (what, vh, vr) in candidates {
            let n = model.eval_norm(&e, &vh, &vr);
            if n < margin {
                margin = n;
                w9 = Some(format!("{what}, sample {k}"));
            }
        }
    }
    checks.push(check(9, margin > NONVANISHING_TOL, margin, w9));
    AxiomReport { model: model.name.clone(), samples, checks }
}

/// Largest residual of `𝓕′(ι·x) = 𝓕′(x)·j` over random points, with `ι(e, u, t, v) = (−e, uj, t, −v)`.
pub fn reparametrized_j_residual(model: &FdaModel, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = Quat::new(0.0, 0.0, 1.0, 0.0);
    let sgn = model.w_sign(&j);
    (0..points)
        .map(|_| {
            let e = unit_vector(&mut rng, model.e_rank);
            let u = unit_quats(&mut rng, model.vh);
            let t = rng.random_range(-1.0..1.0);
            let v = ball_real(&mut rng, model.vr);
            let (fh, fr) = model.reparametrized(&e, &u, t, &v);
            let neg = |x: &[f64]| x.iter().map(|a| -a).collect::<Vec<_>>();
            let uj: Vec<Quat> = u.iter().map(|q| q * j).collect();
            let (gh, gr) = model.reparametrized(&neg(&e), &uj, t, &neg(&v));
            let dh: f64 = gh.iter().zip(&fh).map(|(a, b)| (a - b * j).norm_squared()).sum();
            let dr: f64 = gr.iter().zip(&fr).map(|(a, b)| (a - sgn * b).powi(2)).sum();
            (dh + dr).sqrt()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct SplitCertificate {
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub isometric: bool,
    /// `max |MᵀM − I|`.
    pub max_deviation: f64,
    pub witness: Option<(usize, usize)>,
}

/// Certifies `i + D_ℝ : E ⊕ V_ℝ → W_ℝ` as a metric-preserving isomorphism.
pub fn split_vw(i: &DMatrix<f64>, d_real: &DMatrix<f64>) -> Result<SplitCertificate> {
    if i.nrows() != d_real.nrows() {
        return Err(SpinlabError::DimensionMismatch { expected: i.nrows(), got: d_real.nrows() });
    }
    if i.ncols() + d_real.ncols() != i.nrows() {
        return Err(SpinlabError::DimensionMismatch { expected: i.nrows(), got: i.ncols() + d_real.ncols() });
    }
    let n = i.nrows();
    let mut m = DMatrix::zeros(n, n);
    m.columns_mut(0, i.ncols()).copy_from(i);
    m.columns_mut(i.ncols(), d_real.ncols()).copy_from(d_real);
    let gram = m.transpose() * &m - DMatrix::identity(n, n);
    let (mut dev, mut at) = (0.0, None);
    for r in 0..n {
        for c in 0..n {
            if gram[(r, c)].abs() > dev {
                dev = gram[(r, c)].abs();
                at = Some((r, c));
            }
        }
    }
    let isometric = dev < ISOMETRY_TOL;
    Ok(SplitCertificate { matrix: m, isometric, max_deviation: dev, witness: if isometric { None } else { at } })
}

// ---------------------------------------------------------------------------
// truncated cohomology ring

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Power series `Σ cⁿ tⁿ/n!` up to `t^{len−1}`.
fn exp_series(c: &BigRational, len: usize) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(len);
    let mut term = BigRational::one();
    for k in 0..len {
        out.push(term.clone());
        term = term * c / BigRational::from_integer(BigInt::from(k + 1));
    }
    out
}

fn series_mul(a: &[BigRational], b: &[BigRational], len: usize) -> Vec<BigRational> {
    (0..len).map(|k| (0..=k).filter(|&i| i < a.len() && k - i < b.len()).map(|i| &a[i] * &b[k - i]).sum()).collect()
}

fn series_inv(a: &[BigRational], len: usize) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); len];
    out[0] = a[0].recip();
    for k in 1..len {
        let s: BigRational = (1..=k).filter(|&i| i < a.len()).map(|i| &a[i] * &out[k - i]).sum();
        out[k] = -s * &out[0];
    }
    out
}

/// `a(t)/t`, requiring `a(0) = 0`.
fn series_div_var(a: &[BigRational]) -> Vec<BigRational> {
    assert!(a[0].is_zero());
    a[1..].to_vec()
}

fn series_pow(a: &[BigRational], k: usize, len: usize) -> Vec<BigRational> {
    (0..k).fold(exp_series(&BigRational::zero(), len), |acc, _| series_mul(&acc, a, len))
}

/// `(1 − e^{ct})/(ct)` for `c = 2` (ω factor) and `c = 1` (x factor), divided before truncating.
pub fn one_minus_exp_over(c: i64, len: usize) -> Vec<BigRational> {
    let mut num: Vec<BigRational> = exp_series(&rat(c, 1), len + 1).into_iter().map(|t| -t).collect();
    num[0] += BigRational::one();
    series_div_var(&num).into_iter().map(|t| t / rat(c, 1)).collect()
}

/// `t/(e^{t/2} − e^{−t/2})`.
pub fn a_hat_series(len: usize) -> Vec<BigRational> {
    let plus = exp_series(&rat(1, 2), len + 1);
    let minus = exp_series(&rat(-1, 2), len + 1);
    let diff: Vec<BigRational> = plus.iter().zip(&minus).map(|(a, b)| a - b).collect();
    series_inv(&series_div_var(&diff), len)
}

/// `ℚ[ω, x]/(ω², x^{m+1})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CohomologyRing {
    pub m: usize,
}

/// `Σ c_{ij} ω^i x^j` with `i ≤ 1`, `j ≤ m`.
#[derive(Clone, Debug, PartialEq)]
pub struct RingElement {
    pub m: usize,
    pub coef: [Vec<BigRational>; 2],
}

impl CohomologyRing {
    /// `m = 2 dim_ℍ V_ℍ − 1`.
    pub fn for_quaternionic_dim(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(SpinlabError::Precondition("dim V_ℍ must be positive".into()));
        }
        Ok(CohomologyRing { m: 2 * n - 1 })
    }

    pub fn zero(&self) -> RingElement {
        RingElement { m: self.m, coef: [vec![BigRational::zero(); self.m + 1], vec![BigRational::zero(); self.m + 1]] }
    }

    pub fn monomial(&self, c: BigRational, omega: usize, x: usize) -> RingElement {
        let mut r = self.zero();
        if omega <= 1 && x <= self.m {
            r.coef[omega][x] = c;
        }
        r
    }

    pub fn x_series(&self, s: &[BigRational]) -> RingElement {
        let mut r = self.zero();
        for (j, c) in s.iter().enumerate().take(self.m + 1) {
            r.coef[0][j] = c.clone();
        }
        r
    }

    pub fn omega_series(&self, s: &[BigRational]) -> RingElement {
        let mut r = self.zero();
        r.coef[0][0] = s[0].clone();
        if s.len() > 1 {
            r.coef[1][0] = s[1].clone();
        }
        r
    }
}

impl RingElement {
    pub fn mul(&self, o: &RingElement) -> RingElement {
        let m = self.m;
        let mut out = CohomologyRing { m }.zero();
        for a in 0..2 {
            for b in 0..2 - a {
                for i in 0..=m {
                    if self.coef[a][i].is_zero() {
                        continue;
                    }
                    for j in 0..=m - i {
                        out.coef[a + b][i + j] += &self.coef[a][i] * &o.coef[b][j];
                    }
                }
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> RingElement {
        let mut out = CohomologyRing { m: self.m }.monomial(BigRational::one(), 0, 0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Fiber integration over `ℂP^m`: the coefficient of `x^m`, as `c₀ + c₁ω`.
    pub fn integrate(&self) -> [BigRational; 2] {
        [self.coef[0][self.m].clone(), self.coef[1][self.m].clone()]
    }
}

/// `∫_{𝒱 → S(E)} 𝓕*τ_𝒲` as an integer multiple of `ω x^{m−1}`, the class with `∫ x · (ω x^{m−1}) = ω`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeData {
    pub degree: i64,
}

impl DegreeData {
    pub fn class(&self, ring: &CohomologyRing) -> RingElement {
        ring.monomial(BigRational::from_integer(BigInt::from(self.degree)), 1, ring.m - 1)
    }
}

/// `(1−e^{2ω})/(2ω) · ((1−e^x)/x)^{dim_ℂ W_ℍ} · (x/(e^{x/2}−e^{−x/2}))^{dim_ℂ V_ℍ} · (1−e^x)`.
pub fn integrand(ring: &CohomologyRing, n: usize, a: usize) -> RingElement {
    let len = ring.m + 1;
    let w = ring.omega_series(&one_minus_exp_over(2, 2));
    let todd = ring.x_series(&series_pow(&one_minus_exp_over(1, len), 2 * a, len));
    let a_hat = ring.x_series(&series_pow(&a_hat_series(len), 2 * n, len));
    let mut last: Vec<BigRational> = exp_series(&BigRational::one(), len).into_iter().map(|t| -t).collect();
    last[0] += BigRational::one();
    w.mul(&todd).mul(&a_hat).mul(&ring.x_series(&last))
}

/// Degree-2 part of `∫ integrand · 𝓕*τ_𝒲`.
pub fn index_integrand_degree2(ring: &CohomologyRing, n: usize, a: usize, degree: &DegreeData) -> Result<i64> {
    if n == 0 {
        return Err(SpinlabError::Precondition("dim V_ℍ must be positive".into()));
    }
    if ring.m != 2 * n - 1 {
        return Err(SpinlabError::Precondition(format!("ring truncates at x^{} but dim_ℍ V_ℍ = {n} needs x^{}", ring.m + 1, 2 * n)));
    }
    let [_, c1] = integrand(ring, n, a).mul(&degree.class(ring)).integrate();
    to_integer(&c1)
}

/// `∫ x · 𝓕*τ_𝒲` directly.
pub fn direct_integral(ring: &CohomologyRing, degree: &DegreeData) -> Result<i64> {
    let x = ring.monomial(BigRational::one(), 0, 1);
    to_integer(&x.mul(&degree.class(ring)).integrate()[1])
}

fn to_integer(c: &BigRational) -> Result<i64> {
    if !c.is_integer() {
        return Err(SpinlabError::Precondition(format!("non-integral class {c}")));
    }
    c.to_integer().to_i64().ok_or_else(|| SpinlabError::TooLarge(c.to_string()))
}

// ---------------------------------------------------------------------------
// mapping degree

#[derive(Clone, Debug, Serialize)]
pub struct DegreeReport {
    pub degree: i64,
    pub resolution: usize,
    pub simplices: usize,
    pub regular_values: Vec<Vec<f64>>,
}

fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for v in 0..k {
            if !prefix.contains(&v) {
                prefix.push(v);
                rec(prefix, k, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), k, &mut out);
    out.into_iter()
        .map(|p| {
            let inv = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
            let s = if inv % 2 == 0 { 1.0 } else { -1.0 };
            (p, s)
        })
        .collect()
}

/// Orthonormal basis of `y^⊥` with `(y, b₁, …, b_k)` positively oriented.
fn tangent_frame(y: &[f64]) -> Vec<Vec<f64>> {
    let d = y.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for a in 0..d {
        let mut v: Vec<f64> = (0..d).map(|c| f64::from(u8::from(c == a))).collect();
        for b in std::iter::once(y.to_vec()).chain(basis.iter().cloned()) {
            let p: f64 = v.iter().zip(&b).map(|(x, z)| x * z).sum();
            for (vi, bi) in v.iter_mut().zip(&b) {
                *vi -= p * bi;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.3 && basis.len() < d - 1 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let m = DMatrix::from_fn(d, d, |r, c| if c == 0 { y[r] } else { basis[c - 1][r] });
    if m.determinant() < 0.0 {
        for x in basis[0].iter_mut() {
            *x = -*x;
        }
    }
    basis
}

fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 1e-300 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

pub const REGULAR_VALUE_ATTEMPTS: usize = 20;

/// Degree of `f: S^k → ℝ^{k+1} ∖ 0` (normalized onto `S^k`), `1 ≤ k ≤ 3`. The domain is the
/// boundary of `[−1, 1]^{k+1}` with each facet Kuhn-triangulated at `resolution` cells per side; the
/// signed count of simplices covering two random values is compared.
pub fn mapping_degree_sphere(k: usize, f: &dyn Fn(&[f64]) -> Vec<f64>, resolution: usize, seed: u64) -> Result<DegreeReport> {
    if !(1..=3).contains(&k) {
        return Err(SpinlabError::Precondition(format!("sphere dimension {k} not in 1..=3")));
    }
    let d = k + 1;
    let n = resolution.max(1);
    let perms = permutations(k);
    let side = n + 1;
    let cells = n.pow(k as u32);
    // per facet: images of the (n+1)^k grid points
    let mut facets: Vec<(f64, Vec<Vec<f64>>)> = Vec::with_capacity(2 * d);
    for axis in 0..d {
        for sigma in [-1.0f64, 1.0] {
            let others: Vec<usize> = (0..d).filter(|&c| c != axis).collect();
            let mut img = Vec::with_capacity(side.pow(k as u32));
            for idx in 0..side.pow(k as u32) {
                let mut p = vec![0.0; d];
                p[axis] = sigma;
                let mut rest = idx;
                for &c in &others {
                    p[c] = -1.0 + 2.0 * (rest % side) as f64 / n as f64;
                    rest /= side;
                }
                let x = normalize(&p).unwrap();
                let v = normalize(&f(&x)).ok_or_else(|| SpinlabError::Precondition(format!("map vanishes at {x:?}")))?;
                img.push(v);
            }
            let orient = sigma * if axis % 2 == 0 { 1.0 } else { -1.0 };
            facets.push((orient, img));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degrees = Vec::new();
    let mut values = Vec::new();
    let mut attempts = 0;
    while degrees.len() < 2 {
        if attempts == REGULAR_VALUE_ATTEMPTS {
            return Err(SpinlabError::NoRegularValue(attempts));
        }
        attempts += 1;
        let y = unit_vector(&mut rng, d);
        let frame = tangent_frame(&y);
        match count_preimages(&facets, &perms, &y, &frame, k, n, cells)? {
            Some(deg) => {
                degrees.push(deg);
                values.push(y);
            }
            None => continue,
        }
    }
    if degrees[0] != degrees[1] {
        return Err(SpinlabError::RefineMesh(format!("simplicial degrees {} and {} disagree", degrees[0], degrees[1])));
    }
    Ok(DegreeReport { degree: degrees[0], resolution: n, simplices: 2 * d * cells * perms.len(), regular_values: values })
}

/// `None` when `y` is too close to the image of the codimension-one skeleton.
fn count_preimages(
    facets: &[(f64, Vec<Vec<f64>>)],
    perms: &[(Vec<usize>, f64)],
    y: &[f64],
    frame: &[Vec<f64>],
    k: usize,
    n: usize,
    cells: usize,
) -> Result<Option<i64>> {
    let side = n + 1;
    let chart = |p: &[f64]| -> (f64, Vec<f64>) {
        let c: f64 = p.iter().zip(y).map(|(a, b)| a * b).sum();
        (c, frame.iter().map(|b| p.iter().zip(b).map(|(a, z)| a * z).sum::<f64>() / c).collect())
    };
    let mut total = 0i64;
    for (orient, img) in facets {
        for cell in 0..cells {
            let mut base = vec![0usize; k];
            let mut rest = cell;
            for b in base.iter_mut() {
                *b = rest % n;
                rest /= n;
            }
            for (perm, psign) in perms {
                let mut idx = base.clone();
                let mut verts = Vec::with_capacity(k + 1);
                let flat = |idx: &[usize]| idx.iter().rev().fold(0, |acc, &i| acc * side + i);
                verts.push(&img[flat(&idx)]);
                for &axis in perm {
                    idx[axis] += 1;
                    verts.push(&img[flat(&idx)]);
                }
                let charted: Vec<(f64, Vec<f64>)> = verts.iter().map(|v| chart(v)).collect();
                let cmin = charted.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                if cmin <= 0.0 {
                    if charted.iter().any(|c| c.0 > 0.5) {
                        return Err(SpinlabError::RefineMesh("a simplex spans more than a hemisphere".into()));
                    }
                    continue;
                }
                let p0 = &charted[0].1;
                let m = DMatrix::from_fn(k, k, |r, c| charted[c + 1].1[r] - p0[r]);
                let det = m.determinant();
                let Some(inv) = m.try_inverse() else { continue };
                let lam = inv * DVector::from_iterator(k, p0.iter().map(|x| -x));
                let lam0 = 1.0 - lam.sum();
                let lmin = lam.iter().copied().fold(lam0, f64::min);
                if lmin.abs() < 1e-9 || det.abs() < 1e-300 {
                    return Ok(None);
                }
                if lmin > 0.0 {
                    total += (orient * psign * det.signum()) as i64;
                }
            }
        }
    }
    Ok(Some(total))
}

/// Signed zero count of `f: B^k → ℝ^k`, nonvanishing on the boundary sphere; `1 ≤ k ≤ 4`.
pub fn mapping_degree_disk(k: usize, f: &dyn Fn(&[f64]) -> Vec<f64>, resolution: usize, seed: u64) -> Result<DegreeReport> {
    if k == 1 {
        let (a, b) = (f(&[-1.0])[0], f(&[1.0])[0]);
        if a == 0.0 || b == 0.0 {
            return Err(SpinlabError::Precondition("map vanishes on the boundary".into()));
        }
        let degree = ((b.signum() - a.signum()) / 2.0) as i64;
        return Ok(DegreeReport { degree, resolution: 1, simplices: 0, regular_values: vec![] });
    }
    mapping_degree_sphere(k - 1, f, resolution, seed)
}

// ---------------------------------------------------------------------------
// hK3 conditions

#[derive(Clone, Debug, Serialize)]
pub struct Hk3Report {
    pub model: String,
    /// Conditions (1) rank `E = 3`, (2) orientation given, (3) `c(𝓕) = +1`.
    pub conditions: [bool; 3],
    pub degree: Option<DegreeData>,
    pub c: Option<i64>,
    /// `∫ x · 𝓕*τ_𝒲` computed without the integrand.
    pub direct: Option<i64>,
    pub parity_odd: Option<bool>,
    pub note: Option<String>,
}

impl Hk3Report {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|&c| c)
    }
}

/// Kernel of `D_ℍ` as complex vectors in `ℂ^{2n}`, `q = z + jw ↦ (z, w)`.
fn quaternionic_kernel(model: &FdaModel) -> Vec<Vec<Quat>> {
    let (a, n) = (model.wh, model.vh);
    let mut m = DMatrix::<Complex64>::zeros(2 * a, 2 * n);
    for r in 0..a {
        for c in 0..n {
            let [w, x, y, z] = model.d_quat[r][c];
            let (al, be) = (Complex64::new(w, x), Complex64::new(y, -z));
            m[(2 * r, 2 * c)] = al;
            m[(2 * r, 2 * c + 1)] = -be.conj();
            m[(2 * r + 1, 2 * c)] = be;
            m[(2 * r + 1, 2 * c + 1)] = al.conj();
        }
    }
    let h = m.adjoint() * &m;
    let eig = nalgebra::SymmetricEigen::new(h);
    (0..2 * n)
        .filter(|&k| eig.eigenvalues[k] < 1e-10)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            (0..n).map(|c| Quat::new(v[2 * c].re, v[2 * c].im, v[2 * c + 1].re, -v[2 * c + 1].im)).collect()
        })
        .collect()
}

/// `∫ x · 𝓕*τ_𝒲` for models whose quadratic part lands in `i(E)` and whose `W_ℍ` part vanishes on
/// `ker D_ℍ × {v_ℝ = 0}`. There the zeros of `𝓕′` on the slice dual to `x` lie over one point
/// `[φ] ∈ P(ker D_ℍ)`, the `W_ℍ` and `V_ℝ` directions contribute `+1`, and the rest is the zero
/// count of `(e, r) ↦ F_E(e, rφ, 0)` on the shell `S(E) × [0, 1]`: outer minus inner sphere degree.
pub fn fiber_degree(model: &FdaModel, resolution: usize, seed: u64) -> Result<DegreeData> {
    model.validate()?;
    if model.e_rank != 3 {
        return Err(SpinlabError::Precondition("rank E must be 3".into()));
    }
    if model.vh != model.wh + 1 {
        // the integrand has no degree-2 part unless dim_ℍ V_ℍ − dim_ℍ W_ℍ = 1
        return Ok(DegreeData { degree: 0 });
    }
    let ker = quaternionic_kernel(model);
    if ker.len() != 2 {
        return Err(SpinlabError::Precondition(format!("D_ℍ is not surjective (complex kernel dimension {})", ker.len())));
    }
    let phi = &ker[0];
    let zero_r = vec![0.0; model.vr];
    let im = model.i_matrix();
    let dr = model.d_real_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..16 {
        let e = unit_vector(&mut rng, 3);
        let r: f64 = rng.random_range(0.0..1.0);
        let vh: Vec<Quat> = phi.iter().map(|q| q * r).collect();
        let (wh, wr) = model.eval(&e, &vh, &zero_r);
        let leak = (dr.transpose() * DVector::from_vec(wr)).norm();
        if qnorm2(&wh).sqrt() > 1e-12 || leak > 1e-12 {
            return Err(SpinlabError::Precondition("F does not split along ker D_ℍ × {v_ℝ = 0}".into()));
        }
    }
    let shell = |r: f64| {
        let im = im.clone();
        let phi = phi.clone();
        let zero_r = zero_r.clone();
        move |e: &[f64]| -> Vec<f64> {
            let vh: Vec<Quat> = phi.iter().map(|q| q * r).collect();
            let (_, wr) = model.eval(e, &vh, &zero_r);
            (im.transpose() * DVector::from_vec(wr)).iter().copied().collect()
        }
    };
    let outer = mapping_degree_sphere(2, &shell(1.0), resolution, seed)?.degree;
    let inner = mapping_degree_sphere(2, &shell(0.0), resolution, seed ^ 1)?.degree;
    let sigma = i64::from(model.orientation.unwrap_or(1));
    Ok(DegreeData { degree: sigma * (outer - inner) })
}

/// Conditions (1)–(3); `c(𝓕)` is the degree-2 part of the index integrand fed by [`fiber_degree`].
pub fn hk3_conditions(model: &FdaModel) -> Result<Hk3Report> {
    let rank_ok = model.e_rank == 3;
    let oriented = model.orientation.is_some();
    if !rank_ok {
        return Ok(Hk3Report {
            model: model.name.clone(),
            conditions: [false, oriented, false],
            degree: None,
            c: None,
            direct: None,
            parity_odd: None,
            note: Some(format!("rank E = {}", model.e_rank)),
        });
    }
    let degree = fiber_degree(model, 48, 0x5eed)?;
    let ring = CohomologyRing::for_quaternionic_dim(model.vh)?;
    let c = index_integrand_degree2(&ring, model.vh, model.wh, &degree)?;
    let direct = direct_integral(&ring, &degree)?;
    if c != direct {
        return Err(SpinlabError::Convergence(format!("integrand gives {c}, direct integral {direct}")));
    }
    let note = (model.vh != model.wh + 1).then(|| "dim_ℍ V_ℍ − dim_ℍ W_ℍ ≠ 1: no degree-2 class".to_string());
    Ok(Hk3Report {
        model: model.name.clone(),
        conditions: [rank_ok, oriented, c == 1],
        degree: Some(degree),
        c: Some(c),
        direct: Some(direct),
        parity_odd: Some(c % 2 != 0),
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_signs() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p.iter().map(|(_, s)| s).sum::<f64>(), 0.0);
    }

    #[test]
    fn frame_is_oriented() {
        let y = [0.0, 0.0, 1.0];
        let b = tangent_frame(&y);
        let m = DMatrix::from_fn(3, 3, |r, c| if c == 0 { y[r] } else { b[c - 1][r] });
        assert!((m.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moment_has_unit_length_on_a_quaternion_line() {
        let q = [Quat::new(0.3, -0.5, 0.7, 0.1)];
        let n2 = qnorm2(&q);
        let mu = moment(&q);
        assert!((mu.iter().map(|x| x * x).sum::<f64>().sqrt() - n2).abs() < 1e-14);
    }
}
