//! The two irreducible representations of `Cl(V_ℍ ⊕ V_ℍ⁻)` on a quaternionic
//! space and the canonical intertwiner between them.
//!
//! Real basis of `V_ℍ`: `(e_l, e_l i, e_l j, e_l k)` at indices `4l..4l+4`.
//! Complex basis (via right multiplication by `i`): `(e_l, e_l j)` at `2l, 2l+1`,
//! so that `x0 e + x1 ei + x2 ej + x3 ek` has coordinates `(x0 + i x1, x2 − i x3)`.

use crate::clifford::{graded_tensor, reorder_factors, CliffordModule, FactorInfo};
use crate::error::{Result, SpinlabError};
use crate::exterior::{
    clifford_op, grading_op, induced_map, unit_vector, Field, GradedElement, InnerProductSpace,
};
use crate::op::{AntiLinear, Op};
use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector, Quaternion};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    I,
    J,
    K,
}

impl Unit {
    fn quat(self) -> Quaternion<f64> {
        match self {
            Unit::I => Quaternion::new(0.0, 1.0, 0.0, 0.0),
            Unit::J => Quaternion::new(0.0, 0.0, 1.0, 0.0),
            Unit::K => Quaternion::new(0.0, 0.0, 0.0, 1.0),
        }
    }
}

/// `ℍⁿ` with its standard Pin(2)-invariant metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuaternionicSpace {
    pub n: usize,
}

/// Components `(w, x, y, z)` of a quaternion in the basis `(1, i, j, k)`.
fn qcoords(q: &Quaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

fn qfrom(c: [f64; 4]) -> Quaternion<f64> {
    Quaternion::new(c[0], c[1], c[2], c[3])
}

impl QuaternionicSpace {
    pub fn new(n: usize) -> Self {
        QuaternionicSpace { n }
    }

    pub fn real_dim(&self) -> usize {
        4 * self.n
    }

    pub fn complex_dim(&self) -> usize {
        2 * self.n
    }

    /// Signed permutation `(index, sign)` giving `e_a · u` on the real basis.
    pub fn right_mult_index(a: usize, u: Unit) -> (usize, bool) {
        let (l, r) = (a / 4, a % 4);
        // e·u for e in {1, i, j, k} times u
        let (t, neg) = match (u, r) {
            (Unit::I, 0) => (1, false),
            (Unit::I, 1) => (0, true),
            (Unit::I, 2) => (3, true),
            (Unit::I, 3) => (2, false),
            (Unit::J, 0) => (2, false),
            (Unit::J, 1) => (3, false),
            (Unit::J, 2) => (0, true),
            (Unit::J, 3) => (1, true),
            (Unit::K, 0) => (3, false),
            (Unit::K, 1) => (2, true),
            (Unit::K, 2) => (1, false),
            (Unit::K, 3) => (0, true),
            _ => unreachable!(),
        };
        (4 * l + t, neg)
    }

    /// Right multiplication by `u` as a real `4n × 4n` operator.
    pub fn right_mult<S: Scalar>(&self, u: Unit) -> Op<S> {
        let d = self.real_dim();
        let cols = (0..d)
            .map(|a| {
                let (t, neg) = Self::right_mult_index(a, u);
                let mut c = std::collections::BTreeMap::new();
                c.insert(t, if neg { -S::one() } else { S::one() });
                c
            })
            .collect();
        Op::from_columns(d, cols)
    }

    /// Complex coordinates of a real vector.
    pub fn complex_coords<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.real_dim());
        let i = S::imag_unit();
        (0..self.n)
            .flat_map(|l| {
                let b = 4 * l;
                [
                    x[b].clone() + i.clone() * x[b + 1].clone(),
                    x[b + 2].clone() - i.clone() * x[b + 3].clone(),
                ]
            })
            .collect()
    }

    fn real_space(&self) -> Arc<InnerProductSpace> {
        Arc::new(InnerProductSpace::standard(self.real_dim(), Field::Real))
    }

    fn complex_space(&self) -> Arc<InnerProductSpace> {
        Arc::new(InnerProductSpace::standard(self.complex_dim(), Field::Complex))
    }

    /// Right multiplication by `j` on `Λ*_ℂ V`, linear part (apply after conjugation).
    fn complex_j_on_exterior<S: Scalar>(&self) -> Result<Op<S>> {
        let d = self.complex_dim();
        let cols: Vec<Vec<S>> = (0..d)
            .map(|a| {
                if a % 2 == 0 {
                    unit_vector(d, a + 1)
                } else {
                    unit_vector::<S>(d, a - 1).into_iter().map(|x| -x).collect()
                }
            })
            .collect();
        induced_map(&self.complex_space(), &cols)
    }

    /// Right multiplication by `j` on `Λ*_ℝ V ⊗ ℂ`.
    fn real_j_on_exterior<S: Scalar>(&self) -> Result<Op<S>> {
        let d = self.real_dim();
        let cols: Vec<Vec<S>> = (0..d)
            .map(|a| {
                let (t, neg) = Self::right_mult_index(a, Unit::J);
                let mut v = unit_vector::<S>(d, t);
                if neg {
                    v[t] = -S::one();
                }
                v
            })
            .collect();
        induced_map(&self.real_space(), &cols)
    }
}

/// `S₀ = Λ*_ℂ V ⊗ Λ*_ℂ V` with `c₀(v) = ε ⊗ (v∧ − v⌟)`, `h₀(v) = i (v∧ − v⌟) ⊗ 1`
/// and `τ₀ = (ε ∘ ·j) ⊗ (·j)`.
///
/// The extra `ε` on the first factor of `τ₀` is what makes `τ₀ h₀(v) = h₀(vj) τ₀`
/// hold: `τ₀` is anti-linear and so conjugates the `i` in `h₀`.
pub fn build_s0<S: Scalar>(v: &QuaternionicSpace) -> Result<CliffordModule<S>> {
    let cs = v.complex_space();
    let dc = v.complex_dim();
    let eps: Op<S> = grading_op(dc);
    let id = Op::identity(cs.algebra_dim());
    let i = S::imag_unit();
    let mut clifford = Vec::with_capacity(v.real_dim());
    let mut hermitian = Vec::with_capacity(v.real_dim());
    for a in 0..v.real_dim() {
        let z = v.complex_coords(&unit_vector::<S>(v.real_dim(), a));
        let c = clifford_op(&cs, &z)?;
        clifford.push(eps.kron(&c));
        hermitian.push(c.kron(&id).scale(&i));
    }
    let jl = v.complex_j_on_exterior::<S>()?;
    let parities: Vec<bool> = (0..cs.algebra_dim()).map(|m| m.count_ones() % 2 == 1).collect();
    Ok(CliffordModule {
        dim: cs.algebra_dim() * cs.algebra_dim(),
        epsilon: eps.kron(&eps),
        clifford,
        hermitian,
        tau: AntiLinear::new(eps.mul(&jl).kron(&jl), true),
        factors: vec![
            FactorInfo { label: "Λ_C V (0)".into(), parities: parities.clone() },
            FactorInfo { label: "Λ_C V".into(), parities },
        ],
    })
}

/// `S₁ = Λ*_ℝ V ⊗ ℂ` with `c₁ = v∧ − v⌟`, `h₁ = v∧ + v⌟`, `τ₁(ω ⊗ z) = (ω·j) ⊗ z̄`.
pub fn build_s1<S: Scalar>(v: &QuaternionicSpace) -> Result<CliffordModule<S>> {
    let mut m = CliffordModule::exterior(&v.real_space(), "Λ_R V")?;
    m.tau = AntiLinear::new(v.real_j_on_exterior()?, true);
    Ok(m)
}

/// Largest deviation in `τ c(v) = c(vj) τ` and `τ h(v) = h(vj) τ` over basis vectors.
pub fn tau_diagram_defect<S: Scalar>(v: &QuaternionicSpace, m: &CliffordModule<S>) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..v.real_dim() {
        let (b, neg) = QuaternionicSpace::right_mult_index(a, Unit::J);
        let sgn = if neg { -S::one() } else { S::one() };
        for ops in [&m.clifford, &m.hermitian] {
            let lhs = m.tau.after(&ops[a]);
            let rhs = ops[b].scale(&sgn).mul(&m.tau.matrix);
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
    }
    worst
}

/// Real coordinates of `e′_l · r` for a basis `e′_l = Σ_m e_m A_{ml}`.
fn basis_vector(a: &[Vec<Quaternion<f64>>], l: usize, r: Quaternion<f64>) -> Vec<f64> {
    let n = a.len();
    let mut x = vec![0.0; 4 * n];
    for m in 0..n {
        let c = qcoords(&(a[m][l] * r));
        x[4 * m..4 * m + 4].copy_from_slice(&c);
    }
    x
}

/// `∧_l (e_l ⊗ 1 + (e_l i) ⊗ i) ∧ (e_l j ⊗ 1 + (e_l ji) ⊗ i)` for the given basis.
pub fn generator_image_numeric(
    v: &QuaternionicSpace,
    basis: &[Vec<Quaternion<f64>>],
) -> Result<GradedElement<Complex64>> {
    let sp = v.real_space();
    let i = Complex64::new(0.0, 1.0);
    let one = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    let qi = Unit::I.quat();
    let qj = Unit::J.quat();
    let qji = qj * qi;
    let mut acc = GradedElement::one(sp.clone());
    for l in 0..v.n {
        for (p, q) in [(one, qi), (qj, qji)] {
            let x = basis_vector(basis, l, p);
            let y = basis_vector(basis, l, q);
            let w: Vec<Complex64> =
                x.iter().zip(&y).map(|(a, b)| Complex64::new(*a, 0.0) + i * *b).collect();
            acc = acc.wedge(&GradedElement::vector(sp.clone(), &w)?)?;
        }
    }
    Ok(acc)
}

/// Exact generator image for the standard basis.
pub fn generator_image<S: Scalar>(v: &QuaternionicSpace) -> Result<GradedElement<S>> {
    let sp = v.real_space();
    let d = v.real_dim();
    let i = S::imag_unit();
    let mut acc = GradedElement::one(sp.clone());
    for l in 0..v.n {
        // e_l j i = −e_l k
        let (e, ei, ej, ek) = (4 * l, 4 * l + 1, 4 * l + 2, 4 * l + 3);
        let mut w1 = vec![S::zero(); d];
        w1[e] = S::one();
        w1[ei] = i.clone();
        let mut w2 = vec![S::zero(); d];
        w2[ej] = S::one();
        w2[ek] = -i.clone();
        acc = acc.wedge(&GradedElement::vector(sp.clone(), &w1)?)?;
        acc = acc.wedge(&GradedElement::vector(sp.clone(), &w2)?)?;
    }
    Ok(acc)
}

pub fn standard_basis(n: usize) -> Vec<Vec<Quaternion<f64>>> {
    (0..n)
        .map(|m| {
            (0..n)
                .map(|l| if m == l { Quaternion::new(1.0, 0.0, 0.0, 0.0) } else { Quaternion::new(0.0, 0.0, 0.0, 0.0) })
                .collect()
        })
        .collect()
}

fn apply_sparse(op: &Op<Complex64>, x: &DVector<Complex64>) -> DVector<Complex64> {
    DVector::from_vec(op.apply(x.as_slice()))
}

/// The canonical intertwiner `F: S₀ → S₁`, built from the orthonormal
/// quaternionic basis whose matrix (columns in the standard basis) is `basis`.
///
/// `F` is fixed by `F(1⊗1) =` [`generator_image_numeric`] and by intertwining all
/// `c`, `h`; it is propagated along words in the generators.
pub fn intertwiner_from_basis(
    v: &QuaternionicSpace,
    basis: &[Vec<Quaternion<f64>>],
) -> Result<DMatrix<Complex64>> {
    let s0 = build_s0::<Complex64>(v)?;
    let s1 = build_s1::<Complex64>(v)?;
    let dim = s0.dim;
    let gens0: Vec<&Op<Complex64>> = s0.clifford.iter().chain(&s0.hermitian).collect();
    let gens1: Vec<&Op<Complex64>> = s1.clifford.iter().chain(&s1.hermitian).collect();
    let mut x0 = DVector::zeros(dim);
    x0[0] = Complex64::new(1.0, 0.0);
    let y0 = DVector::from_vec(generator_image_numeric(v, basis)?.to_dense());
    let mut xs: Vec<DVector<Complex64>> = Vec::with_capacity(dim);
    let mut ys: Vec<DVector<Complex64>> = Vec::with_capacity(dim);
    let mut queue = std::collections::VecDeque::from([(x0, y0)]);
    while let Some((mut x, mut y)) = queue.pop_front() {
        if xs.len() == dim {
            break;
        }
        for _ in 0..2 {
            for (b, d) in xs.iter().zip(&ys) {
                let p = b.dotc(&x);
                x -= b * p;
                y -= d * p;
            }
        }
        let r = x.norm();
        if r < 1e-8 {
            continue;
        }
        x /= Complex64::new(r, 0.0);
        y /= Complex64::new(r, 0.0);
        for (g0, g1) in gens0.iter().zip(&gens1) {
            queue.push_back((apply_sparse(g0, &x), apply_sparse(g1, &y)));
        }
        xs.push(x);
        ys.push(y);
    }
    if xs.len() != dim {
        return Err(SpinlabError::Convergence(format!(
            "cyclic span has dimension {} < {dim}",
            xs.len()
        )));
    }
    let mut f = DMatrix::zeros(dim, dim);
    for (b, d) in xs.iter().zip(&ys) {
        f += d * b.adjoint();
    }
    Ok(f)
}

pub fn canonical_intertwiner(v: &QuaternionicSpace) -> Result<DMatrix<Complex64>> {
    intertwiner_from_basis(v, &standard_basis(v.n))
}

#[derive(Clone, Debug)]
pub struct IntertwinerReport {
    pub clifford_defect: f64,
    pub hermitian_defect: f64,
    pub tau_defect: f64,
    pub grading_defect: f64,
    /// `‖F Fᴴ / 4ⁿ − 1‖`.
    pub unitarity_defect: f64,
    pub generator_defect: f64,
}

impl IntertwinerReport {
    pub fn max_defect(&self) -> f64 {
        [
            self.clifford_defect,
            self.hermitian_defect,
            self.tau_defect,
            self.grading_defect,
            self.unitarity_defect,
            self.generator_defect,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn verify_intertwiner(v: &QuaternionicSpace, f: &DMatrix<Complex64>) -> Result<IntertwinerReport> {
    let s0 = build_s0::<Complex64>(v)?;
    let s1 = build_s1::<Complex64>(v)?;
    let defect = |a: &[Op<Complex64>], b: &[Op<Complex64>]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| max_abs(&(f * x.to_dense() - y.to_dense() * f)))
            .fold(0.0, f64::max)
    };
    let tau0 = s0.tau.matrix.to_dense();
    let tau1 = s1.tau.matrix.to_dense();
    let scale = 4f64.powi(v.n as i32);
    let unit = f * f.adjoint() / Complex64::new(scale, 0.0) - DMatrix::identity(s0.dim, s0.dim);
    let mut e0 = DVector::zeros(s0.dim);
    e0[0] = Complex64::new(1.0, 0.0);
    let g = DVector::from_vec(generator_image::<Complex64>(v)?.to_dense());
    Ok(IntertwinerReport {
        clifford_defect: defect(&s0.clifford, &s1.clifford),
        hermitian_defect: defect(&s0.hermitian, &s1.hermitian),
        tau_defect: max_abs(&(f * &tau0 - &tau1 * f.map(|z| z.conj()))),
        grading_defect: max_abs(&(f * s0.epsilon.to_dense() - s1.epsilon.to_dense() * f)),
        unitarity_defect: max_abs(&unit),
        generator_defect: (f * e0 - g).iter().map(|z| z.norm()).fold(0.0, f64::max),
    })
}

/// Dimension of the space of linear maps `X` with `X c₀ = c₁ X` and `X h₀ = h₁ X`.
pub fn intertwiner_space_dim(v: &QuaternionicSpace) -> Result<usize> {
    let s0 = build_s0::<Complex64>(v)?;
    let s1 = build_s1::<Complex64>(v)?;
    let d = s0.dim;
    if d > 64 {
        return Err(SpinlabError::TooLarge(format!("commutant solve at dim {d}")));
    }
    let gens: Vec<(DMatrix<Complex64>, DMatrix<Complex64>)> = s0
        .clifford
        .iter()
        .zip(&s1.clifford)
        .chain(s0.hermitian.iter().zip(&s1.hermitian))
        .map(|(a, b)| (a.to_dense(), b.to_dense()))
        .collect();
    // vec(X c0) = (c0ᵀ ⊗ 1) vec X, vec(c1 X) = (1 ⊗ c1) vec X
    let id = DMatrix::<Complex64>::identity(d, d);
    let mut big = DMatrix::zeros(d * d * gens.len(), d * d);
    for (g, (a, b)) in gens.iter().enumerate() {
        let blk = a.transpose().kronecker(&id) - id.kronecker(b);
        big.view_mut((g * d * d, 0), (d * d, d * d)).copy_from(&blk);
    }
    let gram = big.adjoint() * &big;
    let eig = gram.symmetric_eigenvalues();
    let top = eig.iter().copied().fold(0.0, f64::max);
    Ok(eig.iter().filter(|e| e.abs() < 1e-9 * top.max(1.0)).count())
}

/// Uniformly distributed unit quaternion.
pub fn random_unit_quaternion<R: Rng>(rng: &mut R) -> Quaternion<f64> {
    loop {
        let c: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let q = qfrom(c);
        let r = q.norm();
        if r > 1e-6 {
            return q / r;
        }
    }
}

/// Random element of `Sp(n)` as columns of quaternions (Gram–Schmidt over ℍ).
pub fn random_sp<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec<Quaternion<f64>>> {
    if n == 1 {
        return vec![vec![random_unit_quaternion(rng)]];
    }
    loop {
        let mut cols: Vec<Vec<Quaternion<f64>>> = Vec::with_capacity(n);
        let mut ok = true;
        for _ in 0..n {
            let mut c: Vec<Quaternion<f64>> = (0..n)
                .map(|_| qfrom(std::array::from_fn(|_| rng.sample(StandardNormal))))
                .collect();
            for b in &cols {
                // ⟨b, c⟩ = Σ conj(b_m) c_m; c ← c − b ⟨b, c⟩
                let p = b.iter().zip(&c).fold(Quaternion::new(0.0, 0.0, 0.0, 0.0), |acc, (x, y)| {
                    acc + x.conjugate() * y
                });
                for (cm, bm) in c.iter_mut().zip(b) {
                    *cm -= bm * p;
                }
            }
            let r = c.iter().map(|q| q.norm_squared()).sum::<f64>().sqrt();
            if r < 1e-6 {
                ok = false;
                break;
            }
            c.iter_mut().for_each(|q| *q /= r);
            cols.push(c);
        }
        if ok {
            // stored as a[m][l]
            return (0..n).map(|m| (0..n).map(|l| cols[l][m]).collect()).collect();
        }
    }
}

/// `e·q` basis: every standard basis vector right-multiplied by `q`.
pub fn basis_times(n: usize, q: Quaternion<f64>) -> Vec<Vec<Quaternion<f64>>> {
    let zero = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    (0..n).map(|m| (0..n).map(|l| if m == l { q } else { zero }).collect()).collect()
}

#[derive(Clone, Debug)]
pub struct DirectSumReport {
    pub s1_operator_defect: f64,
    pub s0_operator_defect: f64,
    pub tau_defect: f64,
    pub grading_defect: f64,
    pub intertwiner_defect: f64,
}

impl DirectSumReport {
    pub fn max_defect(&self) -> f64 {
        [
            self.s1_operator_defect,
            self.s0_operator_defect,
            self.tau_defect,
            self.grading_defect,
            self.intertwiner_defect,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn ops_defect(a: &[Op<Complex64>], b: &[Op<Complex64>], g: &Op<Complex64>, gi: &Op<Complex64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| g.mul(x).mul(gi).max_abs_diff(y)).fold(0.0, f64::max)
}

/// Compares the representations of `V ⊕ W` with graded tensor products of those of
/// `V` and `W`, including `F^{V⊕W}` against `F^V ⊗ F^W`.
pub fn direct_sum_compatibility(v: &QuaternionicSpace, w: &QuaternionicSpace) -> Result<DirectSumReport> {
    let total = v.real_dim() + w.real_dim();
    if total > 12 {
        return Err(SpinlabError::TooLarge(format!("total real dimension {total} > 12")));
    }
    let vw = QuaternionicSpace::new(v.n + w.n);
    // S₁: masks concatenate with V in the low bits, no reordering needed.
    let s1 = build_s1::<Complex64>(&vw)?;
    let s1t = graded_tensor(&build_s1::<Complex64>(v)?, &build_s1::<Complex64>(w)?);
    let id1 = Op::identity(s1.dim);
    let s1_defect = ops_defect(&s1.clifford, &s1t.clifford, &id1, &id1)
        .max(ops_defect(&s1.hermitian, &s1t.hermitian, &id1, &id1));
    // S₀: factors [Λ V, Λ W, Λ V, Λ W] → [Λ V, Λ V, Λ W, Λ W].
    let s0 = build_s0::<Complex64>(&vw)?;
    let s0t = graded_tensor(&build_s0::<Complex64>(v)?, &build_s0::<Complex64>(w)?);
    let par = |k: usize| -> FactorInfo {
        FactorInfo { label: String::new(), parities: (0..1usize << k).map(|m| m.count_ones() % 2 == 1).collect() }
    };
    let (cv, cw) = (v.complex_dim(), w.complex_dim());
    let factors = [par(cv), par(cw), par(cv), par(cw)];
    let g = reorder_factors::<Complex64>(&factors, &[0, 2, 1, 3])?.matrix;
    let gi = g.adjoint();
    let s0_defect = ops_defect(&s0.clifford, &s0t.clifford, &g, &gi)
        .max(ops_defect(&s0.hermitian, &s0t.hermitian, &g, &gi));
    let tau_defect = g
        .mul(&s0.tau.matrix)
        .mul(&gi)
        .max_abs_diff(&s0t.tau.matrix)
        .max(s1.tau.matrix.max_abs_diff(&s1t.tau.matrix));
    let grading_defect = g
        .mul(&s0.epsilon)
        .mul(&gi)
        .max_abs_diff(&s0t.epsilon)
        .max(s1.epsilon.max_abs_diff(&s1t.epsilon));
    let f = canonical_intertwiner(&vw)?;
    let fv = canonical_intertwiner(v)?;
    let fw = canonical_intertwiner(w)?;
    let lhs = &f * gi.to_dense();
    // nalgebra's kronecker puts its left factor on the high index
    let intertwiner_defect = max_abs(&(lhs - fw.kronecker(&fv)));
    Ok(DirectSumReport {
        s1_operator_defect: s1_defect,
        s0_operator_defect: s0_defect,
        tau_defect,
        grading_defect,
        intertwiner_defect,
    })
}

/// Largest deviation of `F` rebuilt from `count` random `Sp(n)` bases.
pub fn basis_independence<R: Rng>(v: &QuaternionicSpace, count: usize, rng: &mut R) -> Result<f64> {
    let f = canonical_intertwiner(v)?;
    let mut worst = 0.0f64;
    for _ in 0..count {
        let a = random_sp(v.n, rng);
        let g = intertwiner_from_basis(v, &a)?;
        worst = worst.max(max_abs(&(g - &f)));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Qi;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion<f64> {
        Quaternion::new(w, x, y, z)
    }

    #[test]
    fn right_mult_index_matches_quaternion_product() {
        let units = [q(1., 0., 0., 0.), q(0., 1., 0., 0.), q(0., 0., 1., 0.), q(0., 0., 0., 1.)];
        for (u, uq) in [(Unit::I, Unit::I.quat()), (Unit::J, Unit::J.quat()), (Unit::K, Unit::K.quat())] {
            for r in 0..4 {
                let (t, neg) = QuaternionicSpace::right_mult_index(r, u);
                let prod = units[r] * uq;
                let want = if neg { -units[t] } else { units[t] };
                assert_eq!(prod, want);
            }
        }
    }

    #[test]
    fn right_mult_relations() {
        let v = QuaternionicSpace::new(2);
        let (ri, rj, rk) = (v.right_mult::<Qi>(Unit::I), v.right_mult::<Qi>(Unit::J), v.right_mult::<Qi>(Unit::K));
        let minus = Op::<Qi>::identity(8).scale(&-Qi::one());
        assert_eq!(ri.mul(&ri), minus);
        assert_eq!(rj.mul(&rj), minus);
        assert_eq!(rk.mul(&rk), minus);
        // (x i) j = x k
        assert_eq!(rj.mul(&ri), rk);
        assert_eq!(rj.mul(&rj.adjoint()), Op::identity(8));
    }

    #[test]
    fn s0_first_generator_on_vacuum() {
        let v = QuaternionicSpace::new(1);
        let s0 = build_s0::<Qi>(&v).unwrap();
        let mut vac = vec![Qi::zero(); 16];
        vac[0] = Qi::one();
        let out = s0.clifford[0].apply(&vac);
        // 1 ⊗ e: first factor low index, e is mask 1 in the second factor
        let mut want = vec![Qi::zero(); 16];
        want[4] = Qi::one();
        assert_eq!(out, want);
        assert!(s0.hermitian_of(&vec![Qi::zero(); 4]).is_zero());
    }

    #[test]
    fn tau1_on_e1_times_i() {
        let v = QuaternionicSpace::new(1);
        let s1 = build_s1::<Qi>(&v).unwrap();
        let mut x = vec![Qi::zero(); 16];
        x[1] = Qi::imag_unit();
        let y = s1.tau.apply(&x);
        let mut want = vec![Qi::zero(); 16];
        want[4] = -Qi::imag_unit();
        assert_eq!(y, want);
    }

    #[test]
    fn tau_squares() {
        let v = QuaternionicSpace::new(1);
        let s1 = build_s1::<Qi>(&v).unwrap();
        let t2 = s1.tau.power(2);
        assert!(!t2.conj);
        assert_eq!(t2.matrix, s1.epsilon);
        assert_eq!(s1.tau.power(4).matrix, Op::identity(16));
        let s0 = build_s0::<Qi>(&v).unwrap();
        assert_eq!(s0.tau.power(4).matrix, Op::identity(16));
    }

    #[test]
    fn generator_image_has_four_monomials() {
        let v = QuaternionicSpace::new(1);
        let g = generator_image::<Qi>(&v).unwrap();
        let i = Qi::imag_unit();
        let terms: Vec<(u32, Qi)> = g.terms().map(|(m, c)| (m, c.clone())).collect();
        assert_eq!(
            terms,
            vec![(0b0101, Qi::one()), (0b0110, i.clone()), (0b1001, -i), (0b1010, Qi::one())]
        );
    }

    #[test]
    fn intertwiner_n1() {
        let v = QuaternionicSpace::new(1);
        let f = canonical_intertwiner(&v).unwrap();
        let r = verify_intertwiner(&v, &f).unwrap();
        assert!(r.max_defect() < 1e-12, "{r:?}");
        assert_eq!(intertwiner_space_dim(&v).unwrap(), 1);
    }

    #[test]
    fn intertwiner_independent_of_e_times_q() {
        let v = QuaternionicSpace::new(1);
        let f = canonical_intertwiner(&v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_unit_quaternion(&mut rng);
        let g = intertwiner_from_basis(&v, &basis_times(1, q)).unwrap();
        assert!(max_abs(&(g - f)) < 1e-12);
    }

    #[test]
    fn trivial_summand() {
        let r = direct_sum_compatibility(&QuaternionicSpace::new(1), &QuaternionicSpace::new(0)).unwrap();
        assert!(r.max_defect() < 1e-12, "{r:?}");
        assert!(direct_sum_compatibility(&QuaternionicSpace::new(2), &QuaternionicSpace::new(2)).is_err());
    }
}
