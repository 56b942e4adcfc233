//! Exterior algebra on a finite-dimensional inner-product space.
//!
//! Basis monomials are subset bitmasks: bit `i` stands for `e_{i+1}`, and a mask
//! denotes the wedge of its members in increasing order.

use crate::error::{Result, SpinlabError};
use crate::op::Op;
use crate::scalar::{parity_sign, Scalar};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerProductSpace {
    dim: usize,
    gram: Vec<Vec<BigRational>>,
    negative: bool,
    field: Field,
}

impl InnerProductSpace {
    pub fn euclidean(dim: usize) -> Self {
        Self::standard(dim, Field::Real)
    }

    pub fn standard(dim: usize, field: Field) -> Self {
        let gram = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                    .collect()
            })
            .collect();
        InnerProductSpace { dim, gram, negative: false, field }
    }

    /// Negative-definite copy `V⁻` of the standard space.
    pub fn negated(dim: usize, field: Field) -> Self {
        let mut s = Self::standard(dim, field);
        s.gram.iter_mut().flatten().for_each(|g| *g = -g.clone());
        s.negative = true;
        s
    }

    /// Space with an explicit Gram matrix. `negative` selects the
    /// negative-definite convention; the matrix is checked against it.
    pub fn with_metric(gram: Vec<Vec<BigRational>>, negative: bool, field: Field) -> Result<Self> {
        let dim = gram.len();
        if dim == 0 || gram.iter().any(|r| r.len() != dim) {
            return Err(SpinlabError::BadMetric("square"));
        }
        for i in 0..dim {
            for j in 0..i {
                if gram[i][j] != gram[j][i] {
                    return Err(SpinlabError::BadMetric("symmetric"));
                }
            }
        }
        let signed: Vec<Vec<BigRational>> = if negative {
            gram.iter().map(|r| r.iter().map(|g| -g.clone()).collect()).collect()
        } else {
            gram.clone()
        };
        if !leading_minors_positive(&signed) {
            return Err(SpinlabError::BadMetric(if negative {
                "negative definite"
            } else {
                "positive definite"
            }));
        }
        Ok(InnerProductSpace { dim, gram, negative, field })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gram(&self) -> &[Vec<BigRational>] {
        &self.gram
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// `⟨v, w⟩`, antilinear in `v` over the complex field.
    pub fn pairing<S: Scalar>(&self, v: &[S], w: &[S]) -> S {
        let mut acc = S::zero();
        for (a, va) in v.iter().enumerate() {
            if va.is_zero() {
                continue;
            }
            let va = match self.field {
                Field::Complex => va.conj(),
                Field::Real => va.clone(),
            };
            for (b, wb) in w.iter().enumerate() {
                if !self.gram[a][b].is_zero() && !wb.is_zero() {
                    acc = acc + va.clone() * S::from_rational(&self.gram[a][b]) * wb.clone();
                }
            }
        }
        acc
    }

    fn pairing_with_basis<S: Scalar>(&self, v: &[S], b: usize) -> S {
        let mut acc = S::zero();
        for (a, va) in v.iter().enumerate() {
            if va.is_zero() || self.gram[a][b].is_zero() {
                continue;
            }
            let va = match self.field {
                Field::Complex => va.conj(),
                Field::Real => va.clone(),
            };
            acc = acc + va * S::from_rational(&self.gram[a][b]);
        }
        acc
    }

    pub fn algebra_dim(&self) -> usize {
        1 << self.dim
    }
}

fn leading_minors_positive(m: &[Vec<BigRational>]) -> bool {
    // Exact Gaussian elimination without pivoting; all pivots positive iff SPD.
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m.to_vec();
    for k in 0..n {
        if !a[k][k].is_positive() {
            return false;
        }
        for i in k + 1..n {
            let f = a[i][k].clone() / a[k][k].clone();
            for j in k..n {
                let t = f.clone() * a[k][j].clone();
                a[i][j] -= t;
            }
        }
    }
    true
}

/// Sign of `e_a ∧ e_b` relative to `e_{a|b}` for disjoint masks.
pub fn wedge_sign(a: u32, b: u32) -> bool {
    let mut odd = false;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        odd ^= (a >> (j + 1)).count_ones() % 2 == 1;
        bb &= bb - 1;
    }
    odd
}

/// Element of `Λ*V ⊗ ℂ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedElement<S> {
    coeffs: BTreeMap<u32, S>,
    space: Arc<InnerProductSpace>,
}

impl<S: Scalar> GradedElement<S> {
    pub fn zero(space: Arc<InnerProductSpace>) -> Self {
        GradedElement { coeffs: BTreeMap::new(), space }
    }

    pub fn one(space: Arc<InnerProductSpace>) -> Self {
        Self::monomial(space, 0, S::one())
    }

    pub fn monomial(space: Arc<InnerProductSpace>, mask: u32, coeff: S) -> Self {
        assert!((mask as usize) < space.algebra_dim(), "mask out of range");
        let mut coeffs = BTreeMap::new();
        if !coeff.is_zero() {
            coeffs.insert(mask, coeff);
        }
        GradedElement { coeffs, space }
    }

    /// Degree-one element `Σ v_i e_{i+1}`.
    pub fn vector(space: Arc<InnerProductSpace>, v: &[S]) -> Result<Self> {
        if v.len() != space.dim() {
            return Err(SpinlabError::DimensionMismatch { expected: space.dim(), got: v.len() });
        }
        let coeffs = v
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (1u32 << i, c.clone()))
            .collect();
        Ok(GradedElement { coeffs, space })
    }

    pub fn from_dense(space: Arc<InnerProductSpace>, x: &[S]) -> Self {
        assert_eq!(x.len(), space.algebra_dim());
        let coeffs = x
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, c)| (m as u32, c.clone()))
            .collect();
        GradedElement { coeffs, space }
    }

    pub fn to_dense(&self) -> Vec<S> {
        let mut x = vec![S::zero(); self.space.algebra_dim()];
        for (m, c) in &self.coeffs {
            x[*m as usize] = c.clone();
        }
        x
    }

    pub fn space(&self) -> &Arc<InnerProductSpace> {
        &self.space
    }

    pub fn coeff(&self, mask: u32) -> S {
        self.coeffs.get(&mask).cloned().unwrap_or_else(S::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &S)> {
        self.coeffs.iter().map(|(m, c)| (*m, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Some(k mod 2)` when homogeneous.
    pub fn parity(&self) -> Option<bool> {
        let mut it = self.coeffs.keys().map(|m| m.count_ones() % 2 == 1);
        let first = it.next().unwrap_or(false);
        it.all(|p| p == first).then_some(first)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space {
            Ok(())
        } else {
            Err(SpinlabError::SpaceMismatch)
        }
    }

    fn accumulate(acc: &mut BTreeMap<u32, S>, mask: u32, val: S) {
        match acc.get_mut(&mask) {
            Some(v) => {
                *v = v.clone() + val;
                if v.is_zero() {
                    acc.remove(&mask);
                }
            }
            None => {
                if !val.is_zero() {
                    acc.insert(mask, val);
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut coeffs = self.coeffs.clone();
        for (m, c) in &other.coeffs {
            Self::accumulate(&mut coeffs, *m, c.clone());
        }
        Ok(GradedElement { coeffs, space: self.space.clone() })
    }

    pub fn scale(&self, s: &S) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(m, c)| (*m, c.clone() * s.clone()))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        GradedElement { coeffs, space: self.space.clone() }
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut acc = BTreeMap::new();
        for (a, x) in &self.coeffs {
            for (b, y) in &other.coeffs {
                if a & b != 0 {
                    continue;
                }
                let s: S = parity_sign(wedge_sign(*a, *b));
                Self::accumulate(&mut acc, a | b, s * x.clone() * y.clone());
            }
        }
        Ok(GradedElement { coeffs: acc, space: self.space.clone() })
    }

    /// Interior product `v ⌟ self` using the ambient metric.
    pub fn contract(&self, v: &[S]) -> Result<Self> {
        let space = &self.space;
        if v.len() != space.dim() {
            return Err(SpinlabError::DimensionMismatch { expected: space.dim(), got: v.len() });
        }
        let pair: Vec<S> = (0..space.dim()).map(|b| space.pairing_with_basis(v, b)).collect();
        let mut acc = BTreeMap::new();
        for (a, x) in &self.coeffs {
            let mut bits = *a;
            while bits != 0 {
                let i = bits.trailing_zeros();
                bits &= bits - 1;
                if pair[i as usize].is_zero() {
                    continue;
                }
                let odd = (a & ((1u32 << i) - 1)).count_ones() % 2 == 1;
                let s: S = parity_sign(odd);
                Self::accumulate(&mut acc, a & !(1u32 << i), s * pair[i as usize].clone() * x.clone());
            }
        }
        Ok(GradedElement { coeffs: acc, space: self.space.clone() })
    }

    /// `c(v) = v∧ − v⌟`.
    pub fn clifford_action(&self, v: &[S]) -> Result<Self> {
        let w = GradedElement::vector(self.space.clone(), v)?.wedge(self)?;
        w.add(&self.contract(v)?.scale(&-S::one()))
    }

    /// `h(v) = v∧ + v⌟`.
    pub fn hermitian_action(&self, v: &[S]) -> Result<Self> {
        let w = GradedElement::vector(self.space.clone(), v)?.wedge(self)?;
        w.add(&self.contract(v)?)
    }
}

pub fn wedge<S: Scalar>(a: &GradedElement<S>, b: &GradedElement<S>) -> Result<GradedElement<S>> {
    a.wedge(b)
}

pub fn contract<S: Scalar>(v: &[S], a: &GradedElement<S>) -> Result<GradedElement<S>> {
    a.contract(v)
}

pub fn clifford_action<S: Scalar>(v: &[S], a: &GradedElement<S>) -> Result<GradedElement<S>> {
    a.clifford_action(v)
}

pub fn hermitian_action<S: Scalar>(v: &[S], a: &GradedElement<S>) -> Result<GradedElement<S>> {
    a.hermitian_action(v)
}

fn op_from_basis_images<S: Scalar>(
    space: &Arc<InnerProductSpace>,
    f: impl Fn(&GradedElement<S>) -> Result<GradedElement<S>>,
) -> Result<Op<S>> {
    let n = space.algebra_dim();
    let mut cols = Vec::with_capacity(n);
    for m in 0..n {
        let img = f(&GradedElement::monomial(space.clone(), m as u32, S::one()))?;
        cols.push(img.coeffs.into_iter().map(|(k, c)| (k as usize, c)).collect());
    }
    Ok(Op::from_columns(n, cols))
}

pub fn wedge_op<S: Scalar>(space: &Arc<InnerProductSpace>, v: &[S]) -> Result<Op<S>> {
    let vv = GradedElement::vector(space.clone(), v)?;
    op_from_basis_images(space, |x| vv.wedge(x))
}

pub fn contract_op<S: Scalar>(space: &Arc<InnerProductSpace>, v: &[S]) -> Result<Op<S>> {
    op_from_basis_images(space, |x| x.contract(v))
}

pub fn clifford_op<S: Scalar>(space: &Arc<InnerProductSpace>, v: &[S]) -> Result<Op<S>> {
    Ok(wedge_op(space, v)?.sub(&contract_op(space, v)?))
}

pub fn hermitian_op<S: Scalar>(space: &Arc<InnerProductSpace>, v: &[S]) -> Result<Op<S>> {
    Ok(wedge_op(space, v)?.add(&contract_op(space, v)?))
}

/// `(−1)^deg` on `Λ*` of a `dim`-dimensional space.
pub fn grading_op<S: Scalar>(dim: usize) -> Op<S> {
    Op::diagonal((0..1usize << dim).map(|m| parity_sign(m.count_ones() % 2 == 1)).collect())
}

/// Map `Λ*P` induced by a linear map `P` (column `j` is `P e_{j+1}`).
pub fn induced_map<S: Scalar>(space: &Arc<InnerProductSpace>, p: &[Vec<S>]) -> Result<Op<S>> {
    let d = space.dim();
    if p.len() != d || p.iter().any(|c| c.len() != d) {
        return Err(SpinlabError::DimensionMismatch { expected: d, got: p.len() });
    }
    let images: Vec<GradedElement<S>> = p
        .iter()
        .map(|c| GradedElement::vector(space.clone(), c))
        .collect::<Result<_>>()?;
    let n = space.algebra_dim();
    let mut cols = Vec::with_capacity(n);
    for m in 0..n as u32 {
        let mut acc = GradedElement::one(space.clone());
        let mut bits = m;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            acc = acc.wedge(&images[i])?;
        }
        cols.push(acc.coeffs.into_iter().map(|(k, c)| (k as usize, c)).collect());
    }
    Ok(Op::from_columns(n, cols))
}

pub fn unit_vector<S: Scalar>(dim: usize, i: usize) -> Vec<S> {
    (0..dim).map(|k| if k == i { S::one() } else { S::zero() }).collect()
}
