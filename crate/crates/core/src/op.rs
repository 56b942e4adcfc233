//! Column-sparse square operators over a [`Scalar`] field.

use crate::scalar::Scalar;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Square operator stored as the list of images of basis vectors.
///
/// `cols[j]` holds the nonzero entries `(i, a_ij)` of column `j`, sorted by row.
#[derive(Clone, Debug, PartialEq)]
pub struct Op<S> {
    dim: usize,
    cols: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> Op<S> {
    pub fn zero(dim: usize) -> Self {
        Op { dim, cols: vec![Vec::new(); dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal((0..dim).map(|_| S::one()).collect())
    }

    pub fn diagonal(entries: Vec<S>) -> Self {
        let dim = entries.len();
        let cols = entries
            .into_iter()
            .enumerate()
            .map(|(j, a)| if a.is_zero() { Vec::new() } else { vec![(j, a)] })
            .collect();
        Op { dim, cols }
    }

    /// Builds an operator from column images given as sparse maps.
    pub fn from_columns(dim: usize, columns: Vec<BTreeMap<usize, S>>) -> Self {
        assert_eq!(columns.len(), dim);
        let cols = columns
            .into_iter()
            .map(|c| c.into_iter().filter(|(_, a)| !a.is_zero()).collect())
            .collect();
        Op { dim, cols }
    }

    pub fn from_dense(dim: usize, entry: impl Fn(usize, usize) -> S) -> Self {
        let cols = (0..dim)
            .map(|j| {
                (0..dim)
                    .filter_map(|i| {
                        let a = entry(i, j);
                        (!a.is_zero()).then_some((i, a))
                    })
                    .collect()
            })
            .collect();
        Op { dim, cols }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn column(&self, j: usize) -> &[(usize, S)] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.cols[j]
            .iter()
            .find(|(r, _)| *r == i)
            .map(|(_, a)| a.clone())
            .unwrap_or_else(S::zero)
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn apply(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![S::zero(); self.dim];
        for (j, xj) in x.iter().enumerate() {
            if xj.is_zero() {
                continue;
            }
            for (i, a) in &self.cols[j] {
                y[*i] = y[*i].clone() + a.clone() * xj.clone();
            }
        }
        y
    }

    pub fn mul(&self, rhs: &Op<S>) -> Op<S> {
        assert_eq!(self.dim, rhs.dim);
        let cols = rhs
            .cols
            .iter()
            .map(|col| {
                let mut acc: BTreeMap<usize, S> = BTreeMap::new();
                for (k, b) in col {
                    for (i, a) in &self.cols[*k] {
                        let term = a.clone() * b.clone();
                        match acc.get_mut(i) {
                            Some(v) => *v = v.clone() + term,
                            None => {
                                acc.insert(*i, term);
                            }
                        }
                    }
                }
                acc.into_iter().filter(|(_, a)| !a.is_zero()).collect()
            })
            .collect();
        Op { dim: self.dim, cols }
    }

    fn combine(&self, rhs: &Op<S>, f: impl Fn(S, S) -> S) -> Op<S> {
        assert_eq!(self.dim, rhs.dim);
        let cols = self
            .cols
            .iter()
            .zip(&rhs.cols)
            .map(|(a, b)| {
                let mut acc: BTreeMap<usize, (S, S)> = BTreeMap::new();
                for (i, x) in a {
                    acc.entry(*i).or_insert((S::zero(), S::zero())).0 = x.clone();
                }
                for (i, y) in b {
                    acc.entry(*i).or_insert((S::zero(), S::zero())).1 = y.clone();
                }
                acc.into_iter()
                    .map(|(i, (x, y))| (i, f(x, y)))
                    .filter(|(_, v)| !v.is_zero())
                    .collect()
            })
            .collect();
        Op { dim: self.dim, cols }
    }

    pub fn add(&self, rhs: &Op<S>) -> Op<S> {
        self.combine(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Op<S>) -> Op<S> {
        self.combine(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: &S) -> Op<S> {
        let cols = self
            .cols
            .iter()
            .map(|c| {
                c.iter()
                    .map(|(i, a)| (*i, a.clone() * s.clone()))
                    .filter(|(_, a)| !a.is_zero())
                    .collect()
            })
            .collect();
        Op { dim: self.dim, cols }
    }

    /// `AB + BA`.
    pub fn anticommutator(&self, rhs: &Op<S>) -> Op<S> {
        self.mul(rhs).add(&rhs.mul(self))
    }

    /// `AB - BA`.
    pub fn commutator(&self, rhs: &Op<S>) -> Op<S> {
        self.mul(rhs).sub(&rhs.mul(self))
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Op<S> {
        let cols = self
            .cols
            .iter()
            .map(|c| c.iter().map(|(i, a)| (*i, a.conj())).collect())
            .collect();
        Op { dim: self.dim, cols }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Op<S> {
        let mut cols: Vec<Vec<(usize, S)>> = vec![Vec::new(); self.dim];
        for (j, c) in self.cols.iter().enumerate() {
            for (i, a) in c {
                cols[*i].push((j, a.conj()));
            }
        }
        Op { dim: self.dim, cols }
    }

    /// Kronecker product with the first factor on the low index:
    /// `(A ⊗ B)[i1 + d1*i2, j1 + d1*j2] = A[i1,j1] B[i2,j2]`.
    pub fn kron(&self, rhs: &Op<S>) -> Op<S> {
        let d1 = self.dim;
        let dim = d1 * rhs.dim;
        let mut cols = vec![Vec::new(); dim];
        for (j2, c2) in rhs.cols.iter().enumerate() {
            for (j1, c1) in self.cols.iter().enumerate() {
                let mut col = Vec::with_capacity(c1.len() * c2.len());
                for (i2, b) in c2 {
                    for (i1, a) in c1 {
                        col.push((i1 + d1 * i2, a.clone() * b.clone()));
                    }
                }
                col.sort_by_key(|(i, _)| *i);
                cols[j1 + d1 * j2] = col;
            }
        }
        Op { dim, cols }
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(Vec::is_empty)
    }

    /// Largest entrywise modulus of `self - rhs` in double precision.
    pub fn max_abs_diff(&self, rhs: &Op<S>) -> f64 {
        self.sub(rhs)
            .cols
            .iter()
            .flatten()
            .map(|(_, a)| a.to_c64().norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (j, c) in self.cols.iter().enumerate() {
            for (i, a) in c {
                m[(*i, j)] = a.to_c64();
            }
        }
        m
    }

    pub fn to_numeric(&self) -> Op<Complex64> {
        let cols = self
            .cols
            .iter()
            .map(|c| c.iter().map(|(i, a)| (*i, a.to_c64())).collect())
            .collect();
        Op { dim: self.dim, cols }
    }
}

impl Op<Complex64> {
    pub fn from_dense_matrix(m: &DMatrix<Complex64>, drop_below: f64) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let dim = m.nrows();
        let cols = (0..dim)
            .map(|j| {
                (0..dim)
                    .filter(|&i| m[(i, j)].norm() > drop_below)
                    .map(|i| (i, m[(i, j)]))
                    .collect()
            })
            .collect();
        Op { dim, cols }
    }
}

/// Anti-linear operator `x ↦ M x̄` (or linear `x ↦ M x` when `conj` is false).
#[derive(Clone, Debug, PartialEq)]
pub struct AntiLinear<S> {
    pub matrix: Op<S>,
    pub conj: bool,
}

impl<S: Scalar> AntiLinear<S> {
    pub fn new(matrix: Op<S>, conj: bool) -> Self {
        AntiLinear { matrix, conj }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, x: &[S]) -> Vec<S> {
        if self.conj {
            let xc: Vec<S> = x.iter().map(Scalar::conj).collect();
            self.matrix.apply(&xc)
        } else {
            self.matrix.apply(x)
        }
    }

    /// `self ∘ rhs`; conjugation flags compose by parity.
    pub fn compose(&self, rhs: &AntiLinear<S>) -> AntiLinear<S> {
        let inner = if self.conj { rhs.matrix.conj() } else { rhs.matrix.clone() };
        AntiLinear { matrix: self.matrix.mul(&inner), conj: self.conj ^ rhs.conj }
    }

    /// `self ∘ A` for a linear operator `A`.
    pub fn after(&self, a: &Op<S>) -> Op<S> {
        let inner = if self.conj { a.conj() } else { a.clone() };
        self.matrix.mul(&inner)
    }

    pub fn kron(&self, rhs: &AntiLinear<S>) -> Option<AntiLinear<S>> {
        (self.conj == rhs.conj).then(|| AntiLinear {
            matrix: self.matrix.kron(&rhs.matrix),
            conj: self.conj,
        })
    }

    pub fn power(&self, k: usize) -> AntiLinear<S> {
        let mut acc = AntiLinear::new(Op::identity(self.dim()), false);
        for _ in 0..k {
            acc = acc.compose(self);
        }
        acc
    }
}
