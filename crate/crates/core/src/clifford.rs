//! Clifford modules: grading, Clifford action, Hermitian family and
//! anti-linear symmetry, with graded tensor products and factor reordering.

use crate::error::{Result, SpinlabError};
use crate::exterior::{clifford_op, grading_op, hermitian_op, unit_vector, InnerProductSpace};
use crate::op::{AntiLinear, Op};
use crate::scalar::{parity_sign, Scalar};
use std::sync::Arc;

/// Shape of one tensor factor: its dimension and the parity of each basis vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorInfo {
    pub label: String,
    pub parities: Vec<bool>,
}

impl FactorInfo {
    pub fn dim(&self) -> usize {
        self.parities.len()
    }
}

/// A Clifford module with grading `ε`, generators `c(e_a)`, `h(e_a)` and `τ`.
///
/// `clifford[a]` and `hermitian[a]` are the operators for the a-th basis vector of
/// the parameter space; `c(v) = Σ v_a clifford[a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CliffordModule<S> {
    pub dim: usize,
    pub epsilon: Op<S>,
    pub clifford: Vec<Op<S>>,
    pub hermitian: Vec<Op<S>>,
    pub tau: AntiLinear<S>,
    pub factors: Vec<FactorInfo>,
}

impl<S: Scalar> CliffordModule<S> {
    /// The 1-dimensional even module with no generators and `τ = conj`.
    pub fn trivial() -> Self {
        CliffordModule {
            dim: 1,
            epsilon: Op::identity(1),
            clifford: Vec::new(),
            hermitian: Vec::new(),
            tau: AntiLinear::new(Op::identity(1), true),
            factors: vec![FactorInfo { label: "1".into(), parities: vec![false] }],
        }
    }

    /// `Λ*V ⊗ ℂ` with `c = v∧ − v⌟`, `h = v∧ + v⌟` and `τ = conj`.
    pub fn exterior(space: &Arc<InnerProductSpace>, label: &str) -> Result<Self> {
        let d = space.dim();
        let n = space.algebra_dim();
        let clifford = (0..d)
            .map(|a| clifford_op(space, &unit_vector::<S>(d, a)))
            .collect::<Result<Vec<_>>>()?;
        let hermitian = (0..d)
            .map(|a| hermitian_op(space, &unit_vector::<S>(d, a)))
            .collect::<Result<Vec<_>>>()?;
        Ok(CliffordModule {
            dim: n,
            epsilon: grading_op(d),
            clifford,
            hermitian,
            tau: AntiLinear::new(Op::identity(n), true),
            factors: vec![FactorInfo {
                label: label.into(),
                parities: (0..n).map(|m| m.count_ones() % 2 == 1).collect(),
            }],
        })
    }

    pub fn generator_count(&self) -> usize {
        self.clifford.len()
    }

    pub fn clifford_of(&self, v: &[S]) -> Op<S> {
        combine(&self.clifford, v, self.dim)
    }

    pub fn hermitian_of(&self, v: &[S]) -> Op<S> {
        combine(&self.hermitian, v, self.dim)
    }

    pub fn factor_dims(&self) -> Vec<usize> {
        self.factors.iter().map(FactorInfo::dim).collect()
    }
}

fn combine<S: Scalar>(ops: &[Op<S>], v: &[S], dim: usize) -> Op<S> {
    assert_eq!(ops.len(), v.len());
    ops.iter()
        .zip(v)
        .filter(|(_, x)| !x.is_zero())
        .fold(Op::zero(dim), |acc, (o, x)| acc.add(&o.scale(x)))
}

/// Graded tensor product: `c = c₁⊗1 + ε₁⊗c₂`, likewise `h`, `τ = τ₁⊗τ₂`, `ε = ε₁⊗ε₂`.
pub fn graded_tensor<S: Scalar>(m1: &CliffordModule<S>, m2: &CliffordModule<S>) -> CliffordModule<S> {
    let id2 = Op::identity(m2.dim);
    let lift = |ops1: &[Op<S>], ops2: &[Op<S>]| -> Vec<Op<S>> {
        ops1.iter()
            .map(|c| c.kron(&id2))
            .chain(ops2.iter().map(|c| m1.epsilon.kron(c)))
            .collect()
    };
    let tau = m1
        .tau
        .kron(&m2.tau)
        .expect("tensor factors must both carry anti-linear (or both linear) tau");
    let mut factors = m1.factors.clone();
    factors.extend(m2.factors.iter().cloned());
    CliffordModule {
        dim: m1.dim * m2.dim,
        epsilon: m1.epsilon.kron(&m2.epsilon),
        clifford: lift(&m1.clifford, &m2.clifford),
        hermitian: lift(&m1.hermitian, &m2.hermitian),
        tau,
        factors,
    }
}

/// Result of reordering tensor factors.
#[derive(Clone, Debug, PartialEq)]
pub struct Reordering<S> {
    /// `new factor k = old factor perm[k]`.
    pub perm: Vec<usize>,
    /// Koszul sign attached to each old basis index.
    pub signs: Vec<bool>,
    /// Target index of each old basis index.
    pub target: Vec<usize>,
    pub matrix: Op<S>,
}

fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(SpinlabError::InvalidPermutation(perm.to_vec()));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(SpinlabError::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Sign operator moving the factors of a graded tensor product into a new order.
pub fn reorder_factors<S: Scalar>(factors: &[FactorInfo], perm: &[usize]) -> Result<Reordering<S>> {
    let nf = factors.len();
    check_perm(perm, nf)?;
    let dims: Vec<usize> = factors.iter().map(FactorInfo::dim).collect();
    let total: usize = dims.iter().product();
    let mut new_stride = vec![1usize; nf];
    for k in 1..nf {
        new_stride[k] = new_stride[k - 1] * dims[perm[k - 1]];
    }
    // position of old factor f in the new order
    let mut pos = vec![0usize; nf];
    for (k, &f) in perm.iter().enumerate() {
        pos[f] = k;
    }
    let mut signs = Vec::with_capacity(total);
    let mut target = Vec::with_capacity(total);
    let mut idx = vec![0usize; nf];
    for flat in 0..total {
        let mut r = flat;
        for f in 0..nf {
            idx[f] = r % dims[f];
            r /= dims[f];
        }
        let par: Vec<bool> = (0..nf).map(|f| factors[f].parities[idx[f]]).collect();
        let mut odd = false;
        for a in 0..nf {
            for b in a + 1..nf {
                if pos[a] > pos[b] && par[a] && par[b] {
                    odd = !odd;
                }
            }
        }
        let t: usize = (0..nf).map(|f| idx[f] * new_stride[pos[f]]).sum();
        signs.push(odd);
        target.push(t);
    }
    let cols = (0..total)
        .map(|j| {
            let mut c = std::collections::BTreeMap::new();
            c.insert(target[j], parity_sign::<S>(signs[j]));
            c
        })
        .collect();
    Ok(Reordering { perm: perm.to_vec(), signs, target, matrix: Op::from_columns(total, cols) })
}

/// `G` for a module whose factor list is permuted by `perm`.
pub fn reorder_operator<S: Scalar>(m: &CliffordModule<S>, perm: &[usize]) -> Result<Op<S>> {
    Ok(reorder_factors::<S>(&m.factors, perm)?.matrix)
}

/// Graded tensor product of a list of modules, left to right.
pub fn tensor_all<S: Scalar>(mods: &[&CliffordModule<S>]) -> CliffordModule<S> {
    let mut acc = mods.first().map(|m| (*m).clone()).unwrap_or_else(CliffordModule::trivial);
    for m in mods.iter().skip(1) {
        acc = graded_tensor(&acc, m);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Qi;

    fn ext(d: usize) -> CliffordModule<Qi> {
        CliffordModule::exterior(&Arc::new(InnerProductSpace::euclidean(d)), "V").unwrap()
    }

    #[test]
    fn swap_of_two_lines_is_minus_one_on_odd_odd() {
        let m = graded_tensor(&ext(1), &ext(1));
        let g = reorder_operator(&m, &[1, 0]).unwrap();
        let diag: Vec<Qi> = vec![Qi::one(), Qi::one(), Qi::one(), -Qi::one()];
        // basis (00,01,10,11) by degrees; index = d1 + 2*d2, and the swap exchanges 01 and 10
        assert_eq!(g.get(0, 0), diag[0]);
        assert_eq!(g.get(2, 1), diag[1]);
        assert_eq!(g.get(1, 2), diag[2]);
        assert_eq!(g.get(3, 3), diag[3]);
    }

    #[test]
    fn identity_permutation_is_identity() {
        let m = tensor_all(&[&ext(1), &ext(2), &ext(1)]);
        assert_eq!(reorder_operator(&m, &[0, 1, 2]).unwrap(), Op::identity(m.dim));
    }

    #[test]
    fn invalid_permutations_rejected() {
        let m = graded_tensor(&ext(1), &ext(1));
        assert!(reorder_operator(&m, &[0, 0]).is_err());
        assert!(reorder_operator(&m, &[0]).is_err());
        assert!(reorder_operator(&m, &[0, 2]).is_err());
    }

    #[test]
    fn trivial_factor_changes_nothing() {
        let a = ext(2);
        let t = graded_tensor(&a, &CliffordModule::trivial());
        assert_eq!(t.clifford, a.clifford);
        assert_eq!(t.hermitian, a.hermitian);
        assert_eq!(t.epsilon, a.epsilon);
        let t2 = graded_tensor(&CliffordModule::trivial(), &a);
        assert_eq!(t2.clifford, a.clifford);
    }
}
