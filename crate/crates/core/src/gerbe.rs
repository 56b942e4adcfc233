//! `O(1)`-gerbes on a finite nerve. The `±1`-torsors on pairs are trivialized, so a gerbe is a
//! `ℤ/2` Čech 2-cochain `s` with `δs = 1`; everything below is `𝔽₂` linear algebra.

use crate::error::{Result, SpinlabError};
use crate::torsor::TriangulatedSphere;
use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

/// Unknown count above which [`trivialize`] refuses to run.
pub const MAX_UNKNOWNS: usize = 1 << 20;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NerveFile {
    pub vertices: usize,
    /// Every nonempty intersection, as vertex lists with up to four entries.
    pub simplices: Vec<Vec<usize>>,
}

/// Simplices up to dimension three, each stored sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NerveFile", into = "NerveFile")]
pub struct FiniteNerve {
    vertices: usize,
    simplices: [Vec<Vec<usize>>; 4],
    #[serde(skip)]
    index: HashMap<Vec<usize>, usize>,
}

impl TryFrom<NerveFile> for FiniteNerve {
    type Error = SpinlabError;

    fn try_from(f: NerveFile) -> Result<Self> {
        FiniteNerve::new(f.vertices, f.simplices)
    }
}

impl From<FiniteNerve> for NerveFile {
    fn from(n: FiniteNerve) -> Self {
        NerveFile { vertices: n.vertices, simplices: n.simplices.into_iter().flatten().collect() }
    }
}

fn faces(s: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..s.len()).map(move |k| s.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &v)| v).collect())
}

impl FiniteNerve {
    /// Validates a complete simplex list: vertices in range, no repeats, downward closed.
    pub fn new(vertices: usize, simplices: Vec<Vec<usize>>) -> Result<Self> {
        let mut sets: [BTreeSet<Vec<usize>>; 4] = Default::default();
        for mut s in simplices {
            s.sort_unstable();
            if s.is_empty() || s.len() > 4 {
                return Err(SpinlabError::Input(format!("simplex {s:?} must have 1 to 4 vertices")));
            }
            if s.windows(2).any(|w| w[0] == w[1]) || s.iter().any(|&v| v >= vertices) {
                return Err(SpinlabError::Input(format!("bad simplex {s:?}")));
            }
            sets[s.len() - 1].insert(s);
        }
        for d in 1..4 {
            for s in &sets[d] {
                if let Some(f) = faces(s).find(|f| !sets[d - 1].contains(f)) {
                    return Err(SpinlabError::Input(format!("nerve not downward closed: {s:?} lacks face {f:?}")));
                }
            }
        }
        let simplices = sets.map(|s| s.into_iter().collect::<Vec<_>>());
        let index = simplices.iter().flat_map(|l| l.iter().enumerate().map(|(i, s)| (s.clone(), i))).collect();
        Ok(FiniteNerve { vertices, simplices, index })
    }

    /// Downward closure of `maximal`, truncated at dimension three.
    pub fn closure(vertices: usize, maximal: &[Vec<usize>]) -> Result<Self> {
        let mut all = BTreeSet::new();
        let mut stack: Vec<Vec<usize>> = maximal.iter().map(|s| {
            let mut s = s.clone();
            s.sort_unstable();
            s
        }).collect();
        while let Some(s) = stack.pop() {
            if s.is_empty() || !all.insert(s.clone()) {
                continue;
            }
            stack.extend(faces(&s));
        }
        let listed: Vec<Vec<usize>> = all.into_iter().filter(|s| s.len() <= 4).collect();
        FiniteNerve::new(vertices, listed)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    /// Simplices of dimension `d` (`d + 1` vertices).
    pub fn simplices(&self, d: usize) -> &[Vec<usize>] {
        &self.simplices[d]
    }

    pub fn position(&self, s: &[usize]) -> Option<usize> {
        let mut s = s.to_vec();
        s.sort_unstable();
        self.index.get(&s).copied()
    }

    /// `(δc)_{i₀…i_{d+1}} = Π_k c_{i₀…î_k…i_{d+1}}`; signs are their own inverses.
    pub fn coboundary(&self, c: &Cochain) -> Result<Cochain> {
        self.check(c)?;
        if c.degree >= 3 {
            return Err(SpinlabError::Precondition("nerve stops at quadruples".into()));
        }
        let values = self.simplices[c.degree + 1]
            .iter()
            .map(|s| faces(s).map(|f| c.values[self.index[&f]]).product())
            .collect();
        Ok(Cochain { degree: c.degree + 1, values })
    }

    fn check(&self, c: &Cochain) -> Result<()> {
        if c.degree > 3 || c.values.len() != self.simplices[c.degree].len() {
            return Err(SpinlabError::DimensionMismatch { expected: self.simplices[c.degree.min(3)].len(), got: c.values.len() });
        }
        if c.values.iter().any(|v| v.abs() != 1) {
            return Err(SpinlabError::Input("cochain values must be ±1".into()));
        }
        Ok(())
    }

    /// `∂Δ³`: four vertices, every triple, no quadruple.
    pub fn tetrahedron_boundary() -> Self {
        let tri: Vec<Vec<usize>> = (0..4).map(|k| (0..4).filter(|&v| v != k).collect()).collect();
        FiniteNerve::closure(4, &tri).unwrap()
    }

    /// The full simplex on `k + 1 ≤ 4` vertices.
    pub fn simplex(k: usize) -> Result<Self> {
        if k > 3 {
            return Err(SpinlabError::Input("simplex dimension above 3".into()));
        }
        FiniteNerve::closure(k + 1, &[(0..=k).collect()])
    }
}

/// `±1` values on the `degree`-simplices, in the nerve's order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cochain {
    pub degree: usize,
    pub values: Vec<i8>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CochainEntry {
    pub simplex: Vec<usize>,
    pub sign: i8,
}

/// Sparse form: unlisted simplices carry `+1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CochainFile {
    pub degree: usize,
    #[serde(default)]
    pub entries: Vec<CochainEntry>,
}

impl Cochain {
    pub fn trivial(nerve: &FiniteNerve, degree: usize) -> Self {
        Cochain { degree, values: vec![1; nerve.simplices[degree.min(3)].len()] }
    }

    pub fn mul(&self, o: &Cochain) -> Result<Cochain> {
        if self.degree != o.degree || self.values.len() != o.values.len() {
            return Err(SpinlabError::SpaceMismatch);
        }
        Ok(Cochain { degree: self.degree, values: self.values.iter().zip(&o.values).map(|(a, b)| a * b).collect() })
    }

    pub fn from_file(nerve: &FiniteNerve, f: &CochainFile) -> Result<Self> {
        if f.degree > 3 {
            return Err(SpinlabError::Input(format!("cochain degree {}", f.degree)));
        }
        let mut c = Cochain::trivial(nerve, f.degree);
        for e in &f.entries {
            if e.simplex.len() != f.degree + 1 {
                return Err(SpinlabError::Input(format!("{:?} is not a {}-simplex", e.simplex, f.degree)));
            }
            let k = nerve.position(&e.simplex).ok_or_else(|| SpinlabError::Input(format!("{:?} not in the nerve", e.simplex)))?;
            if e.sign.abs() != 1 {
                return Err(SpinlabError::Input("cochain values must be ±1".into()));
            }
            c.values[k] = e.sign;
        }
        Ok(c)
    }

    pub fn to_file(&self, nerve: &FiniteNerve) -> CochainFile {
        let entries = self
            .values
            .iter()
            .zip(nerve.simplices(self.degree))
            .filter(|(v, _)| **v == -1)
            .map(|(_, s)| CochainEntry { simplex: s.clone(), sign: -1 })
            .collect();
        CochainFile { degree: self.degree, entries }
    }
}

#[derive(Clone, Debug)]
pub struct O1Gerbe {
    pub nerve: FiniteNerve,
    pub s: Cochain,
}

impl O1Gerbe {
    pub fn new(nerve: FiniteNerve, s: Cochain) -> Result<Self> {
        if s.degree != 2 {
            return Err(SpinlabError::Input("gerbe data is a 2-cochain".into()));
        }
        nerve.check(&s)?;
        Ok(O1Gerbe { nerve, s })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CocycleReport {
    pub passed: bool,
    pub quadruples: usize,
    pub failures: Vec<Vec<usize>>,
}

/// `(δs)_{ijkl} = s_jkl s_ikl s_ijl s_ijk` on every quadruple.
pub fn verify_cocycle(g: &O1Gerbe) -> CocycleReport {
    let ds = g.nerve.coboundary(&g.s).expect("validated gerbe");
    let failures: Vec<Vec<usize>> =
        ds.values.iter().zip(g.nerve.simplices(3)).filter(|(v, _)| **v == -1).map(|(_, s)| s.clone()).collect();
    CocycleReport { passed: failures.is_empty(), quadruples: ds.values.len(), failures }
}

/// A mod-2 2-cycle `z` with `Π_{t ∈ z} s_t = −1`; since `⟨δu, z⟩ = ⟨u, ∂z⟩ = 1`, no `u` has `δu = s`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Obstruction {
    pub cycle: Vec<Vec<usize>>,
}

impl Obstruction {
    pub fn verify(&self, g: &O1Gerbe) -> bool {
        let mut boundary: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut pairing = 1i8;
        for t in &self.cycle {
            let Some(k) = g.nerve.position(t).filter(|_| t.len() == 3) else { return false };
            pairing *= g.s.values[k];
            for f in faces(&g.nerve.simplices(2)[k]) {
                *boundary.entry(f).or_default() += 1;
            }
        }
        !self.cycle.is_empty() && pairing == -1 && boundary.values().all(|c| c % 2 == 0)
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trivialization {
    Trivial { u: Cochain },
    Obstructed(Obstruction),
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn flip(&mut self, i: usize) {
        self.0[i / 64] ^= 1 << (i % 64);
    }
    fn xor(&mut self, o: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a ^= b;
        }
    }
    fn is_zero(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
}

/// Solves `δu = s` over `𝔽₂` by Gaussian elimination; an inconsistent row yields the cycle.
pub fn trivialize(g: &O1Gerbe) -> Result<Trivialization> {
    let edges = g.nerve.simplices(1).len();
    if edges > MAX_UNKNOWNS {
        return Err(SpinlabError::TooLarge(format!("{edges} unknowns")));
    }
    let report = verify_cocycle(g);
    if !report.passed {
        return Err(SpinlabError::Precondition(format!("δs ≠ 1 on {:?}", report.failures[0])));
    }
    let tris = g.nerve.simplices(2);
    // row = (coefficients over edges, combination over triangles, rhs)
    let mut rows: Vec<(Bits, Bits, bool)> = tris
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let mut a = Bits::new(edges);
            for f in faces(t) {
                a.flip(g.nerve.index[&f]);
            }
            let mut c = Bits::new(tris.len());
            c.flip(k);
            (a, c, g.s.values[k] == -1)
        })
        .collect();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    for col in 0..edges {
        let Some(p) = (next..rows.len()).find(|&r| rows[r].0.get(col)) else { continue };
        rows.swap(next, p);
        let pivot = rows[next].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next && row.0.get(col) {
                row.0.xor(&pivot.0);
                row.1.xor(&pivot.1);
                row.2 ^= pivot.2;
            }
        }
        pivots.push((next, col));
        next += 1;
    }
    if let Some(bad) = rows[next..].iter().find(|r| r.2 && r.0.is_zero()) {
        let cycle = (0..tris.len()).filter(|&k| bad.1.get(k)).map(|k| tris[k].clone()).collect();
        return Ok(Trivialization::Obstructed(Obstruction { cycle }));
    }
    let mut u = Cochain::trivial(&g.nerve, 1);
    for (r, col) in pivots {
        if rows[r].2 {
            u.values[col] = -1;
        }
    }
    debug_assert_eq!(g.nerve.coboundary(&u).ok().as_ref(), Some(&g.s));
    Ok(Trivialization::Trivial { u })
}

#[derive(Clone, Debug, Serialize)]
pub struct IsomorphismReport {
    pub passed: bool,
    /// Triples where `s₁ ≠ s₂ · δ(edge map)`.
    pub mismatches: Vec<Vec<usize>>,
}

/// Checks that the edge data `e_ij` intertwines the sections: `s₁ = s₂ · δe`.
pub fn gerbe_isomorphism(g1: &O1Gerbe, g2: &O1Gerbe, edge_map: &Cochain) -> Result<IsomorphismReport> {
    if g1.nerve != g2.nerve {
        return Err(SpinlabError::SpaceMismatch);
    }
    if edge_map.degree != 1 {
        return Err(SpinlabError::Input("edge map is a 1-cochain".into()));
    }
    let twisted = g2.s.mul(&g1.nerve.coboundary(edge_map)?)?;
    let mismatches: Vec<Vec<usize>> = g1
        .s
        .values
        .iter()
        .zip(&twisted.values)
        .zip(g1.nerve.simplices(2))
        .filter(|((a, b), _)| a != b)
        .map(|(_, t)| t.clone())
        .collect();
    Ok(IsomorphismReport { passed: mismatches.is_empty(), mismatches })
}

/// An edge map for [`gerbe_isomorphism`], or the cycle separating the two classes.
pub fn find_isomorphism(g1: &O1Gerbe, g2: &O1Gerbe) -> Result<Trivialization> {
    if g1.nerve != g2.nerve {
        return Err(SpinlabError::SpaceMismatch);
    }
    trivialize(&O1Gerbe::new(g1.nerve.clone(), g1.s.mul(&g2.s)?)?)
}

/// The six-vertex `ℝP²` as the icosahedron modulo the antipodal map, with the sign cocycle
/// `t_ij ∈ {0, 1}` of its double cover (the tautological line bundle).
pub fn rp2_nerve() -> (FiniteNerve, Cochain) {
    let ico = TriangulatedSphere::icosphere(0).expect("icosahedron");
    let reps: Vec<usize> = (0..ico.vertices.len()).filter(|&v| v < ico.antipode[v]).collect();
    let class = |v: usize| reps.iter().position(|&r| r == v.min(ico.antipode[v])).unwrap();
    let tris: Vec<Vec<usize>> = ico.faces.iter().map(|f| f.iter().map(|&v| class(v)).collect()).collect();
    let nerve = FiniteNerve::closure(6, &tris).expect("ℝP² nerve");
    let adjacent = |a: usize, b: usize| ico.faces.iter().any(|f| f.contains(&a) && f.contains(&b));
    let values = nerve.simplices(1).iter().map(|e| if adjacent(reps[e[0]], reps[e[1]]) { 1 } else { -1 }).collect();
    (nerve, Cochain { degree: 1, values })
}

/// Lifts the transition functions `diag(t, t, 1) ∈ SO(3)` of `L ⊕ L ⊕ ℝ` to `SU(2)`
/// (a half turn about the third axis lifts to `k`) and returns `s_ijk = ĝ_ij ĝ_jk ĝ_ik⁻¹ ∈ {±1}`.
pub fn rp2_lift_gerbe() -> O1Gerbe {
    let (nerve, t) = rp2_nerve();
    let lift = |e: &[usize]| {
        let k = nerve.position(e).unwrap();
        if t.values[k] == 1 {
            UnitQuaternion::identity()
        } else {
            UnitQuaternion::from_axis_angle(&nalgebra::Vector3::z_axis(), std::f64::consts::PI)
        }
    };
    let values = nerve
        .simplices(2)
        .iter()
        .map(|s| {
            let q = lift(&[s[0], s[1]]) * lift(&[s[1], s[2]]) * lift(&[s[0], s[2]]).inverse();
            // q = ±1 because the SO(3) cocycle closes
            if q.w > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    O1Gerbe::new(nerve, Cochain { degree: 2, values }).unwrap()
}
