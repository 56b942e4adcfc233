//! The standard rank-3 triple `(ℝ³, L₀, ι̃₀)`: `L₀ = S³ ×_{U(1)} ℂ` over
//! `S² ≅ ℂP¹`, its antipodal lift, the `SU(2)` action, lattice Chern numbers
//! on centrally symmetric sphere meshes and the two-component invariant of
//! `C = {φ: S² → ℂ^×, φ(x) = conj φ(−x)}`.
//!
//! A point of `S³ ⊂ ℂ²` is read as the quaternion `q = z + j w`. Then `B ∈ SU(2)`
//! acts by left multiplication, the `U(1)` action by right multiplication with
//! `e^{iθ}`, and `ι(z, w) = (−w̄, z̄)` is right multiplication by `j`. The base
//! point is `q i q̄ ∈ Im ℍ`, read in `ℝ³` through `(a, b, c) ↦ ci + bj − ak`.

use crate::error::{Result, SpinlabError};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

type C = Complex64;

/// Quaternion `s + x i + y j + z k`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Quat([f64; 4]);

impl Quat {
    fn mul(self, o: Quat) -> Quat {
        let [a1, b1, c1, d1] = self.0;
        let [a2, b2, c2, d2] = o.0;
        Quat([
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ])
    }

    fn conj(self) -> Quat {
        let [a, b, c, d] = self.0;
        Quat([a, -b, -c, -d])
    }

    fn norm(self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn scale(self, s: f64) -> Quat {
        Quat(self.0.map(|x| x * s))
    }

    /// `z + j w` with `j w = w₀ j − w₁ k`.
    fn from_pair(q: [C; 2]) -> Quat {
        Quat([q[0].re, q[0].im, q[1].re, -q[1].im])
    }

    fn to_pair(self) -> [C; 2] {
        let [s, x, y, z] = self.0;
        [C::new(s, x), C::new(y, -z)]
    }

    fn from_vec3(p: [f64; 3]) -> Quat {
        Quat([0.0, p[2], p[1], -p[0]])
    }

    fn to_vec3(self) -> [f64; 3] {
        [-self.0[3], self.0[2], self.0[1]]
    }
}

const I: Quat = Quat([0.0, 1.0, 0.0, 0.0]);
const J: Quat = Quat([0.0, 0.0, 1.0, 0.0]);

/// Base point of a unit `(z, w)`.
pub fn hopf(q: [C; 2]) -> [f64; 3] {
    let h = Quat::from_pair(q);
    h.mul(I).mul(h.conj()).to_vec3()
}

/// A unit lift of `p ∈ S²`.
pub fn lift(p: [f64; 3]) -> [C; 2] {
    // a half-turn about the bisector of i and P carries i to P
    let pq = Quat::from_vec3(p);
    let plus = Quat([0.0, pq.0[1] + 1.0, pq.0[2], pq.0[3]]);
    let q = if plus.norm() >= 1.0 {
        plus.scale(1.0 / plus.norm())
    } else {
        let minus = Quat([0.0, pq.0[1] - 1.0, pq.0[2], pq.0[3]]);
        minus.scale(1.0 / minus.norm()).mul(J)
    };
    q.to_pair()
}

/// `ι(z, w) = (−w̄, z̄)`.
pub fn iota(q: [C; 2]) -> [C; 2] {
    [-q[1].conj(), q[0].conj()]
}

/// `B = [[a, −b̄], [b, ā]]`, the unit quaternion `a + j b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Su2 {
    pub a: C,
    pub b: C,
}

impl Su2 {
    pub fn identity() -> Self {
        Su2 { a: C::new(1.0, 0.0), b: C::new(0.0, 0.0) }
    }

    pub fn from_matrix(m: [[C; 2]; 2]) -> Result<Self> {
        let (a, b) = (m[0][0], m[1][0]);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let off = (m[0][1] + b.conj()).norm() + (m[1][1] - a.conj()).norm();
        if off > 1e-12 || (det - 1.0).norm() > 1e-12 {
            return Err(SpinlabError::Input(format!("not special unitary (det {det})")));
        }
        Ok(Su2 { a, b })
    }

    pub fn matrix(&self) -> [[C; 2]; 2] {
        [[self.a, -self.b.conj()], [self.b, self.a.conj()]]
    }

    /// Haar-random element.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let g: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        Su2 { a: C::new(g[0] / n, g[1] / n), b: C::new(g[2] / n, g[3] / n) }
    }

    pub fn apply(&self, q: [C; 2]) -> [C; 2] {
        [self.a * q[0] - self.b.conj() * q[1], self.b * q[0] + self.a.conj() * q[1]]
    }

    pub fn mul(&self, o: &Su2) -> Su2 {
        let m = self.matrix();
        Su2 { a: m[0][0] * o.a + m[0][1] * o.b, b: m[1][0] * o.a + m[1][1] * o.b }
    }

    pub fn neg(&self) -> Su2 {
        Su2 { a: -self.a, b: -self.b }
    }

    fn quat(&self) -> Quat {
        Quat::from_pair([self.a, self.b])
    }

    /// The rotation `p ↦ u p ū` of `ℝ³`, rows of the matrix.
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let u = self.quat();
        let cols: Vec<[f64; 3]> = (0..3)
            .map(|k| {
                let mut e = [0.0; 3];
                e[k] = 1.0;
                u.mul(Quat::from_vec3(e)).mul(u.conj()).to_vec3()
            })
            .collect();
        std::array::from_fn(|r| std::array::from_fn(|c| cols[c][r]))
    }
}

/// A representative `(q, α)` of `[q, α] ∈ L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberElement {
    pub q: [C; 2],
    pub alpha: C,
}

/// `(ℝ³, L, ι̃)` with `U(1)` acting on the fiber with weight `k = c₁(L)`; `k = 1` is `L₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StandardTriple {
    pub weight: i32,
}

impl StandardTriple {
    pub fn standard() -> Self {
        StandardTriple { weight: 1 }
    }

    /// `L ⊗ L′`.
    pub fn tensor(&self, other: &StandardTriple) -> Self {
        StandardTriple { weight: self.weight + other.weight }
    }

    /// The lift of the base point with component `chart` real and positive.
    pub fn chart_lift(&self, q: [C; 2], chart: usize) -> Result<[C; 2]> {
        let c = q[chart];
        let r = c.norm();
        if r < 1e-12 {
            return Err(SpinlabError::Precondition(format!("point outside chart {chart}")));
        }
        let lam = c.conj() / r;
        let mut out = [q[0] * lam, q[1] * lam];
        out[chart] = C::new(r, 0.0);
        Ok(out)
    }

    /// Fiber coordinate of `[q, α]` in `chart`, where `(qλ, λ^k α) ~ (q, α)`.
    pub fn chart_coord(&self, e: &FiberElement, chart: usize) -> Result<C> {
        let c = e.q[chart];
        let r = c.norm();
        if r < 1e-12 {
            return Err(SpinlabError::Precondition(format!("point outside chart {chart}")));
        }
        Ok(e.alpha * (c.conj() / r).powi(self.weight))
    }

    /// `g₁₀(p)` with `α₁ = g₁₀ α₀`; equals `(ζ/|ζ|)^k` for `ζ = z/w`.
    pub fn transition(&self, p: [f64; 3]) -> Result<C> {
        let e = FiberElement { q: lift(p), alpha: C::new(1.0, 0.0) };
        Ok(self.chart_coord(&e, 1)? / self.chart_coord(&e, 0)?)
    }

    pub fn iota_tilde(&self, e: &FiberElement) -> FiberElement {
        FiberElement { q: iota(e.q), alpha: e.alpha.conj() }
    }

    pub fn phi_b(&self, b: &Su2, e: &FiberElement) -> FiberElement {
        FiberElement { q: b.apply(e.q), alpha: e.alpha }
    }

    /// `s` with `y = s·x`, both over the same base point.
    pub fn ratio(&self, y: &FiberElement, x: &FiberElement) -> Result<C> {
        let chart = if x.q[0].norm() >= x.q[1].norm() { 0 } else { 1 };
        Ok(self.chart_coord(y, chart)? / self.chart_coord(x, chart)?)
    }

    /// `⟨q̄₁, q̄₂⟩^k`: the fiber of `L₁` over `[q]` is spanned by `q̄`.
    fn overlap(&self, q1: [C; 2], q2: [C; 2]) -> C {
        let s = q1[0] * q2[0].conj() + q1[1] * q2[1].conj();
        s.powi(self.weight)
    }
}

/// `ι̃²` as a fiber scalar over a point of each chart; both equal `(−1)^k` exactly.
pub fn antipodal_lift_square(triple: &StandardTriple) -> Result<[C; 2]> {
    let mut out = [C::new(0.0, 0.0); 2];
    for (chart, p) in [(0usize, [0.3, -0.4, 0.2f64]), (1, [-0.5, 0.1, -0.7])] {
        let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let q = triple.chart_lift(lift(p.map(|x| x / n)), chart)?;
        let x = FiberElement { q, alpha: C::new(1.0, 0.0) };
        let y = triple.iota_tilde(&triple.iota_tilde(&x));
        out[chart] = triple.chart_coord(&y, chart)? / triple.chart_coord(&x, chart)?;
    }
    Ok(out)
}

/// Closed triangulated sphere with an antipodal vertex involution.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangulatedSphere {
    pub vertices: Vec<[f64; 3]>,
    /// Counter-clockwise seen from outside.
    pub faces: Vec<[usize; 3]>,
    pub antipode: Vec<usize>,
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    p.map(|x| x / n)
}

fn key(p: [f64; 3]) -> [i64; 3] {
    p.map(|x| (x * 1e9).round() as i64)
}

impl TriangulatedSphere {
    /// Icosahedron refined `level` times by edge midpoints: `20·4^level` faces.
    pub fn icosphere(level: u32) -> Result<Self> {
        let g = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<[f64; 3]> = [
            [-1.0, g, 0.0],
            [1.0, g, 0.0],
            [-1.0, -g, 0.0],
            [1.0, -g, 0.0],
            [0.0, -1.0, g],
            [0.0, 1.0, g],
            [0.0, -1.0, -g],
            [0.0, 1.0, -g],
            [g, 0.0, -1.0],
            [g, 0.0, 1.0],
            [-g, 0.0, -1.0],
            [-g, 0.0, 1.0],
        ]
        .into_iter()
        .map(normalize)
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            for f in &faces {
                let m: [usize; 3] = std::array::from_fn(|e| {
                    let (a, b) = (f[e], f[(e + 1) % 3]);
                    *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                        let p = normalize(std::array::from_fn(|k| vertices[a][k] + vertices[b][k]));
                        vertices.push(p);
                        vertices.len() - 1
                    })
                });
                next.push([f[0], m[0], m[2]]);
                next.push([f[1], m[1], m[0]]);
                next.push([f[2], m[2], m[1]]);
                next.push([m[0], m[1], m[2]]);
            }
            faces = next;
        }
        Self::from_parts(vertices, faces)
    }

    /// Validates a mesh: unit vertices, outward faces, closed with `χ = 2`, centrally symmetric.
    pub fn from_parts(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let vertices: Vec<[f64; 3]> = vertices.into_iter().map(normalize).collect();
        let index: HashMap<[i64; 3], usize> = vertices.iter().enumerate().map(|(i, p)| (key(*p), i)).collect();
        let antipode: Vec<usize> = vertices
            .iter()
            .map(|p| index.get(&key(p.map(|x| -x))).copied())
            .collect::<Option<_>>()
            .ok_or_else(|| SpinlabError::Input("mesh is not centrally symmetric".into()))?;
        for f in &faces {
            if f.iter().any(|&v| v >= vertices.len()) {
                return Err(SpinlabError::Input("face index out of range".into()));
            }
            let [a, b, c] = f.map(|v| vertices[v]);
            let n = cross(sub(b, a), sub(c, a));
            if dot(n, a) <= 0.0 {
                return Err(SpinlabError::Input(format!("face {f:?} is not outward")));
            }
        }
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &faces {
            for e in 0..3 {
                *edges.entry((f[e], f[(e + 1) % 3])).or_default() += 1;
            }
        }
        if edges.iter().any(|(&(a, b), &n)| n != 1 || edges.get(&(b, a)) != Some(&1)) {
            return Err(SpinlabError::Input("mesh is not a closed oriented surface".into()));
        }
        let euler = vertices.len() as i64 - (edges.len() / 2) as i64 + faces.len() as i64;
        if euler != 2 {
            return Err(SpinlabError::Input(format!("Euler characteristic {euler}")));
        }
        let mesh = TriangulatedSphere { vertices, faces, antipode };
        // the antipode of a face, read with reversed orientation, is again a face
        let set: std::collections::HashSet<[usize; 3]> = mesh.faces.iter().map(|f| canonical(*f)).collect();
        for f in &mesh.faces {
            let g = [mesh.antipode[f[0]], mesh.antipode[f[2]], mesh.antipode[f[1]]];
            if !set.contains(&canonical(g)) {
                return Err(SpinlabError::Input("antipodal map does not preserve faces".into()));
            }
        }
        Ok(mesh)
    }

    pub fn euler_characteristic(&self) -> i64 {
        let edges: std::collections::HashSet<(usize, usize)> =
            self.faces.iter().flat_map(|f| (0..3).map(move |e| (f[e].min(f[(e + 1) % 3]), f[e].max(f[(e + 1) % 3])))).collect();
        self.vertices.len() as i64 - edges.len() as i64 + self.faces.len() as i64
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                if !adj[a].contains(&b) {
                    adj[a].push(b);
                }
                if !adj[b].contains(&a) {
                    adj[b].push(a);
                }
            }
        }
        adj
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            s += &format!("{:.17} {:.17} {:.17}\n", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            s += &format!("3 {} {} {}\n", f[0], f[1], f[2]);
        }
        s
    }

    pub fn from_off(text: &str) -> Result<Self> {
        let mut tokens = text.lines().map(|l| l.split('#').next().unwrap_or("")).flat_map(str::split_whitespace);
        if tokens.next() != Some("OFF") {
            return Err(SpinlabError::Input("missing OFF header".into()));
        }
        let mut num = |what: &str| -> Result<f64> {
            tokens
                .next()
                .ok_or_else(|| SpinlabError::Input(format!("truncated OFF at {what}")))?
                .parse::<f64>()
                .map_err(|e| SpinlabError::Input(format!("{what}: {e}")))
        };
        let (nv, nf, _) = (num("counts")? as usize, num("counts")? as usize, num("counts")?);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            vertices.push([num("vertex")?, num("vertex")?, num("vertex")?]);
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            if num("face")? as usize != 3 {
                return Err(SpinlabError::Input("only triangles are supported".into()));
            }
            faces.push([num("face")? as usize, num("face")? as usize, num("face")? as usize]);
        }
        Self::from_parts(vertices, faces)
    }
}

fn canonical(f: [usize; 3]) -> [usize; 3] {
    let r = (0..3).min_by_key(|&k| f[k]).unwrap();
    [f[r], f[(r + 1) % 3], f[(r + 2) % 3]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|k| a[k] - b[k])
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[derive(Clone, Debug, Serialize)]
pub struct ChernReport {
    pub value: i64,
    /// Plaquette phase sum over `2π` before rounding.
    pub raw: f64,
    pub residue: f64,
    pub max_plaquette_phase: f64,
}

pub const MIN_CHERN_FACES: usize = 80;
const MAX_PLAQUETTE_PHASE: f64 = PI / 2.0;

/// Lattice field strength: the phase of `⟨v₁,v₂⟩⟨v₂,v₃⟩⟨v₃,v₁⟩` per face, summed over `2π`.
pub fn chern_number(triple: &StandardTriple, mesh: &TriangulatedSphere) -> Result<ChernReport> {
    if mesh.faces.len() < MIN_CHERN_FACES {
        return Err(SpinlabError::RefineMesh(format!("{} faces, need {MIN_CHERN_FACES}", mesh.faces.len())));
    }
    let lifts: Vec<[C; 2]> = mesh.vertices.iter().map(|&p| lift(p)).collect();
    let mut total = 0.0;
    let mut max_phase: f64 = 0.0;
    for f in &mesh.faces {
        let u = triple.overlap(lifts[f[0]], lifts[f[1]]) * triple.overlap(lifts[f[1]], lifts[f[2]]) * triple.overlap(lifts[f[2]], lifts[f[0]]);
        let phase = u.arg();
        if phase.abs() > MAX_PLAQUETTE_PHASE {
            return Err(SpinlabError::RefineMesh(format!("plaquette phase {phase:.3} on face {f:?}")));
        }
        max_phase = max_phase.max(phase.abs());
        total += phase;
    }
    let raw = total / (2.0 * PI);
    let value = raw.round();
    Ok(ChernReport { value: value as i64, raw, residue: (raw - value).abs(), max_plaquette_phase: max_phase })
}

/// Samples of `φ ∈ C` on mesh vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivariantFunction {
    pub values: Vec<C>,
}

impl EquivariantFunction {
    /// Samples `f` and makes `φ(−x) = conj φ(x)` exact on antipodal pairs.
    pub fn from_fn(mesh: &TriangulatedSphere, f: impl Fn([f64; 3]) -> C) -> Result<Self> {
        let mut values: Vec<C> = mesh.vertices.iter().map(|&p| f(p)).collect();
        for i in 0..values.len() {
            let j = mesh.antipode[i];
            if i < j {
                if (values[j] - values[i].conj()).norm() > 1e-9 * values[i].norm().max(1.0) {
                    return Err(SpinlabError::Input(format!("φ(−x) ≠ conj φ(x) at vertex {i}")));
                }
                values[j] = values[i].conj();
            }
        }
        let phi = EquivariantFunction { values };
        phi.validate(mesh)?;
        Ok(phi)
    }

    pub fn validate(&self, mesh: &TriangulatedSphere) -> Result<()> {
        if self.values.len() != mesh.vertices.len() {
            return Err(SpinlabError::DimensionMismatch { expected: mesh.vertices.len(), got: self.values.len() });
        }
        for (i, v) in self.values.iter().enumerate() {
            if !(v.norm() > 0.0) {
                return Err(SpinlabError::Input(format!("φ vanishes at vertex {i}")));
            }
            if self.values[mesh.antipode[i]] != v.conj() {
                return Err(SpinlabError::Input(format!("antipodal relation fails at vertex {i}")));
            }
        }
        Ok(())
    }
}

/// Shortest edge path from `from` to `to`.
fn edge_path(adj: &[Vec<usize>], from: usize, to: usize) -> Vec<usize> {
    let mut prev = vec![usize::MAX; adj.len()];
    prev[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for &w in &adj[v] {
            if prev[w] == usize::MAX {
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    let mut path = vec![to];
    while *path.last().unwrap() != from {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    path
}

const MAX_LIFT_STEP: f64 = PI / 2.0;

/// Continuous phase increment along a path, rejecting steps of `π/2` or more.
fn lift_along(values: &[C], path: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for w in path.windows(2) {
        let step = (values[w[1]] / values[w[0]]).arg();
        if step.abs() >= MAX_LIFT_STEP {
            return Err(SpinlabError::RefineMesh(format!("phase step {step:.3} between vertices {} and {}", w[0], w[1])));
        }
        total += step;
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentReport {
    /// `(−1)^n`.
    pub sign: i8,
    pub n: i64,
    pub base_points: usize,
}

/// `(−1)^n` with `θ(x) + θ(−x) = 2πn`, lifted along edge paths from several base points.
pub fn component_invariant(mesh: &TriangulatedSphere, phi: &EquivariantFunction) -> Result<ComponentReport> {
    phi.validate(mesh)?;
    let adj = mesh.neighbors();
    let nv = mesh.vertices.len();
    let bases: Vec<usize> = (0..8).map(|k| k * nv / 8).collect();
    let mut parity: Option<(i64, i64)> = None;
    for &x in &bases {
        let theta_x = phi.values[x].arg();
        let theta_minus = theta_x + lift_along(&phi.values, &edge_path(&adj, x, mesh.antipode[x]))?;
        let n_raw = (theta_x + theta_minus) / (2.0 * PI);
        let n = n_raw.round();
        if (n_raw - n).abs() > 1e-6 {
            return Err(SpinlabError::RefineMesh(format!("non-integral winding {n_raw}")));
        }
        let n = n as i64;
        match parity {
            None => parity = Some((n, n.rem_euclid(2))),
            Some((_, p)) if p != n.rem_euclid(2) => {
                return Err(SpinlabError::RefineMesh("base points disagree on the invariant".into()))
            }
            _ => {}
        }
    }
    let (n, p) = parity.unwrap();
    Ok(ComponentReport { sign: if p == 0 { 1 } else { -1 }, n, base_points: bases.len() })
}

/// `φ = χ/|χ|²` for a continuous square root `χ² = ψ` over the vertices in `patch`
/// (all of them when `None`), so that `conj φ(x)/φ(−x)·ψ(x) = 1` where both `±x` are sampled.
pub fn local_square_root_correction(mesh: &TriangulatedSphere, psi: &[C], patch: Option<&[bool]>) -> Result<Vec<Option<C>>> {
    let nv = mesh.vertices.len();
    if psi.len() != nv {
        return Err(SpinlabError::DimensionMismatch { expected: nv, got: psi.len() });
    }
    let inside = |v: usize| patch.is_none_or(|p| p[v]);
    for v in (0..nv).filter(|&v| inside(v)) {
        if !(psi[v].norm() > 0.0) {
            return Err(SpinlabError::Input(format!("ψ vanishes at vertex {v}")));
        }
        let a = mesh.antipode[v];
        if inside(a) && (psi[v] * psi[a].conj() - 1.0).norm() > 1e-9 {
            return Err(SpinlabError::Input(format!("ψ(x)·conj ψ(−x) ≠ 1 at vertex {v}")));
        }
    }
    let adj = mesh.neighbors();
    let mut chi: Vec<Option<C>> = vec![None; nv];
    let Some(start) = (0..nv).find(|&v| inside(v)) else { return Ok(chi) };
    chi[start] = Some(psi[start].sqrt());
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let cv = chi[v].unwrap();
        for &w in adj[v].iter().filter(|&&w| inside(w)) {
            let step = (psi[w] / psi[v]).arg();
            if step.abs() >= MAX_LIFT_STEP {
                return Err(SpinlabError::RefineMesh(format!("phase step {step:.3} on edge {v}-{w}")));
            }
            let cand = cv * (psi[w] / psi[v]).sqrt();
            match chi[w] {
                None => {
                    chi[w] = Some(cand);
                    queue.push_back(w);
                }
                Some(c) if (c - cand).norm() > 1e-8 * c.norm() => {
                    return Err(SpinlabError::Precondition(format!("square root does not close up around vertex {w}: patch not simply connected")));
                }
                _ => {}
            }
        }
    }
    if let Some(v) = (0..nv).find(|&v| inside(v) && chi[v].is_none()) {
        return Err(SpinlabError::Precondition(format!("patch is disconnected at vertex {v}")));
    }
    Ok(chi.into_iter().map(|c| c.map(|c| c / c.norm_sqr())).collect())
}
