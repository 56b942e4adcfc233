use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinlab::torsor::*;
use spinlab::SpinlabError;
use std::f64::consts::PI;

/// Rotation of `ℝ³` induced by `u = a + j b` through `(a, b, c) ↦ ci + bj − ak`, via nalgebra.
fn oracle_rotate(b: &Su2, p: [f64; 3]) -> [f64; 3] {
    let u = UnitQuaternion::from_quaternion(Quaternion::new(b.a.re, b.a.im, b.b.re, -b.b.im));
    let v = u.transform_vector(&Vector3::new(p[2], p[1], -p[0]));
    [-v.z, v.y, v.x]
}

fn unit(p: [f64; 3]) -> [f64; 3] {
    let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    p.map(|x| x / n)
}

fn random_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    unit(std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
}

fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
    (0..3).all(|k| (a[k] - b[k]).abs() < tol)
}

#[test]
fn antipodal_square_by_weight() {
    for (k, expect) in [(1, -1.0), (2, 1.0), (0, 1.0), (3, -1.0)] {
        let sq = antipodal_lift_square(&StandardTriple { weight: k }).unwrap();
        assert_eq!(sq, [C::new(expect, 0.0); 2], "weight {k}");
    }
    // four applications are the identity
    let t = StandardTriple::standard();
    let x = FiberElement { q: lift(unit([0.2, 0.7, -0.1])), alpha: C::new(0.3, -1.2) };
    let y = (0..4).fold(x, |e, _| t.iota_tilde(&e));
    assert_eq!(y, x);
}

#[test]
fn iota_tilde_is_antilinear_and_covers_antipode() {
    let t = StandardTriple::standard();
    let q = lift(unit([0.5, -0.3, 0.4]));
    let x = FiberElement { q, alpha: C::new(1.0, 0.0) };
    let s = C::new(0.6, 0.8);
    let sx = FiberElement { q, alpha: s };
    let r = t.ratio(&t.iota_tilde(&sx), &t.iota_tilde(&x)).unwrap();
    assert!((r - s.conj()).norm() < 1e-15);
    assert!(close(hopf(t.iota_tilde(&x).q), hopf(q).map(|v| -v), 1e-15));
}

#[test]
fn transition_is_phase_of_z_over_w() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in [1, 2, -1] {
        let t = StandardTriple { weight: k };
        for _ in 0..20 {
            let p = random_point(&mut rng);
            let q = lift(p);
            let zeta = q[0] / q[1];
            let g = t.transition(p).unwrap();
            assert!((g - (zeta / zeta.norm()).powi(k)).norm() < 1e-13);
            // independent of the lift
            let lam = C::from_polar(1.0, rng.random_range(0.0..6.0));
            let e = FiberElement { q: [q[0] * lam, q[1] * lam], alpha: C::new(1.0, 0.0) };
            let g2 = t.chart_coord(&e, 1).unwrap() / t.chart_coord(&e, 0).unwrap();
            assert!((g - g2).norm() < 1e-13);
        }
    }
}

#[test]
fn chern_numbers() {
    let l0 = StandardTriple::standard();
    for level in 2..=3 {
        let mesh = TriangulatedSphere::icosphere(level).unwrap();
        let r = chern_number(&l0, &mesh).unwrap();
        assert_eq!(r.value, 1);
        assert!(r.residue < 1e-9, "{r:?}");
    }
    let mesh = TriangulatedSphere::icosphere(2).unwrap();
    assert_eq!(chern_number(&StandardTriple { weight: 0 }, &mesh).unwrap().value, 0);
    assert_eq!(chern_number(&l0.tensor(&l0), &mesh).unwrap().value, 2);
    let coarse = TriangulatedSphere::icosphere(0).unwrap();
    assert!(matches!(chern_number(&l0, &coarse), Err(SpinlabError::RefineMesh(_))));
    // 80 faces is enough for L₀, not for a high weight
    let m80 = TriangulatedSphere::icosphere(1).unwrap();
    assert_eq!(chern_number(&l0, &m80).unwrap().value, 1);
    assert!(matches!(chern_number(&StandardTriple { weight: 40 }, &m80), Err(SpinlabError::RefineMesh(_))));
}

#[test]
fn off_roundtrip_and_validation() {
    let mesh = TriangulatedSphere::icosphere(1).unwrap();
    let back = TriangulatedSphere::from_off(&mesh.to_off()).unwrap();
    assert_eq!(back.faces, mesh.faces);
    assert_eq!(back.antipode, mesh.antipode);
    assert!(back.vertices.iter().zip(&mesh.vertices).all(|(a, b)| close(*a, *b, 1e-15)));
    // dropping a face opens the surface
    let mut open = mesh.clone();
    open.faces.pop();
    assert!(TriangulatedSphere::from_parts(open.vertices, open.faces).is_err());
    // reversing every face points them inward
    let flipped: Vec<[usize; 3]> = mesh.faces.iter().map(|f| [f[0], f[2], f[1]]).collect();
    assert!(TriangulatedSphere::from_parts(mesh.vertices.clone(), flipped).is_err());
    // a tetrahedron is not centrally symmetric
    let tet = "OFF\n4 4 0\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n";
    assert!(TriangulatedSphere::from_off(tet).is_err());
    assert!(TriangulatedSphere::from_off("PLY\n").is_err());
}

#[test]
fn su2_examples() {
    let t = StandardTriple::standard();
    let x = FiberElement { q: lift(unit([0.1, 0.9, 0.3])), alpha: C::new(0.4, 0.2) };
    assert_eq!(t.phi_b(&Su2::identity(), &x), x);
    let minus = Su2::identity().neg();
    let y = t.phi_b(&minus, &x);
    assert_eq!(hopf(y.q), hopf(x.q));
    assert_eq!(t.ratio(&y, &x).unwrap(), C::new(-1.0, 0.0));
    // exp(iσ₃θ/2) at θ = π/2 turns e₁ into e₂ about e₃
    let th = PI / 2.0;
    let b = Su2::from_matrix([[C::from_polar(1.0, th / 2.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::from_polar(1.0, -th / 2.0)]]).unwrap();
    let r = b.rotation();
    let e1 = [r[0][0], r[1][0], r[2][0]];
    assert!(close(e1, [0.0, 1.0, 0.0], 1e-15));
    assert!(close(oracle_rotate(&b, [1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], 1e-15));
    let p = unit([1.0, 0.0, 0.2]);
    assert!(close(hopf(b.apply(lift(p))), oracle_rotate(&b, p), 1e-14));
    let bad = [[C::new(2.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(0.5, 0.0)]];
    assert!(matches!(Su2::from_matrix(bad), Err(SpinlabError::Input(_))));
}

#[test]
fn su2_action_on_random_elements() {
    let t = StandardTriple::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (b, b2) = (Su2::random(&mut rng), Su2::random(&mut rng));
        let p = random_point(&mut rng);
        let x = FiberElement { q: lift(p), alpha: C::from_polar(rng.random_range(0.1..2.0), rng.random_range(0.0..6.0)) };
        // commutes with ι̃₀ exactly
        assert_eq!(t.phi_b(&b, &t.iota_tilde(&x)), t.iota_tilde(&t.phi_b(&b, &x)));
        // group law at the chart level
        let lhs = t.phi_b(&b, &t.phi_b(&b2, &x));
        let rhs = t.phi_b(&b.mul(&b2), &x);
        assert!((0..2).all(|k| (lhs.q[k] - rhs.q[k]).norm() < 1e-14));
        assert!((t.ratio(&lhs, &rhs).unwrap() - 1.0).norm() < 1e-14);
        // covers the adjoint rotation
        let moved = hopf(t.phi_b(&b, &x).q);
        assert!(close(moved, oracle_rotate(&b, p), 1e-13), "{moved:?}");
        let r = b.rotation();
        let rp: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| r[i][j] * p[j]).sum());
        assert!(close(rp, moved, 1e-13));
        // −B is the deck transformation over the same rotation
        let y = t.phi_b(&b.neg(), &x);
        assert_eq!(t.ratio(&y, &t.phi_b(&b, &x)).unwrap(), C::new(-1.0, 0.0));
    }
}

/// `θ = πn + g(x) − g(−x)` and `r = e^{h(x) + h(−x)}` for a random cubic `g` and quadratic `h`.
#[derive(Clone, Debug)]
struct InComponent {
    n: i64,
    g: [f64; 10],
    h: [f64; 10],
}

fn monomials(p: [f64; 3]) -> [f64; 10] {
    let [x, y, z] = p;
    [x, y, z, x * y, y * z, z * x, x * x * x, y * y * z, x * z * z, x * y * z]
}

impl InComponent {
    fn random(rng: &mut ChaCha8Rng, n: i64) -> Self {
        InComponent { n, g: std::array::from_fn(|_| rng.random_range(-1.0..1.0)), h: std::array::from_fn(|_| rng.random_range(-0.5..0.5)) }
    }

    fn eval(&self, p: [f64; 3]) -> C {
        let dot = |c: &[f64; 10], q: [f64; 3]| monomials(q).iter().zip(c).map(|(m, c)| m * c).sum::<f64>();
        let m = p.map(|v| -v);
        let theta = PI * self.n as f64 + dot(&self.g, p) - dot(&self.g, m);
        C::from_polar((dot(&self.h, p) + dot(&self.h, m)).exp(), theta)
    }

    fn blend(&self, other: &Self, s: f64) -> Self {
        InComponent {
            n: self.n,
            g: std::array::from_fn(|k| (1.0 - s) * self.g[k] + s * other.g[k]),
            h: std::array::from_fn(|k| (1.0 - s) * self.h[k] + s * other.h[k]),
        }
    }
}

#[test]
fn component_examples() {
    let mesh = TriangulatedSphere::icosphere(2).unwrap();
    let one = EquivariantFunction::from_fn(&mesh, |_| C::new(1.0, 0.0)).unwrap();
    let minus = EquivariantFunction::from_fn(&mesh, |_| C::new(-1.0, 0.0)).unwrap();
    assert_eq!(component_invariant(&mesh, &one).unwrap().sign, 1);
    assert_eq!(component_invariant(&mesh, &minus).unwrap().sign, -1);
    let wave = EquivariantFunction::from_fn(&mesh, |p| -C::from_polar(1.0, PI * p[2])).unwrap();
    let r = component_invariant(&mesh, &wave).unwrap();
    assert_eq!((r.sign, r.n.rem_euclid(2)), (-1, 1));
    // too much oscillation for the mesh
    let fast = EquivariantFunction::from_fn(&mesh, |p| C::from_polar(1.0, 60.0 * p[0])).unwrap();
    assert!(matches!(component_invariant(&mesh, &fast), Err(SpinlabError::RefineMesh(_))));
    // samples must satisfy the antipodal relation
    assert!(EquivariantFunction::from_fn(&mesh, |p| C::new(0.0, 1.0 + p[0])).is_err());
    assert!(EquivariantFunction::from_fn(&mesh, |p| C::new(p[2], 0.0)).is_err());
}

#[test]
fn component_invariant_along_paths() {
    let mesh = TriangulatedSphere::icosphere(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..20 {
        let n = rng.random_range(-3..4);
        let (a, b) = (InComponent::random(&mut rng, n), InComponent::random(&mut rng, n));
        let expect = if n.rem_euclid(2) == 0 { 1 } else { -1 };
        for k in 0..=10 {
            let f = a.blend(&b, k as f64 / 10.0);
            let phi = EquivariantFunction::from_fn(&mesh, |p| f.eval(p)).unwrap();
            assert_eq!(component_invariant(&mesh, &phi).unwrap().sign, expect, "trial {trial} step {k}");
        }
    }
}

#[test]
fn square_root_examples() {
    let mesh = TriangulatedSphere::icosphere(2).unwrap();
    let ones = vec![C::new(1.0, 0.0); mesh.vertices.len()];
    let phi = local_square_root_correction(&mesh, &ones, None).unwrap();
    assert!(phi.iter().all(|v| *v == Some(C::new(1.0, 0.0))));
    let th0 = 1.1;
    let psi = vec![C::from_polar(1.0, 2.0 * th0); mesh.vertices.len()];
    let phi = local_square_root_correction(&mesh, &psi, None).unwrap();
    assert!(phi.iter().all(|v| (v.unwrap() - C::from_polar(1.0, th0)).norm() < 1e-15));
    // an annulus around which ψ winds once has no continuous square root
    let band: Vec<bool> = mesh.vertices.iter().map(|p| p[2] > 0.2 && p[2] < 0.6).collect();
    let wind: Vec<C> = mesh.vertices.iter().map(|p| C::new(p[0], p[1]) / C::new(p[0], p[1]).norm()).collect();
    assert!(matches!(local_square_root_correction(&mesh, &wind, Some(&band)), Err(SpinlabError::Precondition(_))));
    // the same data on a disc is fine
    let cap: Vec<bool> = mesh.vertices.iter().map(|p| p[0] > 0.3).collect();
    assert!(local_square_root_correction(&mesh, &wind, Some(&cap)).is_ok());
    // ψ(x)·conj ψ(−x) = 1 is required where both points are present
    assert!(local_square_root_correction(&mesh, &vec![C::new(2.0, 0.0); mesh.vertices.len()], None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn square_root_recovers_compatible_phi(seed in any::<u64>()) {
        let mesh = TriangulatedSphere::icosphere(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // χ₀ = e^{odd} e^{i·even} satisfies χ₀(x)·conj χ₀(−x) = 1
        let c: [f64; 10] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let d: [f64; 10] = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
        let odd = |p: [f64; 3]| monomials(p).iter().zip(&d).map(|(m, c)| m * c).sum::<f64>() - monomials(p.map(|v| -v)).iter().zip(&d).map(|(m, c)| m * c).sum::<f64>();
        let even = |p: [f64; 3]| monomials(p).iter().zip(&c).map(|(m, c)| m * c).sum::<f64>() + monomials(p.map(|v| -v)).iter().zip(&c).map(|(m, c)| m * c).sum::<f64>();
        let psi: Vec<C> = mesh.vertices.iter().map(|&p| C::from_polar(odd(p).exp(), even(p)).powi(2)).collect();
        let phi = local_square_root_correction(&mesh, &psi, None).unwrap();
        for (v, &a) in mesh.antipode.iter().enumerate() {
            let (fx, fm) = (phi[v].unwrap(), phi[a].unwrap());
            prop_assert!((fx.conj() / fm * psi[v] - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn chern_is_rotation_invariant(seed in any::<u64>()) {
        let base = TriangulatedSphere::icosphere(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = Su2::random(&mut rng).rotation();
        let verts = base.vertices.iter().map(|p| std::array::from_fn(|i| (0..3).map(|j| r[i][j] * p[j]).sum())).collect();
        let mesh = TriangulatedSphere::from_parts(verts, base.faces.clone()).unwrap();
        for k in [1, 2] {
            let c = chern_number(&StandardTriple { weight: k }, &mesh).unwrap();
            prop_assert_eq!(c.value, i64::from(k));
            prop_assert!(c.residue < 1e-9);
        }
    }

    #[test]
    fn lift_is_a_section(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_point(&mut rng);
        prop_assert!(close(hopf(lift(p)), p, 1e-14));
        let q = lift(p);
        let lam = C::from_polar(1.0, rng.random_range(0.0..6.3));
        prop_assert!(close(hopf([q[0] * lam, q[1] * lam]), p, 1e-14));
    }
}
