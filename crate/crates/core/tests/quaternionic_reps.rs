use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinlab::op::Op;
use spinlab::quaternionic::*;
use spinlab::scalar::{Qi, Scalar};

fn euclid_pair(a: usize, b: usize) -> i64 {
    (a == b) as i64
}

#[test]
fn clifford_relations_both_reps_exact() {
    let v = QuaternionicSpace::new(1);
    let id = Op::<Qi>::identity(16);
    for m in [build_s0::<Qi>(&v).unwrap(), build_s1::<Qi>(&v).unwrap()] {
        for a in 0..4 {
            for b in 0..4 {
                let two = Qi::from_int(2 * euclid_pair(a, b));
                assert_eq!(m.clifford[a].anticommutator(&m.clifford[b]), id.scale(&-two.clone()));
                assert_eq!(m.hermitian[a].anticommutator(&m.hermitian[b]), id.scale(&two));
                assert!(m.clifford[a].anticommutator(&m.hermitian[b]).is_zero());
            }
            assert!(m.epsilon.anticommutator(&m.clifford[a]).is_zero());
            assert!(m.epsilon.anticommutator(&m.hermitian[a]).is_zero());
            assert_eq!(m.hermitian[a].adjoint(), m.hermitian[a]);
        }
        assert_eq!(tau_diagram_defect(&v, &m), 0.0);
    }
}

#[test]
fn tau_diagrams_at_n2() {
    let v = QuaternionicSpace::new(2);
    assert_eq!(tau_diagram_defect(&v, &build_s0::<Qi>(&v).unwrap()), 0.0);
    assert_eq!(tau_diagram_defect(&v, &build_s1::<Qi>(&v).unwrap()), 0.0);
}

#[test]
fn intertwiner_maps_vacuum_to_generator_image() {
    let v = QuaternionicSpace::new(1);
    let f = canonical_intertwiner(&v).unwrap();
    let g = generator_image::<Complex64>(&v).unwrap().to_dense();
    for (k, gk) in g.iter().enumerate() {
        assert!((f[(k, 0)] - gk).norm() < 1e-14);
    }
    // c₀(e) F = F c₁(e) for the first generator, by explicit dense products
    let s0 = build_s0::<Complex64>(&v).unwrap();
    let s1 = build_s1::<Complex64>(&v).unwrap();
    let d = &f * s0.clifford[0].to_dense() - s1.clifford[0].to_dense() * &f;
    assert!(d.iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn random_sp1_bases_give_same_f() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dev = basis_independence(&QuaternionicSpace::new(1), 25, &mut rng).unwrap();
    assert!(dev < 1e-12, "deviation {dev}");
}

#[test]
fn random_sp2_basis_gives_same_f() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let dev = basis_independence(&QuaternionicSpace::new(2), 2, &mut rng).unwrap();
    assert!(dev < 1e-10, "deviation {dev}");
}

#[test]
fn direct_sum_of_two_lines() {
    let r = direct_sum_compatibility(&QuaternionicSpace::new(1), &QuaternionicSpace::new(1)).unwrap();
    assert!(r.max_defect() < 1e-12, "{r:?}");
}

#[test]
fn f_is_scaled_unitary() {
    let v = QuaternionicSpace::new(2);
    let f = canonical_intertwiner(&v).unwrap();
    let r = verify_intertwiner(&v, &f).unwrap();
    assert!(r.max_defect() < 1e-10, "{r:?}");
}
