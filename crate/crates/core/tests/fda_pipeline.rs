use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinlab::fda::*;
use spinlab::SpinlabError;

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Winding number of a closed planar curve by summing principal angle increments.
fn winding_oracle(f: impl Fn(f64) -> [f64; 2], steps: usize) -> i64 {
    let mut total = 0.0;
    let ang = |t: f64| {
        let p = f(t);
        p[1].atan2(p[0])
    };
    for k in 0..steps {
        let t0 = std::f64::consts::TAU * k as f64 / steps as f64;
        let t1 = std::f64::consts::TAU * (k + 1) as f64 / steps as f64;
        let mut d = ang(t1) - ang(t0);
        while d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
        }
        while d < -std::f64::consts::PI {
            d += std::f64::consts::TAU;
        }
        total += d;
    }
    (total / std::f64::consts::TAU).round() as i64
}

#[test]
fn sw_toy_passes_all_axioms() {
    for m in [sw_toy(1, 1, 1), sw_toy(2, 1, 1), linear_toy(1, 1, 1)] {
        let rep = check_axioms(&m, 200, 3);
        assert!(rep.passed(), "{}: {:?}", m.name, rep.checks);
        assert_eq!(rep.checks.len(), 9);
    }
}

#[test]
fn linear_toy_margin_is_delta() {
    // F = D − Δ: on the v_ℍ = 0 slice |F|² = |ρ|² + δ²|e|², so the margin approaches δ = 0.5
    let rep = check_axioms(&linear_toy(1, 1, 1), 400, 9);
    let c = rep.axiom(9);
    assert!(c.passed && c.value >= 0.5 - 1e-12 && c.value < 0.6, "{c:?}");
}

#[test]
fn broken_equivariance_fails_with_witness() {
    let mut m = sw_toy(1, 1, 1);
    m.w_real_action = RealAction::Trivial;
    let rep = check_axioms(&m, 50, 1);
    assert!(!rep.passed());
    for k in [5, 6, 8] {
        let c = rep.axiom(k);
        assert!(!c.passed && c.witness.is_some(), "axiom {k}: {c:?}");
    }
    assert!(rep.axiom(7).passed);
}

#[test]
fn malformed_model_reports_axiom_three() {
    let mut m = sw_toy(1, 1, 1);
    m.d_real.pop();
    let rep = check_axioms(&m, 10, 0);
    assert!(!rep.axiom(3).passed);
    assert!(matches!(m.validate(), Err(SpinlabError::Input(_))));
}

#[test]
fn vanishing_on_the_slice_is_caught() {
    let mut m = linear_toy(1, 1, 1);
    m.delta = 0.0;
    let rep = check_axioms(&m, 50, 2);
    assert!(!rep.axiom(9).passed);
}

#[test]
fn reparametrized_slices() {
    let m = sw_toy(2, 1, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let e = {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / n).collect::<Vec<_>>()
        };
        let u: Vec<Quat> = (0..2).map(|_| Quat::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.3, -0.2)).collect();
        let n = u.iter().map(|q| q.norm_squared()).sum::<f64>().sqrt();
        let u: Vec<Quat> = u.iter().map(|q| q / n).collect();
        let vr = [rng.random_range(-1.0..1.0)];
        assert_eq!(m.reparametrized(&e, &u, 1.0, &vr), m.eval(&e, &u, &vr));
        let zero = vec![Quat::new(0.0, 0.0, 0.0, 0.0); 2];
        assert_eq!(m.reparametrized(&e, &u, -1.0, &vr), m.eval(&e, &zero, &vr));
    }
    assert!(reparametrized_j_residual(&m, 100, 8) < 1e-10);
    assert!(reparametrized_j_residual(&sw_toy(1, 1, 1), 100, 9) < 1e-10);
}

#[test]
fn length_adjustment() {
    assert_eq!(length_adjust(0.0), 0.0);
    assert_eq!(length_adjust(0.2), 0.2);
    assert_eq!(length_adjust(1.0), 1.0);
    assert_eq!(length_adjust(7.0), 1.0);
    let mut prev = 0.0;
    for k in 1..=400 {
        let v = length_adjust(k as f64 / 200.0);
        assert!(v >= prev - 1e-15 && v <= 1.0);
        prev = v;
    }
}

#[test]
fn split_certificates() {
    let i = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
    let d = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let c = split_vw(&i, &d).unwrap();
    assert!(c.isometric && c.witness.is_none());
    // both blocks isometric but their ranges meet at 45°
    let s = 0.5f64.sqrt();
    let d2 = DMatrix::from_row_slice(3, 2, &[s, 0.0, s, 0.0, 0.0, 1.0]);
    let c = split_vw(&i, &d2).unwrap();
    assert!(!c.isometric);
    assert!((c.max_deviation - s).abs() < 1e-15);
    assert!(matches!(c.witness, Some((0, 1)) | Some((1, 0))));
    // E = 0
    let c = split_vw(&DMatrix::zeros(2, 0), &DMatrix::identity(2, 2)).unwrap();
    assert!(c.isometric);
    assert!(matches!(split_vw(&i, &DMatrix::identity(3, 3)), Err(SpinlabError::DimensionMismatch { .. })));
}

#[test]
fn series_oracles() {
    assert_eq!(one_minus_exp_over(2, 2), vec![r(-1, 1), r(-1, 1)]);
    assert_eq!(one_minus_exp_over(1, 4), vec![r(-1, 1), r(-1, 2), r(-1, 6), r(-1, 24)]);
    assert_eq!(a_hat_series(5), vec![r(1, 1), r(0, 1), r(-1, 24), r(0, 1), r(7, 5760)]);
}

#[test]
fn ring_relations() {
    let ring = CohomologyRing { m: 3 };
    let w = ring.monomial(r(1, 1), 1, 0);
    let x = ring.monomial(r(1, 1), 0, 1);
    assert_eq!(w.mul(&w), ring.zero());
    assert_eq!(x.pow(4), ring.zero());
    assert_eq!(x.pow(3), ring.monomial(r(1, 1), 0, 3));
}

#[test]
fn integrand_examples() {
    let ring = CohomologyRing { m: 1 };
    assert_eq!(index_integrand_degree2(&ring, 1, 1, &DegreeData { degree: 1 }).unwrap(), 1);
    assert_eq!(index_integrand_degree2(&ring, 1, 1, &DegreeData { degree: 0 }).unwrap(), 0);
    assert!(matches!(index_integrand_degree2(&ring, 2, 1, &DegreeData { degree: 1 }), Err(SpinlabError::Precondition(_))));
    assert!(index_integrand_degree2(&ring, 0, 1, &DegreeData { degree: 1 }).is_err());
    for n in 1..=2 {
        for a in 1..=2 {
            let ring = CohomologyRing::for_quaternionic_dim(n).unwrap();
            for d in [-2, 1, 3] {
                let deg = DegreeData { degree: d };
                assert_eq!(index_integrand_degree2(&ring, n, a, &deg).unwrap(), d);
                assert_eq!(direct_integral(&ring, &deg).unwrap(), d);
            }
        }
    }
}

#[test]
fn degree_examples() {
    let id = |x: &[f64]| x.to_vec();
    let neg = |x: &[f64]| x.iter().map(|v| -v).collect::<Vec<_>>();
    assert_eq!(mapping_degree_sphere(2, &id, 8, 1).unwrap().degree, 1);
    assert_eq!(mapping_degree_sphere(2, &neg, 8, 1).unwrap().degree, -1);
    assert_eq!(mapping_degree_sphere(1, &neg, 16, 1).unwrap().degree, 1);
    assert_eq!(mapping_degree_sphere(3, &neg, 6, 1).unwrap().degree, 1);
    let sq = |x: &[f64]| vec![x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]];
    let oracle = winding_oracle(|t| sq(&[t.cos(), t.sin()]).try_into().unwrap(), 1000);
    assert_eq!(oracle, 2);
    assert_eq!(mapping_degree_sphere(1, &sq, 64, 2).unwrap().degree, oracle);
    let conj = |x: &[f64]| vec![x[0], -x[1]];
    assert_eq!(mapping_degree_sphere(1, &conj, 64, 2).unwrap().degree, -1);
    let qsq = |x: &[f64]| {
        let q = Quat::new(x[0], x[1], x[2], x[3]);
        let p = q * q;
        vec![p.w, p.i, p.j, p.k]
    };
    assert_eq!(mapping_degree_sphere(3, &qsq, 16, 3).unwrap().degree, 2);
    let qbar = |x: &[f64]| vec![x[0], -x[1], -x[2], -x[3]];
    assert_eq!(mapping_degree_sphere(3, &qbar, 6, 3).unwrap().degree, -1);
    let constant = |_: &[f64]| vec![0.3, 0.4, 1.0];
    assert_eq!(mapping_degree_sphere(2, &constant, 6, 3).unwrap().degree, 0);
    assert!(mapping_degree_sphere(4, &id, 2, 0).is_err());
}

#[test]
fn disk_degrees() {
    let cube = |x: &[f64]| {
        let (re, im) = (x[0], x[1]);
        vec![re * re * re - 3.0 * re * im * im, 3.0 * re * re * im - im * im * im]
    };
    assert_eq!(mapping_degree_disk(2, &cube, 64, 1).unwrap().degree, 3);
    let shifted = |x: &[f64]| vec![x[0] - 2.0, x[1], x[2]];
    assert_eq!(mapping_degree_disk(3, &shifted, 8, 1).unwrap().degree, 0);
    assert_eq!(mapping_degree_disk(1, &|x: &[f64]| vec![-x[0]], 1, 0).unwrap().degree, -1);
}

#[test]
fn hk3_toy_has_positive_generator() {
    let m = sw_toy(2, 1, 1);
    let rep = hk3_conditions(&m).unwrap();
    assert!(rep.passed(), "{rep:?}");
    assert_eq!(rep.c, Some(1));
    assert_eq!(rep.direct, Some(1));
    assert_eq!(rep.parity_odd, Some(true));
}

#[test]
fn hk3_orientation_and_rank() {
    let mut m = sw_toy(2, 1, 1);
    m.orientation = Some(-1);
    let rep = hk3_conditions(&m).unwrap();
    assert_eq!(rep.c, Some(-1));
    assert!(rep.conditions[1] && !rep.conditions[2]);
    m.orientation = None;
    assert!(!hk3_conditions(&m).unwrap().conditions[1]);

    let mut m = sw_toy(2, 1, 1);
    m.e_rank = 2;
    m.i = m.i.iter().map(|row| row[..2].to_vec()).collect();
    let rep = hk3_conditions(&m).unwrap();
    assert!(!rep.conditions[0] && !rep.passed());
}

#[test]
fn hk3_balanced_dims_have_no_degree_two_class() {
    let rep = hk3_conditions(&sw_toy(1, 1, 1)).unwrap();
    assert_eq!(rep.c, Some(0));
    assert!(!rep.conditions[2] && rep.note.is_some());
}

#[test]
fn hk3_is_stable() {
    let m = sw_toy(2, 1, 1);
    for k in 1..=3 {
        let s = m.stabilize(k);
        assert!(check_axioms(&s, 100, k as u64).passed());
        assert_eq!(hk3_conditions(&s).unwrap().c, Some(1));
    }
}

#[test]
fn model_json_roundtrip() {
    let m = sw_toy(2, 1, 1);
    let text = serde_json::to_string(&m).unwrap();
    assert!(text.contains("\"sw_quadratic\""));
    assert_eq!(serde_json::from_str::<FdaModel>(&text).unwrap(), m);
    let mut p = linear_toy(1, 1, 1);
    p.nonlinearity = Nonlinearity::CustomPolynomial { coefficients: vec![0.5, 0.1] };
    let back: FdaModel = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    assert!(check_axioms(&back, 100, 5).passed());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn degree_is_homotopy_invariant(seed in any::<u64>(), s in 0.0f64..1.0) {
        // straight-line homotopy between the identity and a rotation of S²; nonvanishing since the
        // rotation moves no point to its antipode
        let th = 2.5 * s;
        let rot = move |x: &[f64]| vec![th.cos() * x[0] - th.sin() * x[1], th.sin() * x[0] + th.cos() * x[1], x[2]];
        let h = move |x: &[f64]| {
            let y = rot(x);
            x.iter().zip(&y).map(|(a, b)| (1.0 - s) * a + s * b).collect::<Vec<_>>()
        };
        prop_assert_eq!(mapping_degree_sphere(2, &h, 8, seed).unwrap().degree, 1);
    }

    #[test]
    fn integrand_depends_only_on_degree(n in 1usize..4, a in 1usize..4, d in -5i64..6) {
        let ring = CohomologyRing::for_quaternionic_dim(n).unwrap();
        prop_assert_eq!(index_integrand_degree2(&ring, n, a, &DegreeData { degree: d }).unwrap(), d);
    }

    #[test]
    fn toy_equivariance_for_random_couplings(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = sw_toy(2, 2, 1);
        if let Nonlinearity::SwQuadratic { clifford, kappa, .. } = &mut m.nonlinearity {
            *kappa = rng.random_range(0.1..2.0);
            for c in clifford.iter_mut().flatten().flatten() {
                *c = [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)];
            }
        }
        let rep = check_axioms(&m, 20, seed);
        for k in [4, 5, 6, 7, 8] {
            prop_assert!(rep.axiom(k).passed, "axiom {}: {:?}", k, rep.axiom(k));
        }
    }
}
