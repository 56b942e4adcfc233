use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinlab::witten::*;

fn single_model(lambda_bar: f64, t_min: Option<f64>) -> TameTupleModel {
    let mut s = reference_models()[0].base.clone();
    s.lambda_bar = lambda_bar;
    s.t_min = t_min;
    TameTupleModel::assemble(s).unwrap()
}

/// Brute-force `d_H` for one-dimensional subspaces: both unit bases `±e` are tried.
fn brute_line_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    [1.0, -1.0]
        .iter()
        .map(|s| a.iter().zip(b).map(|(x, y)| (x / na - s * y / nb).powi(2)).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Brute-force `d_H` for planes: the best matching over a fine grid of `O(2)`.
fn brute_plane_distance(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..20000 {
        let th = k as f64 * std::f64::consts::TAU / 20000.0;
        let (c, s) = (th.cos(), th.sin());
        for r in [DMatrix::from_row_slice(2, 2, &[c, -s, s, c]), DMatrix::from_row_slice(2, 2, &[c, s, s, -c])] {
            best = best.min((q1 - q2 * r).norm());
        }
    }
    best
}

#[test]
fn grassmann_examples() {
    let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    assert!(grassmann_distance(&e1, &e1).unwrap().value < 1e-15);
    let d = grassmann_distance(&e1, &e2).unwrap();
    assert!((d.value - brute_line_distance(&[1.0, 0.0], &[0.0, 1.0])).abs() < 1e-14);
    assert!((d.value - 2f64.sqrt()).abs() < 1e-14);
    let th = std::f64::consts::FRAC_PI_6;
    let e3 = DMatrix::from_column_slice(2, 1, &[th.cos(), th.sin()]);
    let d = grassmann_distance(&e1, &e3).unwrap();
    assert!((d.value - brute_line_distance(&[1.0, 0.0], &[th.cos(), th.sin()])).abs() < 1e-14);
    assert!((d.value - 0.5176).abs() < 1e-4);
    assert!(matches!(grassmann_distance(&e1, &DMatrix::zeros(3, 1)), Err(spinlab::SpinlabError::SpaceMismatch)));
}

#[test]
fn grassmann_planes_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let a = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let d = grassmann_distance(&a, &b).unwrap();
        let (qa, qb) = (a.qr().q(), b.qr().q());
        let brute = brute_plane_distance(&qa, &qb);
        assert!(d.value <= brute + 1e-12);
        assert!(brute - d.value < 1e-3, "{} vs {brute}", d.value);
        assert!((d.lower - d.upper).abs() < 1e-10);
    }
}

#[test]
fn certificate_examples() {
    assert_eq!(eigenvalue_to_distance(3.0, &[0.5, 1.0], &[0.5, 1.0]).unwrap().d_bound, 0.0);
    let c = eigenvalue_to_distance(1.0, &[0.5], &[0.51]).unwrap();
    assert!((c.per_step - 0.04).abs() < 1e-12);
    assert!(matches!(eigenvalue_to_distance(1.0, &[0.5], &[0.8]), Err(spinlab::SpinlabError::GapViolated { .. })));
}

#[test]
fn certificate_dominates_measured_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..20 {
        let n = 40;
        let lambda = 1.0;
        let mut diag: Vec<f64> = vec![0.1, 0.3, 0.5];
        diag.extend((3..n).map(|_| rng.random_range(1.0..5.0)));
        let o = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let a = &o * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone())) * o.transpose();
        let e0 = o.columns(0, 3).into_owned();
        let eps = 0.02 * (trial as f64 + 1.0) / 20.0;
        let e = &e0 + DMatrix::from_fn(n, 3, |_, _| eps * rng.random_range(-1.0..1.0));
        let q = e.clone().qr().q();
        let mut mu: Vec<f64> = SymmetricEigen::new(q.transpose() * &a * &q).eigenvalues.iter().copied().collect();
        mu.sort_by(f64::total_cmp);
        let Ok(cert) = eigenvalue_to_distance(lambda, &diag[..3], &mu) else { continue };
        let measured = grassmann_distance(&e, &e0).unwrap().value;
        assert!(cert.d_bound >= measured, "trial {trial}: {} < {measured}", cert.d_bound);
    }
}

#[test]
fn single_well_is_tame() {
    let m = single_model(4.0, None);
    let r = check_tame(&m);
    assert!(r.passed(), "{r:?}");
    let (a, _) = localization_bounds(&m, m.t_min).unwrap();
    assert!(a <= 1.0 + 1e-12);
    assert!(localization_bounds(&m, 0.5 * m.t_min).is_err());
}

#[test]
fn zero_h_fails_condition_three() {
    let mut s = reference_models()[0].base.clone();
    s.potential = Potential::polynomial(vec![0.0]);
    s.t_min = Some(1.0);
    let r = check_tame(&TameTupleModel::assemble(s).unwrap());
    let c = r.condition(3);
    assert!(!c.passed && matches!(c.witness, Some(Witness::Node { .. })));
}

#[test]
fn large_lambda_bar_fails_condition_five() {
    let m = single_model(4.0, None);
    let big = single_model(100.0, Some(m.t_min));
    let r = check_tame(&big);
    let c = r.condition(5);
    assert!(!c.passed);
    let Some(Witness::Node { x, .. }) = c.witness else { panic!("no witness") };
    assert!(x.abs() > 1.0 && x.abs() < 1.1, "weakest node at {x}");
}

#[test]
fn localization_bounds_on_sweep() {
    let m = single_model(4.0, None);
    for k in 0..3 {
        let t = m.t_min * f64::from(1 << k);
        let r = verify_localization(&m, t, 4.0).unwrap();
        assert!(r.passed && r.slack_a >= 0.0 && r.slack_b >= 0.0, "{r:?}");
        // the ground state mass outside F is far below A(t)²
        assert!(r.vectors[0].outside_norm.powi(2) <= r.a * r.a);
    }
}

#[test]
fn phi_is_identity_for_identical_models() {
    let f = &reference_models()[0];
    let m = TameTupleModel::assemble(f.base.clone()).unwrap();
    let one = Cutoff { inner: 100.0, outer: 101.0 };
    let glue = Glue { u: (-4.0, 4.0) };
    let r = phi_map(&m, &m, &glue, &one, f.lambda, m.t_min).unwrap();
    assert_eq!(r.dim_source, 1);
    assert!((&r.matrix - DMatrix::identity(1, 1)).norm() < 1e-12);
}

#[test]
fn reference_families_reach_t0() {
    for fam in reference_models() {
        let base = TameTupleModel::assemble(fam.base.clone()).unwrap();
        let partner = TameTupleModel::assemble(fam.partners[0].clone()).unwrap();
        assert!(check_tame(&base).passed(), "{}", fam.name);
        assert!(check_tame(&partner).passed(), "{}", fam.name);
        let sweep = t0_search(&base, &partner, &fam.glue, &base.spec.cutoff, fam.lambda, 0.1, 0.1).unwrap();
        for s in &sweep.steps {
            assert!(s.localization.iter().all(|l| l.passed), "{} at t = {}", fam.name, s.t);
        }
        let last = sweep.steps.last().unwrap();
        eprintln!("{}: T = {:.2}, t0 = {:?}, dims {} σ {:?} d {:?}", fam.name, base.t_min, sweep.t0, last.phi.dim_source, last.phi.singular_values, last.phi.distance);
        assert!(last.phi.singular_values.iter().all(|&s| s >= 0.9));
        assert!(last.phi.distance.unwrap() < 0.1);
    }
}

#[test]
fn composition_is_coherent_at_large_t() {
    let fam = &reference_models()[1];
    let ms: Vec<TameTupleModel> =
        [&fam.base, &fam.partners[0], &fam.partners[1]].iter().map(|s| TameTupleModel::assemble((*s).clone()).unwrap()).collect();
    let t = ms.iter().map(|m| m.t_min).fold(0.0, f64::max);
    let c = fam.base.cutoff;
    let a = phi_coherence([&ms[0], &ms[1], &ms[2]], &fam.glue, &c, fam.lambda, t).unwrap();
    let b = phi_coherence([&ms[0], &ms[1], &ms[2]], &fam.glue, &c, fam.lambda, 2.0 * t).unwrap();
    assert!(b <= a + 1e-9 && b < 1e-3, "{a} {b}");
}

#[test]
fn model_json_roundtrip() {
    let s = reference_models()[2].partners[1].clone();
    let text = serde_json::to_string(&s).unwrap();
    let back: ModelSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(s, back);
}

fn unit_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn grassmann_triangle_inequality(seed in any::<u64>(), r in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mk = |rng: &mut ChaCha8Rng| DMatrix::from_fn(7, r, |_, _| rng.random_range(-1.0..1.0));
        let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
        let ab = grassmann_distance(&a, &b).unwrap().value;
        let bc = grassmann_distance(&b, &c).unwrap().value;
        let ac = grassmann_distance(&a, &c).unwrap().value;
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((ab - grassmann_distance(&b, &a).unwrap().value).abs() < 1e-12);
        // basis independence
        let mixed = &a * DMatrix::from_fn(r, r, |_, _| rng.random_range(-1.0..1.0));
        let same = grassmann_distance(&unit_columns(&mixed), &a).unwrap().value;
        prop_assert!(same < 1e-7);
    }

    #[test]
    fn minmax_trial_subspaces(seed in any::<u64>(), dim in 1usize..4) {
        let m = single_model(4.0, None);
        let packet = eigenpacket(&m, m.t_min, 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trial = DMatrix::from_fn(m.dim(), dim, |i, c| packet.vectors[(i, c)] + 0.05 * rng.random_range(-1.0..1.0));
        let (top, below) = minmax_certificate(&packet, &trial).unwrap();
        prop_assert!(below >= dim, "top {top} below {below}");
    }
}
