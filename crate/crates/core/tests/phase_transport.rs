mod common;

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use common::*;
use nalgebra::DVector;
use proptest::prelude::*;
use ptk_core::dynamics::{flow, flow_endpoint, CurveSpec, Hamiltonian};
use ptk_core::manifolds::{
    lift_curve, loop_period, phase, HomotopyPoint, LagrangianManifold, LoopClass, MappedManifold, ParamManifold,
};
use ptk_core::symplectic::symplectic_form;
use ptk_core::transport::*;
use ptk_core::{PhasePoint, SymplecticMap};
use rand::Rng;

const ORACLE_TOL: f64 = 1e-6;

#[test]
fn quadratic_law_matches_transport() {
    let mut r = rng(11);
    for case in 0..50 {
        let (m, hp) = manifold_and_point(&mut r);
        let n = m.dim();
        let q = symmetric(&mut r, 2 * n, 1.0);
        let t = r.gen_range(0.2..1.5);
        let h = Hamiltonian::quadratic(q.clone()).unwrap();
        let s = SymplecticMap::quadratic_flow(&q, t).unwrap();
        let closed = quadratic_transport_phase(&s, &*m, &hp).unwrap();
        let transported = transport_phase(&h, &*m, &hp, t, 4000).unwrap();
        assert!(
            (closed - transported.value).abs() <= ORACLE_TOL,
            "case {case}: {closed} vs {}",
            transported.value
        );
    }
}

#[test]
fn translation_law_matches_transport() {
    let mut r = rng(12);
    for case in 0..50 {
        let (m, hp) = manifold_and_point(&mut r);
        let za = phase_point(&mut r, m.dim(), 2.0);
        let closed = translation_phase(&za, &*m, &hp).unwrap();
        let transported = transport_phase(&Hamiltonian::translation(&za), &*m, &hp, 1.0, 64).unwrap();
        assert!((closed - transported.value).abs() <= ORACLE_TOL, "case {case}");
        assert!((&transported.endpoint - &(&hp.project(&*m) + &za)).norm() < 1e-12);
    }
}

fn wiggly_curve(r: &mut impl Rng, n: usize) -> CurveSpec {
    let c0 = phase_point(r, n, 1.0);
    let c1 = phase_point(r, n, 1.0);
    let c2 = phase_point(r, n, 0.5);
    let w = r.gen_range(0.5..3.0);
    let (d1, d2) = (c1.clone(), c2.clone());
    CurveSpec::new(n, Arc::new(move |s| &(&c0 + &(&c1 * s)) + &(&c2 * (w * s).sin())))
        .with_derivative(Arc::new(move |s| &d1 + &(&d2 * (w * (w * s).cos()))))
}

#[test]
fn displacement_law_matches_transport() {
    let mut r = rng(13);
    for case in 0..50 {
        let (m, hp) = manifold_and_point(&mut r);
        let curve = wiggly_curve(&mut r, m.dim());
        let t = r.gen_range(0.3..2.0);
        let closed = displacement_phase(&curve, &*m, &hp, t).unwrap();
        let transported = transport_phase(&Hamiltonian::displacement(&curve), &*m, &hp, t, 4000).unwrap();
        assert!(
            (closed - transported.value).abs() <= ORACLE_TOL,
            "case {case}: {closed} vs {}",
            transported.value
        );
    }
}

#[test]
fn commutation_defects_match_sequential_transport() {
    let mut r = rng(14);
    for _ in 0..50 {
        let (m, hp) = manifold_and_point(&mut r);
        let n = m.dim();
        let za = phase_point(&mut r, n, 1.5);
        let zb = phase_point(&mut r, n, 1.5);
        let (half, full) = translation_commutation_defects(&za, &zb, &*m, &hp).unwrap();

        // sequential flows of the translation Hamiltonians
        let z0 = hp.project(&*m);
        let phi = phase(&*m, &hp).unwrap();
        let seq = |first: &PhasePoint, second: &PhasePoint| {
            let (z1, a1) = flow_endpoint(&Hamiltonian::translation(first), &z0, 0.0, 1.0, 32).unwrap();
            let (_, a2) = flow_endpoint(&Hamiltonian::translation(second), &z1, 0.0, 1.0, 32).unwrap();
            phi + a1 + a2
        };
        let combined = phi + flow_endpoint(&Hamiltonian::translation(&(&za + &zb)), &z0, 0.0, 1.0, 32).unwrap().1;
        let ab = seq(&zb, &za);
        let ba = seq(&za, &zb);
        assert!((half - (ab - combined)).abs() < 1e-9);
        assert!((full - (ab - ba)).abs() < 1e-9);
        let sigma = symplectic_form(&za, &zb).unwrap();
        assert!((full - sigma).abs() < 1e-12 * (1.0 + sigma.abs()));
        assert!((half - 0.5 * full).abs() < 1e-12 * (1.0 + sigma.abs()));
    }
}

#[test]
fn base_point_consistency() {
    // φ(ž, t) − φ_t(ž_t) equals the action of the base point's trajectory,
    // with φ_t anchored at the image of the base point
    let mut r = rng(15);
    for _ in 0..20 {
        let (m, hp) = manifold_and_point(&mut r);
        let n = m.dim();
        let q = symmetric(&mut r, 2 * n, 1.0);
        let t = r.gen_range(0.2..1.2);
        let h = Hamiltonian::quadratic(q.clone()).unwrap();
        let s = SymplecticMap::quadratic_flow(&q, t).unwrap();
        let moved = MappedManifold::linear(m.clone(), s);
        let lhs = transport_phase(&h, &*m, &hp, t, 4000).unwrap().value - phase(&moved, &hp).unwrap();
        let zbar = m.point(m.base());
        let rhs = flow_endpoint(&h, &zbar, 0.0, t, 4000).unwrap().1;
        assert!((lhs - rhs).abs() < ORACLE_TOL, "{lhs} vs {rhs}");
    }
}

#[test]
fn invariant_circle_law() {
    let radius = 1.3;
    let c = ParamManifold::circle(radius);
    let energy = 0.5 * radius * radius;
    let h = Hamiltonian::harmonic(1);
    for &t in &[0.1, 1.0, PI] {
        for &theta in &[0.4, 2.0, 5.5] {
            let hp = HomotopyPoint::new(&c, &v(&[theta]), &[0]).unwrap();
            let steps = (8192.0 * t).ceil() as usize;
            let traj = flow(&h, &hp.project(&c), 0.0, t, steps).unwrap();
            let moved = lift_curve(&c, &hp, &traj.points()).unwrap();
            let transported = transport_phase(&h, &c, &hp, t, steps).unwrap().value;
            let law = phase(&c, &moved).unwrap() - energy * t;
            assert!((transported - law).abs() < 1e-7, "t={t} θ={theta}: {transported} vs {law}");
        }
    }
}

fn polygon(curve: &CurveSpec, t: f64, segments: usize) -> CurveSpec {
    let verts: Vec<PhasePoint> = (0..=segments)
        .map(|k| curve.point(t * k as f64 / segments as f64))
        .collect();
    let verts2 = verts.clone();
    let dt = t / segments as f64;
    let locate = move |s: f64| ((s / dt).floor() as usize).min(segments - 1);
    let n = curve.dim();
    CurveSpec::new(
        n,
        Arc::new(move |s| {
            let k = locate(s);
            let u = s / dt - k as f64;
            &(&verts[k] * (1.0 - u)) + &(&verts[k + 1] * u)
        }),
    )
    .with_derivative(Arc::new(move |s| {
        let k = locate(s);
        &(&verts2[k + 1] - &verts2[k]) * (1.0 / dt)
    }))
}

#[test]
fn polygonal_displacement_converges_quadratically() {
    let c = ParamManifold::circle(1.0);
    let hp = HomotopyPoint::new(&c, &v(&[0.7]), &[0]).unwrap();
    let curve = CurveSpec::circle(0.8);
    let t = 1.5;
    let smooth = displacement_phase(&curve, &c, &hp, t).unwrap();
    let errs: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&n| (displacement_phase(&polygon(&curve, t, n), &c, &hp, t).unwrap() - smooth).abs())
        .collect();
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((rate - 2.0).abs() < 0.2, "errors {errs:?}");
    }
}

#[test]
fn circular_displacement_loop() {
    let c = ParamManifold::circle(1.0);
    let hp = HomotopyPoint::new(&c, &v(&[1.0]), &[0]).unwrap();
    for r in [0.5, 1.0, 2.0] {
        let d = displacement_phase(&CurveSpec::circle(r), &c, &hp, 2.0 * PI).unwrap() - phase(&c, &hp).unwrap();
        assert!((d - PI * r * r).abs() < 1e-9);
    }
}

#[test]
fn circle_monodromy_and_quarter_phase() {
    let c = ParamManifold::circle(1.0);
    assert!((loop_period(&c, &LoopClass::new(vec![1])).unwrap() + PI).abs() < 1e-9);
    let hp = HomotopyPoint::new(&c, &v(&[PI / 2.0]), &[0]).unwrap();
    assert!((phase(&c, &hp).unwrap() + PI / 4.0).abs() < 1e-9);
}

#[test]
fn path_independence_on_torus() {
    let t = ParamManifold::torus(&[1.0, 0.7]);
    let end = v(&[2.0 + 2.0 * PI, -1.0]);
    let straight = HomotopyPoint::from_path(&t, vec![v(&[0.0, 0.0]), end.clone()]).unwrap();
    let detour = HomotopyPoint::from_path(
        &t,
        vec![v(&[0.0, 0.0]), v(&[3.0, 1.5]), v(&[-1.0, 2.5]), v(&[5.0, -3.0]), end],
    )
    .unwrap();
    assert_eq!(straight.windings(), detour.windings());
    let (a, b) = (phase(&t, &straight).unwrap(), phase(&t, &detour).unwrap());
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

fn torus_strategy() -> impl Strategy<Value = (f64, f64, f64, f64, i64, i64)> {
    (0.3..2.0f64, 0.3..2.0f64, 0.0..TAU, 0.0..TAU, -2..=2i64, -2..=2i64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn monodromy_adds_loop_period((r1, r2, a, b, w1, w2) in torus_strategy(), l1 in -2..=2i64, l2 in -2..=2i64) {
        let t = ParamManifold::torus(&[r1, r2]);
        let hp = HomotopyPoint::new(&t, &v(&[a, b]), &[w1, w2]).unwrap();
        let lp = LoopClass::new(vec![l1, l2]);
        let moved = hp.after_loop(&t, &lp).unwrap();
        let jump = phase(&t, &moved).unwrap() - phase(&t, &hp).unwrap();
        let expect = -PI * (l1 as f64 * r1 * r1 + l2 as f64 * r2 * r2);
        prop_assert!((jump - expect).abs() < 1e-9);
        prop_assert!((loop_period(&t, &lp).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn phase_differential_is_p_dx((r1, r2, a, b, w1, w2) in torus_strategy(), dir in 0.0..TAU) {
        let t = ParamManifold::torus(&[r1, r2]);
        let hp = HomotopyPoint::new(&t, &v(&[a, b]), &[w1, w2]).unwrap();
        let d = v(&[dir.cos(), dir.sin()]);
        let eps = 1e-4;
        let at = |s: f64| hp.extend(&t, &[hp.lifted() + &d * s]).unwrap();
        let dphi = (phase(&t, &at(eps)).unwrap() - phase(&t, &at(-eps)).unwrap()) / (2.0 * eps);
        let z = hp.project(&t);
        let dx = (at(eps).project(&t).x - at(-eps).project(&t).x) / (2.0 * eps);
        prop_assert!((dphi - z.p.dot(&dx)).abs() < 1e-6);
    }

    #[test]
    fn lagrangian_phase_is_frame_invariant(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let (m, hp) = manifold_and_point(&mut r);
        let frame = symplectic(&mut r, m.dim(), 0.8);
        let before = lagrangian_phase(&*m, &hp).unwrap();
        let after = lagrangian_phase_in_frame(m.clone(), &frame, &hp).unwrap();
        prop_assert!((before - after).abs() <= 1e-9, "{} vs {}", before, after);
    }

    #[test]
    fn covariance_defect_vanishes(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let (m, hp) = manifold_and_point(&mut r);
        let s = symplectic(&mut r, m.dim(), 1.0);
        let za = phase_point(&mut r, m.dim(), 2.0);
        prop_assert!(covariance_defect(&s, &za, &*m, &hp).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn commutation_defects_are_manifold_independent(seed in 0u64..10_000, xa in -3.0..3.0f64, pa in -3.0..3.0f64, xb in -3.0..3.0f64, pb in -3.0..3.0f64) {
        let mut r = rng(seed);
        let (za, zb) = (PhasePoint::scalar(xa, pa), PhasePoint::scalar(xb, pb));
        let c = ParamManifold::circle(r.gen_range(0.5..2.0));
        let hp = HomotopyPoint::new(&c, &v(&[r.gen_range(0.0..TAU)]), &[r.gen_range(-2..=2)]).unwrap();
        let base = HomotopyPoint::base(&c);
        let here = translation_commutation_defects(&za, &zb, &c, &hp).unwrap();
        let there = translation_commutation_defects(&za, &zb, &c, &base).unwrap();
        prop_assert!((here.0 - there.0).abs() < 1e-12 * (1.0 + here.0.abs()));
        prop_assert!((here.1 - there.1).abs() < 1e-12 * (1.0 + here.1.abs()));
        let swapped = translation_commutation_defects(&zb, &za, &c, &hp).unwrap();
        prop_assert!((swapped.1 + here.1).abs() < 1e-12 * (1.0 + here.1.abs()));
    }
}

#[test]
fn lagrangian_phase_differential() {
    // dλ = ½(p dx − x dp) along the circle
    let c = ParamManifold::circle(1.4);
    let eps = 1e-5;
    for &th in &[0.3, 1.9, 4.0] {
        let at = |s: f64| HomotopyPoint::new(&c, &DVector::from_element(1, th + s), &[0]).unwrap();
        let dl = (lagrangian_phase(&c, &at(eps)).unwrap() - lagrangian_phase(&c, &at(-eps)).unwrap()) / (2.0 * eps);
        let (z, zp, zm) = (at(0.0).project(&c), at(eps).project(&c), at(-eps).project(&c));
        let dx = (zp.x[0] - zm.x[0]) / (2.0 * eps);
        let dp = (zp.p[0] - zm.p[0]) / (2.0 * eps);
        assert!((dl - 0.5 * (z.p[0] * dx - z.x[0] * dp)).abs() < 1e-8);
    }
}
