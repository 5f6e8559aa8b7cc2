#![allow(dead_code)]

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ptk_core::manifolds::{ExactManifold, HomotopyPoint, LagrangianManifold, ParamManifold};
use ptk_core::{PhasePoint, SymplecticMap};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_vec(xs.to_vec())
}

pub fn symmetric(rng: &mut impl Rng, size: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(size, size, |_, _| rng.gen_range(-scale..scale));
    (&a + a.transpose()) * 0.5
}

/// `exp(JQ)` for a random symmetric `Q`.
pub fn symplectic(rng: &mut impl Rng, n: usize, scale: f64) -> SymplecticMap {
    SymplecticMap::quadratic_flow(&symmetric(rng, 2 * n, scale), 1.0).unwrap()
}

pub fn phase_point(rng: &mut impl Rng, n: usize, scale: f64) -> PhasePoint {
    PhasePoint::from_parts(
        DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale)),
        DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale)),
    )
}

/// A random test manifold with a random cover point on it.
pub fn manifold_and_point(rng: &mut impl Rng) -> (Arc<dyn LagrangianManifold>, HomotopyPoint) {
    match rng.gen_range(0..4) {
        0 => {
            let m: Arc<dyn LagrangianManifold> = Arc::new(ParamManifold::circle(rng.gen_range(0.5..2.0)));
            let th = v(&[rng.gen_range(0.0..TAU)]);
            let hp = HomotopyPoint::new(&*m, &th, &[rng.gen_range(-1..=1)]).unwrap();
            (m, hp)
        }
        1 => {
            let m: Arc<dyn LagrangianManifold> =
                Arc::new(ParamManifold::torus(&[rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5)]));
            let th = v(&[rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)]);
            let w = [rng.gen_range(-1..=1), rng.gen_range(-1..=1)];
            let hp = HomotopyPoint::new(&*m, &th, &w).unwrap();
            (m, hp)
        }
        2 => {
            let n = rng.gen_range(1..=2);
            let m: Arc<dyn LagrangianManifold> = Arc::new(ParamManifold::graph(symmetric(rng, n, 1.0)).unwrap());
            let th = DVector::from_fn(n, |_, _| rng.gen_range(-0.9..0.9));
            let hp = HomotopyPoint::new(&*m, &th, &[]).unwrap();
            (m, hp)
        }
        _ => {
            let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.2..1.0));
            let m: Arc<dyn LagrangianManifold> = Arc::new(
                ExactManifold::new(
                    1,
                    Arc::new(move |x: &DVector<f64>| a * x[0] * x[0] + b * (2.0 * x[0]).sin()),
                    vec![(-1.0, 1.0)],
                )
                .unwrap(),
            );
            let hp = HomotopyPoint::new(&*m, &v(&[rng.gen_range(-0.9..0.9)]), &[]).unwrap();
            (m, hp)
        }
    }
}
