//! Shared case generators for the acceptance suite.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ptk_core::manifolds::{HomotopyPoint, LagrangianManifold, ParamManifold};
use ptk_core::PhasePoint;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_vec(xs.to_vec())
}

pub fn symmetric(rng: &mut ChaCha8Rng, size: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(size, size, |_, _| rng.gen_range(-scale..scale));
    (&a + a.transpose()) * 0.5
}

pub fn phase_point(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> PhasePoint {
    PhasePoint::from_parts(
        DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale)),
        DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale)),
    )
}

/// A random circle, torus or graph with a random cover point on it.
pub fn random_manifold(rng: &mut ChaCha8Rng) -> (Arc<dyn LagrangianManifold>, HomotopyPoint) {
    let (m, th, w): (Arc<dyn LagrangianManifold>, Vec<f64>, Vec<i64>) = match rng.gen_range(0..3) {
        0 => (
            Arc::new(ParamManifold::circle(rng.gen_range(0.5..2.0))),
            vec![rng.gen_range(0.0..2.0 * PI)],
            vec![rng.gen_range(-2..=2)],
        ),
        1 => (
            Arc::new(ParamManifold::torus(&[rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5)])),
            vec![rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)],
            vec![rng.gen_range(-1..=1), rng.gen_range(-1..=1)],
        ),
        _ => {
            let n = rng.gen_range(1..=3);
            let g = ParamManifold::graph(symmetric(rng, n, 1.0)).unwrap();
            (Arc::new(g), (0..n).map(|_| rng.gen_range(-0.9..0.9)).collect(), vec![])
        }
    };
    let hp = HomotopyPoint::new(&*m, &v(&th), &w).unwrap();
    (m, hp)
}

/// Least-squares slope of `y` against `x`.
pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x * x, b + x * y));
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

