mod common;

use std::sync::Arc;

use common::v;
use nalgebra::DVector;
use ptk_core::dynamics::Hamiltonian;
use ptk_core::hj::{breakdown_time, hj_solve, pde_residual, Grid};
use ptk_core::manifolds::{ExactManifold, HomotopyPoint};
use ptk_core::transport::transport_phase;

fn wavy_datum() -> ExactManifold {
    ExactManifold::new(1, Arc::new(|x: &DVector<f64>| 0.3 * x[0].sin() + 0.2 * x[0] * x[0]), vec![(-3.0, 3.0)])
        .unwrap()
        .with_gradient(Arc::new(|x: &DVector<f64>| v(&[0.3 * x[0].cos() + 0.4 * x[0]])))
}

/// Foot of the free-particle characteristic reaching `x` at time `t`.
fn foot(x: f64, t: f64) -> f64 {
    let mut y = x;
    for _ in 0..100 {
        let f = y + t * (0.3 * y.cos() + 0.4 * y) - x;
        let df = 1.0 + t * (-0.3 * y.sin() + 0.4);
        y -= f / df;
        if f.abs() < 1e-15 {
            break;
        }
    }
    y
}

#[test]
fn agrees_with_transported_phase() {
    let datum = wavy_datum();
    let grid = Grid::uniform(-1.0, 1.0, 101).unwrap();
    let h = Hamiltonian::free(1);
    let sol = hj_solve(&h, &datum, &grid, 0.8, 8).unwrap();
    let anchor = datum.value(&v(&[0.0]));
    for k in [2, 5, 8] {
        let t = sol.times[k];
        for (j, &x) in grid.axes()[0].iter().enumerate().step_by(7) {
            assert!(sol.valid[k][j]);
            let hp = HomotopyPoint::new(&datum, &v(&[foot(x, t)]), &[]).unwrap();
            let tp = transport_phase(&h, &datum, &hp, t, 64).unwrap();
            assert!((tp.endpoint.x[0] - x).abs() < 1e-12);
            assert!((sol.phi[k][j] - (tp.value + anchor)).abs() < 1e-6, "x={x} t={t}");
        }
    }
}

#[test]
fn gradient_is_characteristic_momentum() {
    let datum = wavy_datum();
    let grid = Grid::uniform(-1.0, 1.0, 81).unwrap();
    let sol = hj_solve(&Hamiltonian::free(1), &datum, &grid, 1.0, 10).unwrap();
    for k in 0..sol.times.len() {
        let t = sol.times[k];
        for (j, &x) in grid.axes()[0].iter().enumerate() {
            let y = foot(x, t);
            let p = 0.3 * y.cos() + 0.4 * y;
            assert!((sol.grad[k][j][0] - p).abs() < 1e-5);
        }
    }
}

#[test]
fn residual_is_second_order() {
    let datum = wavy_datum();
    let h = Hamiltonian::free(1);
    let mut pts = Vec::new();
    for (nodes, steps) in [(41, 10), (81, 20), (161, 40)] {
        let grid = Grid::uniform(-1.0, 1.0, nodes).unwrap();
        let sol = hj_solve(&h, &datum, &grid, 1.0, steps).unwrap();
        let r = pde_residual(&sol, &h, sol.time_index(0.5)).unwrap();
        pts.push(((2.0 / (nodes - 1) as f64).ln(), r.ln()));
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x * x, b + x * y));
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    assert!(slope > 1.8 && slope < 2.3, "slope {slope}");
}

#[test]
fn breakdown_is_stable_under_refinement() {
    let datum = ExactManifold::quadratic(nalgebra::DMatrix::from_element(1, 1, -1.0), &[(-2.0, 2.0)]).unwrap();
    let h = Hamiltonian::free(1);
    let mut prev: Option<f64> = None;
    for (nodes, steps) in [(21, 40), (41, 80), (81, 160)] {
        let grid = Grid::uniform(-1.0, 1.0, nodes).unwrap();
        let t = breakdown_time(&h, &datum, &grid, 2.0, steps).unwrap();
        let dt = 2.0 / steps as f64;
        assert!((t - 1.0).abs() <= 2.0 * dt);
        if let Some(p) = prev {
            assert!((t - p).abs() <= 2.0 * dt);
        }
        prev = Some(t);
    }
}

#[test]
fn export_formats() {
    let grid = Grid::tensor(&[(-1.0, 1.0, 3), (0.0, 1.0, 2)]).unwrap();
    let datum = ExactManifold::quadratic(nalgebra::DMatrix::identity(2, 2), &[(-2.0, 2.0); 2]).unwrap();
    let sol = hj_solve(&Hamiltonian::free(2), &datum, &grid, 0.5, 2).unwrap();
    let mut buf = Vec::new();
    sol.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,Phi,valid"));
    assert_eq!(lines.count(), 3 * grid.len());
    let meta = sol.metadata();
    assert!(meta.get("grid").is_some());
}
