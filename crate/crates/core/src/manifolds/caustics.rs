use std::f64::consts::PI;

use nalgebra::DVector;

use super::LagrangianManifold;
use crate::tolerances::{TOL_CAUSTIC, TOL_CAUSTIC_ROOT};

/// `det(∂x/∂θ)` divided by the product of the column norms of `∂ψ/∂θ`.
///
/// Lies in `[−1, 1]`; it vanishes exactly on the caustic.
pub fn projection_det(m: &dyn LagrangianManifold, theta: &DVector<f64>) -> f64 {
    let n = m.dim();
    let t = m.tangent(theta);
    let x_block = t.view((0, 0), (n, n)).into_owned();
    let norms: f64 = (0..n).map(|i| t.column(i).norm()).product();
    if norms == 0.0 {
        return 0.0;
    }
    x_block.determinant() / norms
}

fn axis_range(m: &dyn LagrangianManifold, i: usize) -> (f64, f64) {
    if m.periodic()[i] {
        let b = m.base()[i];
        (b, b + 2.0 * PI)
    } else {
        m.bounds()[i]
    }
}

fn axis_nodes(m: &dyn LagrangianManifold, i: usize, resolution: usize) -> Vec<f64> {
    let (lo, hi) = axis_range(m, i);
    if m.periodic()[i] {
        (0..resolution)
            .map(|k| lo + (hi - lo) * k as f64 / resolution as f64)
            .collect()
    } else {
        (0..resolution)
            .map(|k| lo + (hi - lo) * k as f64 / (resolution - 1) as f64)
            .collect()
    }
}

/// Roots of `s ↦ projection_det` along one grid line through `anchor`.
fn scan_line(
    m: &dyn LagrangianManifold,
    anchor: &DVector<f64>,
    axis: usize,
    resolution: usize,
    out: &mut Vec<DVector<f64>>,
) {
    let (lo, hi) = axis_range(m, axis);
    let samples = if m.periodic()[axis] {
        resolution
    } else {
        resolution - 1
    };
    let at = |s: f64| {
        let mut th = anchor.clone();
        th[axis] = s;
        th
    };
    let f = |s: f64| projection_det(m, &at(s));
    let nodes: Vec<f64> = (0..=samples)
        .map(|k| lo + (hi - lo) * k as f64 / samples as f64)
        .collect();
    let vals: Vec<f64> = nodes.iter().map(|&s| f(s)).collect();
    for k in 0..=samples {
        if vals[k].abs() < TOL_CAUSTIC {
            out.push(at(nodes[k]));
            continue;
        }
        if k < samples && vals[k + 1].abs() >= TOL_CAUSTIC && vals[k] * vals[k + 1] < 0.0 {
            let (mut a, mut b, fa) = (nodes[k], nodes[k + 1], vals[k]);
            while b - a > TOL_CAUSTIC_ROOT {
                let mid = 0.5 * (a + b);
                if f(mid) * fa > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out.push(at(0.5 * (a + b)));
        }
    }
}

/// Caustic points found on the grid lines of a `resolution`-per-axis grid.
///
/// Every grid line is scanned for zeros of the normalized projection
/// determinant; sign changes are refined by bisection. Points are reported
/// with periodic coordinates in `[θ̄ᵢ, θ̄ᵢ + 2π)` and without duplicates.
pub fn caustic_points(m: &dyn LagrangianManifold, resolution: usize) -> Vec<DVector<f64>> {
    let n = m.dim();
    let resolution = resolution.max(2);
    let nodes: Vec<Vec<f64>> = (0..n).map(|i| axis_nodes(m, i, resolution)).collect();
    let mut found = Vec::new();
    for axis in 0..n {
        // iterate over all grid values of the other axes
        let others: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
        let count = resolution.pow(others.len() as u32);
        for idx in 0..count {
            let mut anchor = DVector::zeros(n);
            let mut rem = idx;
            for &o in &others {
                anchor[o] = nodes[o][rem % resolution];
                rem /= resolution;
            }
            scan_line(m, &anchor, axis, resolution, &mut found);
        }
    }
    let base = m.base();
    for th in found.iter_mut() {
        for i in 0..n {
            if m.periodic()[i] {
                th[i] = base[i] + (th[i] - base[i]).rem_euclid(2.0 * PI);
            }
        }
    }
    let mut unique: Vec<DVector<f64>> = Vec::new();
    for th in found {
        let dup = unique.iter().any(|u| {
            (0..n).all(|i| {
                let d = (u[i] - th[i]).abs();
                let d = if m.periodic()[i] {
                    d.min(2.0 * PI - d)
                } else {
                    d
                };
                d < 1e-9
            })
        });
        if !dup {
            unique.push(th);
        }
    }
    unique
}
