//! Hamilton–Jacobi equation `∂Φ/∂t + H(x, ∇Φ, t) = 0` by characteristics.
//!
//! Each grid node `x′` seeds the characteristic `(x′, ∇Φ₀(x′))`, which is
//! flowed while co-integrating `Φ = Φ₀(x′) + ∫ p dx − H dt`. A characteristic
//! stays valid until the finite-difference Jacobian `det(∂x_t/∂x′)` of its
//! grid neighbourhood first reaches zero. Values on the fixed grid are then
//! recovered from the valid characteristics of each time slice.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::dynamics::{flow, Hamiltonian};
use crate::error::{Error, Result};
use crate::manifolds::{ExactManifold, LagrangianManifold};
use crate::symplectic::PhasePoint;

/// Tensor-product grid with node index running fastest along the last axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidInput("grid needs at least one axis".into()));
        }
        for a in &axes {
            if a.len() < 2 {
                return Err(Error::TooFewPoints(a.len()));
            }
            if a.windows(2).any(|w| !(w[0] < w[1])) || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("grid axis must be strictly increasing".into()));
            }
        }
        Ok(Self { axes })
    }

    /// `nodes` equally spaced points on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        Self::tensor(&[(lo, hi, nodes)])
    }

    pub fn tensor(spec: &[(f64, f64, usize)]) -> Result<Self> {
        let axes = spec
            .iter()
            .map(|&(lo, hi, n)| {
                (0..n)
                    .map(|k| {
                        if k + 1 == n {
                            hi
                        } else {
                            lo + (hi - lo) * k as f64 / (n.max(2) - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = i % self.axes[d].len();
            i /= self.axes[d].len();
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&k, a)| acc * a.len() + k)
    }

    pub fn node(&self, i: usize) -> DVector<f64> {
        let idx = self.multi_index(i);
        DVector::from_fn(self.dim(), |d, _| self.axes[d][idx[d]])
    }

    /// Bounding box of the nodes.
    pub fn hull(&self) -> Vec<(f64, f64)> {
        self.axes
            .iter()
            .map(|a| (a[0], *a.last().expect("nonempty")))
            .collect()
    }

    /// Largest spacing along `axis`.
    pub fn max_step(&self, axis: usize) -> f64 {
        self.axes[axis]
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Neighbour indices `(lower, upper)` of node `i` along `axis`, clamped at the boundary.
    fn neighbours(&self, i: usize, axis: usize) -> (usize, usize) {
        let idx = self.multi_index(i);
        let k = idx[axis];
        let last = self.axes[axis].len() - 1;
        let mut lo = idx.clone();
        lo[axis] = k.saturating_sub(1);
        let mut hi = idx;
        hi[axis] = (k + 1).min(last);
        (self.flat_index(&lo), self.flat_index(&hi))
    }
}

/// Characteristics seeded at every grid node, sampled at every time step.
#[derive(Debug, Clone)]
struct Characteristics {
    times: Vec<f64>,
    /// `[node][time]`
    z: Vec<Vec<PhasePoint>>,
    /// `Φ` carried along, `[node][time]`
    phi: Vec<Vec<f64>>,
    valid_until: Vec<f64>,
}

fn seed_and_flow(
    h: &Hamiltonian,
    phi0: &ExactManifold,
    grid: &Grid,
    t_max: f64,
    steps: usize,
) -> Result<Characteristics> {
    if h.dim() != grid.dim() || phi0.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: h.dim().min(phi0.dim()),
        });
    }
    if !(t_max > 0.0) || steps == 0 {
        return Err(Error::InvalidInput("need t_max > 0 and steps ≥ 1".into()));
    }
    let runs: Vec<(Vec<PhasePoint>, Vec<f64>)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let z0 = PhasePoint::from_parts(x.clone(), phi0.gradient(&x));
            let base = phi0.value(&x);
            let traj = flow(h, &z0, 0.0, t_max, steps)?;
            Ok(traj
                .samples()
                .iter()
                .map(|s| (s.z.clone(), base + s.a))
                .unzip())
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = (0..=steps)
        .map(|k| {
            if k == steps {
                t_max
            } else {
                t_max * k as f64 / steps as f64
            }
        })
        .collect();
    let (z, phi): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let mut ch = Characteristics {
        times,
        z,
        phi,
        valid_until: vec![],
    };
    ch.valid_until = (0..grid.len())
        .map(|i| {
            let dets: Vec<f64> = (0..ch.times.len())
                .map(|k| jacobians(&ch, grid, i, k).0.determinant())
                .collect();
            first_nonpositive(&ch.times, &dets)
        })
        .collect();
    Ok(ch)
}

/// First time a sampled function reaches zero, linearly interpolated.
fn first_nonpositive(times: &[f64], vals: &[f64]) -> f64 {
    for k in 0..vals.len() {
        if vals[k] <= 0.0 {
            if k == 0 {
                return times[0];
            }
            let (a, b) = (vals[k - 1], vals[k]);
            return times[k - 1] + (times[k] - times[k - 1]) * a / (a - b);
        }
    }
    f64::INFINITY
}

/// `(∂x_t/∂x′, ∂p_t/∂x′)` at node `i`, time index `k`, from grid neighbours.
fn jacobians(ch: &Characteristics, grid: &Grid, i: usize, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = grid.dim();
    let mut jx = DMatrix::zeros(n, n);
    let mut jp = DMatrix::zeros(n, n);
    for axis in 0..n {
        let (lo, hi) = grid.neighbours(i, axis);
        let dx0 = grid.node(hi)[axis] - grid.node(lo)[axis];
        let (zl, zh) = (&ch.z[lo][k], &ch.z[hi][k]);
        jx.set_column(axis, &((&zh.x - &zl.x) / dx0));
        jp.set_column(axis, &((&zh.p - &zl.p) / dx0));
    }
    (jx, jp)
}

/// Solution of the Cauchy problem on a fixed grid.
#[derive(Debug, Clone)]
pub struct HjSolution {
    pub grid: Grid,
    pub times: Vec<f64>,
    /// `Φ(x, t)` as `[time][node]`; NaN where invalid.
    pub phi: Vec<Vec<f64>>,
    /// `∇ₓΦ(x, t)` as `[time][node]`; NaN where invalid.
    pub grad: Vec<Vec<DVector<f64>>>,
    pub valid: Vec<Vec<bool>>,
    /// Breakdown time of the characteristic seeded at each node.
    pub valid_until: Vec<f64>,
    /// Characteristic states `[node][time]`.
    pub characteristics: Vec<Vec<PhasePoint>>,
}

impl HjSolution {
    pub fn breakdown_time(&self) -> f64 {
        self.valid_until.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the time sample nearest `t`.
    pub fn time_index(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    /// CSV table with columns `t, x1..xn, Phi, valid`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.grid.dim()).map(|i| format!("x{i}")));
        header.push("Phi".into());
        header.push("valid".into());
        w.write_record(&header)?;
        for (k, &t) in self.times.iter().enumerate() {
            for i in 0..self.grid.len() {
                let mut row = vec![fmt17(t)];
                row.extend(self.grid.node(i).iter().map(|v| fmt17(*v)));
                row.push(fmt17(self.phi[k][i]));
                row.push(u8::from(self.valid[k][i]).to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Grid specification and breakdown summary.
    pub fn metadata(&self) -> serde_json::Value {
        let bt = self.breakdown_time();
        let last = self.valid.last().expect("at least one slice");
        json!({
            "grid": self.grid.axes().iter().map(|a| json!({
                "lo": a[0], "hi": a[a.len() - 1], "nodes": a.len()
            })).collect::<Vec<_>>(),
            "t_max": self.times.last(),
            "steps": self.times.len() - 1,
            "breakdown_time": if bt.is_finite() { json!(bt) } else { serde_json::Value::Null },
            "characteristics_broken": self.valid_until.iter().filter(|t| t.is_finite()).count(),
            "valid_nodes_final": last.iter().filter(|v| **v).count(),
            "nodes": self.grid.len(),
        })
    }
}

/// Float formatting with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Cubic Hermite interpolation of `(Φ, dΦ/dx)` on `[xa, xb]`, returning value and slope.
fn hermite(xa: f64, xb: f64, fa: f64, fb: f64, da: f64, db: f64, x: f64) -> (f64, f64) {
    let h = xb - xa;
    let u = (x - xa) / h;
    let (u2, u3) = (u * u, u * u * u);
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    let value = h00 * fa + h10 * h * da + h01 * fb + h11 * h * db;
    let slope = ((6.0 * u2 - 6.0 * u) * fa + (6.0 * u - 6.0 * u2) * fb) / h
        + (3.0 * u2 - 4.0 * u + 1.0) * da
        + (3.0 * u2 - 2.0 * u) * db;
    (value, slope)
}

type Slice = (Vec<f64>, Vec<DVector<f64>>, Vec<bool>);

fn resample_1d(ch: &Characteristics, grid: &Grid, k: usize) -> Slice {
    let t = ch.times[k];
    let m = grid.len();
    let alive = |i: usize| t < ch.valid_until[i];
    // maximal runs of consecutive live characteristics with increasing x_t
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < m {
        if !alive(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < m && alive(i + 1) && ch.z[i + 1][k].x[0] > ch.z[i][k].x[0] {
            i += 1;
        }
        if i > start {
            runs.push((start, i));
        }
        i += 1;
    }
    let nan = DVector::from_element(1, f64::NAN);
    let mut phi = vec![f64::NAN; m];
    let mut grad = vec![nan; m];
    let mut valid = vec![false; m];
    for j in 0..m {
        let x = grid.axes()[0][j];
        let covering: Vec<&(usize, usize)> = runs
            .iter()
            .filter(|(a, b)| ch.z[*a][k].x[0] <= x && x <= ch.z[*b][k].x[0])
            .collect();
        if covering.len() != 1 {
            continue;
        }
        let (a, b) = *covering[0];
        // last characteristic of the run at or left of x
        let mut lo = a;
        let mut hi = b;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if ch.z[mid][k].x[0] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (za, zb) = (&ch.z[lo][k], &ch.z[hi][k]);
        let (v, s) = if za.x[0] == x {
            (ch.phi[lo][k], za.p[0])
        } else if zb.x[0] == x {
            (ch.phi[hi][k], zb.p[0])
        } else {
            hermite(za.x[0], zb.x[0], ch.phi[lo][k], ch.phi[hi][k], za.p[0], zb.p[0], x)
        };
        phi[j] = v;
        grad[j] = DVector::from_element(1, s);
        valid[j] = true;
    }
    (phi, grad, valid)
}

fn resample_nd(ch: &Characteristics, grid: &Grid, k: usize) -> Slice {
    let t = ch.times[k];
    let m = grid.len();
    let n = grid.dim();
    let steps: Vec<f64> = (0..n).map(|d| grid.max_step(d)).collect();
    let results: Vec<(f64, DVector<f64>, bool)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let x = grid.node(j);
            let invalid = (f64::NAN, DVector::from_element(n, f64::NAN), false);
            let nearest = (0..m)
                .filter(|&i| t < ch.valid_until[i])
                .min_by(|&a, &b| {
                    let da = (&ch.z[a][k].x - &x).norm_squared();
                    let db = (&ch.z[b][k].x - &x).norm_squared();
                    da.total_cmp(&db)
                });
            let Some(c) = nearest else { return invalid };
            let (jx, jp) = jacobians(ch, grid, c, k);
            if jx.determinant() <= 0.0 {
                return invalid;
            }
            let Some(jinv) = jx.clone().try_inverse() else {
                return invalid;
            };
            let zc = &ch.z[c][k];
            let delta = &x - &zc.x;
            let foot = &jinv * &delta;
            if (0..n).any(|d| foot[d].abs() > steps[d] * (1.0 + 1e-12)) {
                return invalid;
            }
            let curv = &jp * &jinv;
            let curv = 0.5 * (&curv + curv.transpose());
            let g = &zc.p + &curv * &delta;
            let v = ch.phi[c][k] + zc.p.dot(&delta) + 0.5 * delta.dot(&(&curv * &delta));
            (v, g, true)
        })
        .collect();
    let mut phi = Vec::with_capacity(m);
    let mut grad = Vec::with_capacity(m);
    let mut valid = Vec::with_capacity(m);
    for (v, g, ok) in results {
        phi.push(v);
        grad.push(g);
        valid.push(ok);
    }
    (phi, grad, valid)
}

/// Solves the Cauchy problem with datum `Φ₀` on `[0, t_max]` in `steps` steps.
pub fn hj_solve(
    h: &Hamiltonian,
    phi0: &ExactManifold,
    grid: &Grid,
    t_max: f64,
    steps: usize,
) -> Result<HjSolution> {
    let ch = seed_and_flow(h, phi0, grid, t_max, steps)?;
    let slices: Vec<Slice> = (0..ch.times.len())
        .map(|k| {
            if grid.dim() == 1 {
                resample_1d(&ch, grid, k)
            } else {
                resample_nd(&ch, grid, k)
            }
        })
        .collect();
    let mut phi = Vec::with_capacity(slices.len());
    let mut grad = Vec::with_capacity(slices.len());
    let mut valid = Vec::with_capacity(slices.len());
    for (p, g, v) in slices {
        phi.push(p);
        grad.push(g);
        valid.push(v);
    }
    Ok(HjSolution {
        grid: grid.clone(),
        times: ch.times,
        phi,
        grad,
        valid,
        valid_until: ch.valid_until,
        characteristics: ch.z,
    })
}

/// Earliest breakdown time over all characteristics; `+∞` if none breaks
/// before `t_max`.
pub fn breakdown_time(
    h: &Hamiltonian,
    phi0: &ExactManifold,
    grid: &Grid,
    t_max: f64,
    steps: usize,
) -> Result<f64> {
    let ch = seed_and_flow(h, phi0, grid, t_max, steps)?;
    Ok(ch.valid_until.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Largest `|∂Φ/∂t + H(x, ∇Φ, t)|` at time index `k`, by central differences
/// over nodes whose stencil is valid. `None` when no node qualifies.
pub fn pde_residual(sol: &HjSolution, h: &Hamiltonian, k: usize) -> Option<f64> {
    if k == 0 || k + 1 >= sol.times.len() {
        return None;
    }
    let grid = &sol.grid;
    let n = grid.dim();
    let dt = sol.times[k + 1] - sol.times[k - 1];
    let mut worst: Option<f64> = None;
    'nodes: for i in 0..grid.len() {
        if !(sol.valid[k - 1][i] && sol.valid[k][i] && sol.valid[k + 1][i]) {
            continue;
        }
        let mut g = DVector::zeros(n);
        for axis in 0..n {
            let (lo, hi) = grid.neighbours(i, axis);
            if lo == i || hi == i || !sol.valid[k][lo] || !sol.valid[k][hi] {
                continue 'nodes;
            }
            let dx = grid.node(hi)[axis] - grid.node(lo)[axis];
            g[axis] = (sol.phi[k][hi] - sol.phi[k][lo]) / dx;
        }
        let phi_t = (sol.phi[k + 1][i] - sol.phi[k - 1][i]) / dt;
        let z = PhasePoint::from_parts(grid.node(i), g);
        let r = (phi_t + h.value(&z, sol.times[k])).abs();
        worst = Some(worst.map_or(r, |w: f64| w.max(r)));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn quadratic_datum(c: f64) -> ExactManifold {
        ExactManifold::quadratic(DMatrix::from_element(1, 1, c), &[(-5.0, 5.0)]).unwrap()
    }

    #[test]
    fn spreading_free_particle() {
        let grid = Grid::uniform(-1.0, 1.0, 201).unwrap();
        let sol = hj_solve(&Hamiltonian::free(1), &quadratic_datum(1.0), &grid, 1.0, 10).unwrap();
        let k = sol.times.len() - 1;
        for (j, &x) in grid.axes()[0].iter().enumerate() {
            assert!(sol.valid[k][j]);
            assert!((sol.phi[k][j] - x * x / 4.0).abs() < 1e-6);
        }
        assert!(sol.breakdown_time().is_infinite());
    }

    #[test]
    fn initial_slice_is_datum() {
        let grid = Grid::uniform(-1.0, 1.0, 21).unwrap();
        let datum = ExactManifold::new(1, Arc::new(|x: &DVector<f64>| x[0].sin() + 0.1 * x[0]), vec![(-2.0, 2.0)]).unwrap();
        let sol = hj_solve(&Hamiltonian::free(1), &datum, &grid, 0.5, 5).unwrap();
        for (j, &x) in grid.axes()[0].iter().enumerate() {
            assert_eq!(sol.phi[0][j], x.sin() + 0.1 * x);
        }
    }

    #[test]
    fn focusing_breaks_at_one() {
        let grid = Grid::uniform(-1.0, 1.0, 41).unwrap();
        let steps = 40;
        let sol = hj_solve(&Hamiltonian::free(1), &quadratic_datum(-1.0), &grid, 2.0, steps).unwrap();
        let dt = 2.0 / steps as f64;
        for t in &sol.valid_until {
            assert!((t - 1.0).abs() <= dt);
        }
        let after = sol.time_index(1.5);
        assert!(sol.valid[after].iter().all(|v| !v));
        assert!(sol.phi[after].iter().all(|v| v.is_nan()));
    }

    #[test]
    fn harmonic_quarter_period_caustic() {
        let grid = Grid::uniform(-1.0, 1.0, 21).unwrap();
        let steps = 200;
        let t = breakdown_time(&Hamiltonian::harmonic(1), &quadratic_datum(0.0), &grid, 3.0, steps).unwrap();
        assert!((t - std::f64::consts::FRAC_PI_2).abs() <= 3.0 / steps as f64);
    }

    #[test]
    fn two_dimensional_free_particle() {
        let grid = Grid::tensor(&[(-1.0, 1.0, 21), (-1.0, 1.0, 21)]).unwrap();
        let datum = ExactManifold::quadratic(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]), &[(-3.0, 3.0); 2]).unwrap();
        let sol = hj_solve(&Hamiltonian::free(2), &datum, &grid, 1.0, 4).unwrap();
        let k = sol.times.len() - 1;
        let mut checked = 0;
        for i in 0..grid.len() {
            if sol.valid[k][i] {
                let x = grid.node(i);
                let exact = x[0] * x[0] / 4.0 + 0.5 * x[1] * x[1] / (2.0 * 1.5);
                assert!((sol.phi[k][i] - exact).abs() < 1e-10);
                checked += 1;
            }
        }
        assert!(checked > grid.len() / 2);
    }

    #[test]
    fn csv_and_metadata() {
        let grid = Grid::uniform(0.0, 1.0, 3).unwrap();
        let sol = hj_solve(&Hamiltonian::free(1), &quadratic_datum(1.0), &grid, 1.0, 2).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x1,Phi,valid\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 3);
        let meta = sol.metadata();
        assert_eq!(meta["nodes"], 3);
        assert!(meta["breakdown_time"].is_null());
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![vec![0.0]]).is_err());
        assert!(Grid::new(vec![vec![0.0, 0.0]]).is_err());
        let g = Grid::tensor(&[(0.0, 1.0, 3), (0.0, 2.0, 5)]).unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g.flat_index(&g.multi_index(11)), 11);
        assert_eq!(g.node(7).as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| x * x * x - 2.0 * x;
        let d = |x: f64| 3.0 * x * x - 2.0;
        let (v, s) = hermite(0.2, 0.9, f(0.2), f(0.9), d(0.2), d(0.9), 0.5);
        assert!((v - f(0.5)).abs() < 1e-14);
        assert!((s - d(0.5)).abs() < 1e-13);
    }
}
