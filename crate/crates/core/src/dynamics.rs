//! Hamiltonians, their flows, and the Poincaré–Cartan action along trajectories.
//!
//! Gradients are ordered `(∂H/∂x, ∂H/∂p)`, so Hamilton's equations read
//! `ż = J∇H`. Every integrator co-integrates `a(t) = ∫ p dx − H dt` with an
//! increment that is the exact generating function of the discrete step, so
//! `p₁dx₁ − p₀dx₀ = d(Δa)` holds identically along any family of initial data.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::manifolds::fd_step;
use crate::quadrature::{action_along, path_action_integral};
use crate::symplectic::{j_matrix, PhasePoint};
use crate::tolerances::{NEWTON_MAX_ITER, NEWTON_TOL, TOL_EULER};

pub type HamFn = Arc<dyn Fn(&PhasePoint, f64) -> f64 + Send + Sync>;
pub type HamGradFn = Arc<dyn Fn(&PhasePoint, f64) -> DVector<f64> + Send + Sync>;
pub type HamHessFn = Arc<dyn Fn(&PhasePoint, f64) -> DMatrix<f64> + Send + Sync>;
/// A function of one half of phase space and time, e.g. `T(p, t)` or `V(x, t)`.
pub type PartFn = Arc<dyn Fn(&DVector<f64>, f64) -> f64 + Send + Sync>;
pub type PartGradFn = Arc<dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync>;
pub type CurveFn = Arc<dyn Fn(f64) -> PhasePoint + Send + Sync>;

/// `H(x, p, t) = T(p, t) + V(x, t)`.
#[derive(Clone)]
pub struct SeparableParts {
    pub kinetic: PartFn,
    pub kinetic_grad: PartGradFn,
    pub potential: PartFn,
    pub potential_grad: PartGradFn,
}

/// A (possibly time-dependent) Hamiltonian on `R²ⁿ`.
#[derive(Clone)]
pub struct Hamiltonian {
    n: usize,
    h: HamFn,
    grad: Option<HamGradFn>,
    hess: Option<HamHessFn>,
    time_independent: bool,
    quadratic_homogeneous: bool,
    separable: Option<SeparableParts>,
}

/// Deterministic sample points for structural checks at construction.
fn probe_points(n: usize, count: usize) -> Vec<PhasePoint> {
    (0..count)
        .map(|k| {
            let v = |j: usize| (12.9898 * (k + 1) as f64 + 78.233 * j as f64).sin() * 1.7;
            PhasePoint::from_parts(
                DVector::from_fn(n, |j, _| v(j)),
                DVector::from_fn(n, |j, _| v(j + n)),
            )
        })
        .collect()
}

impl Hamiltonian {
    /// A general Hamiltonian; gradient and Hessian fall back to central differences.
    pub fn new(n: usize, h: HamFn) -> Self {
        Self {
            n,
            h,
            grad: None,
            hess: None,
            time_independent: false,
            quadratic_homogeneous: false,
            separable: None,
        }
    }

    /// `H = T(p, t) + V(x, t)`, integrated by Störmer–Verlet.
    pub fn separable(n: usize, parts: SeparableParts) -> Self {
        let p1 = parts.clone();
        let p2 = parts.clone();
        let h: HamFn = Arc::new(move |z, t| (p1.kinetic)(&z.p, t) + (p1.potential)(&z.x, t));
        let grad: HamGradFn = Arc::new(move |z, t| {
            let gx = (p2.potential_grad)(&z.x, t);
            let gp = (p2.kinetic_grad)(&z.p, t);
            PhasePoint::from_parts(gx, gp).to_vector()
        });
        Self {
            separable: Some(parts),
            ..Self::new(n, h).with_gradient(grad)
        }
    }

    pub fn with_gradient(mut self, grad: HamGradFn) -> Self {
        self.grad = Some(grad);
        self
    }

    pub fn with_hessian(mut self, hess: HamHessFn) -> Self {
        self.hess = Some(hess);
        self
    }

    pub fn time_independent(mut self) -> Self {
        self.time_independent = true;
        self
    }

    /// Declares `H` quadratic homogeneous in `z`, checking Euler's identity
    /// `z·∇H = 2H` at deterministic probe points and times.
    pub fn quadratic_homogeneous(mut self) -> Result<Self> {
        for (k, z) in probe_points(self.n, 16).iter().enumerate() {
            let t = 0.37 * k as f64;
            let lhs = z.to_vector().dot(&self.gradient(z, t));
            let rhs = 2.0 * self.value(z, t);
            if (lhs - rhs).abs() > TOL_EULER * (1.0 + rhs.abs()) {
                return Err(Error::InvalidInput(format!(
                    "Euler identity fails: z·∇H = {lhs}, 2H = {rhs}"
                )));
            }
        }
        self.quadratic_homogeneous = true;
        Ok(self)
    }

    /// `H = ½|p|²`.
    pub fn free(n: usize) -> Self {
        let parts = SeparableParts {
            kinetic: Arc::new(|p, _| 0.5 * p.norm_squared()),
            kinetic_grad: Arc::new(|p, _| p.clone()),
            potential: Arc::new(|_, _| 0.0),
            potential_grad: Arc::new(|x, _| DVector::zeros(x.len())),
        };
        let mut hess = DMatrix::zeros(2 * n, 2 * n);
        for i in n..2 * n {
            hess[(i, i)] = 1.0;
        }
        Self::separable(n, parts)
            .with_hessian(Arc::new(move |_, _| hess.clone()))
            .time_independent()
            .quadratic_homogeneous()
            .expect("free Hamiltonian is quadratic")
    }

    /// `H = ½(|p|² + |x|²)`, integrated by implicit midpoint.
    pub fn harmonic(n: usize) -> Self {
        Self::quadratic(DMatrix::identity(2 * n, 2 * n)).expect("identity is symmetric")
    }

    /// `H = ½ zᵀQz` for symmetric `Q`.
    pub fn quadratic(q: DMatrix<f64>) -> Result<Self> {
        let (r, c) = q.shape();
        if r != c || r % 2 != 0 || r == 0 {
            return Err(Error::OddDimension { rows: r, cols: c });
        }
        if (&q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidInput("Q must be symmetric".into()));
        }
        let (q1, q2, q3) = (q.clone(), q.clone(), q);
        Self::new(
            r / 2,
            Arc::new(move |z, _| {
                let v = z.to_vector();
                0.5 * v.dot(&(&q1 * &v))
            }),
        )
        .with_gradient(Arc::new(move |z, _| &q2 * z.to_vector()))
        .with_hessian(Arc::new(move |_, _| q3.clone()))
        .time_independent()
        .quadratic_homogeneous()
    }

    /// `H = Σ ½pᵢ² + ¼xᵢ⁴`.
    pub fn anharmonic(n: usize) -> Self {
        let parts = SeparableParts {
            kinetic: Arc::new(|p, _| 0.5 * p.norm_squared()),
            kinetic_grad: Arc::new(|p, _| p.clone()),
            potential: Arc::new(|x, _| 0.25 * x.iter().map(|v| v.powi(4)).sum::<f64>()),
            potential_grad: Arc::new(|x, _| x.map(|v| v.powi(3))),
        };
        Self::separable(n, parts).time_independent()
    }

    /// `H^a(z) = σ(z, z_a)`, whose time-one flow is the translation `z ↦ z + z_a`.
    pub fn translation(z_a: &PhasePoint) -> Self {
        let n = z_a.dim();
        let (xa, pa) = (z_a.x.clone(), z_a.p.clone());
        let (xa2, pa2) = (xa.clone(), pa.clone());
        let parts = SeparableParts {
            kinetic: Arc::new(move |p, _| p.dot(&xa)),
            kinetic_grad: Arc::new(move |_, _| xa2.clone()),
            potential: Arc::new(move |x, _| -pa.dot(x)),
            potential_grad: Arc::new(move |_, _| -&pa2),
        };
        Self::separable(n, parts)
            .with_hessian(Arc::new(move |_, _| DMatrix::zeros(2 * n, 2 * n)))
            .time_independent()
    }

    /// `H^γ(z, t) = σ(z, γ̇(t))`, generating the rigid displacement along `γ`.
    pub fn displacement(curve: &CurveSpec) -> Self {
        let n = curve.dim();
        let (c1, c2, c3, c4) = (curve.clone(), curve.clone(), curve.clone(), curve.clone());
        let parts = SeparableParts {
            kinetic: Arc::new(move |p, t| p.dot(&c1.velocity(t).x)),
            kinetic_grad: Arc::new(move |_, t| c2.velocity(t).x),
            potential: Arc::new(move |x, t| -c3.velocity(t).p.dot(x)),
            potential_grad: Arc::new(move |_, t| -c4.velocity(t).p),
        };
        Self::separable(n, parts).with_hessian(Arc::new(move |_, _| DMatrix::zeros(2 * n, 2 * n)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    pub fn is_quadratic_homogeneous(&self) -> bool {
        self.quadratic_homogeneous
    }

    pub fn separable_parts(&self) -> Option<&SeparableParts> {
        self.separable.as_ref()
    }

    pub fn value(&self, z: &PhasePoint, t: f64) -> f64 {
        (self.h)(z, t)
    }

    /// `∇H = (∂H/∂x, ∂H/∂p)`.
    pub fn gradient(&self, z: &PhasePoint, t: f64) -> DVector<f64> {
        match &self.grad {
            Some(g) => g(z, t),
            None => {
                let v = z.to_vector();
                let mut g = DVector::zeros(2 * self.n);
                for i in 0..2 * self.n {
                    let h = fd_step(v[i]);
                    let at = |k: f64| {
                        let mut w = v.clone();
                        w[i] += k * h;
                        (self.h)(&PhasePoint::from_vector(&w), t)
                    };
                    g[i] = (at(-2.0) - at(2.0) + 8.0 * (at(1.0) - at(-1.0))) / (12.0 * h);
                }
                g
            }
        }
    }

    pub fn hessian(&self, z: &PhasePoint, t: f64) -> DMatrix<f64> {
        match &self.hess {
            Some(h) => h(z, t),
            None => {
                let v = z.to_vector();
                let m = 2 * self.n;
                let mut hess = DMatrix::zeros(m, m);
                for i in 0..m {
                    let h = fd_step(v[i]);
                    let mut plus = v.clone();
                    plus[i] += h;
                    let mut minus = v.clone();
                    minus[i] -= h;
                    let col = (self.gradient(&PhasePoint::from_vector(&plus), t)
                        - self.gradient(&PhasePoint::from_vector(&minus), t))
                        / (2.0 * h);
                    hess.set_column(i, &col);
                }
                0.5 * (&hess + hess.transpose())
            }
        }
    }

    /// `X_H = J∇H = (∂H/∂p, −∂H/∂x)`.
    pub fn vector_field(&self, z: &PhasePoint, t: f64) -> PhasePoint {
        let g = PhasePoint::from_vector(&self.gradient(z, t));
        PhasePoint::from_parts(g.p, -g.x)
    }
}

/// A smooth curve `s ↦ γ(s)` in phase space.
#[derive(Clone)]
pub struct CurveSpec {
    n: usize,
    gamma: CurveFn,
    derivative: Option<CurveFn>,
}

impl CurveSpec {
    pub fn new(n: usize, gamma: CurveFn) -> Self {
        Self {
            n,
            gamma,
            derivative: None,
        }
    }

    pub fn with_derivative(mut self, derivative: CurveFn) -> Self {
        self.derivative = Some(derivative);
        self
    }

    /// `s ↦ s·z_a`.
    pub fn segment(z_a: &PhasePoint) -> Self {
        let (a, b) = (z_a.clone(), z_a.clone());
        Self::new(z_a.dim(), Arc::new(move |s| &a * s)).with_derivative(Arc::new(move |_| b.clone()))
    }

    /// `s ↦ (r cos s, r sin s)` in one degree of freedom.
    pub fn circle(r: f64) -> Self {
        Self::new(1, Arc::new(move |s| PhasePoint::scalar(r * s.cos(), r * s.sin())))
            .with_derivative(Arc::new(move |s| PhasePoint::scalar(-r * s.sin(), r * s.cos())))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn point(&self, s: f64) -> PhasePoint {
        (self.gamma)(s)
    }

    /// `γ̇(s)`, analytic when supplied, otherwise fourth-order central differences.
    pub fn velocity(&self, s: f64) -> PhasePoint {
        match &self.derivative {
            Some(d) => d(s),
            None => {
                let h = fd_step(s);
                let g = |k: f64| (self.gamma)(s + k * h).to_vector();
                PhasePoint::from_vector(&((g(-2.0) - g(2.0) + (g(1.0) - g(-1.0)) * 8.0) / (12.0 * h)))
            }
        }
    }
}

/// One-step method used by [`flow_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    ImplicitMidpoint,
    StormerVerlet,
}

/// One sample `(t, z_t, a(t))` of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub z: PhasePoint,
    pub a: f64,
}

/// Time-stamped samples of a trajectory with its accumulated action.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasedTrajectory {
    samples: Vec<TrajectorySample>,
}

impl PhasedTrajectory {
    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory is nonempty")
    }

    pub fn points(&self) -> Vec<PhasePoint> {
        self.samples.iter().map(|s| s.z.clone()).collect()
    }
}

/// Final value of `a = ∫ p dx − H dt` along the trajectory.
pub fn action_increment(traj: &PhasedTrajectory) -> f64 {
    traj.last().a - traj.first().a
}

fn midpoint_step(h: &Hamiltonian, z0: &PhasePoint, t0: f64, dt: f64) -> Result<(PhasePoint, f64)> {
    let n = h.dim();
    let tm = t0 + 0.5 * dt;
    let j = j_matrix(n);
    let v0 = z0.to_vector();
    let mut v1 = &v0 + (&j * h.gradient(z0, t0)) * dt;
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        let zm = PhasePoint::from_vector(&((&v0 + &v1) * 0.5));
        let residual = &v1 - &v0 - (&j * h.gradient(&zm, tm)) * dt;
        let jac = DMatrix::identity(2 * n, 2 * n) - (&j * h.hessian(&zm, tm)) * (0.5 * dt);
        let Some(update) = jac.lu().solve(&residual) else {
            break;
        };
        v1 -= &update;
        if !v1.iter().all(|v| v.is_finite()) {
            break;
        }
        if update.norm() <= NEWTON_TOL * (1.0 + v1.norm()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::StepFailure { t: t0 });
    }
    let z1 = PhasePoint::from_vector(&v1);
    let zm = PhasePoint::from_vector(&((&v0 + &v1) * 0.5));
    let da = zm.p.dot(&(&z1.x - &z0.x)) - dt * h.value(&zm, tm);
    Ok((z1, da))
}

fn verlet_step(parts: &SeparableParts, z0: &PhasePoint, t0: f64, dt: f64) -> Result<(PhasePoint, f64)> {
    let (tm, t1) = (t0 + 0.5 * dt, t0 + dt);
    let ph = &z0.p - (parts.potential_grad)(&z0.x, t0) * (0.5 * dt);
    let gt = (parts.kinetic_grad)(&ph, tm);
    let x1 = &z0.x + &gt * dt;
    let p1 = &ph - (parts.potential_grad)(&x1, t1) * (0.5 * dt);
    let da = dt * (ph.dot(&gt) - (parts.kinetic)(&ph, tm))
        - 0.5 * dt * ((parts.potential)(&z0.x, t0) + (parts.potential)(&x1, t1));
    let z1 = PhasePoint::from_parts(x1, p1);
    if !z1.is_finite() {
        return Err(Error::StepFailure { t: t0 });
    }
    Ok((z1, da))
}

/// Integrates from `(z0, t0)` to `t1` in `steps` equal steps, co-integrating
/// the action. Separable Hamiltonians use Störmer–Verlet, all others
/// implicit midpoint. `t1 = t0` yields the single initial sample.
pub fn flow(h: &Hamiltonian, z0: &PhasePoint, t0: f64, t1: f64, steps: usize) -> Result<PhasedTrajectory> {
    let method = if h.separable.is_some() {
        Integrator::StormerVerlet
    } else {
        Integrator::ImplicitMidpoint
    };
    flow_with(h, z0, t0, t1, steps, method)
}

pub fn flow_with(
    h: &Hamiltonian,
    z0: &PhasePoint,
    t0: f64,
    t1: f64,
    steps: usize,
    method: Integrator,
) -> Result<PhasedTrajectory> {
    check_dim(h.dim(), z0.dim())?;
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be at least 1".into()));
    }
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::InvalidInput("non-finite time".into()));
    }
    let first = TrajectorySample {
        t: t0,
        z: z0.clone(),
        a: 0.0,
    };
    if t1 == t0 {
        return Ok(PhasedTrajectory {
            samples: vec![first],
        });
    }
    let parts = match method {
        Integrator::StormerVerlet => Some(h.separable.as_ref().ok_or_else(|| {
            Error::InvalidInput("Störmer–Verlet needs a separable Hamiltonian".into())
        })?),
        Integrator::ImplicitMidpoint => None,
    };
    let dt = (t1 - t0) / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(first);
    let (mut z, mut a) = (z0.clone(), 0.0);
    for k in 0..steps {
        let t = t0 + dt * k as f64;
        let (z1, da) = match parts {
            Some(parts) => verlet_step(parts, &z, t, dt)?,
            None => midpoint_step(h, &z, t, dt)?,
        };
        z = z1;
        a += da;
        let t_next = if k + 1 == steps { t1 } else { t0 + dt * (k + 1) as f64 };
        samples.push(TrajectorySample {
            t: t_next,
            z: z.clone(),
            a,
        });
    }
    Ok(PhasedTrajectory { samples })
}

/// Final point and action of the flow from `(z0, t0)` to `t1`.
pub fn flow_endpoint(h: &Hamiltonian, z0: &PhasePoint, t0: f64, t1: f64, steps: usize) -> Result<(PhasePoint, f64)> {
    let traj = flow(h, z0, t0, t1, steps)?;
    let last = traj.last();
    Ok((last.z.clone(), last.a))
}

/// Flows a batch of initial points concurrently.
pub fn flow_many(
    h: &Hamiltonian,
    z0s: &[PhasePoint],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Vec<PhasedTrajectory>> {
    z0s.par_iter().map(|z| flow(h, z, t0, t1, steps)).collect()
}

/// `∫ p dx` along the time-`t` image of the piecewise-linear curve.
fn transported_curve_action(h: &Hamiltonian, curve: &[PhasePoint], t: f64, steps: usize) -> Result<f64> {
    curve
        .windows(2)
        .map(|w| {
            let d = &w[1] - &w[0];
            action_along(
                |s| Ok(flow_endpoint(h, &(&w[0] + &(&d * s)), 0.0, t, steps)?.0),
                0.0,
                1.0,
            )
        })
        .sum()
}

/// Circulation of `p dx − H dt` around the boundary of the surface swept by
/// the piecewise-linear `curve` under the flow on `[0, t]`:
/// initial curve, endpoint trajectory, reversed image curve, reversed
/// start-point trajectory. The image curve is integrated adaptively.
pub fn invariance_defect(h: &Hamiltonian, curve: &[PhasePoint], t: f64, steps: usize) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::TooFewPoints(curve.len()));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let initial = path_action_integral(curve)?;
    let image = transported_curve_action(h, curve, t, steps)?;
    let a_start = flow_endpoint(h, &curve[0], 0.0, t, steps)?.1;
    let a_end = flow_endpoint(h, curve.last().expect("nonempty"), 0.0, t, steps)?.1;
    Ok(initial + a_end - image - a_start)
}

/// As [`invariance_defect`], with the image curve replaced by the polyline
/// through the images of the given vertices. The result is second order in
/// the vertex spacing.
pub fn invariance_defect_sampled(h: &Hamiltonian, curve: &[PhasePoint], t: f64, steps: usize) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::TooFewPoints(curve.len()));
    }
    let ends: Vec<(PhasePoint, f64)> = curve
        .par_iter()
        .map(|z| flow_endpoint(h, z, 0.0, t, steps))
        .collect::<Result<_>>()?;
    let image: Vec<PhasePoint> = ends.iter().map(|(z, _)| z.clone()).collect();
    let initial = path_action_integral(curve)?;
    let transported = path_action_integral(&image)?;
    Ok(initial + ends.last().expect("nonempty").1 - transported - ends[0].1)
}
