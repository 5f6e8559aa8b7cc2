use std::f64::consts::PI;

use nalgebra::DVector;

use super::{periodic_count, projection_det, LagrangianManifold};
use crate::error::{Error, Result};
use crate::quadrature::action_along;
use crate::symplectic::PhasePoint;
use crate::tolerances::{NEWTON_MAX_ITER, TOL_CAUSTIC};

const TWO_PI: f64 = 2.0 * PI;

/// A point of the universal cover: a homotopy class of paths from the base point.
///
/// The stored path lives in lifted parameter space, so its last vertex
/// determines both the endpoint and the winding vector. Endpoint coordinates
/// on periodic axes are normalized into `[θ̄ᵢ, θ̄ᵢ + 2π)` and
/// `windings[k] = ⌊(θ_lift − θ̄)/2π⌋` for the `k`-th periodic axis.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyPoint {
    windings: Vec<i64>,
    endpoint: DVector<f64>,
    path: Vec<DVector<f64>>,
}

impl HomotopyPoint {
    /// The class at parameter `theta` reached with the given extra windings,
    /// represented by a straight lifted segment from `θ̄`.
    pub fn new(m: &dyn LagrangianManifold, theta: &DVector<f64>, windings: &[i64]) -> Result<Self> {
        check_windings(m, windings)?;
        let base = m.base();
        let mut lifted = theta.clone();
        let mut k = 0;
        for (i, &per) in m.periodic().iter().enumerate() {
            if per {
                let w0 = ((theta[i] - base[i]) / TWO_PI).floor();
                lifted[i] = theta[i] - TWO_PI * w0 + TWO_PI * windings[k] as f64;
                k += 1;
            }
        }
        Self::from_path(m, vec![base.clone(), lifted])
    }

    /// The base point itself.
    pub fn base(m: &dyn LagrangianManifold) -> Self {
        Self::from_path(m, vec![m.base().clone()]).expect("base point lies in the domain")
    }

    /// Class of a lifted polyline starting at `θ̄`. A start differing from
    /// `θ̄` by whole periods on periodic axes is shifted back.
    pub fn from_path(m: &dyn LagrangianManifold, mut path: Vec<DVector<f64>>) -> Result<Self> {
        let n = m.dim();
        if path.is_empty() {
            return Err(Error::TooFewPoints(0));
        }
        if let Some(v) = path.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        let base = m.base();
        let mut offset = DVector::zeros(n);
        for i in 0..n {
            let d = path[0][i] - base[i];
            if m.periodic()[i] {
                let k = (d / TWO_PI).round();
                if (d - k * TWO_PI).abs() > 1e-12 * (1.0 + base[i].abs()) {
                    return Err(Error::InvalidInput("path does not start at the base point".into()));
                }
                offset[i] = k * TWO_PI;
            } else if d.abs() > 1e-12 * (1.0 + base[i].abs()) {
                return Err(Error::InvalidInput("path does not start at the base point".into()));
            }
        }
        for v in path.iter_mut() {
            *v -= &offset;
        }
        path[0] = base.clone();
        if let Some(v) = path.iter().find(|v| !m.contains(v)) {
            return Err(Error::PathLeavesDomain(v.iter().copied().collect()));
        }
        let (endpoint, windings) = normalize(m, path.last().expect("nonempty"));
        Ok(Self {
            windings,
            endpoint,
            path,
        })
    }

    pub fn windings(&self) -> &[i64] {
        &self.windings
    }

    /// Parameter of the projection `π(ž)`.
    pub fn endpoint(&self) -> &DVector<f64> {
        &self.endpoint
    }

    pub fn path(&self) -> &[DVector<f64>] {
        &self.path
    }

    /// Endpoint in lifted parameter space.
    pub fn lifted(&self) -> &DVector<f64> {
        self.path.last().expect("nonempty")
    }

    /// `π(ž)`.
    pub fn project(&self, m: &dyn LagrangianManifold) -> PhasePoint {
        m.point(&self.endpoint)
    }

    /// Appends lifted vertices to the representative path.
    pub fn extend(&self, m: &dyn LagrangianManifold, vertices: &[DVector<f64>]) -> Result<Self> {
        let mut path = self.path.clone();
        path.extend(vertices.iter().cloned());
        Self::from_path(m, path)
    }

    /// `γ̌ž`: the loop traversed first, then the path of `ž`.
    pub fn after_loop(&self, m: &dyn LagrangianManifold, lp: &LoopClass) -> Result<Self> {
        let shift = lift_shift(m, &lp.windings)?;
        let mut path = vec![m.base().clone()];
        path.extend(self.path.iter().map(|v| v + &shift));
        Self::from_path(m, path)
    }
}

fn normalize(m: &dyn LagrangianManifold, lifted: &DVector<f64>) -> (DVector<f64>, Vec<i64>) {
    let base = m.base();
    let mut endpoint = lifted.clone();
    let mut windings = Vec::new();
    for (i, &per) in m.periodic().iter().enumerate() {
        if per {
            let w = ((lifted[i] - base[i]) / TWO_PI).floor();
            endpoint[i] = lifted[i] - w * TWO_PI;
            windings.push(w as i64);
        }
    }
    (endpoint, windings)
}

fn check_windings(m: &dyn LagrangianManifold, windings: &[i64]) -> Result<()> {
    let k = periodic_count(m);
    if k == 0 && windings.iter().any(|w| *w != 0) {
        return Err(Error::NonPeriodicWinding);
    }
    if k != 0 && windings.len() != k {
        return Err(Error::WindingMismatch {
            expected: k,
            got: windings.len(),
        });
    }
    Ok(())
}

/// Lifted parameter displacement `2π·w` spread over the periodic axes.
fn lift_shift(m: &dyn LagrangianManifold, windings: &[i64]) -> Result<DVector<f64>> {
    check_windings(m, windings)?;
    let mut shift = DVector::zeros(m.dim());
    let mut k = 0;
    for (i, &per) in m.periodic().iter().enumerate() {
        if per {
            shift[i] = TWO_PI * windings[k] as f64;
            k += 1;
        }
    }
    Ok(shift)
}

/// A class of loops at the base point, labelled by its winding vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LoopClass {
    pub windings: Vec<i64>,
}

impl LoopClass {
    pub fn new(windings: Vec<i64>) -> Self {
        Self { windings }
    }

    pub fn is_trivial(&self) -> bool {
        self.windings.iter().all(|w| *w == 0)
    }

    /// One unit loop per periodic axis.
    pub fn generators(m: &dyn LagrangianManifold) -> Vec<LoopClass> {
        let k = periodic_count(m);
        (0..k)
            .map(|i| {
                let mut w = vec![0; k];
                w[i] = 1;
                LoopClass::new(w)
            })
            .collect()
    }
}

/// `∫ p dx` along one straight lifted segment.
fn segment_action(m: &dyn LagrangianManifold, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let d = b - a;
    action_along(|s| Ok(m.point(&(a + &d * s))), 0.0, 1.0)
}

/// `φ(ž) = ∫ p dx` along the representative path, so that `φ(z̄) = 0`.
pub fn phase(m: &dyn LagrangianManifold, hp: &HomotopyPoint) -> Result<f64> {
    if let Some(v) = hp.path.iter().find(|v| !m.contains(v)) {
        return Err(Error::PathLeavesDomain(v.iter().copied().collect()));
    }
    hp.path
        .windows(2)
        .map(|w| segment_action(m, &w[0], &w[1]))
        .sum()
}

/// Period `C(γ) = ∮_γ p dx` of a loop class, taken along the straight lifted
/// loop from `θ̄`. Positive windings run in the parameter-increasing direction.
pub fn loop_period(m: &dyn LagrangianManifold, lp: &LoopClass) -> Result<f64> {
    let shift = lift_shift(m, &lp.windings)?;
    if lp.is_trivial() {
        return Ok(0.0);
    }
    let base = m.base();
    segment_action(m, base, &(base + shift))
}

/// The local phase `Φ(x) = φ(ž(x))` on a caustic-free branch through `π(ž)`.
pub struct LocalPhase<'a> {
    manifold: &'a dyn LagrangianManifold,
    hp: HomotopyPoint,
    phase0: f64,
    det_sign: f64,
}

/// Local generating function of the branch through `ž`.
///
/// Fails with `CausticAtPoint` when `∂x/∂θ` is singular at `π(ž)`.
pub fn local_generating_function<'a>(
    m: &'a dyn LagrangianManifold,
    hp: &HomotopyPoint,
) -> Result<LocalPhase<'a>> {
    let det = projection_det(m, hp.lifted());
    if det.abs() < TOL_CAUSTIC {
        return Err(Error::CausticAtPoint(hp.endpoint().iter().copied().collect()));
    }
    Ok(LocalPhase {
        manifold: m,
        hp: hp.clone(),
        phase0: phase(m, hp)?,
        det_sign: det.signum(),
    })
}

impl LocalPhase<'_> {
    /// Lifted parameter on this branch above position `x`, by Newton iteration
    /// on `x(θ) = x` started from `ž`.
    pub fn chart_inverse(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.manifold;
        let n = m.dim();
        let fail = || Error::LiftFailed(x.iter().copied().collect());
        let mut th = self.hp.lifted().clone();
        for _ in 0..NEWTON_MAX_ITER {
            let r = &m.point(&th).x - x;
            let t = m.tangent(&th);
            let jac = t.view((0, 0), (n, n)).into_owned();
            let step = jac.lu().solve(&r).ok_or_else(fail)?;
            // damp steps that would jump across the caustic
            let mut scale = 1.0;
            let mut next = &th - &step;
            while (projection_det(m, &next) * self.det_sign < TOL_CAUSTIC || !m.contains(&next))
                && scale > 1e-6
            {
                scale *= 0.5;
                next = &th - &step * scale;
            }
            if scale <= 1e-6 {
                return Err(fail());
            }
            th = next;
            if step.norm() * scale <= 1e-14 * (1.0 + th.norm()) {
                break;
            }
        }
        let r = (&m.point(&th).x - x).norm();
        if r > 1e-10 * (1.0 + x.norm()) {
            return Err(fail());
        }
        Ok(th)
    }

    /// `Φ(x)`.
    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        let th = self.chart_inverse(x)?;
        Ok(self.phase0 + segment_action(self.manifold, self.hp.lifted(), &th)?)
    }

    /// The branch momentum `p(x)`; equals `∇Φ(x)`.
    pub fn momentum(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let th = self.chart_inverse(x)?;
        Ok(self.manifold.point(&th).p)
    }

    /// Homotopy class above `x` on this branch.
    pub fn cover_point(&self, x: &DVector<f64>) -> Result<HomotopyPoint> {
        let th = self.chart_inverse(x)?;
        self.hp.extend(self.manifold, &[th])
    }
}

/// Lifts a phase-space curve starting at `π(ž)` to the cover by Gauss–Newton
/// continuation of `ψ(θ) = z`, returning the class at the curve's end.
pub fn lift_curve(
    m: &dyn LagrangianManifold,
    hp: &HomotopyPoint,
    curve: &[PhasePoint],
) -> Result<HomotopyPoint> {
    let mut th = hp.lifted().clone();
    let mut vertices = Vec::with_capacity(curve.len());
    for z in curve {
        let target = z.to_vector();
        for _ in 0..NEWTON_MAX_ITER {
            let r = m.point(&th).to_vector() - &target;
            let t = m.tangent(&th);
            let normal = t.transpose() * &t;
            let step = normal
                .cholesky()
                .ok_or_else(|| Error::LiftFailed(target.iter().copied().collect()))?
                .solve(&(t.transpose() * r));
            th -= &step;
            if step.norm() <= 1e-14 * (1.0 + th.norm()) {
                break;
            }
        }
        let r = (m.point(&th).to_vector() - &target).norm();
        if r > 1e-8 * (1.0 + target.norm()) {
            return Err(Error::LiftFailed(target.iter().copied().collect()));
        }
        vertices.push(th.clone());
    }
    hp.extend(m, &vertices)
}
