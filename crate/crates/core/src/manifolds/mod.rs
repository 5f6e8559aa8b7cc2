//! Lagrangian manifolds, paths on them, and phases on their universal cover.
//!
//! Every manifold is presented through a parametrization `ψ: Θ → R²ⁿ` of an
//! `n`-dimensional parameter box. Some parameter axes may be periodic with
//! period `2π`; the universal cover is then the lifted parameter space and a
//! homotopy class of paths from the base point is a lifted endpoint.

mod caustics;
mod cover;
mod exact;
mod param;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::symplectic::{sigma, PhasePoint, SymplecticMap};

pub use caustics::{caustic_points, projection_det};
pub use cover::{
    lift_curve, local_generating_function, loop_period, phase, HomotopyPoint, LocalPhase,
    LoopClass,
};
pub use exact::ExactManifold;
pub use param::ParamManifold;

/// Scalar function of a vector argument.
pub type FieldFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
/// Vector-valued function of a vector argument.
pub type VectorFieldFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
/// Parametrization `θ ↦ ψ(θ)`.
pub type ImmersionFn = Arc<dyn Fn(&DVector<f64>) -> PhasePoint + Send + Sync>;
/// Tangent map `θ ↦ ∂ψ/∂θ` as a `2n×n` matrix.
pub type TangentFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// An immersed Lagrangian manifold given by a parametrization.
pub trait LagrangianManifold: Send + Sync {
    fn dim(&self) -> usize;

    /// `ψ(θ)`.
    fn point(&self, theta: &DVector<f64>) -> PhasePoint;

    /// Columns `∂ψ/∂θᵢ`, stacked as `(∂x/∂θ; ∂p/∂θ)`.
    fn tangent(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        fd_tangent(self, theta)
    }

    /// Per-axis periodicity (period `2π`).
    fn periodic(&self) -> &[bool];

    /// Parameter `θ̄` of the base point, where the phase vanishes.
    fn base(&self) -> &DVector<f64>;

    /// Parameter bounds; entries for periodic axes are ignored.
    fn bounds(&self) -> &[(f64, f64)];

    fn contains(&self, theta: &DVector<f64>) -> bool {
        theta.len() == self.dim()
            && theta.iter().all(|v| v.is_finite())
            && self
                .periodic()
                .iter()
                .zip(self.bounds())
                .zip(theta.iter())
                .all(|((&per, &(lo, hi)), &v)| per || (lo..=hi).contains(&v))
    }
}

impl<M: LagrangianManifold + ?Sized> LagrangianManifold for Arc<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn point(&self, theta: &DVector<f64>) -> PhasePoint {
        (**self).point(theta)
    }
    fn tangent(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        (**self).tangent(theta)
    }
    fn periodic(&self) -> &[bool] {
        (**self).periodic()
    }
    fn base(&self) -> &DVector<f64> {
        (**self).base()
    }
    fn bounds(&self) -> &[(f64, f64)] {
        (**self).bounds()
    }
    fn contains(&self, theta: &DVector<f64>) -> bool {
        (**self).contains(theta)
    }
}

/// Number of periodic parameter axes.
pub fn periodic_count(m: &dyn LagrangianManifold) -> usize {
    m.periodic().iter().filter(|p| **p).count()
}

/// Fourth-order central difference step for a coordinate of size `v`.
pub(crate) fn fd_step(v: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + v.abs())
}

/// Fourth-order central differences of a vector function.
pub(crate) fn fd_jacobian<F>(f: F, at: &DVector<f64>, rows: usize) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = at.len();
    let mut jac = DMatrix::zeros(rows, n);
    for i in 0..n {
        let h = fd_step(at[i]);
        let shifted = |k: f64| {
            let mut y = at.clone();
            y[i] += k * h;
            f(&y)
        };
        let col = (shifted(-2.0) - shifted(2.0) + (shifted(1.0) - shifted(-1.0)) * 8.0) / (12.0 * h);
        jac.set_column(i, &col);
    }
    jac
}

fn fd_tangent<M: LagrangianManifold + ?Sized>(m: &M, theta: &DVector<f64>) -> DMatrix<f64> {
    let n = m.dim();
    fd_jacobian(|th| m.point(th).to_vector(), theta, 2 * n)
}

fn tangent_columns(t: &DMatrix<f64>) -> Vec<PhasePoint> {
    (0..t.ncols())
        .map(|i| PhasePoint::from_vector(&t.column(i).into_owned()))
        .collect()
}

/// Largest `|σ(∂ᵢψ, ∂ⱼψ)|` at `θ`.
pub fn pullback_defect(m: &dyn LagrangianManifold, theta: &DVector<f64>) -> f64 {
    let cols = tangent_columns(&m.tangent(theta));
    let mut worst: f64 = 0.0;
    for i in 0..cols.len() {
        for j in (i + 1)..cols.len() {
            worst = worst.max(sigma(&cols[i], &cols[j]).abs());
        }
    }
    worst
}

/// True iff the pullback of σ is below `tol` and `∂ψ/∂θ` has rank `n` at every sample.
pub fn is_lagrangian(m: &dyn LagrangianManifold, samples: &[DVector<f64>], tol: f64) -> bool {
    samples.iter().all(|th| {
        let t = m.tangent(th);
        let sv = t.singular_values();
        let rank_ok = sv.min() > 1e-10 * sv.max().max(1e-300);
        rank_ok && pullback_defect(m, th) <= tol
    })
}

/// The image `S(V) + z_a` of a manifold under an affine symplectic map.
///
/// Parameters, periodicity and base parameter are those of `V`.
#[derive(Clone)]
pub struct MappedManifold {
    inner: Arc<dyn LagrangianManifold>,
    map: SymplecticMap,
    shift: PhasePoint,
}

impl MappedManifold {
    pub fn new(inner: Arc<dyn LagrangianManifold>, map: SymplecticMap, shift: PhasePoint) -> Self {
        assert_eq!(inner.dim(), map.dim());
        assert_eq!(inner.dim(), shift.dim());
        Self { inner, map, shift }
    }

    pub fn linear(inner: Arc<dyn LagrangianManifold>, map: SymplecticMap) -> Self {
        let n = inner.dim();
        Self::new(inner, map, PhasePoint::zeros(n))
    }

    pub fn translated(inner: Arc<dyn LagrangianManifold>, shift: PhasePoint) -> Self {
        let n = inner.dim();
        Self::new(inner, SymplecticMap::identity(n), shift)
    }
}

impl LagrangianManifold for MappedManifold {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn point(&self, theta: &DVector<f64>) -> PhasePoint {
        &self.map.apply(&self.inner.point(theta)) + &self.shift
    }
    fn tangent(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        self.map.matrix() * self.inner.tangent(theta)
    }
    fn periodic(&self) -> &[bool] {
        self.inner.periodic()
    }
    fn base(&self) -> &DVector<f64> {
        self.inner.base()
    }
    fn bounds(&self) -> &[(f64, f64)] {
        self.inner.bounds()
    }
    fn contains(&self, theta: &DVector<f64>) -> bool {
        self.inner.contains(theta)
    }
}
