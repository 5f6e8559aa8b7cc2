use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{ImmersionFn, LagrangianManifold, TangentFn};
use crate::error::{Error, Result};
use crate::symplectic::{is_lagrangian_plane, PhasePoint};
use crate::tolerances::TOL_SYMP;

/// A manifold given by an explicit immersion `θ ↦ ψ(θ)`.
#[derive(Clone)]
pub struct ParamManifold {
    n: usize,
    psi: ImmersionFn,
    tangent: Option<TangentFn>,
    periodic: Vec<bool>,
    base: DVector<f64>,
    bounds: Vec<(f64, f64)>,
}

impl ParamManifold {
    /// Non-periodic axes default to the bounds `[θ̄ᵢ − 1, θ̄ᵢ + 1]`.
    pub fn new(n: usize, psi: ImmersionFn, periodic: Vec<bool>, base: DVector<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("manifold of dimension 0".into()));
        }
        if periodic.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: periodic.len(),
            });
        }
        if base.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: base.len(),
            });
        }
        let z = psi(&base);
        if z.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: z.dim(),
            });
        }
        let bounds = base.iter().map(|b| (b - 1.0, b + 1.0)).collect();
        Ok(Self {
            n,
            psi,
            tangent: None,
            periodic,
            base,
            bounds,
        })
    }

    pub fn with_tangent(mut self, tangent: TangentFn) -> Self {
        self.tangent = Some(tangent);
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: bounds.len(),
            });
        }
        self.bounds = bounds;
        if !self.contains(&self.base) {
            return Err(Error::PathLeavesDomain(self.base.iter().copied().collect()));
        }
        Ok(self)
    }

    pub fn with_base(mut self, base: DVector<f64>) -> Result<Self> {
        if !self.contains(&base) {
            return Err(Error::PathLeavesDomain(base.iter().copied().collect()));
        }
        self.base = base;
        Ok(self)
    }

    /// `θ ↦ (R cos θ, R sin θ)`, base `θ̄ = 0`.
    pub fn circle(r: f64) -> Self {
        Self::torus(&[r])
    }

    /// Product of circles `θᵢ ↦ (Rᵢ cos θᵢ, Rᵢ sin θᵢ)`, base `θ̄ = 0`.
    pub fn torus(radii: &[f64]) -> Self {
        let n = radii.len();
        assert!(n > 0, "torus needs at least one radius");
        let r1: Vec<f64> = radii.to_vec();
        let r2 = r1.clone();
        let psi: ImmersionFn = Arc::new(move |th: &DVector<f64>| {
            PhasePoint::from_parts(
                DVector::from_fn(n, |i, _| r1[i] * th[i].cos()),
                DVector::from_fn(n, |i, _| r1[i] * th[i].sin()),
            )
        });
        let tangent: TangentFn = Arc::new(move |th: &DVector<f64>| {
            let mut t = DMatrix::zeros(2 * n, n);
            for i in 0..n {
                t[(i, i)] = -r2[i] * th[i].sin();
                t[(n + i, i)] = r2[i] * th[i].cos();
            }
            t
        });
        Self::new(n, psi, vec![true; n], DVector::zeros(n))
            .expect("valid torus")
            .with_tangent(tangent)
    }

    /// The plane `{Ax + Bp = 0}` parametrized by `u ↦ (−Bᵀu, Aᵀu)`.
    pub fn linear_plane(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !is_lagrangian_plane(&a, &b, TOL_SYMP)? {
            return Err(Error::InvalidInput(
                "equations do not define a Lagrangian plane".into(),
            ));
        }
        let n = a.nrows();
        let mut t = DMatrix::zeros(2 * n, n);
        t.view_mut((0, 0), (n, n)).copy_from(&(-b.transpose()));
        t.view_mut((n, 0), (n, n)).copy_from(&a.transpose());
        let t1 = t.clone();
        let psi: ImmersionFn =
            Arc::new(move |u: &DVector<f64>| PhasePoint::from_vector(&(&t1 * u)));
        let tangent: TangentFn = Arc::new(move |_| t.clone());
        Ok(Self::new(n, psi, vec![false; n], DVector::zeros(n))?.with_tangent(tangent))
    }

    /// The graph `p = Mx`, parametrized by `x`.
    pub fn graph(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        Self::linear_plane(m, -DMatrix::identity(n, n))
    }
}

impl LagrangianManifold for ParamManifold {
    fn dim(&self) -> usize {
        self.n
    }

    fn point(&self, theta: &DVector<f64>) -> PhasePoint {
        (self.psi)(theta)
    }

    fn tangent(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        match &self.tangent {
            Some(t) => t(theta),
            None => super::fd_tangent(self, theta),
        }
    }

    fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    fn base(&self) -> &DVector<f64> {
        &self.base
    }

    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_tangent_matches_differences() {
        let c = ParamManifold::circle(1.7);
        let th = DVector::from_vec(vec![0.9]);
        let analytic = c.tangent(&th);
        let numeric = super::super::fd_tangent(&c, &th);
        assert!((analytic - numeric).amax() < 1e-9);
    }

    #[test]
    fn non_plane_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(ParamManifold::graph(a).is_err());
    }

    #[test]
    fn bounds_apply_only_to_open_axes() {
        let c = ParamManifold::circle(1.0);
        assert!(c.contains(&DVector::from_vec(vec![100.0])));
        let g = ParamManifold::graph(DMatrix::identity(1, 1)).unwrap();
        assert!(!g.contains(&DVector::from_vec(vec![1.5])));
        let g = g.with_bounds(vec![(-2.0, 2.0)]).unwrap();
        assert!(g.contains(&DVector::from_vec(vec![1.5])));
    }
}
