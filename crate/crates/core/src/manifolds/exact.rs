use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{fd_jacobian, fd_step, FieldFn, LagrangianManifold, VectorFieldFn};
use crate::error::{Error, Result};
use crate::symplectic::PhasePoint;

/// The graph `p = ∇Φ(x)` over an axis-aligned box, parametrized by `x`.
#[derive(Clone)]
pub struct ExactManifold {
    n: usize,
    phi: FieldFn,
    grad: Option<VectorFieldFn>,
    bounds: Vec<(f64, f64)>,
    base: DVector<f64>,
    periodic: Vec<bool>,
}

impl ExactManifold {
    /// Graph of `∇Φ` over `bounds`, with base point at the box centre.
    pub fn new(n: usize, phi: FieldFn, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if n == 0 || bounds.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bounds.len(),
            });
        }
        if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidInput("empty domain box".into()));
        }
        let base = DVector::from_iterator(n, bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)));
        Ok(Self {
            n,
            phi,
            grad: None,
            bounds,
            base,
            periodic: vec![false; n],
        })
    }

    /// `Φ(x) = ½ Mx·x` with analytic gradient `Mx`. `M` must be symmetric.
    pub fn quadratic(m: DMatrix<f64>, bounds: &[(f64, f64)]) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n || (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(Error::InvalidInput("M must be square and symmetric".into()));
        }
        let m1 = m.clone();
        let phi: FieldFn = Arc::new(move |x: &DVector<f64>| 0.5 * (&m1 * x).dot(x));
        let grad: VectorFieldFn = Arc::new(move |x: &DVector<f64>| &m * x);
        Ok(Self::new(n, phi, bounds.to_vec())?.with_gradient(grad))
    }

    pub fn with_gradient(mut self, grad: VectorFieldFn) -> Self {
        self.grad = Some(grad);
        self
    }

    pub fn with_base(mut self, base: DVector<f64>) -> Result<Self> {
        if !self.contains(&base) {
            return Err(Error::PathLeavesDomain(base.iter().copied().collect()));
        }
        self.base = base;
        Ok(self)
    }

    /// `Φ(x)`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.phi)(x)
    }

    /// `∇Φ(x)`, analytic when supplied, otherwise fourth-order central differences.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.grad {
            Some(g) => g(x),
            None => {
                let mut g = DVector::zeros(self.n);
                for i in 0..self.n {
                    let h = fd_step(x[i]);
                    let at = |k: f64| {
                        let mut y = x.clone();
                        y[i] += k * h;
                        (self.phi)(&y)
                    };
                    g[i] = (at(-2.0) - at(2.0) + 8.0 * (at(1.0) - at(-1.0))) / (12.0 * h);
                }
                g
            }
        }
    }

    pub fn value_fn(&self) -> FieldFn {
        self.phi.clone()
    }
}

impl LagrangianManifold for ExactManifold {
    fn dim(&self) -> usize {
        self.n
    }

    fn point(&self, theta: &DVector<f64>) -> PhasePoint {
        PhasePoint::from_parts(theta.clone(), self.gradient(theta))
    }

    fn tangent(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let hess = fd_jacobian(|x| self.gradient(x), theta, self.n);
        let mut t = DMatrix::zeros(2 * self.n, self.n);
        t.view_mut((0, 0), (self.n, self.n))
            .copy_from(&DMatrix::identity(self.n, self.n));
        t.view_mut((self.n, 0), (self.n, self.n)).copy_from(&hess);
        t
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
