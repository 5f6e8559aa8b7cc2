//! Default numerical tolerances.
//!
//! All values are for double precision on small dense problems.

/// Symplecticity defect allowed on `SᵀJS − J`, relative to `max(1, ‖S‖²_max)`.
pub const TOL_SYMP: f64 = 1e-9;

/// Smallest `|det B|` accepted for a free symplectic matrix.
pub const TOL_DET: f64 = 1e-12;

/// Relative convergence threshold of the refined action quadrature:
/// successive halvings must agree to `TOL_QUAD · (1 + |value|)`.
pub const TOL_QUAD: f64 = 1e-9;

/// Pullback of σ onto a parametrized manifold must stay below this.
pub const TOL_LAG: f64 = 1e-8;

/// Normalized `|det ∂x/∂θ|` below which a point counts as caustic.
pub const TOL_CAUSTIC: f64 = 1e-8;

/// Parameter resolution of caustic root bisection.
pub const TOL_CAUSTIC_ROOT: f64 = 1e-12;

/// Newton tolerance of the implicit midpoint step.
pub const NEWTON_TOL: f64 = 1e-12;

pub const NEWTON_MAX_ITER: usize = 50;

/// EBK residue threshold.
pub const TOL_EBK: f64 = 1e-6;

/// Euler identity check for quadratic homogeneous Hamiltonians.
pub const TOL_EULER: f64 = 1e-8;

/// Transversality threshold of the normalized Maslov crossing form.
pub const TOL_TRANSVERSAL: f64 = 1e-6;

/// Largest number of panels per path segment tried by the quadrature.
pub const MAX_PANELS: usize = 1 << 16;
