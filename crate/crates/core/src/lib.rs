//! Lagrangian manifolds in phase space, their phases on the universal cover,
//! and the transport of those phases under Hamiltonian flows.
//!
//! Phase space is `R²ⁿ` with points `z = (x, p)` and symplectic form
//! `σ(z, z′) = p·x′ − p′·x`. A phase of a Lagrangian manifold `V` is a
//! function on its universal cover with `dφ = p dx`; flows transport it by
//! the Poincaré–Cartan form `p dx − H dt`.

pub mod dynamics;
pub mod error;
pub mod hj;
pub mod manifolds;
pub mod quadrature;
pub mod semiclassical;
pub mod symplectic;
pub mod tolerances;
pub mod transport;

pub use error::{Error, Result};
pub use symplectic::{PhasePoint, SymplecticMap};
