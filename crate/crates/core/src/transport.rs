//! Transport of manifold phases under Hamiltonian flows and the closed-form
//! phase laws for linear flows, translations and displacements.
//!
//! Transported phases are functions of the original cover point `ž`: the
//! phase of `f_t(V)` at the image of `ž` is `φ(ž) + ∫ p dx − H dt` along the
//! trajectory of `π(ž)`.

use std::sync::Arc;

use crate::dynamics::{flow, CurveSpec, Hamiltonian};
use crate::error::{check_dim, Result};
use crate::manifolds::{phase, HomotopyPoint, LagrangianManifold, MappedManifold};
use crate::quadrature::symmetric_action_along;
use crate::symplectic::{PhasePoint, SymplecticMap};

/// The phase `φ(ž, t)` of the flowed manifold, reported at the original `ž`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportedPhase {
    pub t: f64,
    pub value: f64,
    /// `φ(ž)` at `t = 0`.
    pub initial: f64,
    /// `π(ž)`.
    pub start: PhasePoint,
    /// `z_t`, the image of `π(ž)`.
    pub endpoint: PhasePoint,
}

impl TransportedPhase {
    pub fn increment(&self) -> f64 {
        self.value - self.initial
    }
}

/// `φ(ž, t) = φ(ž) + ∫_{(z,0)}^{(z_t,t)} p dx − H dt`.
pub fn transport_phase(
    h: &Hamiltonian,
    m: &dyn LagrangianManifold,
    hp: &HomotopyPoint,
    t: f64,
    steps: usize,
) -> Result<TransportedPhase> {
    let start = hp.project(m);
    check_dim(h.dim(), start.dim())?;
    let initial = phase(m, hp)?;
    let traj = flow(h, &start, 0.0, t, steps)?;
    let last = traj.last();
    Ok(TransportedPhase {
        t,
        value: initial + last.a,
        initial,
        start,
        endpoint: last.z.clone(),
    })
}

/// Phase of `S(V)` for a linear symplectic `S`: `φ(ž) + ½(p_S x_S − p x)`.
pub fn quadratic_transport_phase(s: &SymplecticMap, m: &dyn LagrangianManifold, hp: &HomotopyPoint) -> Result<f64> {
    let z = hp.project(m);
    check_dim(s.dim(), z.dim())?;
    let zs = s.apply(&z);
    Ok(phase(m, hp)? + 0.5 * (zs.px() - z.px()))
}

/// `λ(ž) = φ(ž) − ½ p·x`.
pub fn lagrangian_phase(m: &dyn LagrangianManifold, hp: &HomotopyPoint) -> Result<f64> {
    let z = hp.project(m);
    Ok(phase(m, hp)? - 0.5 * z.px())
}

/// Lagrangian phase of `R(V)` at `R(π(ž))`, computed independently by
/// quadrature on the image manifold. Its phase is anchored at `R(z̄)` with
/// the value `½(p_R x_R − p x)(z̄)`.
pub fn lagrangian_phase_in_frame(
    m: Arc<dyn LagrangianManifold>,
    r: &SymplecticMap,
    hp: &HomotopyPoint,
) -> Result<f64> {
    let zbar = m.point(m.base());
    let zbar_r = r.apply(&zbar);
    let anchor = 0.5 * (zbar_r.px() - zbar.px());
    let image = MappedManifold::linear(m, r.clone());
    let phi_r = anchor + phase(&image, hp)?;
    let z_r = hp.project(&image);
    Ok(phi_r - 0.5 * z_r.px())
}

/// One application of the translation law: the phase `φ` at `z₀` becomes
/// `φ + ½p_a·x_a + p_a·x₀` at `z₀ + z_a`.
pub fn translate_phase_value(phi: f64, z0: &PhasePoint, z_a: &PhasePoint) -> (f64, PhasePoint) {
    let inc = 0.5 * z_a.p.dot(&z_a.x) + z_a.p.dot(&z0.x);
    (phi + inc, z0 + z_a)
}

/// Phase of `T(z_a)V` at `T(z_a)ž`: `φ(ž) + ½p_a·x_a + p_a·x₀` with `x₀` the
/// position of `π(ž)`.
pub fn translation_phase(z_a: &PhasePoint, m: &dyn LagrangianManifold, hp: &HomotopyPoint) -> Result<f64> {
    let z0 = hp.project(m);
    check_dim(z0.dim(), z_a.dim())?;
    Ok(translate_phase_value(phase(m, hp)?, &z0, z_a).0)
}

/// `(φ_{a,b} − φ_{a+b}, φ_{a,b} − φ_{b,a})`, where `φ_{a,b}` is the phase of
/// `T(z_a)T(z_b)V` obtained by translating by `z_b` first and then by `z_a`.
pub fn translation_commutation_defects(
    z_a: &PhasePoint,
    z_b: &PhasePoint,
    m: &dyn LagrangianManifold,
    hp: &HomotopyPoint,
) -> Result<(f64, f64)> {
    let z0 = hp.project(m);
    check_dim(z0.dim(), z_a.dim())?;
    check_dim(z0.dim(), z_b.dim())?;
    let phi = phase(m, hp)?;
    let sequential = |first: &PhasePoint, second: &PhasePoint| {
        let (p1, z1) = translate_phase_value(phi, &z0, first);
        translate_phase_value(p1, &z1, second).0
    };
    let ab = sequential(z_b, z_a);
    let ba = sequential(z_a, z_b);
    let combined = translate_phase_value(phi, &z0, &(z_a + z_b)).0;
    Ok((ab - combined, ab - ba))
}

/// Difference between the phases of `S(T(z_a)V)` and `T(S z_a)(S V)` at the
/// common image point, each obtained by applying the two laws in its own order.
pub fn covariance_defect(
    s: &SymplecticMap,
    z_a: &PhasePoint,
    m: &dyn LagrangianManifold,
    hp: &HomotopyPoint,
) -> Result<f64> {
    let z0 = hp.project(m);
    check_dim(s.dim(), z0.dim())?;
    check_dim(s.dim(), z_a.dim())?;
    let phi = phase(m, hp)?;
    let linear = |phi: f64, z: &PhasePoint| {
        let zs = s.apply(z);
        (phi + 0.5 * (zs.px() - z.px()), zs)
    };
    let (pa, za) = translate_phase_value(phi, &z0, z_a);
    let (a, end_a) = linear(pa, &za);
    let (pb, zb) = linear(phi, &z0);
    let (b, end_b) = translate_phase_value(pb, &zb, &s.apply(z_a));
    debug_assert!((&end_a - &end_b).norm() <= 1e-9 * (1.0 + end_a.norm()));
    Ok(a - b)
}

/// Phase of the manifold displaced along `γ` over `[0, t]`:
/// `φ(ž) + ½(p_t x_t − p₀x₀) − ½∫(p dx − x dp)`, the integral taken along the
/// displaced trajectory `s ↦ z₀ + γ(s) − γ(0)` of `π(ž)`.
pub fn displacement_phase(
    curve: &CurveSpec,
    m: &dyn LagrangianManifold,
    hp: &HomotopyPoint,
    t: f64,
) -> Result<f64> {
    let z0 = hp.project(m);
    check_dim(curve.dim(), z0.dim())?;
    let g0 = curve.point(0.0);
    let moved = |s: f64| Ok(&z0 + &(&curve.point(s) - &g0));
    let zt = moved(t)?;
    let sym = symmetric_action_along(moved, 0.0, t)?;
    Ok(phase(m, hp)? + 0.5 * (zt.px() - z0.px()) - sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{ExactManifold, ParamManifold};
    use crate::symplectic::SymplecticMap;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    fn circle_at(theta: f64) -> (ParamManifold, HomotopyPoint) {
        let c = ParamManifold::circle(1.0);
        let hp = HomotopyPoint::new(&c, &v(&[theta]), &[0]).unwrap();
        (c, hp)
    }

    #[test]
    fn transport_at_zero_time() {
        let (c, hp) = circle_at(1.1);
        let tp = transport_phase(&Hamiltonian::anharmonic(1), &c, &hp, 0.0, 10).unwrap();
        assert_eq!(tp.value, phase(&c, &hp).unwrap());
        assert_eq!(tp.endpoint, tp.start);
    }

    #[test]
    fn harmonic_quarter_turn_from_base() {
        let (c, hp) = circle_at(0.0);
        let tp = transport_phase(&Hamiltonian::harmonic(1), &c, &hp, PI / 2.0, 4096).unwrap();
        assert!(tp.increment().abs() < 1e-6);
    }

    #[test]
    fn free_motion_on_flat_line() {
        let line = ExactManifold::new(1, Arc::new(|x: &DVector<f64>| x[0]), vec![(-2.0, 2.0)]).unwrap();
        let hp = HomotopyPoint::new(&line, &v(&[0.0]), &[]).unwrap();
        let tp = transport_phase(&Hamiltonian::free(1), &line, &hp, 1.0, 8).unwrap();
        assert_abs_diff_eq!(tp.increment(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn quadratic_transport_examples() {
        let (c, hp) = circle_at(0.0);
        let phi = phase(&c, &hp).unwrap();
        let id = SymplecticMap::identity(1);
        assert_eq!(quadratic_transport_phase(&id, &c, &hp).unwrap(), phi);
        let rot = SymplecticMap::quadratic_flow(&DMatrix::identity(2, 2), PI / 2.0).unwrap();
        assert_abs_diff_eq!(quadratic_transport_phase(&rot, &c, &hp).unwrap(), phi, epsilon = 1e-15);

        let line = ExactManifold::new(1, Arc::new(|x: &DVector<f64>| x[0]), vec![(-2.0, 2.0)]).unwrap();
        let hp = HomotopyPoint::new(&line, &v(&[0.0]), &[]).unwrap();
        let shear = SymplecticMap::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(quadratic_transport_phase(&shear, &line, &hp).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn lagrangian_phase_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 3.0]);
        let g = ParamManifold::graph(m).unwrap();
        let hp = HomotopyPoint::new(&g, &v(&[0.7, -0.2]), &[]).unwrap();
        assert!(lagrangian_phase(&g, &hp).unwrap().abs() < 1e-14);

        let (c, hp) = circle_at(PI / 2.0);
        assert_abs_diff_eq!(lagrangian_phase(&c, &hp).unwrap(), -PI / 4.0, epsilon = 1e-12);
        let base = HomotopyPoint::base(&c);
        // φ(z̄) = 0 and p̄ = 0 on the circle base
        assert_eq!(lagrangian_phase(&c, &base).unwrap(), 0.0);
    }

    #[test]
    fn lagrangian_phase_is_frame_independent() {
        let c: Arc<dyn LagrangianManifold> = Arc::new(ParamManifold::circle(1.2));
        let hp = HomotopyPoint::new(&*c, &v(&[2.3]), &[1]).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[0.4, 1.1, 1.1, -0.3]);
        let r = SymplecticMap::quadratic_flow(&q, 0.9).unwrap();
        let before = lagrangian_phase(&*c, &hp).unwrap();
        let after = lagrangian_phase_in_frame(c, &r, &hp).unwrap();
        assert_abs_diff_eq!(before, after, epsilon = 1e-10);
    }

    #[test]
    fn translation_examples() {
        let line = ExactManifold::new(1, Arc::new(|x: &DVector<f64>| x[0]), vec![(-3.0, 3.0)]).unwrap();
        let at = |x: f64| HomotopyPoint::new(&line, &v(&[x]), &[]).unwrap();
        let hp0 = at(0.0);
        let phi0 = phase(&line, &hp0).unwrap();
        let za = PhasePoint::scalar(1.0, 1.0);
        assert_abs_diff_eq!(translation_phase(&za, &line, &hp0).unwrap(), phi0 + 0.5, epsilon = 1e-15);
        let shift = PhasePoint::scalar(0.7, 0.0);
        assert_eq!(translation_phase(&shift, &line, &hp0).unwrap(), phi0);
        let hp2 = at(2.0);
        let phi2 = phase(&line, &hp2).unwrap();
        let zb = PhasePoint::scalar(0.0, 1.0);
        assert_abs_diff_eq!(translation_phase(&zb, &line, &hp2).unwrap(), phi2 + 2.0, epsilon = 1e-15);
    }

    #[test]
    fn commutation_defects_example() {
        let (c, hp) = circle_at(0.4);
        let za = PhasePoint::scalar(1.0, 0.0);
        let zb = PhasePoint::scalar(0.0, 1.0);
        let (half, full) = translation_commutation_defects(&za, &zb, &c, &hp).unwrap();
        // σ(z_a, z_b) = −1: the half defect is ½σ, the full defect σ
        assert_abs_diff_eq!(half, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(full, -1.0, epsilon = 1e-12);
        let (h2, f2) = translation_commutation_defects(&zb, &za, &c, &hp).unwrap();
        assert_abs_diff_eq!(f2, -full, epsilon = 1e-12);
        assert_abs_diff_eq!(h2, -half, epsilon = 1e-12);
        let (h3, f3) = translation_commutation_defects(&za, &(&za * 2.5), &c, &hp).unwrap();
        assert_abs_diff_eq!(h3, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f3, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn covariance_examples() {
        let (c, hp) = circle_at(2.0);
        let za = PhasePoint::scalar(1.0, 1.0);
        assert_eq!(covariance_defect(&SymplecticMap::identity(1), &za, &c, &hp).unwrap(), 0.0);
        let d = covariance_defect(&SymplecticMap::standard_j(1), &za, &c, &hp).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn displacement_examples() {
        let (c, hp) = circle_at(0.9);
        let phi = phase(&c, &hp).unwrap();
        let constant = CurveSpec::new(1, Arc::new(|_| PhasePoint::scalar(0.3, 0.2)));
        assert_abs_diff_eq!(displacement_phase(&constant, &c, &hp, 1.0).unwrap(), phi, epsilon = 1e-15);

        let r = 0.7;
        let lp = displacement_phase(&CurveSpec::circle(r), &c, &hp, 2.0 * PI).unwrap();
        assert_abs_diff_eq!(lp - phi, PI * r * r, epsilon = 1e-9);

        let za = PhasePoint::scalar(0.6, -1.4);
        let seg = displacement_phase(&CurveSpec::segment(&za), &c, &hp, 1.0).unwrap();
        assert_abs_diff_eq!(seg, translation_phase(&za, &c, &hp).unwrap(), epsilon = 1e-12);
    }
}
