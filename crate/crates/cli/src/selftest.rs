//! Oracle-equivalence self-test: every closed-form phase law against direct
//! transport under its generating Hamiltonian, on seeded random cases.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ptk_core::dynamics::{flow_endpoint, invariance_defect, CurveSpec, Hamiltonian};
use ptk_core::manifolds::{phase, ExactManifold, HomotopyPoint, LagrangianManifold, MappedManifold, ParamManifold};
use ptk_core::symplectic::free_generating_function;
use ptk_core::transport::{
    displacement_phase, quadratic_transport_phase, transport_phase, translation_commutation_defects,
    translation_phase,
};
use ptk_core::{PhasePoint, Result, SymplecticMap};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::CliError;

pub const TAGS: [&str; 8] = ["stv", "eg1", "eg2", "eg3", "phg", "ph6", "fif", "fund"];
pub const DEFAULT_CASES: usize = 50;
pub const ORACLE_TOL: f64 = 1e-6;
pub const INVARIANCE_TOL: f64 = 1e-7;
const STEPS: usize = 4000;

type Lm = dyn LagrangianManifold;
type CommutationFn = fn(&PhasePoint, &PhasePoint, &Lm, &HomotopyPoint) -> Result<(f64, f64)>;

/// The closed forms under test. Replaceable so a broken law can be injected.
#[derive(Clone, Copy)]
pub struct ClosedForms {
    pub quadratic: fn(&SymplecticMap, &Lm, &HomotopyPoint) -> Result<f64>,
    pub translation: fn(&PhasePoint, &Lm, &HomotopyPoint) -> Result<f64>,
    pub commutation: CommutationFn,
    pub displacement: fn(&CurveSpec, &Lm, &HomotopyPoint, f64) -> Result<f64>,
    pub generating: fn(&SymplecticMap, &DVector<f64>, &DVector<f64>) -> Result<f64>,
}

impl Default for ClosedForms {
    fn default() -> Self {
        ClosedForms {
            quadratic: quadratic_transport_phase,
            translation: translation_phase,
            commutation: translation_commutation_defects,
            displacement: displacement_phase,
            generating: free_generating_function,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagResult {
    pub tag: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
    /// Set when a case could not be evaluated.
    pub error: Option<String>,
}

impl std::fmt::Display for TagResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {:<4} cases={} worst={:.3e} tol={:.0e}  {}",
            self.tag,
            self.cases,
            self.worst,
            self.tol,
            describe(self.tag)
        )?;
        if let Some(e) = &self.error {
            write!(f, " ({e})")?;
        }
        Ok(())
    }
}

pub fn describe(tag: &str) -> &'static str {
    match tag {
        "stv" => "linear flow phase vs transport under the quadratic Hamiltonian",
        "eg1" => "translation phase vs transport along the affine flow",
        "eg2" => "two translations vs one combined translation, checked by sequential flows",
        "eg3" => "translations in both orders, checked by sequential flows",
        "phg" => "displacement along a curve vs transport under the displacement Hamiltonian",
        "ph6" => "free generating function vs flow action",
        "fif" => "transported phase minus the flowed manifold's phase equals the base point action",
        "fund" => "circulation of p dx - H dt around a swept surface vanishes",
        _ => "unknown",
    }
}

/// Parses a comma-separated tag list. Empty or unknown selections are
/// validation errors.
pub fn select(only: Option<&str>) -> std::result::Result<Vec<&'static str>, CliError> {
    let Some(list) = only else {
        return Ok(TAGS.to_vec());
    };
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let tag = TAGS
            .iter()
            .find(|t| **t == name)
            .ok_or_else(|| CliError::Validation(format!("--only: unknown tag `{name}`")))?;
        if !out.contains(tag) {
            out.push(*tag);
        }
    }
    if out.is_empty() {
        return Err(CliError::Validation("--only: empty tag selection".into()));
    }
    Ok(out)
}

fn symmetric(rng: &mut ChaCha8Rng, size: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(size, size, |_, _| rng.gen_range(-scale..scale));
    (&a + a.transpose()) * 0.5
}

fn phase_point(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> PhasePoint {
    PhasePoint::from_parts(
        DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale)),
        DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale)),
    )
}

fn manifold_and_point(rng: &mut ChaCha8Rng) -> (Arc<Lm>, HomotopyPoint) {
    let (m, theta, windings): (Arc<Lm>, Vec<f64>, Vec<i64>) = match rng.gen_range(0..4) {
        0 => (
            Arc::new(ParamManifold::circle(rng.gen_range(0.5..2.0))),
            vec![rng.gen_range(0.0..2.0 * PI)],
            vec![rng.gen_range(-1..=1)],
        ),
        1 => (
            Arc::new(ParamManifold::torus(&[rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5)])),
            vec![rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)],
            vec![rng.gen_range(-1..=1), rng.gen_range(-1..=1)],
        ),
        2 => {
            let n = rng.gen_range(1..=2);
            let g = ParamManifold::graph(symmetric(rng, n, 1.0)).expect("symmetric matrix");
            (Arc::new(g), (0..n).map(|_| rng.gen_range(-0.9..0.9)).collect(), vec![])
        }
        _ => {
            let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.2..1.0));
            let m = ExactManifold::new(
                1,
                Arc::new(move |x: &DVector<f64>| a * x[0] * x[0] + b * (2.0 * x[0]).sin()),
                vec![(-1.0, 1.0)],
            )
            .expect("valid box");
            (Arc::new(m), vec![rng.gen_range(-0.9..0.9)], vec![])
        }
    };
    let hp = HomotopyPoint::new(&*m, &DVector::from_vec(theta), &windings).expect("point on manifold");
    (m, hp)
}

fn wiggle(rng: &mut ChaCha8Rng, n: usize) -> CurveSpec {
    let a = phase_point(rng, n, 1.0);
    let b = phase_point(rng, n, 1.0);
    let w = rng.gen_range(0.5..3.0);
    let (ad, bd) = (a.clone(), b.clone());
    CurveSpec::new(n, Arc::new(move |s| &(&a * s) + &(&b * (w * s).sin())))
        .with_derivative(Arc::new(move |s| &ad + &(&bd * (w * (w * s).cos()))))
}

/// One random case: returns `|closed form − oracle|`.
type Case = Box<dyn Fn() -> Result<f64> + Send + Sync>;

fn seed_for(seed: u64, tag: &str) -> u64 {
    tag.bytes().fold(seed ^ 0x9e37_79b9_7f4a_7c15, |h, b| h.rotate_left(7) ^ u64::from(b))
}

fn cases(tag: &'static str, forms: ClosedForms, count: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(seed, tag));
    let mut out: Vec<Case> = Vec::with_capacity(count);
    for _ in 0..count {
        let case: Case = match tag {
            "stv" => {
                let (m, hp) = manifold_and_point(&mut rng);
                let q = symmetric(&mut rng, 2 * m.dim(), 1.0);
                let t = rng.gen_range(0.2..1.5);
                Box::new(move || {
                    let h = Hamiltonian::quadratic(q.clone())?;
                    let s = SymplecticMap::quadratic_flow(&q, t)?;
                    let closed = (forms.quadratic)(&s, &*m, &hp)?;
                    Ok((closed - transport_phase(&h, &*m, &hp, t, STEPS)?.value).abs())
                })
            }
            "eg1" => {
                let (m, hp) = manifold_and_point(&mut rng);
                let za = phase_point(&mut rng, m.dim(), 2.0);
                Box::new(move || {
                    let closed = (forms.translation)(&za, &*m, &hp)?;
                    let h = Hamiltonian::translation(&za);
                    Ok((closed - transport_phase(&h, &*m, &hp, 1.0, 64)?.value).abs())
                })
            }
            "eg2" | "eg3" => {
                let (m, hp) = manifold_and_point(&mut rng);
                let za = phase_point(&mut rng, m.dim(), 2.0);
                let zb = phase_point(&mut rng, m.dim(), 2.0);
                Box::new(move || {
                    let (half, full) = (forms.commutation)(&za, &zb, &*m, &hp)?;
                    // b first, then a; each leg is a unit-time affine flow
                    let z0 = hp.project(&*m);
                    let phi = phase(&*m, &hp)?;
                    let seq = |first: &PhasePoint, second: &PhasePoint| -> Result<f64> {
                        let (z1, a1) = flow_endpoint(&Hamiltonian::translation(first), &z0, 0.0, 1.0, 64)?;
                        let (_, a2) = flow_endpoint(&Hamiltonian::translation(second), &z1, 0.0, 1.0, 64)?;
                        Ok(phi + a1 + a2)
                    };
                    let ab = seq(&zb, &za)?;
                    if tag == "eg2" {
                        let sum = &za + &zb;
                        let (_, a) = flow_endpoint(&Hamiltonian::translation(&sum), &z0, 0.0, 1.0, 64)?;
                        Ok((half - (ab - (phi + a))).abs())
                    } else {
                        Ok((full - (ab - seq(&za, &zb)?)).abs())
                    }
                })
            }
            "phg" => {
                let (m, hp) = manifold_and_point(&mut rng);
                let curve = wiggle(&mut rng, m.dim());
                let t = rng.gen_range(0.3..1.5);
                Box::new(move || {
                    let closed = (forms.displacement)(&curve, &*m, &hp, t)?;
                    let h = Hamiltonian::displacement(&curve);
                    Ok((closed - transport_phase(&h, &*m, &hp, t, STEPS)?.value).abs())
                })
            }
            "ph6" => {
                let n = rng.gen_range(1..=2);
                let (q, t) = loop {
                    let q = symmetric(&mut rng, 2 * n, 1.0);
                    let t = rng.gen_range(0.2..1.2);
                    let s = SymplecticMap::quadratic_flow(&q, t).expect("symmetric generator");
                    if s.det_b().abs() > 1e-2 {
                        break (q, t);
                    }
                };
                let z = phase_point(&mut rng, n, 1.0);
                Box::new(move || {
                    let s = SymplecticMap::quadratic_flow(&q, t)?;
                    let zt = s.apply(&z);
                    let closed = (forms.generating)(&s, &zt.x, &z.x)?;
                    let (_, a) = flow_endpoint(&Hamiltonian::quadratic(q.clone())?, &z, 0.0, t, STEPS)?;
                    Ok((closed - a).abs())
                })
            }
            "fif" => {
                let (m, hp) = manifold_and_point(&mut rng);
                let q = symmetric(&mut rng, 2 * m.dim(), 1.0);
                let t = rng.gen_range(0.2..1.2);
                Box::new(move || {
                    let h = Hamiltonian::quadratic(q.clone())?;
                    let moved = MappedManifold::linear(m.clone(), SymplecticMap::quadratic_flow(&q, t)?);
                    let lhs = transport_phase(&h, &*m, &hp, t, STEPS)?.value - phase(&moved, &hp)?;
                    let zbar = m.point(m.base());
                    Ok((lhs - flow_endpoint(&h, &zbar, 0.0, t, STEPS)?.1).abs())
                })
            }
            "fund" => {
                let n = rng.gen_range(1..=2);
                let h = match rng.gen_range(0..3) {
                    0 => Hamiltonian::harmonic(n),
                    1 => Hamiltonian::anharmonic(n),
                    _ => Hamiltonian::quadratic(symmetric(&mut rng, 2 * n, 1.0)).expect("symmetric matrix"),
                };
                let curve: Vec<PhasePoint> = (0..rng.gen_range(2..=5)).map(|_| phase_point(&mut rng, n, 1.0)).collect();
                let t = rng.gen_range(0.2..1.5);
                Box::new(move || Ok(invariance_defect(&h, &curve, t, 1024)?.abs()))
            }
            _ => unreachable!("tags are validated by select"),
        };
        out.push(case);
    }
    out
}

pub fn run_tag(tag: &'static str, forms: ClosedForms, count: usize, seed: u64) -> TagResult {
    let tol = if tag == "fund" { INVARIANCE_TOL } else { ORACLE_TOL };
    let results: Vec<Result<f64>> = cases(tag, forms, count, seed).par_iter().map(|c| c()).collect();
    let mut worst = 0.0_f64;
    let mut error = None;
    for r in results {
        match r {
            Ok(e) if e.is_finite() => worst = worst.max(e),
            Ok(e) => worst = e,
            Err(e) => {
                error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    TagResult {
        tag,
        cases: count,
        worst,
        tol,
        passed: error.is_none() && worst <= tol,
        error,
    }
}

pub fn run(tags: &[&'static str], forms: ClosedForms, count: usize, seed: u64) -> Vec<TagResult> {
    tags.iter().map(|t| run_tag(t, forms, count, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection() {
        assert_eq!(select(None).unwrap().len(), 8);
        assert_eq!(select(Some("eg1, fund,eg1")).unwrap(), ["eg1", "fund"]);
        assert_eq!(select(Some("")).unwrap_err().exit_code(), 2);
        assert_eq!(select(Some(" , ")).unwrap_err().exit_code(), 2);
        assert!(select(Some("eg9")).unwrap_err().to_string().contains("eg9"));
    }

    #[test]
    fn every_tag_passes() {
        for r in run(&TAGS, ClosedForms::default(), 6, 1) {
            assert!(r.passed, "{r}");
        }
    }

    fn flipped(z_a: &PhasePoint, m: &Lm, hp: &HomotopyPoint) -> Result<f64> {
        let z0 = hp.project(m);
        Ok(phase(m, hp)? - 0.5 * z_a.p.dot(&z_a.x) - z_a.p.dot(&z0.x))
    }

    #[test]
    fn sign_flip_is_caught() {
        let forms = ClosedForms {
            translation: flipped,
            ..ClosedForms::default()
        };
        let r = run_tag("eg1", forms, 10, 0);
        assert!(!r.passed, "{r}");
        assert!(r.to_string().starts_with("FAIL eg1"));
        assert!(run_tag("stv", forms, 3, 0).passed);
    }
}
