//! Scenario files: JSON documents describing one run.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ptk_core::dynamics::{CurveSpec, Hamiltonian};
use ptk_core::hj::Grid;
use ptk_core::manifolds::{ExactManifold, HomotopyPoint, LagrangianManifold, LoopClass, ParamManifold};
use ptk_core::PhasePoint;
use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Var};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Check,
    Flow,
    Transport,
    Hj,
    Ebk,
    Weyl,
    Invariance,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Check => "check",
            Kind::Flow => "flow",
            Kind::Transport => "transport",
            Kind::Hj => "hj",
            Kind::Ebk => "ebk",
            Kind::Weyl => "weyl",
            Kind::Invariance => "invariance",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Circle { radius: f64 },
    Torus { radii: Vec<f64> },
    /// `p = Mx`.
    Graph { matrix: Vec<Vec<f64>> },
    /// `{Ax + Bp = 0}`.
    Plane { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    /// `p = ∇Φ(x)` over a box, `Φ` given as an expression in `x_i`.
    Exact { phi: String, bounds: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    Free { dim: usize },
    Harmonic { dim: usize },
    Anharmonic { dim: usize },
    Translation { z: PointSpec },
    Displacement { curve: CurveJson },
    /// `H = ½zᵀQz`.
    Quadratic { q: Vec<Vec<f64>> },
    Expression {
        h: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveJson {
    Circle { radius: f64 },
    Segment { z: PointSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverPointSpec {
    pub theta: Vec<f64>,
    #[serde(default)]
    pub windings: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaveSpec {
    Gaussian {
        lo: f64,
        hi: f64,
        points: usize,
        center: f64,
        width: f64,
        #[serde(default)]
        momentum: f64,
    },
    /// Columns `x, re, im`; relative paths resolve against the scenario file.
    Csv { path: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<CoverPointSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<PointSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<PointSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<AxisSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavefunction: Option<WaveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translations: Option<Vec<PointSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolate: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn invalid(field: &str, msg: impl fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| {
            CliError::Validation(format!("{e}"))
        })?;
        s.validate()?;
        Ok(s)
    }

    fn require<T>(&self, field: &str, v: Option<T>) -> Result<T, CliError> {
        v.ok_or_else(|| invalid(field, format!("required for kind `{}`", self.kind)))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        let needs_manifold = matches!(self.kind, Kind::Check | Kind::Transport | Kind::Hj | Kind::Ebk);
        let needs_h = matches!(self.kind, Kind::Flow | Kind::Transport | Kind::Hj | Kind::Invariance);
        if needs_manifold {
            self.require("manifold", self.manifold.as_ref())?;
        }
        if needs_h {
            self.require("hamiltonian", self.hamiltonian.as_ref())?;
        }
        if let Some(m) = &self.manifold {
            self.manifold()?;
            if self.kind == Kind::Hj && !matches!(m, ManifoldSpec::Exact { .. }) {
                return Err(invalid("manifold.type", "kind `hj` needs an `exact` manifold"));
            }
        }
        let h = self.hamiltonian.as_ref().map(|_| self.hamiltonian()).transpose()?;
        let mdim = self.manifold.as_ref().map(|_| self.manifold()).transpose()?.map(|m| m.dim());
        if let (Some(h), Some(n)) = (&h, mdim) {
            if h.dim() != n {
                return Err(invalid(
                    "hamiltonian",
                    format!("has {} degrees of freedom but the manifold has {n}", h.dim()),
                ));
            }
        }
        if matches!(p.steps, Some(0)) {
            return Err(invalid("params.steps", "must be positive"));
        }
        for (name, v) in [("params.t", p.t), ("params.t0", p.t0), ("params.t_max", p.t_max)] {
            if matches!(v, Some(x) if !x.is_finite()) {
                return Err(invalid(name, "must be finite"));
            }
        }
        match self.kind {
            Kind::Check => {}
            Kind::Flow => {
                let init = self.require("params.initial", p.initial.as_ref())?;
                if init.is_empty() {
                    return Err(invalid("params.initial", "needs at least one point"));
                }
                self.require("params.t", p.t)?;
                let n = h.as_ref().map_or(0, |h| h.dim());
                for (i, z) in init.iter().enumerate() {
                    point(z, n, &format!("params.initial[{i}]"))?;
                }
            }
            Kind::Transport => {
                if p.t.is_none() && p.times.is_none() {
                    return Err(invalid("params.t", "required for kind `transport` (or give params.times)"));
                }
                self.cover_points()?;
            }
            Kind::Hj => {
                self.require("params.t_max", p.t_max)?;
                self.grid()?;
            }
            Kind::Ebk => {
                let hbar = self.require("params.hbar", p.hbar)?;
                if !(hbar > 0.0) {
                    return Err(invalid("params.hbar", "must be positive"));
                }
                self.loops()?;
            }
            Kind::Weyl => {
                let hbar = self.require("params.hbar", p.hbar)?;
                if !(hbar > 0.0) {
                    return Err(invalid("params.hbar", "must be positive"));
                }
                self.require("params.wavefunction", p.wavefunction.as_ref())?;
                let tr = self.require("params.translations", p.translations.as_ref())?;
                for (i, z) in tr.iter().enumerate() {
                    point(z, 1, &format!("params.translations[{i}]"))?;
                }
            }
            Kind::Invariance => {
                self.require("params.t", p.t)?;
                let c = self.require("params.curve", p.curve.as_ref())?;
                if c.len() < 2 {
                    return Err(invalid("params.curve", "needs at least two points"));
                }
                let n = h.as_ref().map_or(0, |h| h.dim());
                for (i, z) in c.iter().enumerate() {
                    point(z, n, &format!("params.curve[{i}]"))?;
                }
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.params.steps.unwrap_or(1024)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn manifold(&self) -> Result<Arc<dyn LagrangianManifold>, CliError> {
        let spec = self.require("manifold", self.manifold.as_ref())?;
        let m: Arc<dyn LagrangianManifold> = match spec {
            ManifoldSpec::Circle { radius } => {
                positive("manifold.radius", *radius)?;
                Arc::new(ParamManifold::circle(*radius))
            }
            ManifoldSpec::Torus { radii } => {
                if radii.is_empty() {
                    return Err(invalid("manifold.radii", "needs at least one radius"));
                }
                for r in radii {
                    positive("manifold.radii", *r)?;
                }
                Arc::new(ParamManifold::torus(radii))
            }
            ManifoldSpec::Graph { matrix } => {
                let m = square(matrix, "manifold.matrix")?;
                Arc::new(ParamManifold::graph(m).map_err(|e| invalid("manifold.matrix", e))?)
            }
            ManifoldSpec::Plane { a, b } => {
                let (a, b) = (square(a, "manifold.a")?, square(b, "manifold.b")?);
                Arc::new(ParamManifold::linear_plane(a, b).map_err(|e| invalid("manifold", e))?)
            }
            ManifoldSpec::Exact { phi, bounds } => Arc::new(exact_manifold(phi, bounds)?),
        };
        Ok(m)
    }

    /// The `exact` manifold of an `hj` scenario.
    pub fn datum(&self) -> Result<ExactManifold, CliError> {
        match self.require("manifold", self.manifold.as_ref())? {
            ManifoldSpec::Exact { phi, bounds } => exact_manifold(phi, bounds),
            _ => Err(invalid("manifold.type", "an `exact` manifold is required")),
        }
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian, CliError> {
        let spec = self.require("hamiltonian", self.hamiltonian.as_ref())?;
        let dim_ok = |d: usize| {
            if d == 0 {
                Err(invalid("hamiltonian.dim", "must be positive"))
            } else {
                Ok(d)
            }
        };
        Ok(match spec {
            HamiltonianSpec::Free { dim } => Hamiltonian::free(dim_ok(*dim)?),
            HamiltonianSpec::Harmonic { dim } => Hamiltonian::harmonic(dim_ok(*dim)?),
            HamiltonianSpec::Anharmonic { dim } => Hamiltonian::anharmonic(dim_ok(*dim)?),
            HamiltonianSpec::Translation { z } => Hamiltonian::translation(&point(z, z.x.len(), "hamiltonian.z")?),
            HamiltonianSpec::Displacement { curve } => Hamiltonian::displacement(&curve_spec(curve)?),
            HamiltonianSpec::Quadratic { q } => {
                Hamiltonian::quadratic(square(q, "hamiltonian.q")?).map_err(|e| invalid("hamiltonian.q", e))?
            }
            HamiltonianSpec::Expression { h, dim } => expression_hamiltonian(h, *dim)?,
        })
    }

    pub fn cover_points(&self) -> Result<Vec<HomotopyPoint>, CliError> {
        let m = self.manifold()?;
        let specs = self.require("params.points", self.params.points.as_ref())?;
        if specs.is_empty() {
            return Err(invalid("params.points", "needs at least one point"));
        }
        specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let field = format!("params.points[{i}]");
                if s.theta.len() != m.dim() {
                    return Err(invalid(&field, format!("theta needs {} entries", m.dim())));
                }
                let k = m.periodic().iter().filter(|p| **p).count();
                let windings = if s.windings.is_empty() { vec![0; k] } else { s.windings.clone() };
                HomotopyPoint::new(&*m, &DVector::from_vec(s.theta.clone()), &windings)
                    .map_err(|e| invalid(&field, e))
            })
            .collect()
    }

    pub fn loops(&self) -> Result<Vec<LoopClass>, CliError> {
        let m = self.manifold()?;
        match &self.params.loops {
            None => Ok(LoopClass::generators(&*m)),
            Some(ls) => {
                let k = m.periodic().iter().filter(|p| **p).count();
                ls.iter()
                    .enumerate()
                    .map(|(i, w)| {
                        if w.len() != k {
                            return Err(invalid(
                                &format!("params.loops[{i}]"),
                                format!("needs {k} winding numbers"),
                            ));
                        }
                        Ok(LoopClass::new(w.clone()))
                    })
                    .collect()
            }
        }
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let axes = self.require("params.grid", self.params.grid.as_ref())?;
        let n = self.manifold()?.dim();
        if axes.len() != n {
            return Err(invalid("params.grid", format!("needs {n} axes")));
        }
        let spec: Vec<(f64, f64, usize)> = axes.iter().map(|a| (a.lo, a.hi, a.nodes)).collect();
        Grid::tensor(&spec).map_err(|e| invalid("params.grid", e))
    }

    pub fn initial_points(&self) -> Result<Vec<PhasePoint>, CliError> {
        let n = self.hamiltonian()?.dim();
        self.require("params.initial", self.params.initial.as_ref())?
            .iter()
            .enumerate()
            .map(|(i, z)| point(z, n, &format!("params.initial[{i}]")))
            .collect()
    }

    pub fn curve_points(&self) -> Result<Vec<PhasePoint>, CliError> {
        let n = self.hamiltonian()?.dim();
        self.require("params.curve", self.params.curve.as_ref())?
            .iter()
            .enumerate()
            .map(|(i, z)| point(z, n, &format!("params.curve[{i}]")))
            .collect()
    }

    pub fn translations(&self) -> Result<Vec<PhasePoint>, CliError> {
        self.require("params.translations", self.params.translations.as_ref())?
            .iter()
            .enumerate()
            .map(|(i, z)| point(z, 1, &format!("params.translations[{i}]")))
            .collect()
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be a positive number"))
    }
}

fn point(z: &PointSpec, n: usize, field: &str) -> Result<PhasePoint, CliError> {
    if z.x.len() != n || z.p.len() != n {
        return Err(invalid(field, format!("x and p need {n} entries each")));
    }
    PhasePoint::try_new(z.x.clone(), z.p.clone()).map_err(|e| invalid(field, e))
}

fn square(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(field, "must be a nonempty square matrix"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn parse_expr(src: &str, field: &str) -> Result<Expr, CliError> {
    Expr::parse(src).map_err(|e| invalid(field, e))
}

fn exact_manifold(phi: &str, bounds: &[[f64; 2]]) -> Result<ExactManifold, CliError> {
    let e = parse_expr(phi, "manifold.phi")?;
    let n = bounds.len();
    if n == 0 {
        return Err(invalid("manifold.bounds", "needs at least one axis"));
    }
    if e.arity() > n {
        return Err(invalid("manifold.phi", format!("uses x{} but only {n} bounds are given", e.arity())));
    }
    if (0..n).any(|i| e.uses(Var::P(i))) || e.uses(Var::T) {
        return Err(invalid("manifold.phi", "may only depend on positions"));
    }
    let grads: Vec<Expr> = (0..n).map(|i| e.diff(Var::X(i))).collect();
    let phi_fn = Arc::new(move |x: &DVector<f64>| e.eval(x.as_slice(), &[], 0.0));
    let grad_fn = Arc::new(move |x: &DVector<f64>| DVector::from_fn(n, |i, _| grads[i].eval(x.as_slice(), &[], 0.0)));
    let b: Vec<(f64, f64)> = bounds.iter().map(|b| (b[0], b[1])).collect();
    Ok(ExactManifold::new(n, phi_fn, b)
        .map_err(|e| invalid("manifold.bounds", e))?
        .with_gradient(grad_fn))
}

fn expression_hamiltonian(src: &str, dim: Option<usize>) -> Result<Hamiltonian, CliError> {
    let e = parse_expr(src, "hamiltonian.h")?;
    let n = match dim {
        Some(d) if d >= e.arity() && d > 0 => d,
        Some(_) => return Err(invalid("hamiltonian.dim", format!("expression uses {} degrees of freedom", e.arity()))),
        None => e.arity().max(1),
    };
    let grads: Vec<Expr> = (0..n)
        .map(|i| e.diff(Var::X(i)))
        .chain((0..n).map(|i| e.diff(Var::P(i))))
        .collect();
    let time_dependent = e.uses(Var::T);
    let h = Hamiltonian::new(n, Arc::new(move |z: &PhasePoint, t| e.eval(z.x.as_slice(), z.p.as_slice(), t)))
        .with_gradient(Arc::new(move |z: &PhasePoint, t| {
            DVector::from_fn(2 * n, |i, _| grads[i].eval(z.x.as_slice(), z.p.as_slice(), t))
        }));
    Ok(if time_dependent { h } else { h.time_independent() })
}

fn curve_spec(c: &CurveJson) -> Result<CurveSpec, CliError> {
    match c {
        CurveJson::Circle { radius } => {
            positive("hamiltonian.curve.radius", *radius)?;
            Ok(CurveSpec::circle(*radius))
        }
        CurveJson::Segment { z } => Ok(CurveSpec::segment(&point(z, z.x.len(), "hamiltonian.curve.z")?)),
    }
}
