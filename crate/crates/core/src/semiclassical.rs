//! Maslov indices, the EBK condition, semiclassical wavefunctions on the
//! universal cover, and Heisenberg–Weyl translations of sampled wavefunctions.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hj::fmt17;
use crate::manifolds::{
    loop_period, phase, projection_det, FieldFn, HomotopyPoint, LagrangianManifold, LoopClass,
};
use crate::symplectic::PhasePoint;
use crate::tolerances::{TOL_CAUSTIC, TOL_CAUSTIC_ROOT, TOL_EBK, TOL_TRANSVERSAL};
use crate::transport::translate_phase_value;

/// Samples per unit winding used by [`maslov_index`].
pub const MASLOV_SAMPLES_PER_TURN: usize = 256;

fn lifted_direction(m: &dyn LagrangianManifold, lp: &LoopClass) -> Result<DVector<f64>> {
    let k = m.periodic().iter().filter(|p| **p).count();
    if k == 0 && !lp.is_trivial() {
        return Err(Error::NonPeriodicWinding);
    }
    if k != 0 && lp.windings.len() != k {
        return Err(Error::WindingMismatch {
            expected: k,
            got: lp.windings.len(),
        });
    }
    let mut d = DVector::zeros(m.dim());
    let mut j = 0;
    for (i, &per) in m.periodic().iter().enumerate() {
        if per {
            d[i] = 2.0 * PI * lp.windings[j] as f64;
            j += 1;
        }
    }
    Ok(d)
}

/// Signed count of caustic crossings of a closed lifted loop `s ↦ θ(s)`,
/// `s ∈ [0, 1]`, scanned at `samples` points.
///
/// Each zero of the normalized `det(∂x/∂θ)` is refined by bisection. With
/// `w` spanning the kernel of `X = ∂x/∂θ`, `P = ∂p/∂θ` and `X′` the derivative
/// of `X` along the loop, the crossing contributes `sign(−(X′w)·(Pw))`.
/// The scan starts at the sample of largest `|det|` and runs cyclically.
pub fn maslov_index_along<F>(m: &dyn LagrangianManifold, loop_fn: F, samples: usize) -> Result<i64>
where
    F: Fn(f64) -> DVector<f64>,
{
    let n = m.dim();
    let samples = samples.max(8);
    let f = |s: f64| projection_det(m, &loop_fn(s));
    let vals: Vec<f64> = (0..samples).map(|k| f(k as f64 / samples as f64)).collect();
    let start = (0..samples)
        .max_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()))
        .expect("nonempty");
    // a sample on the caustic may be a tangency that no sign change reveals
    if let Some(k) = vals.iter().position(|v| v.abs() < TOL_CAUSTIC) {
        let s = k as f64 / samples as f64;
        return Err(Error::NonGenericCaustic(loop_fn(s).iter().copied().collect()));
    }
    let mut total = 0;
    let mut prev = start;
    for step in 1..=samples {
        let k = (start + step) % samples;
        if vals[k] * vals[prev] < 0.0 {
            // unwrapped parameters of the bracketing samples
            let mut a = prev as f64 / samples as f64;
            let mut b = k as f64 / samples as f64;
            if b <= a {
                b += 1.0;
            }
            let fa = vals[prev];
            while b - a > TOL_CAUSTIC_ROOT {
                let mid = 0.5 * (a + b);
                if f(mid) * fa > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let s = 0.5 * (a + b);
            let th = loop_fn(s);
            let t = m.tangent(&th);
            let x_block = t.view((0, 0), (n, n)).into_owned();
            let p_block = t.view((n, 0), (n, n)).into_owned();
            let svd = x_block.clone().svd(false, true);
            let v_t = svd.v_t.expect("requested V");
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
            let scale = t.norm();
            if n > 1 && svd.singular_values[order[1]] < TOL_TRANSVERSAL * scale {
                return Err(Error::NonGenericCaustic(th.iter().copied().collect()));
            }
            let w = v_t.row(order[0]).transpose();
            let h = 1e-6;
            let xp = |s: f64| {
                let t = m.tangent(&loop_fn(s));
                t.view((0, 0), (n, n)).into_owned()
            };
            let dx = (xp(s + h) - xp(s - h)) / (2.0 * h);
            let speed = (loop_fn(s + h) - loop_fn(s - h)).norm() / (2.0 * h);
            let q = -(&dx * &w).dot(&(&p_block * &w));
            if q.abs() < TOL_TRANSVERSAL * scale * scale * speed.max(f64::MIN_POSITIVE) {
                return Err(Error::NonGenericCaustic(th.iter().copied().collect()));
            }
            total += if q > 0.0 { 1 } else { -1 };
        }
        prev = k;
    }
    Ok(total)
}

/// Maslov index of a loop class, from a straight lifted representative.
///
/// When the representative through the base point meets a non-generic
/// caustic point (for instance two circle factors degenerating together),
/// the loop is moved to deterministic nearby offsets, which does not change
/// its class.
pub fn maslov_index(m: &dyn LagrangianManifold, lp: &LoopClass) -> Result<i64> {
    maslov_index_with(m, lp, MASLOV_SAMPLES_PER_TURN)
}

pub fn maslov_index_with(m: &dyn LagrangianManifold, lp: &LoopClass, samples_per_turn: usize) -> Result<i64> {
    let d = lifted_direction(m, lp)?;
    if lp.is_trivial() {
        return Ok(0);
    }
    let turns: i64 = lp.windings.iter().map(|w| w.abs()).sum();
    let samples = samples_per_turn * turns as usize;
    let mut last_err = None;
    for attempt in 0..8 {
        let mut start = m.base().clone();
        for i in 0..m.dim() {
            if m.periodic()[i] && attempt > 0 {
                start[i] += (0.3819660113 * (attempt * (i + 1)) as f64 + 0.1) % (2.0 * PI);
            }
        }
        match maslov_index_along(m, |s| &start + &d * s, samples) {
            Err(e @ Error::NonGenericCaustic(_)) => last_err = Some(e),
            other => return other,
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Outcome of the EBK test for one loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EbkReport {
    pub windings: Vec<i64>,
    /// `|∮ p dx|`
    pub action: f64,
    /// `∮ p dx` in the parameter-increasing orientation.
    pub signed_action: f64,
    pub maslov: i64,
    /// Distance of `|∮ p dx|/2πħ − m/4` to the nearest integer.
    pub residue: f64,
    pub quantized: bool,
}

/// EBK condition `|∮_γ p dx|/2πħ − m(γ)/4 ∈ ℤ` for each loop.
pub fn ebk_check(m: &dyn LagrangianManifold, hbar: f64, loops: &[LoopClass]) -> Result<Vec<EbkReport>> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::InvalidInput("hbar must be positive".into()));
    }
    loops
        .iter()
        .map(|lp| {
            let signed = loop_period(m, lp)?;
            let maslov = maslov_index(m, lp)?;
            let v = signed.abs() / (2.0 * PI * hbar) - maslov as f64 / 4.0;
            let residue = (v - v.round()).abs();
            Ok(EbkReport {
                windings: lp.windings.clone(),
                action: signed.abs(),
                signed_action: signed,
                maslov,
                residue,
                quantized: residue <= TOL_EBK,
            })
        })
        .collect()
}

/// `Ψ(ž) = exp(iφ(ž)/ħ) √ρ(ž)` on the cover, optionally followed by a
/// sequence of classical phase-space translations.
#[derive(Clone)]
pub struct CoverWavefunction {
    manifold: Arc<dyn LagrangianManifold>,
    hbar: f64,
    rho: Option<FieldFn>,
    /// Translations in order of application.
    translations: Vec<PhasePoint>,
}

impl CoverWavefunction {
    pub fn new(manifold: Arc<dyn LagrangianManifold>, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidInput("hbar must be positive".into()));
        }
        Ok(Self {
            manifold,
            hbar,
            rho: None,
            translations: Vec::new(),
        })
    }

    /// Density `ρ(θ) ≥ 0` in the parameter chart.
    pub fn with_density(mut self, rho: FieldFn) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn manifold(&self) -> &dyn LagrangianManifold {
        &*self.manifold
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn translations(&self) -> &[PhasePoint] {
        &self.translations
    }

    /// Total phase and image point of `ž` after the stored translations.
    pub fn phase_at(&self, hp: &HomotopyPoint) -> Result<(f64, PhasePoint)> {
        let m = &*self.manifold;
        let mut phi = phase(m, hp)?;
        let mut z = hp.project(m);
        for za in &self.translations {
            let (p, w) = translate_phase_value(phi, &z, za);
            phi = p;
            z = w;
        }
        Ok((phi, z))
    }

    pub fn amplitude(&self, hp: &HomotopyPoint) -> Result<f64> {
        let rho = self.rho.as_ref().map_or(1.0, |r| r(hp.endpoint()));
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidInput(format!("density {rho} is not a finite nonnegative number")));
        }
        Ok(rho.sqrt())
    }

    pub fn evaluate(&self, hp: &HomotopyPoint) -> Result<Complex64> {
        let (phi, _) = self.phase_at(hp)?;
        Ok(Complex64::from_polar(self.amplitude(hp)?, phi / self.hbar))
    }
}

/// True iff every loop satisfies the EBK condition, i.e. `Ψ` including the
/// Maslov factor `e^{−iπm/2}` returns to itself around each loop.
pub fn cover_wavefunction_single_valued(wf: &CoverWavefunction, loops: &[LoopClass]) -> Result<bool> {
    Ok(ebk_check(wf.manifold(), wf.hbar(), loops)?
        .iter()
        .all(|r| r.quantized))
}

/// One unit loop per periodic axis.
pub fn generator_loops(m: &dyn LagrangianManifold) -> Vec<LoopClass> {
    LoopClass::generators(m)
}

/// `T(z_a)Ψ`: the phase is advanced by `½p_a·x_a + p_a·x₀` at the current
/// image point and the point moves to `z₀ + z_a`.
pub fn classical_weyl_action(wf: &CoverWavefunction, z_a: &PhasePoint) -> CoverWavefunction {
    let mut out = wf.clone();
    out.translations.push(z_a.clone());
    out
}

/// `(phase of T(z_a)T(z_b)Ψ − phase of T(z_b)T(z_a)Ψ)/ħ` at `ž`.
pub fn classical_ordering_defect(
    wf: &CoverWavefunction,
    z_a: &PhasePoint,
    z_b: &PhasePoint,
    hp: &HomotopyPoint,
) -> Result<f64> {
    let ab = classical_weyl_action(&classical_weyl_action(wf, z_b), z_a);
    let ba = classical_weyl_action(&classical_weyl_action(wf, z_a), z_b);
    Ok((ab.phase_at(hp)?.0 - ba.phase_at(hp)?.0) / wf.hbar())
}

/// Samples `ψ(x_j)` of a wavefunction on a 1-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWavefunction {
    pub grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub hbar: f64,
}

impl SampledWavefunction {
    pub fn new(grid: Vec<f64>, values: Vec<Complex64>, hbar: f64) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::TooFewPoints(grid.len()));
        }
        if grid.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidInput("non-finite wavefunction sample".into()));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidInput("hbar must be positive".into()));
        }
        Ok(Self { grid, values, hbar })
    }

    /// `exp(−(x − x₀)²/(2w²) + i p₀ x/ħ)` on `points` nodes of `[lo, hi]`.
    pub fn gaussian(lo: f64, hi: f64, points: usize, x0: f64, width: f64, p0: f64, hbar: f64) -> Result<Self> {
        let grid: Vec<f64> = (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points.max(2) - 1) as f64)
            .collect();
        let values = grid
            .iter()
            .map(|x| {
                let amp = (-(x - x0).powi(2) / (2.0 * width * width)).exp();
                Complex64::from_polar(amp, p0 * x / hbar)
            })
            .collect();
        Self::new(grid, values, hbar)
    }

    /// Uniform grid step, if the grid is uniform.
    pub fn step(&self) -> Option<f64> {
        let h = (self.grid[self.grid.len() - 1] - self.grid[0]) / (self.grid.len() - 1) as f64;
        let uniform = self
            .grid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
        uniform.then_some(h)
    }

    /// Discrete `L²` norm `(Σ|ψ_j|² Δx_j)^{1/2}` with midpoint cell widths.
    pub fn norm(&self) -> f64 {
        let n = self.grid.len();
        let width = |j: usize| {
            let lo = if j == 0 { self.grid[0] } else { 0.5 * (self.grid[j - 1] + self.grid[j]) };
            let hi = if j + 1 == n {
                self.grid[n - 1]
            } else {
                0.5 * (self.grid[j] + self.grid[j + 1])
            };
            hi - lo
        };
        (0..n)
            .map(|j| self.values[j].norm_sqr() * width(j))
            .sum::<f64>()
            .sqrt()
    }

    /// Columns `x, re, im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "re", "im"])?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            w.write_record([fmt17(*x), fmt17(v.re), fmt17(v.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, hbar: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::InvalidInput(format!("row {}: missing column {}", line + 2, i + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("row {}: {e}", line + 2)))
            };
            grid.push(field(0)?);
            values.push(Complex64::new(field(1)?, field(2)?));
        }
        Self::new(grid, values, hbar)
    }
}

/// `T̂(z_a)ψ(x) = exp((i/ħ)(p_a x − ½p_a x_a)) ψ(x − x_a)` on the grid.
///
/// The shift must be a whole number of grid steps unless `interpolate` is
/// set, in which case `ψ` is linearly interpolated. Samples shifted in from
/// outside the grid are zero.
pub fn weyl_translate(wf: &SampledWavefunction, z_a: &PhasePoint, interpolate: bool) -> Result<SampledWavefunction> {
    if z_a.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: z_a.dim(),
        });
    }
    let (xa, pa) = (z_a.x[0], z_a.p[0]);
    let step = wf.step();
    let n = wf.grid.len();
    let shifted: Vec<Complex64> = match step {
        Some(h) if ((xa / h) - (xa / h).round()).abs() <= 1e-9 => {
            let k = (xa / h).round() as i64;
            (0..n as i64)
                .map(|j| {
                    let src = j - k;
                    if (0..n as i64).contains(&src) {
                        wf.values[src as usize]
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect()
        }
        _ if interpolate => wf
            .grid
            .iter()
            .map(|x| interpolate_at(wf, x - xa))
            .collect(),
        _ => {
            return Err(Error::OffGridShift {
                shift: xa,
                step: step.unwrap_or(f64::NAN),
            })
        }
    };
    let values = wf
        .grid
        .iter()
        .zip(shifted)
        .map(|(x, v)| v * Complex64::from_polar(1.0, (pa * x - 0.5 * pa * xa) / wf.hbar))
        .collect();
    SampledWavefunction::new(wf.grid.clone(), values, wf.hbar)
}

fn interpolate_at(wf: &SampledWavefunction, x: f64) -> Complex64 {
    let g = &wf.grid;
    if x < g[0] || x > g[g.len() - 1] {
        return Complex64::new(0.0, 0.0);
    }
    let j = g.partition_point(|v| *v <= x).clamp(1, g.len() - 1);
    let u = (x - g[j - 1]) / (g[j] - g[j - 1]);
    wf.values[j - 1] * (1.0 - u) + wf.values[j] * u
}

/// Constant phase `c` with `T̂(z_a)T̂(z_b)ψ = e^{ic} T̂(z_a + z_b)ψ`, and the
/// largest pointwise deviation of the sample ratios from it.
///
/// Only samples where `|T̂(z_a + z_b)ψ|` exceeds `1e−8` of its maximum count.
pub fn composition_phase_defect(
    wf: &SampledWavefunction,
    z_a: &PhasePoint,
    z_b: &PhasePoint,
) -> Result<(f64, f64)> {
    let lhs = weyl_translate(&weyl_translate(wf, z_b, false)?, z_a, false)?;
    let rhs = weyl_translate(wf, &(z_a + z_b), false)?;
    let peak = rhs.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::InvalidInput("translated wavefunction vanishes".into()));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut ratios = Vec::new();
    for (l, r) in lhs.values.iter().zip(&rhs.values) {
        if r.norm() > 1e-8 * peak {
            acc += l * r.conj();
            ratios.push(l / r);
        }
    }
    let c = acc.arg();
    let spread = ratios
        .iter()
        .map(|q| (q * Complex64::from_polar(1.0, -c)).arg().abs())
        .fold(0.0, f64::max);
    Ok((c, spread))
}
