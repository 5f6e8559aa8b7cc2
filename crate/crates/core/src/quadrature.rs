//! Line integrals of the action form `p dx` along phase-space curves.
//!
//! Curves are sampled at the nodes of a uniform panel partition. On each
//! panel both `x` and `p` are replaced by their quadratic interpolants and
//! `∫ p dx` is integrated exactly, which is Simpson's rule for a
//! Riemann–Stieltjes integral. No derivatives of the curve are needed.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::symplectic::PhasePoint;
use crate::tolerances::{MAX_PANELS, TOL_QUAD};

const MIN_PANELS: usize = 8;

/// Simpson–Stieltjes sum over consecutive sample triples.
fn panel_sum(samples: &[PhasePoint]) -> f64 {
    debug_assert!(samples.len() % 2 == 1);
    let mut total = 0.0;
    for w in samples.windows(3).step_by(2) {
        let (z0, z1, z2) = (&w[0], &w[1], &w[2]);
        for j in 0..z0.dim() {
            let a = 0.5 * (z2.x[j] - z0.x[j]);
            let b = 0.5 * (z0.x[j] - 2.0 * z1.x[j] + z2.x[j]);
            let c = 0.5 * (z2.p[j] - z0.p[j]);
            let d = 0.5 * (z0.p[j] - 2.0 * z1.p[j] + z2.p[j]);
            total += 2.0 * a * z1.p[j] + (2.0 / 3.0) * (a * d + 2.0 * b * c);
        }
    }
    total
}

fn sample<F>(curve: &F, s0: f64, s1: f64, panels: usize) -> Result<Vec<PhasePoint>>
where
    F: Fn(f64) -> Result<PhasePoint> + Sync,
{
    let m = 2 * panels;
    (0..=m)
        .into_par_iter()
        .map(|k| {
            let s = if k == m {
                s1
            } else {
                s0 + (s1 - s0) * k as f64 / m as f64
            };
            curve(s)
        })
        .collect()
}

/// `∫ p dx` along `s ↦ curve(s)` for `s ∈ [s0, s1]` with a fixed number of panels.
pub fn action_along_fixed<F>(curve: F, s0: f64, s1: f64, panels: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<PhasePoint> + Sync,
{
    let panels = panels.max(1);
    Ok(panel_sum(&sample(&curve, s0, s1, panels)?))
}

/// `∫ p dx` along `s ↦ curve(s)` for `s ∈ [s0, s1]`.
///
/// The panel count is doubled until two successive sums agree to
/// `TOL_QUAD · (1 + |value|)`; the last pair is then Richardson-extrapolated.
pub fn action_along<F>(curve: F, s0: f64, s1: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<PhasePoint> + Sync,
{
    action_along_from(curve, s0, s1, MIN_PANELS)
}

/// As [`action_along`], starting from `min_panels` panels.
pub fn action_along_from<F>(curve: F, s0: f64, s1: f64, min_panels: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<PhasePoint> + Sync,
{
    if s0 == s1 {
        return Ok(0.0);
    }
    let mut panels = min_panels.max(1);
    let mut coarse = panel_sum(&sample(&curve, s0, s1, panels)?);
    let mut change = f64::INFINITY;
    while panels < MAX_PANELS {
        panels *= 2;
        let fine = panel_sum(&sample(&curve, s0, s1, panels)?);
        change = (fine - coarse).abs();
        if change < TOL_QUAD * (1.0 + fine.abs()) {
            return Ok(fine + (fine - coarse) / 15.0);
        }
        coarse = fine;
    }
    Err(Error::QuadratureNotConverged { change })
}

/// `∫ p dx` along the piecewise-linear interpolant of `path`.
///
/// On a straight segment the integrand is linear, so the trapezoid value
/// `(p_k + p_{k+1})/2 · (x_{k+1} − x_k)` is exact and further refinement of
/// the segment changes nothing.
pub fn path_action_integral(path: &[PhasePoint]) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::TooFewPoints(path.len()));
    }
    let n = path[0].dim();
    if let Some(bad) = path.iter().find(|z| z.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.dim(),
        });
    }
    Ok(path
        .windows(2)
        .map(|w| 0.5 * (&w[0].p + &w[1].p).dot(&(&w[1].x - &w[0].x)))
        .sum())
}

/// `½ ∫ (p dx − x dp)` along `s ↦ curve(s)`, from `∫ p dx` by parts.
pub fn symmetric_action_along<F>(curve: F, s0: f64, s1: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<PhasePoint> + Sync,
{
    let start = curve(s0)?;
    let end = curve(s1)?;
    let pdx = action_along(curve, s0, s1)?;
    Ok(pdx - 0.5 * (end.px() - start.px()))
}
