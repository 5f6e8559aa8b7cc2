//! Executes a validated scenario and writes its outputs.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DVector;
use ptk_core::dynamics::{flow_many, invariance_defect, invariance_defect_sampled};
use ptk_core::hj::{fmt17, hj_solve, pde_residual};
use ptk_core::manifolds::{caustic_points, is_lagrangian, projection_det, pullback_defect, LagrangianManifold};
use ptk_core::semiclassical::{
    composition_phase_defect, cover_wavefunction_single_valued, ebk_check, weyl_translate, CoverWavefunction,
    SampledWavefunction,
};
use ptk_core::symplectic::symplectic_form;
use ptk_core::tolerances::*;
use ptk_core::transport::transport_phase;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::scenario::{Kind, Scenario, WaveSpec};
use crate::CliError;

/// One output file, held in memory until the run succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn csv(name: &str, header: &[String], rows: &[Vec<String>]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        Artifact {
            name: name.to_string(),
            bytes: text.into_bytes(),
        }
    }

    fn json(name: &str, v: &Value) -> Self {
        let mut bytes = serde_json::to_vec_pretty(v).expect("json values serialize");
        bytes.push(b'\n');
        Artifact {
            name: name.to_string(),
            bytes,
        }
    }
}

fn cols(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(fmt17(v))
    }
}

/// Runs the scenario. `base` resolves relative input paths.
pub fn execute(s: &Scenario, base: &Path) -> Result<Vec<Artifact>, CliError> {
    match s.kind {
        Kind::Check => check(s),
        Kind::Flow => run_flow(s),
        Kind::Transport => transport(s),
        Kind::Hj => hj(s),
        Kind::Ebk => ebk(s),
        Kind::Weyl => weyl(s, base),
        Kind::Invariance => invariance(s),
    }
}

fn sample_parameters(m: &dyn LagrangianManifold, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            DVector::from_fn(m.dim(), |i, _| {
                if m.periodic()[i] {
                    rng.gen_range(0.0..2.0 * PI)
                } else {
                    let (lo, hi) = m.bounds()[i];
                    rng.gen_range(lo..=hi)
                }
            })
        })
        .collect()
}

fn check(s: &Scenario) -> Result<Vec<Artifact>, CliError> {
    let m = s.manifold()?;
    let n = m.dim();
    let samples = sample_parameters(&*m, s.params.samples.unwrap_or(64), s.seed());
    let tol = s.params.tolerance.unwrap_or(TOL_LAG);
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|th| {
            let mut r: Vec<String> = th.iter().map(|v| fmt17(*v)).collect();
            r.push(fmt17(pullback_defect(&*m, th)));
            r.push(fmt17(projection_det(&*m, th)));
            r
        })
        .collect();
    let worst = samples.iter().map(|th| pullback_defect(&*m, th)).fold(0.0, f64::max);
    let caustics = caustic_points(&*m, s.params.resolution.unwrap_or(64));
    let header: Vec<String> = cols("theta", n)
        .chain(["pullback_defect".into(), "projection_det".into()])
        .collect();
    let summary = json!({
        "lagrangian": is_lagrangian(&*m, &samples, tol),
        "tolerance": tol,
        "samples": samples.len(),
        "max_pullback_defect": num(worst),
        "caustic_count": caustics.len(),
        "caustics": caustics.iter().map(|c| c.iter().copied().map(num).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    Ok(vec![Artifact::csv("check.csv", &header, &rows), Artifact::json("check.json", &summary)])
}

fn run_flow(s: &Scenario) -> Result<Vec<Artifact>, CliError> {
    let h = s.hamiltonian()?;
    let n = h.dim();
    let z0s = s.initial_points()?;
    let t0 = s.params.t0.unwrap_or(0.0);
    let t1 = s.params.t.expect("validated");
    let trajs = flow_many(&h, &z0s, t0, t1, s.steps())?;
    let header: Vec<String> = ["traj".to_string(), "t".into()]
        .into_iter()
        .chain(cols("x", n))
        .chain(cols("p", n))
        .chain(["action".into()])
        .collect();
    let mut rows = Vec::new();
    for (k, traj) in trajs.iter().enumerate() {
        for smp in traj.samples() {
            let mut r = vec![k.to_string(), fmt17(smp.t)];
            r.extend(smp.z.x.iter().chain(smp.z.p.iter()).map(|v| fmt17(*v)));
            r.push(fmt17(smp.a));
            rows.push(r);
        }
    }
    Ok(vec![Artifact::csv("flow.csv", &header, &rows)])
}

fn transport(s: &Scenario) -> Result<Vec<Artifact>, CliError> {
    let m = s.manifold()?;
    let h = s.hamiltonian()?;
    let n = m.dim();
    let k = m.periodic().iter().filter(|p| **p).count();
    let points = s.cover_points()?;
    let times = s.params.times.clone().unwrap_or_else(|| vec![s.params.t.expect("validated")]);
    let header: Vec<String> = ["point".to_string(), "t".into()]
        .into_iter()
        .chain(cols("theta", n))
        .chain(cols("w", k))
        .chain(["phi0".into(), "phi_t".into(), "delta".into()])
        .chain(cols("x", n))
        .chain(cols("p", n))
        .collect();
    let mut rows = Vec::new();
    for (i, hp) in points.iter().enumerate() {
        for &t in &times {
            let tp = transport_phase(&h, &*m, hp, t, s.steps())?;
            let mut r = vec![i.to_string(), fmt17(t)];
            r.extend(hp.endpoint().iter().map(|v| fmt17(*v)));
            r.extend(hp.windings().iter().map(|w| w.to_string()));
            r.extend([fmt17(tp.initial), fmt17(tp.value), fmt17(tp.increment())]);
            r.extend(tp.endpoint.x.iter().chain(tp.endpoint.p.iter()).map(|v| fmt17(*v)));
            rows.push(r);
        }
    }
    Ok(vec![Artifact::csv("transport.csv", &header, &rows)])
}

fn hj(s: &Scenario) -> Result<Vec<Artifact>, CliError> {
    let h = s.hamiltonian()?;
    let datum = s.datum()?;
    let grid = s.grid()?;
    let sol = hj_solve(&h, &datum, &grid, s.params.t_max.expect("validated"), s.steps())?;
    let mut csv = Vec::new();
    sol.write_csv(&mut csv)?;
    let mut meta = sol.metadata();
    let mid = sol.times.len() / 2;
    meta["pde_residual_mid"] = pde_residual(&sol, &h, mid).map_or(Value::Null, num);
    meta["pde_residual_time"] = num(sol.times[mid]);
    Ok(vec![
        Artifact {
            name: "hj.csv".into(),
            bytes: csv,
        },
        Artifact::json("hj.json", &meta),
    ])
}

fn ebk(s: &Scenario) -> Result<Vec<Artifact>, CliError> {
    let m = s.manifold()?;
    let hbar = s.params.hbar.expect("validated");
    let loops = s.loops()?;
    let reports = ebk_check(&*m, hbar, &loops)?;
    let wf = CoverWavefunction::new(m, hbar)?;
    let single = cover_wavefunction_single_valued(&wf, &loops)?;
    let v = json!({
        "hbar": hbar,
        "reports": reports,
        "single_valued": single,
    });
    Ok(vec![Artifact::json("ebk.json", &v)])
}

fn load_wavefunction(spec: &WaveSpec, hbar: f64, base: &Path) -> Result<SampledWavefunction, CliError> {
    match spec {
        WaveSpec::Gaussian {
            lo,
            hi,
            points,
            center,
            width,
            momentum,
        } => SampledWavefunction::gaussian(*lo, *hi, *points, *center, *width, *momentum, hbar)
            .map_err(|e| CliError::Validation(format!("params.wavefunction: {e}"))),
        WaveSpec::Csv { path } => {
            let file = fs::File::open(base.join(path))
                .map_err(|e| CliError::Validation(format!("params.wavefunction.path: {e}")))?;
            SampledWavefunction::read_csv(file, hbar)
                .map_err(|e| CliError::Validation(format!("params.wavefunction.path: {e}")))
        }
    }
}

fn weyl(s: &Scenario, base: &Path) -> Result<Vec<Artifact>, CliError> {
    let hbar = s.params.hbar.expect("validated");
    let wf = load_wavefunction(s.params.wavefunction.as_ref().expect("validated"), hbar, base)?;
    let shifts = s.translations()?;
    let interpolate = s.params.interpolate.unwrap_or(false);
    let mut out = wf.clone();
    for z in &shifts {
        out = weyl_translate(&out, z, interpolate)?;
    }
    let mut summary = json!({
        "hbar": hbar,
        "points": wf.grid.len(),
        "translations": shifts.len(),
        "norm_in": num(wf.norm()),
        "norm_out": num(out.norm()),
        "norm_defect": num(out.norm() - wf.norm()),
    });
    if let [za, zb] = shifts.as_slice() {
        if !interpolate {
            // shifts[0] acts first
            let (phase, spread) = composition_phase_defect(&wf, zb, za)?;
            summary["composition"] = json!({
                "phase": num(phase),
                "spread": num(spread),
                "sigma": num(symplectic_form(zb, za)?),
            });
        }
    }
    let mut csv = Vec::new();
    out.write_csv(&mut csv)?;
    Ok(vec![
        Artifact {
            name: "weyl.csv".into(),
            bytes: csv,
        },
        Artifact::json("weyl.json", &summary),
    ])
}

fn invariance(s: &Scenario) -> Result<Vec<Artifact>, CliError> {
    let h = s.hamiltonian()?;
    let curve = s.curve_points()?;
    let t = s.params.t.expect("validated");
    let steps = s.steps();
    let v = json!({
        "t": t,
        "steps": steps,
        "vertices": curve.len(),
        "defect": num(invariance_defect(&h, &curve, t, steps)?),
        "sampled_defect": num(invariance_defect_sampled(&h, &curve, t, steps)?),
    });
    Ok(vec![Artifact::json("invariance.json", &v)])
}

/// Run manifest: echoed inputs, versions and tolerances. `timestamp` is the
/// only field that varies between identical runs.
pub fn manifest(s: &Scenario, artifacts: &[Artifact]) -> Value {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    json!({
        "tool": "ptk",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": s.kind,
        "scenario": s,
        "seed": s.seed(),
        "steps": s.steps(),
        "tolerances": {
            "symplectic": TOL_SYMP,
            "determinant": TOL_DET,
            "quadrature": TOL_QUAD,
            "lagrangian": TOL_LAG,
            "caustic": TOL_CAUSTIC,
            "caustic_root": TOL_CAUSTIC_ROOT,
            "newton": NEWTON_TOL,
            "newton_max_iter": NEWTON_MAX_ITER,
            "ebk": TOL_EBK,
            "euler": TOL_EULER,
            "transversal": TOL_TRANSVERSAL,
            "max_panels": MAX_PANELS,
        },
        "outputs": artifacts.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        "timestamp": now,
    })
}

/// Loads, validates, runs and writes. Returns the written paths.
pub fn run_file(
    path: &Path,
    expected: Option<Kind>,
    out_dir: &Path,
    seed: Option<u64>,
    steps: Option<usize>,
) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("scenario: cannot read {}: {e}", path.display())))?;
    let mut s = Scenario::from_json(&text)?;
    if let Some(k) = expected {
        if k != s.kind {
            return Err(CliError::Validation(format!(
                "kind: scenario is `{}` but the subcommand is `{k}`",
                s.kind
            )));
        }
    }
    if seed.is_some() {
        s.seed = seed;
    }
    if let Some(n) = steps {
        s.params.steps = Some(n);
        s.validate()?;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut artifacts = execute(&s, base)?;
    artifacts.push(Artifact::json("manifest.json", &manifest(&s, &artifacts)));
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for a in &artifacts {
        let p = out_dir.join(&a.name);
        fs::write(&p, &a.bytes)?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Vec<Artifact> {
        execute(&Scenario::from_json(text).unwrap(), Path::new(".")).unwrap()
    }

    fn json_of(a: &Artifact) -> Value {
        serde_json::from_slice(&a.bytes).unwrap()
    }

    #[test]
    fn transport_quarter_turn() {
        let out = run(r#"{"kind": "transport", "manifold": {"type": "circle", "radius": 1},
            "hamiltonian": {"type": "harmonic", "dim": 1},
            "params": {"t": 1.5707963267948966, "steps": 8192, "points": [{"theta": [0]}]}}"#);
        let text = String::from_utf8(out[0].bytes.clone()).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header, ["point", "t", "theta1", "w1", "phi0", "phi_t", "delta", "x1", "p1"]);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        let delta: f64 = row[6].parse().unwrap();
        assert!(delta.abs() < 1e-7, "{delta}");
    }

    #[test]
    fn ebk_circle() {
        let out = run(r#"{"kind": "ebk", "manifold": {"type": "circle", "radius": 1}, "params": {"hbar": 1}}"#);
        let v = json_of(&out[0]);
        assert_eq!(v["reports"][0]["quantized"], true);
        assert_eq!(v["reports"][0]["maslov"], 2);
        assert_eq!(v["single_valued"], true);
    }

    #[test]
    fn weyl_reports_composition() {
        let out = run(r#"{"kind": "weyl", "params": {"hbar": 1,
            "wavefunction": {"type": "gaussian", "lo": -10, "hi": 10, "points": 201, "center": 0, "width": 1},
            "translations": [{"x": [0.5], "p": [0]}, {"x": [0], "p": [1]}]}}"#);
        let v = json_of(&out[1]);
        assert!(v["norm_defect"].as_f64().unwrap().abs() < 1e-12);
        let c = &v["composition"];
        assert!((c["phase"].as_f64().unwrap() - 0.5 * c["sigma"].as_f64().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn check_flags_caustics() {
        let out = run(r#"{"kind": "check", "manifold": {"type": "circle", "radius": 2}, "params": {"samples": 10}}"#);
        let v = json_of(&out[1]);
        assert_eq!(v["lagrangian"], true);
        assert_eq!(v["caustic_count"], 2);
    }
}
