use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use ckfdirac::ckf::{classify, CanonicalKind};
use ckfdirac::fields::{certify_losyau, PotentialSpec};
use ckfdirac::flows::{integrate_curve, loop_integrals};
use ckfdirac::grid::{assemble, free_sigma_min, scaling_sweep, sigma_floor, sigma_min, zeromode_residual_on_grid, SolverOptions};
use ckfdirac::holonomy::admissible_spectrum;
use ckfdirac::identities::{run_identity_suite_with, REGISTRY};
use ckfdirac::spin::{commutator_residuals, norm_decomposition_check, QuadratureSpec, SpinorField};

use crate::config::Resolved;

/// Relative error allowed in the norm decomposition.
const NORM_TOL: f64 = 1e-3;

const SWEEP_NOTE: &str = "σ_min bounded away from the floor on a finite grid does not prove the absence of zero modes; \
the floor ½·σ_min(free box) is a calibrated bar, not a spectral gap";

struct Run<'a> {
    cfg: &'a Resolved,
    outputs: Vec<String>,
    failures: Vec<String>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    config: &'a Resolved,
    outputs: &'a [String],
    status: &'static str,
    failures: &'a [String],
    notes: &'a [String],
    error: Option<String>,
}

fn num(x: f64) -> String {
    x.to_string()
}

fn point_cols(x: [f64; 3]) -> [String; 3] {
    x.map(num)
}

impl<'a> Run<'a> {
    fn path(&mut self, name: &str) -> std::path::PathBuf {
        self.outputs.push(name.to_string());
        self.cfg.out.join(name)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn jsonl<T: Serialize>(&mut self, name: &str, items: &[T]) -> Result<()> {
        let path = self.path(name);
        let mut text = String::new();
        for item in items {
            text.push_str(&serde_json::to_string(item)?);
            text.push('\n');
        }
        write(&path, &text)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        write(&path, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    fn check(&mut self, pass: bool, what: impl FnOnce() -> String) -> bool {
        if !pass {
            self.failures.push(what());
        }
        pass
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Runs the configured subcommand and writes its outputs plus `manifest.json`.
/// Returns the failed checks.
pub fn run(cfg: &Resolved) -> Result<Vec<String>> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut run = Run { cfg, outputs: Vec::new(), failures: Vec::new(), notes: Vec::new() };
    let result = match cfg.subcommand.as_str() {
        "classify" => classify_cmd(&mut run),
        "verify-identities" => identities(&mut run),
        "field-lines" => field_lines(&mut run),
        "loop-integrals" => loops(&mut run),
        "verify-operators" => operators(&mut run),
        "holonomy" => holonomy(&mut run),
        "spectrum-sweep" => sweep(&mut run),
        "control-losyau" => control(&mut run),
        other => unreachable!("unvalidated subcommand {other}"),
    };
    let error = result.as_ref().err().map(|e| format!("{e:#}"));
    let status = if error.is_some() || !run.failures.is_empty() { "fail" } else { "pass" };
    let manifest = Manifest {
        program: "ckfdirac",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        outputs: &run.outputs,
        status,
        failures: &run.failures,
        notes: &run.notes,
        error,
    };
    write(&cfg.out.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    result.map(|_| run.failures)
}

fn classify_cmd(run: &mut Run) -> Result<()> {
    let p = run.cfg.ckf;
    let cf = match classify(&p) {
        Ok(cf) => cf,
        Err(e) => {
            run.check(false, || format!("classify: {e}"));
            return Ok(());
        }
    };
    println!("kind = {:?}", cf.kind);
    match cf.kind {
        CanonicalKind::Special => {
            println!("nu = {}", cf.nu);
            if let Some(mu) = cf.mu() {
                println!("mu = {mu}");
            }
        }
        CanonicalKind::Dilation => println!("rate = {}", cf.rate),
        _ => {}
    }
    if cf.kind != CanonicalKind::Dilation {
        println!("axis = {:?}", cf.axis);
        println!("scale = {}", cf.scale);
    }
    println!("x0 = {:?}", cf.x0);
    if let Some(t) = cf.orbit_period() {
        println!("orbit period = {t}");
    }
    println!("admissible = {}", cf.admissible);
    run.json("classify.json", &json!({ "params": p, "canonical": cf, "mu": cf.mu(), "orbit_period": cf.orbit_period() }))
}

fn identities(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let reports = run_identity_suite_with(&cfg.ckf, cfg.points, cfg.seed, cfg.tolerance);
    let mut rows = Vec::with_capacity(reports.len());
    for r in &reports {
        let [x1, x2, x3] = point_cols(r.point);
        rows.push(vec![r.identity_id.clone(), x1, x2, x3, num(r.residual), num(r.tolerance), r.pass.to_string()]);
        run.check(r.pass, || format!("{} at {:?}: residual {:.3e} > {:.1e}", r.identity_id, r.point, r.residual, r.tolerance));
    }
    run.csv("identities.csv", &["identity_id", "x1", "x2", "x3", "residual", "tolerance", "pass"], &rows)?;

    println!("{:<32} {:>6} {:>12}", "identity", "checks", "max residual");
    for id in REGISTRY.iter().map(|i| i.id) {
        let mine: Vec<_> = reports.iter().filter(|r| r.identity_id == id).collect();
        if mine.is_empty() {
            continue;
        }
        let worst = mine.iter().map(|r| r.residual).fold(0.0, f64::max);
        println!("{id:<32} {:>6} {worst:>12.3e} {}", mine.len(), verdict(mine.iter().all(|r| r.pass)));
    }
    println!("{} checks at {} points, tolerance {:.1e}", reports.len(), cfg.points, cfg.tolerance);
    Ok(())
}

fn field_lines(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let mut lines = Vec::new();
    for &x0 in &cfg.seed_points {
        match integrate_curve(&cfg.ckf, x0, cfg.t_max, cfg.rk_tol) {
            Ok(tr) => {
                match tr.period {
                    Some(t) if tr.closed => println!("{x0:?}: closed, period {t}, {} samples", tr.samples.len()),
                    _ => println!("{x0:?}: not closed by t = {}, {} samples", cfg.t_max, tr.samples.len()),
                }
                lines.push(json!({ "seed_point": x0, "trace": tr }));
            }
            Err(e) => {
                run.check(false, || format!("field line from {x0:?}: {e}"));
            }
        }
    }
    run.jsonl("field-lines.jsonl", &lines)
}

fn loops(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let tol = cfg.tolerance;
    let expected_period = classify(&cfg.ckf).ok().and_then(|c| c.orbit_period());
    let mut rows = Vec::new();
    println!("{:<24} {:<10} {:>22} {:>22} {:>10}", "seed", "quantity", "value", "expected", "residual");
    for &x0 in &cfg.seed_points {
        let tr = integrate_curve(&cfg.ckf, x0, cfg.t_max, cfg.rk_tol);
        let tr = match tr {
            Ok(tr) if tr.closed => tr,
            Ok(_) => {
                run.check(false, || format!("orbit from {x0:?} did not close by t = {}", cfg.t_max));
                continue;
            }
            Err(e) => {
                run.check(false, || format!("orbit from {x0:?}: {e}"));
                continue;
            }
        };
        let li = loop_integrals(&tr, &cfg.ckf, cfg.potential.as_ref())?;
        let mut quantities = vec![
            ("period", tr.period.unwrap_or(f64::NAN), expected_period),
            ("int_divX", li.int_div, Some(0.0)),
            ("int_absY", li.int_abs_y, Some(4.0 * std::f64::consts::PI)),
        ];
        if let Some(flux) = li.int_flux {
            quantities.push(("int_XdotA", flux, Some(0.0)));
        }
        for (name, value, expected) in quantities {
            let residual = expected.map(|e| (value - e).abs());
            let pass = residual.map_or(true, |r| r <= tol);
            run.check(pass, || format!("{name} from {x0:?}: {value} vs {}", expected.unwrap_or(f64::NAN)));
            let [x1, x2, x3] = point_cols(x0);
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            rows.push(vec![x1, x2, x3, name.to_string(), num(value), opt(expected), opt(residual), num(tol), pass.to_string()]);
            println!(
                "{:<24} {name:<10} {value:>22.15} {:>22} {:>10}",
                format!("{x0:?}"),
                expected.map(|e| format!("{e:.15}")).unwrap_or_default(),
                residual.map(|r| format!("{r:.1e}")).unwrap_or_default()
            );
        }
    }
    run.csv("loop-integrals.csv", &["x1", "x2", "x3", "quantity", "value", "expected", "residual", "tolerance", "pass"], &rows)
}

/// Uniform points of `[−2, 2]³` away from the zeros of the field.
fn points_in_ox(run: &Run) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.cfg.seed);
    let mut out = Vec::with_capacity(run.cfg.points);
    while out.len() < run.cfg.points {
        let x = [0; 3].map(|_| rng.gen_range(-2.0..2.0));
        if run.cfg.ckf.w(x) > 1e-3 {
            out.push(x);
        }
    }
    out
}

fn potential(run: &Run) -> PotentialSpec {
    run.cfg.potential.clone().unwrap_or(PotentialSpec::Zero)
}

fn operators(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let spec = potential(run);
    let f = SpinorField::test_packet([0.3, -0.2, 0.1], 1.1);
    let mut rows = Vec::new();
    let mut worst = [0.0f64; 3];
    for x in points_in_ox(run) {
        let r = match commutator_residuals(&cfg.ckf, &spec, &f, x) {
            Ok(r) => r,
            Err(e) => {
                run.check(false, || format!("commutators at {x:?}: {e}"));
                continue;
            }
        };
        worst = [worst[0].max(r.dw_q), worst[1].max(r.q_s), worst[2].max(r.dw_s)];
        let pass = run.check(r.max() <= cfg.tolerance, || format!("commutators at {x:?}: {:.3e} > {:.1e}", r.max(), cfg.tolerance));
        let [x1, x2, x3] = point_cols(x);
        rows.push(vec![x1, x2, x3, num(r.dw_q), num(r.q_s), num(r.dw_s), num(cfg.tolerance), pass.to_string()]);
    }
    run.csv("operators.csv", &["x1", "x2", "x3", "dw_q", "q_s", "dw_s", "tolerance", "pass"], &rows)?;
    println!("{} points, max residuals: [Dw,Q] {:.2e}, [Q,S] {:.2e}, {{Dw,S}} {:.2e} (tol {:.1e})", rows.len(), worst[0], worst[1], worst[2], cfg.tolerance);

    if let Some(n) = cfg.quadrature {
        let nd = norm_decomposition_check(&cfg.ckf, &spec, &SpinorField::test_bump(), QuadratureSpec::with_points(n))?;
        let pass = run.check(nd.rel_err <= NORM_TOL, || format!("norm decomposition at {n}³: relative error {:.3e} > {NORM_TOL:.0e}", nd.rel_err));
        println!(
            "norm decomposition at {n}³: ‖Dwφ‖² = {:.10}, ‖T₊φ‖² + ‖T₋φ‖² + ‖Qφ‖² = {:.10}, relative error {:.2e} {}",
            nd.lhs,
            nd.t_plus + nd.t_minus + nd.q,
            nd.rel_err,
            verdict(pass)
        );
        let row = vec![n.to_string(), num(nd.lhs), num(nd.t_plus), num(nd.t_minus), num(nd.q), num(nd.rel_err), num(NORM_TOL), pass.to_string()];
        run.csv("norm-decomposition.csv", &["points_per_axis", "lhs", "t_plus", "t_minus", "q", "rel_err", "tolerance", "pass"], &[row])?;
    }
    Ok(())
}

fn holonomy(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let spec = potential(run);
    let tol = cfg.tolerance;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &x0 in &cfg.seed_points {
        let h = integrate_curve(&cfg.ckf, x0, cfg.t_max, cfg.rk_tol).and_then(|tr| admissible_spectrum(&cfg.ckf, &spec, &tr));
        let h = match h {
            Ok(h) => h,
            Err(e) => {
                run.check(false, || format!("holonomy from {x0:?}: {e}"));
                continue;
            }
        };
        let m = (h.monodromy_at_zero + 1.0).norm();
        let pass = h.quantization_residual <= tol && m <= tol;
        run.check(pass, || format!("holonomy from {x0:?}: offset residual {:.3e}, |M(0)+1| {m:.3e} (tol {tol:.1e})", h.quantization_residual));
        let s = h.admissible_lambdas;
        println!(
            "{x0:?}: τ = {:.12}, λ ∈ {:.12} + {:.12}·Z, offset residual {:.1e}, M(0) = {:.12}{:+.1e}i {}",
            h.period,
            s.offset,
            s.step,
            h.quantization_residual,
            h.monodromy_at_zero.re,
            h.monodromy_at_zero.im,
            verdict(pass)
        );
        let [x1, x2, x3] = point_cols(x0);
        rows.push(vec![
            x1,
            x2,
            x3,
            num(h.period),
            num(h.phase_integral.re),
            num(h.phase_integral.im),
            num(s.offset),
            num(s.step),
            num(h.monodromy_at_zero.re),
            num(h.monodromy_at_zero.im),
            num(h.quantization_residual),
            pass.to_string(),
        ]);
        results.push(h);
    }
    run.csv(
        "holonomy.csv",
        &["x1", "x2", "x3", "period", "phase_re", "phase_im", "offset", "step", "monodromy_re", "monodromy_im", "quantization_residual", "pass"],
        &rows,
    )?;
    run.jsonl("holonomy.jsonl", &results)
}

fn sweep(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let spec = potential(run);
    let g = cfg.grid_spec()?;
    let ts = cfg.ts.values()?;
    let opts = SolverOptions { tol: cfg.tol, seed: cfg.seed, ..Default::default() };
    let sw = scaling_sweep(&spec, g, &ts, &opts)?;
    let mut rows = Vec::with_capacity(ts.len());
    println!("{:>10} {:>14} {:>6} {:>9}", "t", "sigma_min", "iters", "converged");
    for k in 0..ts.len() {
        let (t, s, it, c) = (sw.ts[k], sw.sigma_mins[k], sw.iterations[k], sw.converged[k]);
        println!("{t:>10} {s:>14.8} {it:>6} {c:>9}");
        run.check(c, || format!("σ_min at t = {t} did not converge in {it} iterations"));
        rows.push(vec![num(t), num(s), it.to_string(), c.to_string()]);
    }
    run.csv("spectrum-sweep.csv", &["t", "sigma_min", "iters", "converged"], &rows)?;
    let (free, floor) = (free_sigma_min(&g), sigma_floor(&g));
    println!("free box σ_min {free:.6}, floor {floor:.6}, min over t {:.6}", sw.min());
    run.notes.push(format!("sigma_free = {free}, sigma_floor = {floor}, min sigma_min = {}, above floor: {}", sw.min(), sw.min() > floor));
    run.notes.push(SWEEP_NOTE.to_string());
    Ok(())
}

fn control(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let g = cfg.grid_spec()?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut row = |run: &mut Run, name: &str, value: f64, threshold: Option<f64>, pass: Option<bool>| {
        if let Some(p) = pass {
            run.check(p, || format!("{name} = {value:.3e} (threshold {:.3e})", threshold.unwrap_or(f64::NAN)));
        }
        println!(
            "{name:<24} {value:>14.6e} {:>12} {}",
            threshold.map(|t| format!("{t:.3e}")).unwrap_or_default(),
            pass.map(verdict).unwrap_or("")
        );
        rows.push(vec![name.to_string(), num(value), threshold.map(num).unwrap_or_default(), pass.map(|p| p.to_string()).unwrap_or_default()]);
    };

    let cert = certify_losyau(cfg.points, cfg.seed)?;
    row(run, "continuum_residual", cert.max_dirac_residual, Some(cfg.tolerance), Some(cert.max_dirac_residual <= cfg.tolerance));
    row(run, "continuum_parallelism", cert.max_parallel_residual, None, None);

    let res = zeromode_residual_on_grid(&PotentialSpec::LossYau, &SpinorField::LossYauMode, g)?;
    row(run, "grid_residual_full", res.full, None, None);
    row(run, "grid_residual_interior", res.interior, None, None);

    let opts = SolverOptions { tol: cfg.tol, block: 8, seed: cfg.seed, ..Default::default() };
    let s = sigma_min(&assemble(&PotentialSpec::LossYau, g)?, &opts)?;
    let (free, floor) = (free_sigma_min(&g), sigma_floor(&g));
    row(run, "sigma_min", s.sigma, Some(0.25 * floor), Some(s.converged && s.sigma < 0.25 * floor));
    row(run, "sigma_free", free, None, None);
    row(run, "sigma_floor", floor, None, None);
    run.notes.push(format!("sigma_min converged: {} after {} iterations (residual {:e})", s.converged, s.iterations, s.residual));
    run.csv("control-losyau.csv", &["quantity", "value", "threshold", "pass"], &rows)
}
