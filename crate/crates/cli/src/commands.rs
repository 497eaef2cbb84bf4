//! One function per subcommand. Each writes its artifacts and returns the
//! JSON report that is also printed to stdout.

use std::path::Path;
use std::sync::Arc;

use fluxprobe::angular_spectrum::{
    project_propagating, time_reverse, AngularField, AnnulusSpec, DirectionGrid, Orientation, TestFunction,
};
use fluxprobe::flux::{column_flux, flux, flux_inner, w_norm_sq};
use fluxprobe::solver_1d::{distinguishability_1d, distinguishability_report, DEFAULT_GRAZING_EXCLUSION};
use fluxprobe::spectral::{eigen_curve, lemma1_asymptote, lemma1_integral, operator_norms};
use fluxprobe::time_reversal::{
    default_initial_field, distinguishability_estimate, iterate as run_iteration, rayleigh_quotient, IterationOptions,
    IterationTrace, ZeroBackend,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::backend::{self, Backend};
use crate::config::{ExperimentConfig, TestFunctionSpec};
use crate::output::Output;
use crate::CliError;

fn output(cfg: &ExperimentConfig, out: &Path) -> Result<Output, CliError> {
    Output::new(out, cfg.hash()?)
}

pub fn probe_1d(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let out = output(cfg, out)?;
    let profile = backend::layered_profile(cfg)
        .ok_or_else(|| CliError::Unsupported("probe-1d needs a free or layered medium".into()))?;
    let (band, grid) = backend::spaces(cfg)?;
    let table = fluxprobe::solver_1d::ReflectionTable::build(&profile, band, grid)?;
    let mut w = out.csv("reflection.csv")?;
    w.flush()?;
    table.write_csv(w.into_inner().map_err(|e| e.into_error())?)?;
    let report = distinguishability_report(&table, DEFAULT_GRAZING_EXCLUSION)?;
    out.json(
        "probe_1d.json",
        json!({
            "command": "probe-1d",
            "delta": report.with_grazing.delta,
            "report": report,
        }),
    )
}

pub fn assemble_3d(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let out = output(cfg, out)?;
    let (band, grid) = backend::spaces(cfg)?;
    let (sb, cache) = backend::voxel_band(cfg, band, grid, &out)?;
    let norms = operator_norms(&sb);
    let hs = sb.hs_norms();
    let mut w = out.csv("assemble.csv")?;
    w.write_record(["k", "hs_norm", "operator_norm", "reciprocity_error"])?;
    let mut worst_recip = 0.0f64;
    for m in 0..sb.band().len() {
        let r = sb.reciprocity_error(m);
        worst_recip = worst_recip.max(r);
        w.serialize((sb.band().k(m), hs[m], norms[m], r))?;
    }
    w.flush()?;
    out.json(
        "assemble_3d.json",
        json!({
            "command": "assemble-3d",
            "cache": cache,
            "max_residual": sb.max_residual(),
            "total_iterations": sb.total_iterations(),
            "max_operator_norm": norms.iter().cloned().fold(0.0, f64::max),
            "max_reciprocity_error": worst_recip,
        }),
    )
}

pub fn spectrum(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let out = output(cfg, out)?;
    let (b, cache) = backend::build(cfg, &out)?;
    let curve = eigen_curve(b.operators());
    let n_modes = curve.sorted.iter().map(Vec::len).max().unwrap_or(0);
    let mut w = out.csv("spectrum.csv")?;
    let mut header = vec!["k".to_string()];
    header.extend((0..n_modes).map(|l| format!("lambda_{l}")));
    w.write_record(&header)?;
    for (k, vals) in curve.k.iter().zip(&curve.sorted) {
        let mut row = vec![k.to_string()];
        row.extend((0..n_modes).map(|l| vals.get(l).copied().unwrap_or(0.0).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    out.json(
        "spectrum.json",
        json!({
            "command": "spectrum",
            "cache": cache,
            "max": curve.max,
            "maximizers": curve.maximizers,
            "degenerate": curve.degenerate,
        }),
    )
}

fn options(cfg: &ExperimentConfig) -> IterationOptions {
    let a = &cfg.algorithm;
    IterationOptions {
        n_max: a.n_max,
        tol: a.tol,
        schedule: a.schedule,
        filter_evanescent: a.filter_evanescent,
        window_steps: a.window_steps,
        keep_iterates: true,
    }
}

fn run(cfg: &ExperimentConfig, b: &Backend) -> Result<IterationTrace, CliError> {
    let ops = b.operators();
    let (band, grid) = (ops.band().clone(), ops.grid().clone());
    let v0 = default_initial_field(band.clone(), grid.clone(), cfg.v0_seed());
    let psi = match cfg.algorithm.test_function {
        TestFunctionSpec::LowestMode => TestFunction::lowest_mode(band, grid),
        TestFunctionSpec::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
            TestFunction::new(AngularField::random(band, grid, Orientation::Down, true, &mut rng))?
        }
    };
    Ok(run_iteration(b.scatterer(), &ZeroBackend, &v0, &psi, &options(cfg))?)
}

pub fn iterate(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let out = output(cfg, out)?;
    let (b, cache) = backend::build(cfg, &out)?;
    let trace = run(cfg, &b)?;
    let mut w = out.csv("trace.csv")?;
    w.write_record(["step", "rayleigh", "pairing", "k_star", "concentration", "evanescent_share"])?;
    for n in 0..trace.rayleigh.len() {
        let pairing = if n == 0 { String::new() } else { trace.pairings[n - 1].to_string() };
        let c = trace.concentration[n];
        w.write_record([
            n.to_string(),
            trace.rayleigh[n].to_string(),
            pairing,
            c.k_star.to_string(),
            c.fraction.to_string(),
            trace.evanescent_share[n].to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = out.csv("spectra.csv")?;
    w.write_record(["step", "k", "flux"])?;
    for (n, u) in trace.iterates.iter().enumerate() {
        for (m, f) in column_flux(u).into_iter().enumerate() {
            w.serialize((n, u.band().k(m), f))?;
        }
    }
    w.flush()?;
    let last = trace.concentration.last().copied();
    out.json(
        "iterate.json",
        json!({
            "command": "iterate",
            "cache": cache,
            "delta": distinguishability_estimate(&trace),
            "steps": trace.steps(),
            "converged": trace.converged,
            "vanished": trace.vanished,
            "k_star": last.map(|c| c.k_star),
            "concentration": last.map(|c| c.fraction),
        }),
    )
}

/// `I(n, p)` for every `n` against the large-`n` asymptote.
pub fn lemma1(ns: &[f64], p: f64, b: f64, h: f64, out: &Path) -> Result<Value, CliError> {
    let params = json!({ "n": ns, "p": p, "b": b, "h": h });
    let hash = hex::encode(Sha256::digest(params.to_string().as_bytes()));
    let out = Output::new(out, hash)?;
    let mut w = out.csv("lemma1.csv")?;
    w.write_record(["n", "integral", "asymptote", "ratio"])?;
    let mut rows = Vec::new();
    for &n in ns {
        let i = lemma1_integral(n, p, b, h)?;
        let a = lemma1_asymptote(n, p, b);
        w.serialize((n, i, a, i / a))?;
        rows.push(json!({ "n": n, "integral": i, "asymptote": a }));
    }
    w.flush()?;
    out.json("lemma1.json", json!({ "command": "lemma1", "p": p, "b": b, "h": h, "rows": rows }))
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

/// Runs the invariant suite against the configured medium.
pub fn validate(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let out = output(cfg, out)?;
    let (b, _) = backend::build(cfg, &out)?;
    let ops = b.operators();
    let s = b.scatterer();
    let (band, grid) = (ops.band().clone(), ops.grid().clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    let mut ratio = 0.0f64;
    let mut adjoint = 0.0f64;
    let mut reversal = 0.0f64;
    for _ in 0..20 {
        let u = AngularField::random(band.clone(), grid.clone(), Orientation::Down, true, &mut rng);
        let v = AngularField::random(band.clone(), grid.clone(), Orientation::Up, true, &mut rng);
        let su = project_propagating(&s.scatter(&u)?);
        ratio = ratio.max(flux(&su).value / flux(&u).value);
        let lhs = flux_inner(&su, &v)?;
        let back = project_propagating(&s.scatter(&project_propagating(&time_reverse(&v)))?);
        let rhs = flux_inner(&u, &time_reverse(&back))?;
        let scale = (flux(&su).value * flux(&v).value).sqrt();
        if scale > 0.0 {
            adjoint = adjoint.max((lhs - rhs).abs() / scale);
        } else {
            adjoint = adjoint.max((lhs - rhs).abs());
        }
        let tt = time_reverse(&time_reverse(&u));
        let twice = w_norm_sq(&tt.sub(&u)?).sqrt() / w_norm_sq(&u).sqrt();
        let iso = (flux(&time_reverse(&u)).value - flux(&u).value).abs() / flux(&u).value;
        reversal = reversal.max(twice).max(iso);
    }
    checks.push(check("energy", ratio <= 1.0 + 1e-8, format!("max W(Su)/W(u) = {ratio:.6}")));
    let norms = operator_norms(ops);
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    checks.push(check("operator-norm", max_norm <= 1.0 + 1e-6, format!("max weighted norm {max_norm:.6}")));
    checks.push(check("adjoint", adjoint < 1e-6, format!("max relative mismatch {adjoint:.2e}")));
    checks.push(check(
        "time-reversal",
        reversal < 1e-12,
        format!("involution and isometry error {reversal:.2e}"),
    ));

    let annulus_grid = if grid.len() > grid.n_propagating() {
        grid.clone()
    } else {
        let g = &cfg.grid;
        let spec = AnnulusSpec { n_radial: 2, eta_max: 1.5 };
        Arc::new(DirectionGrid::polar_with_annulus(g.n_radial, g.n_angular, g.margin, Some(spec))?)
    };
    let np = annulus_grid.n_propagating();
    let field = AngularField::random(band.clone(), annulus_grid.clone(), Orientation::Down, false, &mut rng);
    let mut amps = field.amplitudes().clone();
    amps.rows_mut(0, np).fill(fluxprobe::Complex64::new(0.0, 0.0));
    let annulus = AngularField::from_amplitudes(band.clone(), annulus_grid, Orientation::Down, amps)?;
    let w = flux(&annulus).value;
    checks.push(check("annulus-flux", w == 0.0, format!("W of an annulus-only field = {w}")));

    if let Backend::Voxel(sb) = &b {
        let worst = (0..sb.band().len()).map(|m| sb.reciprocity_error(m)).fold(0.0, f64::max);
        checks.push(check("reciprocity", worst < 1e-6, format!("max error {worst:.2e}")));
    }

    let trace = run(cfg, &b)?;
    let drop = trace.rayleigh.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    checks.push(check("rayleigh-monotone", drop <= 1e-9, format!("largest decrease {drop:.2e}")));
    let mut scale = 0.0f64;
    for u in trace.iterates.iter().step_by(5) {
        let r = rayleigh_quotient(s, &ZeroBackend, u)?;
        for c in [1e-3, 7.0] {
            scale = scale.max((rayleigh_quotient(s, &ZeroBackend, &u.scaled(c))? - r).abs());
        }
    }
    checks.push(check("rayleigh-scale", scale <= 1e-9, format!("largest change {scale:.2e}")));

    let delta = distinguishability_estimate(&trace);
    let curve = eigen_curve(ops);
    let agree = |a: f64, b: f64| (a - b).abs() <= 0.01 * a.abs().max(b.abs()) || a.abs().max(b.abs()) < 1e-14;
    checks.push(check(
        "iteration-vs-spectrum",
        agree(delta, curve.max),
        format!("iteration {delta:.6}, spectral maximum {:.6}", curve.max),
    ));
    if let Backend::Layered(table) = &b {
        let formula = distinguishability_1d(table, None)?.delta;
        checks.push(check(
            "iteration-vs-formula",
            agree(delta, formula),
            format!("iteration {delta:.6}, max |R|^2 {formula:.6}"),
        ));
    }

    let all = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let list: Vec<Value> = checks
        .iter()
        .map(|c| json!({ "name": c.name, "pass": c.pass, "detail": c.detail }))
        .collect();
    let failed = checks.iter().filter(|c| !c.pass).count();
    let report = out.json(
        "validate.json",
        json!({ "command": "validate", "delta": delta, "passed": all, "checks": list }),
    )?;
    if failed > 0 {
        return Err(CliError::ChecksFailed { failed, total: checks.len() });
    }
    Ok(report)
}
