//! Acceptance criteria 1–10, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the table is always printed. The
//! process fails unless the set of failing criteria is exactly
//! `EXPECTED_RED`. Those criteria compare against closed forms that carry
//! the opposite rotation sense to the transport equation they come from.
//! They are evaluated as stated and reported as FAIL, never adjusted.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Instant;

use fsl_core::connection::{
    build_connection, compatibility_residual, connection_at, landsberg_berwald_check, semi_symmetric_coefficients,
    solve_constants, wagner_test, ConstantConnection, SemiSymmetric, Verdict, CONSTANT_TOL,
};
use fsl_core::curvature::{connection_curvature, divergence_representation_check, square_grid, tensor4_norm, FD_STEP};
use fsl_core::engine::Engine;
use fsl_core::error::{FslError, Result};
use fsl_core::fields::AveragedGamma;
use fsl_core::indicatrix::{averaged_metric, seed_point, source_integrals, standard_trace, trace_indicatrix, TraceOptions};
use fsl_core::jets::{identity_residuals, IdentityReport, IdentityTolerances};
use fsl_core::linalg::{norm2, Tensor3};
use fsl_core::metric::preset;
use fsl_core::plane::{axis_path, holonomy_check, potential, transport, transport_along, Curve, OneFormField, Segment};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

/// Criteria expected to fail; see the module comment.
const EXPECTED_RED: [u32; 3] = [1, 2, 10];

const TRANSPORT_TOL: f64 = 1e-6;
const TRANSPORT_STEP: f64 = 1e-3;
const CLOSED_FORM_TOL: f64 = 1e-3;
const COMPATIBILITY_TOL: f64 = 1e-4;
const INVARIANCE_TOL: f64 = 1e-4;
const WAGNER_TOL: f64 = 1e-3;
const FLATNESS_TOL: f64 = 1e-5;
const DIVERGENCE_TOL: f64 = 1e-5;
const HOLONOMY_TOL: f64 = 1e-6;
const BERWALD_F_TOL: f64 = 1e-6;
const AVERAGE_TOL: f64 = 1e-7;
const FIGURE_TOL: f64 = 1e-6;
const IDENTITY_SAMPLES: usize = 100;
const PRESETS: [&str; 4] = ["euclidean", "randers:0.3,0", "randers-shear:0.3", "plane:trifocal-rot"];
const TRIFOCAL: &str = "plane:trifocal-rot";

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Result<Check> {
    Ok(Check { pass, detail })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm2([a[0] - b[0], a[1] - b[1]])
}

fn max_diff(a: &Tensor3, b: &Tensor3) -> f64 {
    a.iter()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn opts() -> TraceOptions {
    TraceOptions::default()
}

fn rotational() -> Result<fsl_core::plane::Potential> {
    potential(&OneFormField::rotational(), [0.0, 0.0])
}

/// Radial line `c(t) = (t, t)`, `X0 = (1, 0)`, against `(cos t², −sin t²)`.
fn c01() -> Result<Check> {
    let ts: Vec<f64> = (0..=300).map(|k| k as f64 * 0.01).collect();
    let out = transport(&rotational()?, &Curve::radial(), [1.0, 0.0], &ts, TRANSPORT_STEP)?;
    let printed = out
        .iter()
        .map(|s| dist(s.x, [(s.t * s.t).cos(), -(s.t * s.t).sin()]))
        .fold(0.0, f64::max);
    let mirrored = out
        .iter()
        .map(|s| dist(s.x, [(s.t * s.t).cos(), (s.t * s.t).sin()]))
        .fold(0.0, f64::max);
    check(
        printed < TRANSPORT_TOL,
        format!("max |X − (cos t², −sin t²)| = {printed:.3e} (tol {TRANSPORT_TOL:.0e}); vs (cos t², +sin t²): {mirrored:.3e}"),
    )
}

/// Circle `c(t) = (cos t, sin t + 1)` over a full period, with `X0 = (1, 0)`
/// at the origin carried to `c(0)`.
fn c02() -> Result<Check> {
    let f = rotational()?;
    let x0 = transport_along(&f, &axis_path([0.0, 0.0], [1.0, 1.0]), [1.0, 0.0], TRANSPORT_STEP)?;
    let ts: Vec<f64> = (0..=360).map(|k| k as f64 * TAU / 360.0).collect();
    let out = transport(&f, &Curve::circle([0.0, 1.0], 1.0), x0, &ts, TRANSPORT_STEP)?;
    let form = |t: f64, s: f64| {
        let a = 1.0 + t.sin();
        [a.cos(), s * a.sin()]
    };
    let printed = out.iter().map(|s| dist(s.x, form(s.t, -1.0))).fold(0.0, f64::max);
    let mirrored = out.iter().map(|s| dist(s.x, form(s.t, 1.0))).fold(0.0, f64::max);
    check(
        printed < TRANSPORT_TOL,
        format!(
            "max |X − (cos(1+sin t), −sin(1+sin t))| = {printed:.3e} (tol {TRANSPORT_TOL:.0e}); vs the +sin form: {mirrored:.3e}"
        ),
    )
}

/// Identity suite with the dual engine on seeded random samples.
fn c03() -> Result<Check> {
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    let mut failing = Vec::new();
    let mut worst_lands = 0.0f64;
    for spec in PRESETS {
        let m = preset(spec)?;
        let tol = IdentityTolerances::for_engine(&Engine::Dual);
        let mut worst = IdentityReport::default();
        for _ in 0..IDENTITY_SAMPLES {
            let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let a: f64 = rng.random_range(0.0..TAU);
            let r: f64 = rng.random_range(0.2..3.0);
            worst = worst.max_with(&identity_residuals(m.as_ref(), p, [r * a.cos(), r * a.sin()], &Engine::Dual)?);
        }
        worst_lands = worst_lands.max(worst.landsberg_identity);
        for f in worst.failures(&tol) {
            failing.push(format!("{spec}:{f}"));
        }
    }
    check(
        failing.is_empty(),
        format!(
            "{} samples × {} presets; failures {failing:?}; worst Landsberg-identity residual {worst_lands:.2e}",
            IDENTITY_SAMPLES,
            PRESETS.len()
        ),
    )
}

/// Constructed Γ against the closed form on a 3 × 3 grid, and the
/// compatibility residual on every trace sample.
fn c04() -> Result<Check> {
    let m = preset(TRIFOCAL)?;
    let rho = OneFormField::rotational();
    let grid = square_grid([0.0, 0.0], 1.0, 3);
    let mut dev = 0.0f64;
    let mut compat = 0.0f64;
    for p in &grid {
        let trace = standard_trace(m.as_ref(), *p, &Engine::Dual, &opts())?;
        let src = source_integrals(&trace);
        let solve = solve_constants(&trace, &src, CONSTANT_TOL)?;
        let built = build_connection(&trace, &solve, 0, CONSTANT_TOL)?;
        dev = dev.max(max_diff(&built.gamma, &semi_symmetric_coefficients(rho.eval(*p))));
        let samples: Vec<_> = trace.points().into_iter().map(|v| (*p, v)).collect();
        compat = compat.max(compatibility_residual(m.as_ref(), &ConstantConnection(built.gamma), &samples, &Engine::Dual)?);
    }
    check(
        dev < CLOSED_FORM_TOL && compat < COMPATIBILITY_TOL,
        format!(
            "9 points: max |Γ − closed form| = {dev:.2e} (tol {CLOSED_FORM_TOL:.0e}); compatibility {compat:.2e} (tol {COMPATIBILITY_TOL:.0e}) on {} samples",
            9 * opts().samples
        ),
    )
}

/// Γ under a change of indicatrix seed and of reference fiber.
fn c05() -> Result<Check> {
    let m = preset(TRIFOCAL)?;
    let mut worst = 0.0f64;
    for p in [[0.5, 0.5], [-0.7, 0.2], [0.1, -0.9]] {
        let a = standard_trace(m.as_ref(), p, &Engine::Dual, &opts())?;
        let sa = solve_constants(&a, &source_integrals(&a), CONSTANT_TOL)?;
        let g0 = build_connection(&a, &sa, 0, CONSTANT_TOL)?.gamma;
        let n = a.len();
        for idx in [n / 3, 5 * n / 7] {
            worst = worst.max(max_diff(&g0, &build_connection(&a, &sa, idx, CONSTANT_TOL)?.gamma));
        }
        for dir in [[-0.3, 1.0], [-1.0, -0.4]] {
            let seed = seed_point(m.as_ref(), p, dir)?;
            let b = trace_indicatrix(m.as_ref(), p, seed, &Engine::Dual, &opts())?;
            let sb = solve_constants(&b, &source_integrals(&b), CONSTANT_TOL)?;
            worst = worst.max(max_diff(&g0, &build_connection(&b, &sb, 0, CONSTANT_TOL)?.gamma));
        }
    }
    check(
        worst < INVARIANCE_TOL,
        format!("3 points × (2 seeds + 2 reference fibers): max |ΔΓ| = {worst:.2e} (tol {INVARIANCE_TOL:.0e})"),
    )
}

/// Wagner on the trifocal plane and on the shear Randers metric, the latter
/// cross-checked against the integration constants.
fn c06() -> Result<Check> {
    let tri = preset(TRIFOCAL)?;
    let pts = [[0.5, 0.5], [-0.5, 0.3], [0.2, -0.6], [0.8, 0.1], [-0.3, -0.4]];
    let w = wagner_test(tri.as_ref(), &pts, &Engine::Dual, &opts())?;
    let tri_ok = w.scatter_residual < WAGNER_TOL && w.pde_residual < WAGNER_TOL;

    let shear = preset("randers-shear:0.3")?;
    // distinct |u2|: fibers with equal |u2| are linearly isometric
    let spts = [[0.5, 0.5], [0.5, 0.2], [-0.5, -0.8]];
    let ws = wagner_test(shear.as_ref(), &spts, &Engine::Dual, &opts())?;
    let shear_fails = ws.scatter_residual > WAGNER_TOL && ws.pde_residual > WAGNER_TOL;
    let mut inconsistent = 0;
    for p in spts {
        let t = standard_trace(shear.as_ref(), p, &Engine::Dual, &opts())?;
        if matches!(
            solve_constants(&t, &source_integrals(&t), CONSTANT_TOL),
            Err(FslError::InconsistentConstants { .. })
        ) {
            inconsistent += 1;
        }
    }
    check(
        tri_ok && shear_fails && inconsistent == spts.len(),
        format!(
            "trifocal scatter {:.2e}, pde {:.2e}; shear Randers scatter {:.2e}, pde {:.2e}, InconsistentConstants at {inconsistent}/{} points (tol {WAGNER_TOL:.0e})",
            w.scatter_residual,
            w.pde_residual,
            ws.scatter_residual,
            ws.pde_residual,
            spts.len()
        ),
    )
}

/// Flatness and `κ* + div* ρ♯ = 0` on a 9 × 9 grid, one constructed-stencil
/// curvature, and holonomy around three loops.
fn c07() -> Result<Check> {
    let m = preset(TRIFOCAL)?;
    let gamma = AveragedGamma::new(m.clone(), Engine::Dual);
    let conn = SemiSymmetric {
        rho: OneFormField::rotational(),
    };
    let grid = square_grid([0.0, 0.0], 1.0, 9);
    let reports = divergence_representation_check(&gamma, &conn, &grid, FD_STEP)?;
    let r_max = reports.iter().map(|r| r.conn_curvature_norm).fold(0.0, f64::max);
    let sum_max = reports.iter().map(|r| r.sum_residual).fold(0.0, f64::max);

    let constructed = |p: [f64; 2]| -> Result<Tensor3> {
        Ok(connection_at(m.as_ref(), p, &Engine::Dual, &opts(), CONSTANT_TOL)?.gamma)
    };
    let r_built = tensor4_norm(&connection_curvature(&constructed, [0.5, -0.25], FD_STEP)?);

    let f = rotational()?;
    let c = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    let square: Vec<Segment> = (0..4).map(|k| Segment::line(c[k], c[(k + 1) % 4])).collect();
    let loop_around = |center, radius| {
        vec![Segment {
            curve: Curve::circle(center, radius),
            t0: 0.0,
            t1: TAU,
        }]
    };
    let hol = [
        holonomy_check(&f, &loop_around([0.0, 0.0], 1.0), [0.6, -0.2], TRANSPORT_STEP)?,
        holonomy_check(&f, &square, [1.0, 0.0], TRANSPORT_STEP)?,
        holonomy_check(&f, &loop_around([0.5, 1.0], 0.7), [0.0, 1.0], TRANSPORT_STEP)?,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    check(
        r_max < FLATNESS_TOL && r_built < FLATNESS_TOL && sum_max < DIVERGENCE_TOL && hol < HOLONOMY_TOL,
        format!(
            "81 points: max |R| = {r_max:.2e}, max |κ* + div ρ♯| = {sum_max:.2e}; constructed-stencil |R| = {r_built:.2e}; holonomy {hol:.2e} (tols {FLATNESS_TOL:.0e}/{DIVERGENCE_TOL:.0e}/{HOLONOMY_TOL:.0e})"
        ),
    )
}

/// Landsberg surfaces among generalized Berwald ones are Berwald.
fn c08() -> Result<Check> {
    let mink = preset("randers:0.3,0")?;
    let a = landsberg_berwald_check(mink.as_ref(), [0.2, 0.1], &Engine::Dual, &opts(), BERWALD_F_TOL)?;
    let tri = preset(TRIFOCAL)?;
    let b = landsberg_berwald_check(tri.as_ref(), [0.5, 0.5], &Engine::Dual, &opts(), BERWALD_F_TOL)?;
    check(
        a.verdict == Verdict::BerwaldConfirmed && !a.riemannian && a.max_f < BERWALD_F_TOL && b.verdict == Verdict::NotLandsberg,
        format!(
            "randers:0.3,0 → {:?} (max |f| {:.2e}, tol {BERWALD_F_TOL:.0e}); trifocal → {:?} (max |α| {:.2e})",
            a.verdict, a.max_f, b.verdict, b.max_alpha
        ),
    )
}

/// Euclidean average `2π·I` and 256 vs 512 self-convergence.
fn c09() -> Result<Check> {
    let eu = preset("euclidean")?;
    let t = standard_trace(eu.as_ref(), [0.3, -0.2], &Engine::Dual, &opts())?;
    let g = averaged_metric(&t)?.gamma;
    let eu_err = (g[0][0] - TAU).abs().max((g[1][1] - TAU).abs()).max(g[0][1].abs());
    let mut conv = 0.0f64;
    for spec in PRESETS {
        let m = preset(spec)?;
        let at = |n| -> Result<[[f64; 2]; 2]> {
            let o = TraceOptions { samples: n, ..opts() };
            Ok(averaged_metric(&standard_trace(m.as_ref(), [0.3, -0.2], &Engine::Dual, &o)?)?.gamma)
        };
        let (a, b) = (at(256)?, at(512)?);
        let scale = a.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
        let d = a.iter().flatten().zip(b.iter().flatten()).fold(0.0f64, |s, (x, y)| s.max((x - y).abs()));
        conv = conv.max(d / scale);
    }
    check(
        eu_err < AVERAGE_TOL && conv < AVERAGE_TOL,
        format!("|γ − 2π I| = {eu_err:.2e}; max relative |γ256 − γ512| over presets = {conv:.2e} (tol {AVERAGE_TOL:.0e})"),
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

/// `fsl figures` twice: byte stability, family sizes and focal points
/// against the printed closed forms.
fn c10() -> Result<Check> {
    let tmp = tempfile::tempdir()?;
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_fsl")).arg("figures").arg("--out").arg(&out).stdout(Stdio::null()).status()?;
        if !status.success() {
            return check(false, format!("fsl figures exited with {status}"));
        }
        let mut all = files(&out.join("figures"));
        all.extend(files(&out).into_iter().filter(|(n, _)| n.ends_with(".json")));
        runs.push((out, all));
    }
    let stable = runs[0].1 == runs[1].1;
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(runs[0].0.join("figures.json"))?)
        .map_err(|e| FslError::Io(e.to_string()))?;
    let svgs = runs[0].1.iter().filter(|(n, _)| n.ends_with(".svg")).count();
    let radial = runs[0].1.iter().filter(|(n, _)| n.starts_with("radial_")).count();
    let ode = summary["max_ode_error"].as_f64().unwrap_or(f64::INFINITY);
    let printed = summary["max_printed_form_error"].as_f64().unwrap_or(f64::INFINITY);
    check(
        stable && svgs >= 9 && radial >= 3 && radial < svgs && ode < FIGURE_TOL && printed < FIGURE_TOL,
        format!(
            "{svgs} SVGs ({radial} radial), byte-stable: {stable}; transport vs potential {ode:.2e}; focal points vs printed forms {printed:.3e} (tol {FIGURE_TOL:.0e})"
        ),
    )
}

fn main() {
    // `cargo test -- --list` and filters: nothing to enumerate
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(u32, &str, fn() -> Result<Check>); 10] = [
        (1, "closed-form radial transport", c01),
        (2, "circle-path transport", c02),
        (3, "identity suite", c03),
        (4, "connection recovery", c04),
        (5, "uniqueness and seed independence", c05),
        (6, "Wagner verdicts", c06),
        (7, "flatness and divergence representation", c07),
        (8, "Landsberg implies Berwald", c08),
        (9, "averaged-metric oracle", c09),
        (10, "figure regeneration", c10),
    ];
    let mut red = BTreeSet::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(c) => (c.pass, c.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            red.insert(id);
        }
        println!(
            "criterion {id:2} {} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    let expected: BTreeSet<u32> = EXPECTED_RED.into_iter().collect();
    println!(
        "acceptance: {}/10 PASS; failing {red:?}; expected failing {expected:?}",
        10 - red.len()
    );
    if red != expected {
        println!("acceptance: failing set differs from the expected one");
        std::process::exit(1);
    }
}
