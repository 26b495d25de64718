use std::path::Path;

use fsl_core::connection::{
    analyze_constants, build_connection_report, compatibility_residual, coefficient_norm, levi_civita_compare,
    semi_symmetric_coefficients, torsion_decompose, wagner_test, ConstantConnection, GridConnection,
    LinearConnection, SemiSymmetric, ZeroConnection, CONSTANT_TOL,
};
use fsl_core::curvature::{closedness, divergence_representation_check, reports_csv, TorsionForm, FD_STEP};
use fsl_core::error::FslError;
use fsl_core::fields::AveragedGamma;
use fsl_core::figures::render_figures;
use fsl_core::indicatrix::{averaged_metric, conic_fit, source_integrals, standard_trace};
use fsl_core::jets::{identity_residuals, IdentityReport, IdentityTolerances};
use fsl_core::linalg::Tensor3;
use fsl_core::metric::validate_metric;
use fsl_core::par::try_par_map;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Resolved;

pub const F_CONSERVATION_TOL: f64 = 1e-7;
pub const COMPATIBILITY_TOL: f64 = 1e-4;
pub const METRICITY_TOL: f64 = 1e-4;
pub const TORSION_TOL: f64 = 1e-8;
pub const WAGNER_TOL: f64 = 1e-3;
pub const CURVATURE_TOL: f64 = 1e-5;
pub const FIGURE_TOL: f64 = 1e-6;

/// A finished command: its JSON summary and whether every invariant held.
pub struct Outcome {
    pub summary: Value,
    pub ok: bool,
}

pub fn write_json(path: &Path, v: &Value) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    std::fs::write(path, s)
}

fn header(r: &Resolved, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("metric".into(), json!(r.metric.metric.name()));
    m.insert("engine".into(), json!(r.engine.name()));
    m.insert("tol_scale".into(), json!(r.tol_scale));
    m.insert("points".into(), json!(r.points));
    m
}

fn finish(mut m: serde_json::Map<String, Value>, verdict: &str, failures: Vec<String>, ok: bool) -> Outcome {
    m.insert("verdict".into(), json!(verdict));
    m.insert("failures".into(), json!(failures));
    Outcome {
        summary: Value::Object(m),
        ok,
    }
}

/// Eight fiber directions of mixed length at every grid point.
fn fiber_samples(points: &[[f64; 2]]) -> Vec<([f64; 2], [f64; 2])> {
    points
        .iter()
        .flat_map(|&p| {
            (0..8).map(move |k| {
                let a = 0.1 + k as f64 * std::f64::consts::FRAC_PI_4;
                let r = 0.5 + 0.25 * (k % 3) as f64;
                (p, [r * a.cos(), r * a.sin()])
            })
        })
        .collect()
}

#[derive(Serialize)]
struct TraceSummary {
    p: [f64; 2],
    period: f64,
    lam_range: f64,
    gamma: [[f64; 2]; 2],
    f_conservation: f64,
    closure_error: f64,
    conic_residual: Option<f64>,
    csv: String,
}

pub fn analyze(r: &Resolved, out: &Path) -> Result<Outcome, FslError> {
    let m = r.metric.metric.as_ref();
    let mut failures = Vec::new();
    let samples = fiber_samples(&r.points);
    let validation = validate_metric(m, &samples)?;
    if !validation.passes {
        failures.push("validate_metric".to_string());
    }
    let tol = IdentityTolerances::for_engine(&r.engine).scaled(r.tol_scale);
    let reports = try_par_map(&samples, |(p, v)| identity_residuals(m, *p, *v, &r.engine))?;
    let worst = reports.iter().fold(IdentityReport::default(), |a, b| a.max_with(b));
    failures.extend(worst.failures(&tol).iter().map(|f| format!("identity:{f}")));

    let traces = try_par_map(&r.points, |p| standard_trace(m, *p, &r.engine, &r.config.trace))?;
    std::fs::create_dir_all(out.join("traces"))?;
    let mut summaries = Vec::new();
    for (k, t) in traces.iter().enumerate() {
        let name = format!("traces/trace_{k:02}.csv");
        std::fs::write(out.join(&name), t.to_csv())?;
        let riemannian = t.lam_range() < fsl_core::connection::RIEMANNIAN_THRESHOLD;
        if t.f_conservation() > F_CONSERVATION_TOL * r.tol_scale {
            failures.push(format!("f_conservation at {:?}", t.base_point));
        }
        if t.mu.iter().any(|w| !(*w > 0.0)) {
            failures.push(format!("mu_positivity at {:?}", t.base_point));
        }
        summaries.push(TraceSummary {
            p: t.base_point,
            period: t.period,
            lam_range: t.lam_range(),
            gamma: averaged_metric(t)?.gamma,
            f_conservation: t.f_conservation(),
            closure_error: t.closure_error,
            conic_residual: riemannian.then(|| conic_fit(t).1),
            csv: name,
        });
    }
    let riemannian = traces.iter().all(|t| t.lam_range() < fsl_core::connection::RIEMANNIAN_THRESHOLD);
    let mut h = header(r, "analyze");
    h.insert("validation".into(), json!(validation));
    h.insert("identities".into(), json!(worst));
    h.insert("tolerances".into(), json!(tol));
    h.insert("riemannian".into(), json!(riemannian));
    h.insert("max_lam_range".into(), json!(traces.iter().map(|t| t.lam_range()).fold(0.0, f64::max)));
    h.insert("traces".into(), json!(summaries));
    let ok = failures.is_empty();
    Ok(finish(h, if ok { "pass" } else { "invariant-failure" }, failures, ok))
}

#[derive(Serialize)]
struct PointConnection {
    p: [f64; 2],
    outcome: &'static str,
    lam_range: f64,
    k: [f64; 2],
    constants_spread: f64,
    fiber_spread: Option<f64>,
    gamma: Option<Tensor3>,
    torsion_rho: Option<[f64; 2]>,
    torsion_residual: Option<f64>,
    compatibility_residual: Option<f64>,
    metricity_residual: Option<f64>,
    levi_civita_identity_residual: Option<f64>,
    closed_form_deviation: Option<f64>,
}

fn max_diff(a: &Tensor3, b: &Tensor3) -> f64 {
    a.iter()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn connection(r: &Resolved, out: &Path) -> Result<Outcome, FslError> {
    let m = r.metric.metric.as_ref();
    let tol = CONSTANT_TOL * r.tol_scale;
    let gamma_field = AveragedGamma::new(r.metric.metric.clone(), r.engine);
    let points = try_par_map(&r.points, |&p| -> Result<PointConnection, FslError> {
        let trace = standard_trace(m, p, &r.engine, &r.config.trace)?;
        let src = source_integrals(&trace);
        let solve = analyze_constants(&trace, &src);
        let mut pc = PointConnection {
            p,
            outcome: "RiemannianCase",
            lam_range: solve.lam_range,
            k: solve.k,
            constants_spread: solve.spread,
            fiber_spread: None,
            gamma: None,
            torsion_rho: None,
            torsion_residual: None,
            compatibility_residual: None,
            metricity_residual: None,
            levi_civita_identity_residual: None,
            closed_form_deviation: None,
        };
        if solve.riemannian {
            return Ok(pc);
        }
        if !(solve.spread <= tol) {
            pc.outcome = "InconsistentConstants";
            return Ok(pc);
        }
        let built = build_connection_report(&trace, &solve, 0);
        pc.fiber_spread = Some(built.spread);
        if !(built.spread <= tol) {
            pc.outcome = "FiberDependence";
            return Ok(pc);
        }
        pc.outcome = "Recovered";
        let g = built.gamma;
        let td = torsion_decompose(&g);
        let conn = ConstantConnection(g);
        let samples: Vec<_> = trace.points().into_iter().map(|v| (p, v)).collect();
        pc.compatibility_residual = Some(compatibility_residual(m, &conn, &samples, &r.engine)?);
        // metricity is judged below with the scaled tolerance
        let c = levi_civita_compare(&conn, &gamma_field, p, FD_STEP, f64::INFINITY)?;
        pc.metricity_residual = Some(c.metricity_residual);
        pc.levi_civita_identity_residual = Some(c.identity_residual);
        pc.closed_form_deviation = r.metric.rho.as_ref().map(|rho| max_diff(&g, &semi_symmetric_coefficients(rho.eval(p))));
        pc.gamma = Some(g);
        pc.torsion_rho = Some(td.rho);
        pc.torsion_residual = Some(td.residual);
        Ok(pc)
    })?;

    let mut failures = Vec::new();
    for pc in points.iter().filter(|pc| pc.outcome == "Recovered") {
        let checks = [
            ("compatibility", pc.compatibility_residual, COMPATIBILITY_TOL),
            ("metricity", pc.metricity_residual, METRICITY_TOL),
            ("torsion", pc.torsion_residual, TORSION_TOL),
        ];
        for (name, v, t) in checks {
            if v.is_some_and(|v| !(v <= t * r.tol_scale)) {
                failures.push(format!("{name} at {:?}", pc.p));
            }
        }
    }
    let has = |o: &str| points.iter().any(|pc| pc.outcome == o);
    let verdict = if points.iter().all(|pc| pc.outcome == "RiemannianCase") {
        "RiemannianCase"
    } else if has("InconsistentConstants") {
        "InconsistentConstants"
    } else if has("FiberDependence") {
        "FiberDependence"
    } else {
        "Recovered"
    };
    let mut h = header(r, "connection");
    if verdict == "Recovered" && points.iter().all(|pc| pc.gamma.is_some()) {
        if let Some((c, hw, n)) = r.square.filter(|s| s.2 >= 2) {
            let step = 2.0 * hw / (n - 1) as f64;
            let grid = GridConnection::from_values(
                [c[0] - hw, c[1] - hw],
                [step, step],
                [n, n],
                points.iter().map(|pc| pc.gamma.expect("recovered")).collect(),
            )?;
            let mut s = grid.to_json();
            s.push('\n');
            std::fs::write(out.join("connection_grid.json"), s)?;
            h.insert("grid_json".into(), json!("connection_grid.json"));
        }
    }
    h.insert("constants_tol".into(), json!(tol));
    h.insert(
        "max_coefficient".into(),
        json!(points.iter().filter_map(|pc| pc.gamma.as_ref()).map(coefficient_norm).fold(0.0, f64::max)),
    );
    h.insert("per_point".into(), json!(points));
    let ok = failures.is_empty();
    Ok(finish(h, verdict, failures, ok))
}

pub fn wagner(r: &Resolved, out: &Path) -> Result<Outcome, FslError> {
    let tol = WAGNER_TOL * r.tol_scale;
    let mut h = header(r, "wagner");
    h.insert("tolerance".into(), json!(tol));
    match wagner_test(r.metric.metric.as_ref(), &r.points, &r.engine, &r.config.trace) {
        Err(FslError::RiemannianCase) => Ok(finish(h, "RiemannianCase", vec![], true)),
        Err(e) => Err(e),
        Ok(w) => {
            std::fs::write(out.join("wagner_scatter.csv"), w.scatter_csv())?;
            let verdict = if w.consistent(tol) {
                "GeneralizedBerwaldConsistent"
            } else {
                "NotGeneralizedBerwald"
            };
            h.insert("scatter_residual".into(), json!(w.scatter_residual));
            h.insert("pde_residual".into(), json!(w.pde_residual));
            h.insert("branches".into(), json!(w.branches));
            h.insert("scatter_csv".into(), json!("wagner_scatter.csv"));
            Ok(finish(h, verdict, vec![], true))
        }
    }
}

pub fn curvature(r: &Resolved, out: &Path) -> Result<Outcome, FslError> {
    let gamma = AveragedGamma::new(r.metric.metric.clone(), r.engine);
    let cfg = &r.config.curvature;
    let conn: Box<dyn LinearConnection> = match (cfg.connection.as_str(), &r.metric.rho) {
        ("zero", _) | ("auto", None) => Box::new(ZeroConnection),
        (_, Some(rho)) => Box::new(SemiSymmetric { rho: rho.clone() }),
        ("semi-symmetric", None) => {
            return Err(FslError::InvalidArgument(
                "the semi-symmetric connection needs a plane construction".into(),
            ))
        }
        (other, _) => return Err(FslError::InvalidArgument(format!("unknown connection `{other}`"))),
    };
    let reports = divergence_representation_check(&gamma, conn.as_ref(), &r.points, cfg.step)?;
    std::fs::write(out.join("curvature.csv"), reports_csv(&reports))?;
    let tol = CURVATURE_TOL * r.tol_scale;
    let max_sum = reports.iter().map(|x| x.sum_residual).fold(0.0, f64::max);
    let max_r = reports.iter().map(|x| x.conn_curvature_norm).fold(0.0, f64::max);
    let mut failures = Vec::new();
    if !(max_sum <= tol) {
        failures.push("divergence_representation".to_string());
    }
    if !(max_r <= tol) {
        failures.push("flatness".to_string());
    }
    let closed = closedness(&TorsionForm(conn.as_ref()), &r.points, cfg.step, 1e-8)?;
    let mut h = header(r, "curvature");
    h.insert("connection".into(), json!(conn.name()));
    h.insert("tolerance".into(), json!(tol));
    h.insert("max_sum_residual".into(), json!(max_sum));
    h.insert("max_connection_curvature".into(), json!(max_r));
    h.insert("torsion_form_closed".into(), json!(closed.closed));
    h.insert("max_d_rho".into(), json!(closed.max_d_rho));
    h.insert("csv".into(), json!("curvature.csv"));
    let ok = failures.is_empty();
    Ok(finish(h, if ok { "pass" } else { "invariant-failure" }, failures, ok))
}

pub fn figures(r: &Resolved, out: &Path) -> Result<Outcome, FslError> {
    let rep = render_figures(&out.join("figures"), &r.config.figures)?;
    let tol = FIGURE_TOL * r.tol_scale;
    let mut failures = Vec::new();
    if !(rep.max_ode_error <= tol) {
        failures.push("transport_vs_potential".to_string());
    }
    let mut h = header(r, "figures");
    h.remove("metric");
    h.remove("points");
    h.insert("construction".into(), json!("plane:trifocal-rot"));
    h.insert("tolerance".into(), json!(tol));
    h.insert("max_ode_error".into(), json!(rep.max_ode_error));
    h.insert("max_printed_form_error".into(), json!(rep.max_printed_error));
    h.insert("files".into(), json!(rep.entries.iter().map(|e| format!("figures/{}", e.file)).collect::<Vec<_>>()));
    h.insert("csv".into(), json!(format!("figures/{}", rep.csv)));
    h.insert("entries".into(), json!(rep.entries));
    let ok = failures.is_empty();
    Ok(finish(h, if ok { "pass" } else { "invariant-failure" }, failures, ok))
}
