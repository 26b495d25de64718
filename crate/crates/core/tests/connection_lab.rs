use fsl_core::connection::*;
use fsl_core::engine::Engine;
use fsl_core::error::FslError;
use fsl_core::fields::AveragedGamma;
use fsl_core::indicatrix::{seed_point, source_integrals, standard_trace, trace_indicatrix, TraceOptions};
use fsl_core::jets::spray_jets;
use fsl_core::linalg::max_abs_diff3;
use fsl_core::metric::{preset, Euclidean};
use fsl_core::plane::OneFormField;
use fsl_core::quad::PeriodicSeries;
use proptest::prelude::*;

fn rotational(p: [f64; 2]) -> Tensor3 {
    semi_symmetric_coefficients([p[1], -p[0]])
}

use fsl_core::linalg::Tensor3;

#[test]
fn euclidean_is_the_riemannian_case() {
    let opts = TraceOptions::default();
    let trace = standard_trace(&Euclidean, [0.2, 0.1], &Engine::Dual, &opts).unwrap();
    let src = source_integrals(&trace);
    assert!(matches!(solve_constants(&trace, &src, CONSTANT_TOL), Err(FslError::RiemannianCase)));
    let w = wagner_test(&Euclidean, &[[0.0, 0.0], [1.0, 0.0]], &Engine::Dual, &opts);
    assert!(matches!(w, Err(FslError::RiemannianCase)));
}

#[test]
fn trifocal_connection_is_recovered_and_unique() {
    let m = preset("plane:trifocal-rot").unwrap();
    let p = [0.5, 0.5];
    let opts = TraceOptions::default();
    let trace = standard_trace(m.as_ref(), p, &Engine::Dual, &opts).unwrap();
    let src = source_integrals(&trace);
    let solve = solve_constants(&trace, &src, CONSTANT_TOL).unwrap();
    assert!(solve.estimates.len() == 8 && solve.spread < 1e-4);

    let built = build_connection(&trace, &solve, 0, 1e-5).unwrap();
    assert!(max_abs_diff3(&built.gamma, &rotational(p)) < 1e-4);
    let torsion = torsion_decompose(&built.gamma);
    assert!((torsion.rho[0] - 0.5).abs() < 1e-4 && (torsion.rho[1] + 0.5).abs() < 1e-4);

    // the defining functions, from the known connection: y^j Γ^l_ij = G^l_i + f_i V^l
    for (idx, d) in trace.data.iter().enumerate().step_by(16) {
        let s = spray_jets(m.as_ref(), p, d.y, &Engine::Dual).unwrap();
        let g = rotational(p);
        let vv = [-d.fy[1], d.fy[0]];
        for i in 0..2 {
            let r: [f64; 2] = std::array::from_fn(|l| d.y[0] * g[l][i][0] + d.y[1] * g[l][i][1] - s.gi[l][i]);
            let f = (r[0] * vv[0] + r[1] * vv[1]) / (vv[0] * vv[0] + vv[1] * vv[1]);
            assert!((f - solve.f_on_trace[idx][i]).abs() < 1e-4, "f_{i} at sample {idx}");
            assert!((r[0] * vv[1] - r[1] * vv[0]).abs() < 1e-6);
        }
    }

    // another reference fiber and another seed give the same coefficients
    let other_fiber = build_connection(&trace, &solve, 37, 1e-5).unwrap();
    assert!(max_abs_diff3(&other_fiber.gamma, &built.gamma) < 1e-5);
    let seed = seed_point(m.as_ref(), p, [-0.3, 1.0]).unwrap();
    let trace2 = trace_indicatrix(m.as_ref(), p, seed, &Engine::Dual, &opts).unwrap();
    let src2 = source_integrals(&trace2);
    let solve2 = solve_constants(&trace2, &src2, CONSTANT_TOL).unwrap();
    assert!((solve2.k[0] - solve.k[0]).abs() > 1e-3 || (solve2.k[1] - solve.k[1]).abs() > 1e-3);
    let built2 = build_connection(&trace2, &solve2, 5, 1e-5).unwrap();
    assert!(max_abs_diff3(&built2.gamma, &built.gamma) < 1e-4);

    // f_i is a function on the indicatrix, whatever the seed
    let pts = trace.points();
    for (idx, d) in trace2.data.iter().enumerate().step_by(11) {
        let t = src.locate(d.y, &pts).unwrap();
        let f1 = solve.f_at(&src, t);
        for i in 0..2 {
            assert!((f1[i] - solve2.f_on_trace[idx][i]).abs() < 1e-5);
        }
    }

    // (f_i w)' = α_i along the trace
    for i in 0..2 {
        let fw: Vec<f64> = solve.f_on_trace.iter().zip(&trace.data).map(|(f, d)| f[i] * d.w).collect();
        let s = PeriodicSeries::from_samples(&fw, trace.period);
        for (idx, d) in trace.data.iter().enumerate().step_by(7) {
            assert!((s.derivative(trace.theta[idx]) - d.alpha[i]).abs() < 1e-6);
        }
    }

    // compatibility of the constructed coefficients on the indicatrix
    let samples: Vec<_> = trace.data.iter().map(|d| (p, d.y)).collect();
    let r = compatibility_residual(m.as_ref(), &ConstantConnection(built.gamma), &samples, &Engine::Dual).unwrap();
    assert!(r < 1e-4, "compatibility residual {r}");
}

#[test]
fn closed_form_connection_is_compatible_with_the_trifocal_metric() {
    let m = preset("plane:trifocal-rot").unwrap();
    let conn = SemiSymmetric {
        rho: OneFormField::rotational(),
    };
    let samples = fsl_core::metric::standard_samples([0.1, -0.2], 1.2, 40);
    let r = compatibility_residual(m.as_ref(), &conn, &samples, &Engine::Dual).unwrap();
    assert!(r < 1e-5, "{r}");
    // and the zero connection is not
    let r0 = compatibility_residual(m.as_ref(), &ZeroConnection, &samples, &Engine::Dual).unwrap();
    assert!(r0 > 1e-2);
}

#[test]
fn minkowski_metric_has_the_zero_connection() {
    let m = preset("randers:0.3,0.1").unwrap();
    let trace = standard_trace(m.as_ref(), [0.4, -0.7], &Engine::Dual, &TraceOptions::default()).unwrap();
    let src = source_integrals(&trace);
    let solve = solve_constants(&trace, &src, CONSTANT_TOL).unwrap();
    assert!(solve.k.iter().all(|k| k.abs() < 1e-10));
    assert!(solve.f_on_trace.iter().flatten().all(|f| f.abs() < 1e-10));
    let built = build_connection(&trace, &solve, 0, 1e-8).unwrap();
    assert!(built.gamma.iter().flatten().flatten().all(|g| g.abs() < 1e-10));
}

#[test]
fn shear_randers_fails_every_detector() {
    let m = preset("randers-shear:0.3").unwrap();
    let opts = TraceOptions::default();
    let p = [0.5, 0.5];
    let trace = standard_trace(m.as_ref(), p, &Engine::Dual, &opts).unwrap();
    let src = source_integrals(&trace);
    let constants = solve_constants(&trace, &src, CONSTANT_TOL);
    assert!(matches!(constants, Err(FslError::InconsistentConstants { .. })));
    let solve = analyze_constants(&trace, &src);
    assert!(matches!(
        build_connection(&trace, &solve, 0, CONSTANT_TOL),
        Err(FslError::FiberDependence { .. })
    ));
    // fibers over points with equal |u2| are linearly isometric, so the points differ in |u2|
    let w = wagner_test(m.as_ref(), &[p, [0.5, 0.2], [-0.5, -0.8]], &Engine::Dual, &opts).unwrap();
    assert!(w.scatter_residual > 1e-2 && w.pde_residual > 1e-2, "{} {}", w.scatter_residual, w.pde_residual);
    assert!(w.scatter_csv().starts_with("A,dA\n"));
}

#[test]
fn trifocal_wagner_and_landsberg() {
    let m = preset("plane:trifocal-rot").unwrap();
    let opts = TraceOptions::default();
    let w = wagner_test(m.as_ref(), &[[0.0, 0.0], [0.7, -0.4], [-0.3, 0.9]], &Engine::Dual, &opts).unwrap();
    assert!(w.scatter_residual < 1e-3 && w.pde_residual < 1e-3, "{w:?}");
    assert!(w.branches >= 6);
    let l = landsberg_berwald_check(m.as_ref(), [0.3, 0.3], &Engine::Dual, &opts, 1e-6).unwrap();
    assert_eq!(l.verdict, Verdict::NotLandsberg);
    assert!(l.max_alpha > 1e-3);
}

#[test]
fn minkowski_and_euclidean_are_berwald() {
    let opts = TraceOptions::default();
    let m = preset("plane:trifocal-flat").unwrap();
    let l = landsberg_berwald_check(m.as_ref(), [0.2, 0.2], &Engine::Dual, &opts, 1e-6).unwrap();
    assert_eq!(l.verdict, Verdict::BerwaldConfirmed);
    assert!(l.max_f < 1e-6 && l.canonical_deviation < 1e-6);
    let l = landsberg_berwald_check(&Euclidean, [0.2, 0.2], &Engine::Dual, &opts, 1e-6).unwrap();
    assert_eq!(l.verdict, Verdict::BerwaldConfirmed);
    assert!(l.riemannian);
}

#[test]
fn levi_civita_comparison() {
    let euclid = |_: [f64; 2]| Ok([[1.0, 0.0], [0.0, 1.0]]);
    let r = levi_civita_compare(&ZeroConnection, &euclid, [0.3, 0.2], 1e-2, 1e-12).unwrap();
    assert_eq!(r.identity_residual, 0.0);
    assert_eq!(r.metricity_residual, 0.0);

    let conn = SemiSymmetric {
        rho: OneFormField::rotational(),
    };
    let scaled = |_: [f64; 2]| Ok([[2.0 * std::f64::consts::PI, 0.0], [0.0, 2.0 * std::f64::consts::PI]]);
    let r = levi_civita_compare(&conn, &scaled, [0.3, -1.1], 1e-2, 1e-4).unwrap();
    assert!(r.identity_residual < 1e-12 && r.metricity_residual < 1e-12);

    // a connection that does not preserve γ
    let mut g = [[[0.0; 2]; 2]; 2];
    g[0][0][0] = 1.0;
    assert!(matches!(
        levi_civita_compare(&ConstantConnection(g), &euclid, [0.0, 0.0], 1e-2, 1e-4),
        Err(FslError::NotMetrical { .. })
    ));

    let m = preset("plane:trifocal-rot").unwrap();
    let gamma = AveragedGamma::new(m, Engine::Dual);
    let r = levi_civita_compare(&conn, &gamma, [0.4, 0.1], 1e-2, 1e-4).unwrap();
    assert!(r.identity_residual < 1e-4 && r.metricity_residual < 1e-4, "{r:?}");
}

#[test]
fn grid_connection_exports_points_and_coefficients() {
    let conn = SemiSymmetric {
        rho: OneFormField::rotational(),
    };
    let g = GridConnection::sample(&conn, [-1.0, -1.0], [0.5, 0.5], [5, 5]).unwrap();
    let json: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 25);
    assert_eq!(json["Gamma"][0].as_array().unwrap().len(), 2);
    // Γ is linear in u, so interior interpolation is exact
    let c = g.coefficients([0.1, -0.3]).unwrap();
    assert!(max_abs_diff3(&c, &rotational([0.1, -0.3])) < 1e-12);
}

proptest! {
    #[test]
    fn torsion_is_rebuilt_from_its_one_form(entries in proptest::array::uniform8(-10.0f64..10.0)) {
        let g: Tensor3 = std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| entries[4 * k + 2 * i + j])));
        let t = torsion_decompose(&g);
        prop_assert!(t.residual < 1e-12);
        let sym: Tensor3 = std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| g[k][i][j] + g[k][j][i])));
        let ts = torsion_decompose(&sym);
        prop_assert!(ts.rho[0].abs() < 1e-12 && ts.rho[1].abs() < 1e-12);
    }

    #[test]
    fn semi_symmetric_torsion_returns_rho(r1 in -5.0f64..5.0, r2 in -5.0f64..5.0) {
        let t = torsion_decompose(&semi_symmetric_coefficients([r1, r2]));
        prop_assert!((t.rho[0] - r1).abs() < 1e-12 && (t.rho[1] - r2).abs() < 1e-12);
    }
}
