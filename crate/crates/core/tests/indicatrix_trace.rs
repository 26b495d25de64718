use std::f64::consts::{PI, TAU};

use fsl_core::engine::Engine;
use fsl_core::indicatrix::*;
use fsl_core::metric::{preset, Euclidean, MetricField, Randers};
use fsl_core::quad::PeriodicSeries;
use proptest::prelude::*;

const PRESETS: [&str; 4] = ["euclidean", "randers:0.3,0", "randers-shear:0.3", "plane:trifocal-rot"];

fn opts(samples: usize) -> TraceOptions {
    TraceOptions {
        samples,
        ..TraceOptions::default()
    }
}

fn rel_diff(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().flatten().zip(b.iter().flatten()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

#[test]
fn euclidean_average_is_two_pi_identity() {
    for p in [[0.0, 0.0], [1.3, -0.4]] {
        let t = standard_trace(&Euclidean, p, &Engine::Dual, &opts(256)).unwrap();
        let g = averaged_metric(&t).unwrap().gamma;
        assert!((g[0][0] - TAU).abs() < 1e-7 && (g[1][1] - TAU).abs() < 1e-7 && g[0][1].abs() < 1e-7);
        assert!((t.total_mass() - TAU).abs() < 1e-7);
        let src = source_integrals(&t);
        for k in 0..16 {
            let s = k as f64 * t.period / 16.0;
            assert!(src.beta(0, s).abs() < 1e-12 && src.gamma_int(1, s).abs() < 1e-12);
        }
    }
}

#[test]
fn averaged_metric_converges_and_matches_the_polar_quadrature() {
    let p = [0.3, -0.2];
    for spec in PRESETS {
        let m = preset(spec).unwrap();
        let a = standard_trace(m.as_ref(), p, &Engine::Dual, &opts(256)).unwrap();
        let b = standard_trace(m.as_ref(), p, &Engine::Dual, &opts(512)).unwrap();
        let (ga, gb) = (averaged_metric(&a).unwrap().gamma, averaged_metric(&b).unwrap().gamma);
        assert!(rel_diff(&ga, &gb) < 1e-7, "{spec}: {ga:?} vs {gb:?}");
        assert!(ga[0][1] == ga[1][0]);
        let (polar, mass) = averaged_metric_polar(m.as_ref(), p, 512, &Engine::Dual).unwrap();
        assert!(rel_diff(&polar, &gb) < 1e-7, "{spec}: {polar:?} vs {gb:?}");
        assert!((mass - b.total_mass()).abs() < 1e-7 * mass, "{spec}");
        assert!(a.mu.iter().all(|w| *w > 0.0), "{spec}");
    }
}

#[test]
fn trace_invariants_on_every_preset() {
    let p = [0.5, 0.5];
    for spec in PRESETS {
        let m = preset(spec).unwrap();
        let t = standard_trace(m.as_ref(), p, &Engine::Dual, &opts(256)).unwrap();
        assert!(t.f_conservation() < 1e-7, "{spec}: {}", t.f_conservation());
        assert!(t.closure_error < 1e-6);

        // c' = V0∘c, with c' from the spectral interpolant of the samples
        let cs = [0, 1].map(|i| PeriodicSeries::from_samples(&t.data.iter().map(|d| d.y[i]).collect::<Vec<_>>(), t.period));
        let vs = [0, 1].map(|i| PeriodicSeries::from_samples(&t.data.iter().map(|d| d.v0[i]).collect::<Vec<_>>(), t.period));
        // ∫λ = ln w − ln w(0), and ∫λ over a period is zero
        let lam = PeriodicSeries::from_samples(&t.lam(), t.period);
        let w0 = t.data[0].w;
        for (k, d) in t.data.iter().enumerate() {
            let th = t.theta[k];
            for i in 0..2 {
                assert!((cs[i].derivative(th) - d.v0[i]).abs() < 1e-7, "{spec}");
                // V0(V0^i) + λ V0^i + y^i/F² = 0 along the trace (F = 1)
                let r = vs[i].derivative(th) + d.lam * d.v0[i] + d.y[i];
                assert!(r.abs() < 1e-4, "{spec}: {r}");
            }
            assert!((lam.integral(th) - (d.w / w0).ln()).abs() < 1e-5, "{spec}");
            assert!((d.y[0] * d.alpha[0] + d.y[1] * d.alpha[1]).abs() < 1e-6, "{spec}");
        }
        assert!(lam.integral(t.period).abs() < 1e-5, "{spec}");
    }
}

#[test]
fn period_is_step_converged() {
    for spec in ["randers:0.3,0", "plane:trifocal-rot"] {
        let m = preset(spec).unwrap();
        let p = [0.5, 0.5];
        let a = standard_trace(m.as_ref(), p, &Engine::Dual, &opts(256)).unwrap();
        let half = TraceOptions {
            step: 5e-4,
            ..opts(256)
        };
        let b = standard_trace(m.as_ref(), p, &Engine::Dual, &half).unwrap();
        assert!((a.period - b.period).abs() < 1e-6, "{spec}: {} vs {}", a.period, b.period);
        if spec.starts_with("plane") {
            let (sa, sb) = (source_integrals(&a), source_integrals(&b));
            for i in 0..2 {
                let (x, y) = (sa.beta(i, a.period), sb.beta(i, b.period));
                assert!(x.is_finite() && (x - y).abs() < 1e-6, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn gamma_does_not_depend_on_the_seed() {
    for spec in PRESETS {
        let m = preset(spec).unwrap();
        let p = [-0.4, 0.6];
        let a = standard_trace(m.as_ref(), p, &Engine::Dual, &opts(256)).unwrap();
        let seed = seed_point(m.as_ref(), p, [-0.3, 1.0]).unwrap();
        let b = trace_indicatrix(m.as_ref(), p, seed, &Engine::Dual, &opts(256)).unwrap();
        let (ga, gb) = (averaged_metric(&a).unwrap().gamma, averaged_metric(&b).unwrap().gamma);
        assert!(rel_diff(&ga, &gb) < 1e-6, "{spec}");
        assert!((a.period - b.period).abs() < 1e-8);
    }
}

#[test]
fn trifocal_seed_point_on_the_axis() {
    let m = preset("plane:trifocal-rot").unwrap();
    // at the origin the foci are −(1,0), 0, (1,0): solve |x+1| + |x| + |x−1| = 4 on x > 0
    let sum = |x: f64| (x + 1.0).abs() + x.abs() + (x - 1.0).abs() - 4.0;
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = seed_point(m.as_ref(), [0.0, 0.0], [1.0, 0.0]).unwrap();
    assert!((s[0] - lo).abs() < 1e-12 && s[1].abs() < 1e-15, "{s:?}");
}

/// Best circular alignment of two sampled profiles over the same period:
/// integer shift from the sampled cross-correlation, refined continuously.
fn cyclic_mismatch(a: &PeriodicSeries, b: &[f64], period: f64) -> f64 {
    let n = b.len();
    let dt = period / n as f64;
    let samples: Vec<f64> = (0..n).map(|k| a.value(k as f64 * dt)).collect();
    let best = (0..n)
        .max_by(|&s, &r| {
            let corr = |s: usize| (0..n).map(|k| samples[(k + s) % n] * b[k]).sum::<f64>();
            corr(s).total_cmp(&corr(r))
        })
        .unwrap();
    let err = |shift: f64| (0..n).map(|k| (a.value(k as f64 * dt + shift) - b[k]).abs()).fold(0.0, f64::max);
    let (mut lo, mut hi) = ((best as f64 - 1.0) * dt, (best as f64 + 1.0) * dt);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (x1, x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if err(x1) < err(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    err(0.5 * (lo + hi))
}

#[test]
fn trifocal_lambda_profiles_are_cyclic_shifts() {
    let m = preset("plane:trifocal-rot").unwrap();
    let a = standard_trace(m.as_ref(), [0.5, 0.5], &Engine::Dual, &opts(256)).unwrap();
    let b = standard_trace(m.as_ref(), [-0.9, 0.3], &Engine::Dual, &opts(256)).unwrap();
    assert!((a.period - b.period).abs() < 1e-8);
    let la = PeriodicSeries::from_samples(&a.lam(), a.period);
    // the profiles differ by more than a few samples' worth of shift
    let unshifted = a.lam().iter().zip(b.lam()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(unshifted > 1e-2, "{unshifted}");
    let mis = cyclic_mismatch(&la, &b.lam(), a.period);
    assert!(mis < 1e-6, "{mis}");
}

#[test]
fn randers_lambda_is_periodic_and_not_constant() {
    let m = Randers::constant(0.3, 0.0);
    let t = standard_trace(&m, [0.0, 0.0], &Engine::Dual, &opts(256)).unwrap();
    assert!(t.lam_range() > 10.0 * 1e-6);
    // periodicity: the interpolant through the samples returns to its start
    let lam = PeriodicSeries::from_samples(&t.lam(), t.period);
    let d = t.data[0].clone();
    let again = fsl_core::jets::fiber_data(&m, [0.0, 0.0], d.y, &Engine::Dual).unwrap();
    assert!((lam.value(t.period) - again.lam).abs() < 1e-9);
    let src = source_integrals(&t);
    assert!((0..16).all(|k| src.beta(0, k as f64 * t.period / 16.0).abs() < 1e-12));
    assert!(m.is_x_independent());
}

#[test]
fn trace_csv_has_the_documented_columns() {
    let t = standard_trace(&Euclidean, [0.0, 0.0], &Engine::Dual, &opts(16)).unwrap();
    let csv = t.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("theta,y1,y2,lambda,w,alpha1,alpha2,omega1,omega2,mu"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.split(',').count() == 10));
    let y1: f64 = rows[4].split(',').nth(1).unwrap().parse().unwrap();
    assert!((y1 - (PI / 2.0).cos()).abs() < 1e-9);
}

#[test]
fn bad_inputs_are_rejected() {
    let e = trace_indicatrix(&Euclidean, [0.0, 0.0], [2.0, 0.0], &Engine::Dual, &opts(16));
    assert!(e.is_err());
    assert!(standard_trace(&Euclidean, [0.0, 0.0], &Engine::Dual, &opts(15)).is_err());
    assert!(seed_point(&Euclidean, [0.0, 0.0], [0.0, 0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn seed_points_lie_on_the_indicatrix(which in 0usize..4, p1 in -1.0f64..1.0, p2 in -1.0f64..1.0, a in 0.0f64..std::f64::consts::TAU) {
        let m = preset(PRESETS[which]).unwrap();
        let s = seed_point(m.as_ref(), [p1, p2], [a.cos(), a.sin()]).unwrap();
        prop_assert!((m.eval([p1, p2], s) - 1.0).abs() < 1e-12);
        prop_assert!(s[0] * a.sin() - s[1] * a.cos() < 1e-12);
    }
}
