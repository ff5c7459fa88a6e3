use std::f64::consts::FRAC_PI_2;

use layercir::harness::*;
use layercir::pbs::{run_scenario, PbsConfig, Receiver};
use layercir::timedomain::free_kernel;
use layercir::{Error, Layer, LayerStack, SourceSpec, Spherical};

fn homogeneous() -> LayerStack {
    LayerStack::with_free_exterior(vec![Layer::new(100.0, 1.0, 0.0)], 0.1).unwrap()
}

/// Small desk scenario whose analytic leg takes well under a second.
fn quick_scenario() -> Scenario {
    let mut s = Scenario::internal_source(Scale::Desk);
    s.receivers.truncate(2);
    s.analytic.samples = 512;
    s.pbs.molecules = 2000;
    s.pbs.duration = 4000.0;
    s
}

fn sq_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

#[test]
fn ball_rule_averages_low_degree_fields_exactly() {
    let center = Spherical::new(13.0, 1.1, 0.4);
    let rho = 2.5;
    let nodes = ball_quadrature(center, rho);
    assert_eq!(nodes.len(), 32);
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    assert!((total - 1.0).abs() < 1e-14);

    let c = center.to_cartesian();
    let linear: f64 = nodes
        .iter()
        .map(|(p, w)| {
            let x = p.to_cartesian();
            w * (2.0 * x[0] - 3.0 * x[1] + x[2])
        })
        .sum();
    assert!((linear - (2.0 * c[0] - 3.0 * c[1] + c[2])).abs() < 1e-11);

    // mean of |x − c|² over a ball is 3ρ²/5
    let quad: f64 = nodes.iter().map(|(p, w)| w * sq_dist(p.to_cartesian(), c)).sum();
    assert!((quad - 0.6 * rho * rho).abs() < 1e-12);

    // mean of x·y − z² over a ball about the origin is −ρ²/5
    let origin = ball_quadrature(Spherical::new(0.0, 0.0, 0.0), rho);
    let mixed: f64 = origin
        .iter()
        .map(|(p, w)| {
            let x = p.to_cartesian();
            w * (x[0] * x[1] - x[2] * x[2])
        })
        .sum();
    assert!((mixed + 0.2 * rho * rho).abs() < 1e-12);
}

#[test]
fn smoothed_peak_finds_a_clean_maximum() {
    let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.5).collect();
    let values: Vec<f64> = times.iter().map(|&t| 3.0 * (-((t - 71.3) / 20.0).powi(2)).exp()).collect();
    let p = smoothed_peak(&times, &values, 6.0).unwrap();
    assert!((p.time - 71.3).abs() < 0.05, "{p:?}");
    assert!((p.value - 3.0).abs() < 0.01, "{p:?}");
}

#[test]
fn smoothed_peak_tolerates_noise() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.5).collect();
    let values: Vec<f64> = times
        .iter()
        .map(|&t| (-((t - 90.0) / 30.0).powi(2)).exp() + rng.gen_range(-0.05..0.05))
        .collect();
    let p = smoothed_peak(&times, &values, 0.3 * 50.0).unwrap();
    assert!((p.time - 90.0).abs() < 3.0, "{p:?}");
}

#[test]
fn smoothed_peak_rejects_bad_input() {
    assert!(smoothed_peak(&[0.0, 1.0], &[1.0, 2.0], 1.0).is_err());
    assert!(smoothed_peak(&[0.0, 1.0, 2.0], &[1.0, 2.0, 1.0], 0.0).is_err());
}

#[test]
fn trend_classification() {
    assert_eq!(trend(&[1.0, 2.0, 3.0]), Trend::Increasing);
    assert_eq!(trend(&[3.0, 2.0, 1.0]), Trend::Decreasing);
    assert_eq!(trend(&[1.0, 1.0]), Trend::Constant);
    assert_eq!(trend(&[1.0]), Trend::Constant);
    assert_eq!(trend(&[1.0, 3.0, 2.0]), Trend::Mixed);
    assert_eq!(trend(&[1.0, 1.0, 2.0]), Trend::Mixed);
    assert_eq!(trend(&[1.0, f64::NAN, 2.0]), Trend::Mixed);
}

#[test]
fn homogeneous_particles_follow_the_free_kernel() {
    // In a uniform medium the Gaussian step is exact for any Δt.
    let stack = homogeneous();
    let d = 0.1;
    let source = SourceSpec::at(Spherical::new(0.0, 0.0, 0.0));
    let receiver = Receiver::new("r50", Spherical::new(50.0, FRAC_PI_2, 0.0), 10.0);
    let config = PbsConfig {
        dt: 100.0,
        molecules: 100_000,
        seed: 11,
        duration: 25_000.0,
    };
    let run = run_scenario(&stack, &source, std::slice::from_ref(&receiver), &config).unwrap();
    let nodes = ball_quadrature(receiver.center, receiver.radius);
    let origin = source.position.to_cartesian();
    let exact: Vec<f64> = run
        .times
        .iter()
        .map(|&t| {
            nodes
                .iter()
                .map(|(p, w)| w * free_kernel(sq_dist(p.to_cartesian(), origin).sqrt(), d, t))
                .sum()
        })
        .collect();
    let peak = exact.iter().cloned().fold(0.0, f64::max);
    let got = &run.receivers[0].concentration;
    let (mut se, mut noise) = (0.0, 0.0);
    let v = receiver.volume();
    for (c, e) in got.iter().zip(&exact) {
        se += (c - e).powi(2);
        let p = e * v;
        noise += p * (1.0 - p) / config.molecules as f64 / (v * v);
    }
    let m = exact.len() as f64;
    let nrmse = (se / m).sqrt() / peak;
    let noise = (noise / m).sqrt() / peak;
    assert!(nrmse < 0.10, "nrmse {nrmse}");
    assert!(nrmse < 1.5 * noise, "nrmse {nrmse} vs counting noise {noise}");
}

#[test]
fn homogeneous_comparison_is_noise_limited() {
    let mut s = Scenario::internal_source(Scale::Desk);
    s.stack = homogeneous();
    s.source = SourceSpec::at(Spherical::new(0.0, 0.0, 0.0));
    s.receivers = vec![Receiver::new("r50", Spherical::new(50.0, FRAC_PI_2, 0.0), 10.0)];
    s.analytic.samples = 1024;
    s.pbs = PbsConfig {
        dt: 100.0,
        molecules: 50_000,
        seed: 5,
        duration: 25_000.0,
    };
    s.sweep = None;
    let report = run_comparison(&s).unwrap();
    let r = &report.receivers[0];
    assert!(r.nrmse < 0.10, "{r:?}");
    assert!(r.nrmse < 1.5 * r.noise_nrmse, "{r:?}");
    assert!(r.peak_time_error < 0.15, "{r:?}");
}

#[test]
fn zero_duration_is_rejected() {
    let mut s = quick_scenario();
    s.pbs.duration = 0.0;
    assert!(matches!(run_comparison(&s), Err(Error::Degenerate(_))));
}

#[test]
fn receiver_containing_source_is_rejected() {
    let mut s = quick_scenario();
    s.receivers[0] = Receiver::new("on-source", s.source.position, 1.0);
    assert!(s.validate().is_err());
    s.receivers.clear();
    assert!(s.validate().is_err());
}

#[test]
fn single_point_sweep_is_the_analytic_leg() {
    let base = quick_scenario();
    let eps = base.stack.layer(2).porosity;
    let sweep = porosity_sweep(&base, 2, &[eps], Engine::Analytic, None).unwrap();
    assert_eq!(sweep.points.len(), 1);
    let direct = run_analytic(&base, true).unwrap();
    assert_eq!(sweep.points[0].analytic.as_ref().unwrap(), &direct);
    assert!(sweep.points[0].pbs.is_none());
    assert!(sweep.orderings.iter().all(|o| o.trend == Trend::Constant));
}

#[test]
fn analytic_leg_ignores_particle_settings() {
    let base = quick_scenario();
    let mut other = base.clone();
    other.pbs = PbsConfig {
        dt: 7.0,
        molecules: 17,
        seed: 99,
        duration: 123.0,
    };
    let ps = [0.1697, 0.05];
    let a = porosity_sweep(&base, 2, &ps, Engine::Analytic, Some(1000.0)).unwrap();
    let b = porosity_sweep(&other, 2, &ps, Engine::Analytic, Some(1000.0)).unwrap();
    for (x, y) in a.points.iter().zip(&b.points) {
        assert_eq!(x.analytic, y.analytic);
        assert_eq!(x.analytic_peaks, y.analytic_peaks);
    }
    assert_eq!(a.orderings, b.orderings);
}

#[test]
fn sweep_orders_points_by_decreasing_porosity() {
    let base = quick_scenario();
    let sweep = porosity_sweep(&base, 2, &[0.05, 0.1697, 0.1], Engine::Both, None).unwrap();
    assert_eq!(sweep.points[0].porosity, 0.05);
    let o = sweep.ordering(Engine::Analytic, "spheroid", "retention").unwrap();
    assert_eq!(o.porosities, vec![0.1697, 0.1, 0.05]);
    assert!(sweep.ordering(Engine::Pbs, "layer1", "peak_time").is_some());
    assert!(sweep.ordering(Engine::Pbs, "nowhere", "peak_time").is_none());
    // default retention time: half the simulated duration
    assert_eq!(sweep.retention_time, 2000.0);
}

#[test]
fn sweep_rejects_bad_requests() {
    let base = quick_scenario();
    assert!(porosity_sweep(&base, 2, &[], Engine::Analytic, None).is_err());
    assert!(porosity_sweep(&base, 3, &[0.1], Engine::Analytic, None).is_err());
    assert!(porosity_sweep(&base, 2, &[1.2], Engine::Analytic, None).is_err());
}

#[test]
fn comparison_is_deterministic() {
    let s = quick_scenario();
    let a = run_comparison(&s).unwrap();
    let b = run_comparison(&s).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unreached_receiver_is_reported_not_fatal() {
    let mut s = quick_scenario();
    s.pbs.duration = 200.0;
    s.receivers = vec![Receiver::new("far", Spherical::new(36.0, FRAC_PI_2, 0.0), 8.0)];
    let report = run_comparison(&s).unwrap();
    let r = &report.receivers[0];
    assert_eq!(r.pbs_peak, 0.0);
    assert!(r.peak_time_error.is_nan());
    assert!(r.nrmse.is_finite());
}
