use std::f64::consts::{FRAC_1_SQRT_2, PI};

use layercir::analytic::*;
use layercir::specfun::{legendre_p_normalized, spherical_h, spherical_j};
use layercir::{Error, Layer, LayerStack, SourceSpec, Spherical};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

/// One finite free-fluid layer in free fluid: no interface at all, physically.
fn homogeneous(d: f64) -> LayerStack {
    LayerStack::with_free_exterior(vec![Layer::new(100.0, 1.0, 0.0)], d).unwrap()
}

fn free_kernel(d_coeff: f64, omega: f64, dist: f64) -> Complex64 {
    (-sigma(0.0, d_coeff, omega) * dist).exp() / (4.0 * PI * d_coeff * dist)
}

#[test]
fn sigma_examples() {
    assert_eq!(sigma(0.0, 3.0, 0.0), c(0.0, 0.0));
    assert!((sigma(0.0, 1.0, 1.0) - c(FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-15);
    assert!((sigma(2f64.ln(), 1.0, 0.0) - c(0.832_554_611_157_697_8, 0.0)).norm() < 1e-12);
    assert!(sigma(0.3, 0.01, -5.0).re >= 0.0);
}

#[test]
fn wavenumber_examples() {
    assert_eq!(wavenumber(c(0.0, 0.0)), c(0.0, 0.0));
    assert_eq!(wavenumber(c(1.0, 0.0)), c(0.0, 1.0));
    let k = wavenumber(c(FRAC_1_SQRT_2, FRAC_1_SQRT_2));
    assert!((k - c(-FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-15);
}

#[test]
fn fixture_system_has_eight_unknowns() {
    let stack = LayerStack::spheroid_fixture();
    let (a, b) = assemble_system(&stack, 45.83, 0, 1e-3).unwrap();
    assert_eq!(a.nrows(), 8);
    assert_eq!(a.ncols(), 8);
    let nonzero: Vec<usize> = (0..8).filter(|&i| b[i].norm() > 0.0).collect();
    assert_eq!(nonzero.len(), 1, "only the source-jump row is inhomogeneous");
    let d1 = stack.diffusion(0);
    assert!((b[nonzero[0]].norm() - 1.0 / d1).abs() < 1e-12 / d1);

    let p = RadialProblem::new(&stack, 45.83, c(0.0, 1e-3)).unwrap();
    // (A¹) (C¹ E¹) (A² B²) (A³ B³) (A⁴)
    let layout: Vec<(usize, bool, bool)> = (0..p.shell_count())
        .map(|s| {
            let (layer, _, _, g, d) = p.shell_layout(s);
            (layer, g.is_some(), d.is_some())
        })
        .collect();
    assert_eq!(
        layout,
        vec![(0, true, false), (0, true, true), (1, true, true), (2, true, true), (3, false, true)]
    );
}

#[test]
fn dimension_is_two_per_layer_wherever_the_source_is() {
    let stack = LayerStack::spheroid_fixture();
    for r0 in [0.0, 10.0, 100.0, 200.0, 600.0] {
        let p = RadialProblem::new(&stack, r0, c(0.0, 1e-4)).unwrap();
        assert_eq!(p.dimension(), 8, "r0 = {r0}");
    }
}

#[test]
fn fixture_residual_small() {
    let stack = LayerStack::spheroid_fixture();
    let p = RadialProblem::new(&stack, 45.83, c(0.0, 1e-3)).unwrap();
    let sol = solve_radial(&p, 0).unwrap();
    assert!(sol.residual < 1e-8, "{}", sol.residual);
    assert!(p.boundary_residuals(&sol).unwrap().iter().all(|&r| r < 1e-8));
}

#[test]
fn source_on_interface_rejected() {
    let stack = LayerStack::spheroid_fixture();
    let r = stack.interface_radii()[0];
    assert!(matches!(
        RadialProblem::new(&stack, r, c(0.0, 1.0)),
        Err(Error::SourceOnInterface { .. })
    ));
}

#[test]
fn homogeneous_stack_has_no_reflections() {
    let stack = homogeneous(0.1);
    for r0 in [30.0, 160.0] {
        let p = RadialProblem::new(&stack, r0, c(0.0, 1e-4)).unwrap();
        let src_shell = (0..p.shell_count())
            .find(|&s| p.shell_layout(s).2 == p.source_radius())
            .unwrap();
        for n in [0, 1, 5, 20] {
            let sol = p.solve(n).unwrap();
            let biggest = sol.coefficients.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for s in 0..p.shell_count() {
                let (_, _, _, grow, decay) = p.shell_layout(s);
                // Outside the source only outgoing waves, inside only regular ones.
                if s > src_shell {
                    if let Some(g) = grow {
                        assert!(sol.coefficients[g].norm() < 1e-10 * biggest, "n={n} shell={s}");
                    }
                } else if let Some(d) = decay {
                    assert!(sol.coefficients[d].norm() < 1e-10 * biggest, "n={n} shell={s}");
                }
            }
        }
    }
}

#[test]
fn homogeneous_radial_green_matches_closed_form() {
    // (ik/D) j_n(k r<) h_n(k r>)
    let d = 0.1;
    let stack = homogeneous(d);
    let omega = 1e-3;
    let k = wavenumber(sigma(0.0, d, omega));
    let r0 = 40.0;
    let mut g = GreensFunction::new(&stack, Spherical::new(r0, 0.0, 0.0), c(0.0, omega)).unwrap();
    for n in [0usize, 1, 3, 8] {
        for r in [5.0, 25.0, 55.0, 90.0, 150.0] {
            let (lo, hi) = if r < r0 { (r, r0) } else { (r0, r) };
            let expect = c(0.0, 1.0) * k / d
                * spherical_j(n, k * lo).unwrap()
                * spherical_h(n, k * hi).unwrap();
            let (got, _) = g.radial(n, r).unwrap();
            assert!(rel(got, expect) < 1e-9, "n={n} r={r}: {got} vs {expect}");
        }
    }
}

#[test]
fn homogeneous_reduction_frequency_domain() {
    let d = 0.1;
    let stack = homogeneous(d);
    let src = Spherical::new(40.0, 1.0, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &omega in &[1e-7, 1e-6, 1e-5, 1e-4, 1e-3] {
        let mut g = GreensFunction::new(&stack, src, c(0.0, omega)).unwrap();
        for _ in 0..12 {
            // random observer at distance 5..200 in a random direction
            let dist = 5.0 * 40f64.powf(rng.gen::<f64>());
            let u: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let s = (1.0 - u * u).sqrt();
            let a = src.to_cartesian();
            let x = Spherical::from_cartesian([
                a[0] + dist * s * phi.cos(),
                a[1] + dist * s * phi.sin(),
                a[2] + dist * u,
            ]);
            let expect = free_kernel(d, omega, dist);
            let got = g.evaluate(&x).unwrap();
            assert!(rel(got, expect) < 1e-6, "ω={omega:e} x={x:?}: rel {}", rel(got, expect));
        }
    }
}

#[test]
fn steady_state_limit() {
    let d = 0.1;
    let stack = homogeneous(d);
    let src = Spherical::new(30.0, 0.5, 0.0);
    let obs = Spherical::new(70.0, 1.0, 1.0);
    let dist = src.distance(&obs);
    let steady = 1.0 / (4.0 * PI * d * dist);
    let mut g = GreensFunction::new(&stack, src, c(0.0, 1e-14)).unwrap();
    let got = g.evaluate(&obs).unwrap();
    assert!(rel(got, c(steady, 0.0)) < 1e-4);
}

#[test]
fn value_depends_only_on_angle() {
    let stack = LayerStack::spheroid_fixture();
    let src = Spherical::new(45.83, PI / 2.0, PI / 2.0);
    let mut g = GreensFunction::new(&stack, src, c(0.0, 1e-4)).unwrap();
    // Rotate source and observer together about the z axis.
    let a = g.evaluate(&Spherical::new(150.0, PI / 2.0, 0.0)).unwrap();
    let src2 = Spherical::new(45.83, PI / 2.0, PI / 2.0 + 1.0);
    let mut g2 = GreensFunction::new(&stack, src2, c(0.0, 1e-4)).unwrap();
    let b = g2.evaluate(&Spherical::new(150.0, PI / 2.0, 1.0)).unwrap();
    assert!(rel(a, b) < 1e-12);
}

#[test]
fn interface_conditions_hold_from_both_sides() {
    let stack = LayerStack::spheroid_fixture();
    let src = Spherical::new(45.83, 0.0, 0.0);
    let mut g = GreensFunction::new(&stack, src, c(0.0, 3e-4)).unwrap();
    for (i, &radius) in stack.interface_radii().iter().enumerate() {
        let below = radius * (1.0 - 1e-15);
        for n in [0, 2, 7] {
            let (v_in, s_in) = g.radial(n, below).unwrap();
            let (v_out, s_out) = g.radial(n, radius).unwrap();
            let flux_in = s_in * stack.diffusion(i);
            let flux_out = s_out * stack.diffusion(i + 1);
            assert!(rel(flux_in, flux_out) < 1e-8, "flux i={i} n={n}");
            let kappa = stack.jump_constant(i);
            assert!(rel(v_in, v_out * kappa) < 1e-8, "jump i={i} n={n}");
        }
    }
}

#[test]
fn source_derivative_jump() {
    let stack = LayerStack::spheroid_fixture();
    let r0 = 45.83;
    let mut g = GreensFunction::new(&stack, Spherical::new(r0, 0.0, 0.0), c(0.0, 1e-4)).unwrap();
    let d_p = stack.diffusion(0);
    let h = 1e-4;
    for n in [0, 1, 4] {
        // one-sided second-order differences on each side of r0
        let f = |g: &mut GreensFunction, r: f64| g.radial(n, r).unwrap().0;
        let right = (-3.0 * f(&mut g, r0) + 4.0 * f(&mut g, r0 + h) - f(&mut g, r0 + 2.0 * h)) / (2.0 * h);
        let left = (3.0 * f(&mut g, r0) - 4.0 * f(&mut g, r0 - h) + f(&mut g, r0 - 2.0 * h)) / (2.0 * h);
        let jump = right - left;
        let expect = c(-1.0 / (d_p * r0 * r0), 0.0);
        assert!(rel(jump, expect) < 1e-6, "n={n}: {jump} vs {expect}");
    }
}

#[test]
fn truncation_is_stable() {
    let stack = LayerStack::spheroid_fixture();
    let src = Spherical::new(45.83, PI / 2.0, PI / 2.0);
    let mut g = GreensFunction::new(&stack, src, c(0.0, 2e-4)).unwrap();
    for obs in [
        Spherical::new(20.0, PI / 2.0, 0.0),
        Spherical::new(137.5, PI / 2.0, 0.0),
        Spherical::new(229.2, PI / 2.0, 0.0),
        Spherical::new(350.0, PI / 2.0, 0.0),
    ] {
        for form in [SeriesForm::Regularized, SeriesForm::Direct] {
            let v = g.evaluate_with(&obs, form).unwrap();
            let more = g.harmonic_sum(&obs, v.terms - 1 + 5, form).unwrap();
            assert!(rel(more, v.value) < 1e-8, "{obs:?} {form:?}");
        }
    }
}

#[test]
fn regularized_and_direct_forms_agree_away_from_source() {
    let stack = LayerStack::spheroid_fixture();
    let src = Spherical::new(45.83, PI / 2.0, PI / 2.0);
    let mut g = GreensFunction::new(&stack, src, c(0.0, 1e-4)).unwrap();
    let obs = Spherical::new(15.0, 0.4, 2.0);
    let a = g.evaluate_with(&obs, SeriesForm::Regularized).unwrap().value;
    let b = g.evaluate_with(&obs, SeriesForm::Direct).unwrap().value;
    assert!(rel(a, b) < 1e-9);
}

#[test]
fn homogeneous_reciprocity() {
    let stack = homogeneous(0.1);
    let a = Spherical::new(30.0, 0.4, 1.0);
    let b = Spherical::new(140.0, 2.0, 4.0);
    let s = c(0.0, 1e-4);
    let gab = GreensFunction::new(&stack, a, s).unwrap().evaluate(&b).unwrap();
    let gba = GreensFunction::new(&stack, b, s).unwrap().evaluate(&a).unwrap();
    assert!(rel(gab, gba) < 1e-10);
}

#[test]
fn observation_at_source_is_an_error() {
    let stack = LayerStack::spheroid_fixture();
    let src = SourceSpec::at(Spherical::new(45.83, 1.0, 1.0));
    assert!(matches!(
        greens_frequency(&stack, &src, &src.position, 1e-3),
        Err(Error::ObservationAtSource)
    ));
}

/// Literal double sum over (m, n) with cos(m Δφ) azimuthal factors and the
/// Neumann weight (1 for m = 0, 2 otherwise), using normalised associated
/// Legendre functions so that (n-m)!/(n+m)! P P stays finite.
fn double_sum(g: &mut GreensFunction, src: &Spherical, obs: &Spherical, n_max: usize) -> Complex64 {
    let mut total = c(0.0, 0.0);
    for n in 0..=n_max {
        let (t, _) = g.radial(n, obs.r).unwrap();
        let mut angular = 0.0;
        for m in 0..=n {
            let lam = if m == 0 { 1.0 } else { 2.0 };
            let h = lam * (2 * n + 1) as f64 / 2.0
                * legendre_p_normalized(n, m, src.theta.cos()).unwrap();
            angular += h
                * legendre_p_normalized(n, m, obs.theta.cos()).unwrap()
                * (m as f64 * (obs.phi - src.phi)).cos();
        }
        total += t * (angular / (2.0 * PI));
    }
    total
}

#[test]
fn double_sum_matches_collapsed_sum() {
    let stack = LayerStack::spheroid_fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let src = Spherical::new(rng.gen_range(5.0..80.0), rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI));
        let obs = Spherical::new(rng.gen_range(100.0..400.0), rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI));
        let mut g = GreensFunction::new(&stack, src, c(0.0, 1e-4)).unwrap();
        let a = g.harmonic_sum(&obs, 30, SeriesForm::Direct).unwrap();
        let b = double_sum(&mut g, &src, &obs, 30);
        assert!(rel(b, a) < 1e-10, "{} ", rel(b, a));
    }
}

#[test]
fn sweep_bin_matches_single_evaluation() {
    let stack = LayerStack::spheroid_fixture();
    let mut src = SourceSpec::at(Spherical::new(45.83, PI / 2.0, PI / 2.0));
    src.emission_time = 100.0;
    let obs = Spherical::new(137.5, PI / 2.0, 0.0);
    let grid = FrequencyGrid::new(2e5, 8, 0.0).unwrap();
    let spec = spectral_sweep(&stack, &src, &[Probe::point(obs)], &grid).unwrap();
    for m in 1..grid.bins() {
        let direct = greens_frequency(&stack, &src, &obs, grid.omega(m)).unwrap();
        assert!(rel(spec[0].values[m], direct) < 1e-12, "m={m}");
    }
}

#[test]
fn hermitian_extension_is_exact() {
    let stack = LayerStack::spheroid_fixture();
    let src = SourceSpec::at(Spherical::new(45.83, PI / 2.0, PI / 2.0));
    let grid = FrequencyGrid::new(2e5, 16, 6.0).unwrap();
    let spec = spectral_sweep(&stack, &src, &[Probe::point(Spherical::new(300.0, 1.0, 0.0))], &grid).unwrap();
    let two = spec[0].hermitian_extension();
    assert_eq!(two.len(), 16);
    let half = 8;
    for m in 1..half {
        let neg = two[half - 1 - m];
        let pos = two[half - 1 + m];
        assert_eq!(neg.omega, -pos.omega);
        assert_eq!(neg.value, pos.value.conj());
    }
}

#[test]
fn cached_and_uncached_sweeps_are_bit_identical() {
    let stack = LayerStack::spheroid_fixture();
    let src = SourceSpec::at(Spherical::new(45.83, PI / 2.0, PI / 2.0));
    let grid = FrequencyGrid::new(2e5, 32, 6.0).unwrap();
    let probes = vec![
        Probe::point(Spherical::new(20.0, PI / 2.0, 0.0)),
        Probe::point(Spherical::new(229.2, PI / 2.0, 0.0)),
        Probe::AngularMean(vec![(50.0, 1.0), (300.0, 2.0)]),
    ];
    let a = spectral_sweep(&stack, &src, &probes, &grid).unwrap();
    let b = spectral_sweep_uncached(&stack, &src, &probes, &grid).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bessel_pair_conversion_reproduces_field() {
    // The A·j + B·y form cancels badly once |Im kr| grows, so check the
    // conversion at a frequency where it is well conditioned.
    let stack = LayerStack::spheroid_fixture();
    let r0 = 45.83;
    let s = c(0.0, 1e-6);
    let p = RadialProblem::new(&stack, r0, s).unwrap();
    let mut g = GreensFunction::new(&stack, Spherical::new(r0, 0.0, 0.0), s).unwrap();
    for n in [0, 3] {
        let sol = p.solve(n).unwrap();
        let pairs = p.bessel_pairs(&sol);
        for (shell, r) in [(0, 20.0), (1, 60.0), (2, 137.5), (3, 230.0), (4, 400.0)] {
            let layer = p.shell_layout(shell).0;
            let k = p.layer_wavenumber(layer);
            let pair = pairs[shell].unwrap();
            let y = layercir::specfun::spherical_y(n, k * r).unwrap();
            let direct = pair.a * spherical_j(n, k * r).unwrap() + pair.b * y;
            let (field, _) = g.radial(n, r).unwrap();
            assert!(rel(direct, field) < 1e-10, "n={n} shell={shell}");
        }
    }
}
