//! Worked examples for each module, exercised through the public API.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fracblow_core::analysis::{
    classical_residual, classify_regime, fit_boundary_rate, regime_statistics, subcritical_check, weak_norm_decay,
    Regime, Verdict,
};
use fracblow_core::ctau::{c_tau, scan, sign_changes, tau0};
use fracblow_core::fraclap::{check_supersolution, frac_lap_eval, DistancePower, Scaled};
use fracblow_core::green::{green_apply, green_kernel, martin_kernel};
use fracblow_core::measures::{potential, potential_field};
use fracblow_core::nonlinearity::NamedCustom;
use fracblow_core::quadrature::{integrate, integrate_2d_polar, Interval, SingularitySpec};
use fracblow_core::verify::supersolution_points;
use fracblow_core::{
    solve_family, truncate, BallDomain, BallPoint, BoundaryMeasure, Error, FieldOnGrid, FracOrder, GradedGrid,
    Nonlinearity, SolveOptions, Solver,
};

fn order(a: f64) -> FracOrder {
    FracOrder::new(a).unwrap()
}

fn random_interior(rng: &mut ChaCha8Rng, rho_min: f64) -> BallPoint {
    loop {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let r2: f64 = x[0] * x[0] + x[1] * x[1];
        if r2 < 1.0 && 1.0 - r2.sqrt() > rho_min {
            return BallPoint::from_cartesian(&x).unwrap();
        }
    }
}

#[test]
fn quadrature_closed_forms() {
    let q = integrate(|t| t.powf(-0.5), Interval::Finite(0.0, 1.0), SingularitySpec::left(-0.5), 1e-10).unwrap();
    assert!((q.value - 2.0).abs() < 1e-10);
    assert!(q.error_estimate >= 0.0 && q.evaluations >= 1);
    let q = integrate(|t| (1.0 + t).powi(-2), Interval::SemiInfinite(0.0), SingularitySpec::tail(0.0, 2.0), 1e-10)
        .unwrap();
    assert!((q.value - 1.0).abs() < 1e-10);
    let q = integrate_2d_polar(|_, _| 1.0, SingularitySpec::regular(), 1e-10).unwrap();
    assert!((q.value - PI).abs() < 1e-10);
    let q = integrate_2d_polar(|r, _| r.powf(-0.5), SingularitySpec::left(-0.5), 1e-9).unwrap();
    assert!((q.value - 4.0 * PI / 3.0).abs() < 1e-8);
}

#[test]
fn quadrature_rejects_inconsistent_specs() {
    let bad = integrate(|t| t.powf(-1.5), Interval::Finite(0.0, 1.0), SingularitySpec::left(-1.5), 1e-8);
    assert!(matches!(bad, Err(Error::InvalidSpec(_))));
    let bad = integrate(|t| 1.0 / t, Interval::SemiInfinite(1.0), SingularitySpec::tail(0.0, 1.0), 1e-8);
    assert!(matches!(bad, Err(Error::InvalidSpec(_))));
}

#[test]
fn tightening_tolerance_never_loosens_the_estimate() {
    let f = |t: f64| t.powf(-0.3) * (3.0 * t).cos();
    let mut last = f64::INFINITY;
    for k in 4..12 {
        let q = integrate(f, Interval::Finite(0.0, 1.0), SingularitySpec::left(-0.3), 10f64.powi(-k)).unwrap();
        assert!(q.error_estimate <= last);
        last = q.error_estimate;
    }
}

#[test]
fn c_tau_vanishes_at_alpha_minus_one() {
    assert!(c_tau(order(0.5), -0.5).unwrap().value.abs() < 1e-6);
    assert!(c_tau(order(0.25), -0.75).unwrap().value.abs() < 1e-6);
    assert!((tau0(order(0.5), 1e-8).unwrap() + 0.5).abs() < 1e-8);
    assert!((tau0(order(0.9), 1e-8).unwrap() + 0.1).abs() < 1e-8);
    assert!(matches!(c_tau(order(0.5), 0.0), Err(Error::Domain(_))));
    assert!(matches!(c_tau(order(0.5), -1.0), Err(Error::Domain(_))));
}

#[test]
fn c_tau_changes_sign_once_on_a_scan() {
    for a in [0.2, 0.5, 0.8] {
        let values = scan(order(a), 50).unwrap();
        assert_eq!(sign_changes(&values), 1, "alpha {a}");
    }
}

#[test]
fn kernel_decays_like_distance_power_at_the_boundary() {
    let dom = BallDomain::disk();
    let o = order(0.5);
    let x = BallPoint::polar(0.5, 0.0);
    let ratios: Vec<f64> = (2..9)
        .map(|j| {
            let rho = 10f64.powi(-j);
            green_kernel(&dom, o, &x, &BallPoint::polar(rho, 0.0)).unwrap().value / rho.sqrt()
        })
        .collect();
    for w in ratios.windows(3) {
        assert!((w[2] - w[1]).abs() < 0.5 * (w[1] - w[0]).abs() + 1e-12);
    }
    assert!(ratios.last().unwrap().is_finite() && *ratios.last().unwrap() > 0.0);
}

#[test]
fn martin_kernel_lies_in_a_distance_band() {
    let dom = BallDomain::disk();
    let o = order(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for _ in 0..100 {
        let x = random_interior(&mut rng, 1e-4);
        let th: f64 = rng.gen_range(0.0..2.0 * PI);
        let z = [th.cos(), th.sin()];
        let m = martin_kernel(&dom, o, &x, &z).unwrap().value;
        let d2 = x.dist2_to_boundary(&z);
        let reduced = m * d2 / x.rho().sqrt();
        lo = lo.min(reduced);
        hi = hi.max(reduced);
    }
    assert!(lo > 0.0 && hi / lo < 20.0, "band [{lo}, {hi}]");
}

#[test]
fn martin_kernel_integrates_to_the_hausdorff_potential() {
    let dom = BallDomain::disk();
    let o = order(0.5);
    let x = BallPoint::from_cartesian(&[0.4, 0.3]).unwrap();
    let n = 4096;
    // periodic trapezoid rule in the boundary angle
    let sum: f64 = (0..n)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / n as f64;
            martin_kernel(&dom, o, &x, &[th.cos(), th.sin()]).unwrap().value
        })
        .sum::<f64>()
        * 2.0
        * PI
        / n as f64;
    let p = potential(&dom, o, &BoundaryMeasure::Hausdorff, &x).unwrap();
    assert!((sum - p).abs() < 1e-5 * p, "{sum} vs {p}");
}

#[test]
fn volume_potential_of_zero_is_zero_and_power_densities_are_bounded() {
    let dom = BallDomain::disk();
    let o = order(0.5);
    let grid = GradedGrid::new(1e-4, 1.35, 8).unwrap();
    let zero = FieldOnGrid::from_fn(grid, 0.0, |_| 0.0).unwrap();
    assert_eq!(green_apply(&dom, o, &zero, &BallPoint::polar(0.3, 1.0)).unwrap(), 0.0);
    // f = ρ^{(α-1)p} with p = 2.5 gives 𝔾[f] ~ ρ^{2α-(1-α)p}
    let p = 2.5;
    let grid = GradedGrid::radial(1e-6, 1.35).unwrap();
    let f = FieldOnGrid::from_fn(grid, (1.0 - 0.5) * p, |x| x.rho().powf(-0.5 * p)).unwrap();
    let scaled: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&rho| green_apply(&dom, o, &f, &BallPoint::polar(rho, 0.0)).unwrap() * rho.powf(0.5 * p - 1.0))
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(lo > 0.0 && hi / lo < 3.0, "{scaled:?}");
}

#[test]
fn hausdorff_potential_has_rate_alpha_minus_one() {
    let dom = BallDomain::disk();
    let grid = GradedGrid::radial(1e-5, 1.35).unwrap();
    for a in [0.3, 0.5, 0.7] {
        let field = potential_field(&dom, order(a), &BoundaryMeasure::Hausdorff, &grid).unwrap();
        let fit = fit_boundary_rate(&field.samples, (1e-4, 1e-1)).unwrap();
        assert!((fit.exponent - (a - 1.0)).abs() < 0.02, "alpha {a}: {}", fit.exponent);
    }
}

#[test]
fn potentials_are_additive_and_match_pointwise_evaluation() {
    let dom = BallDomain::disk();
    let o = order(0.5);
    let z0 = [1.0, 0.0];
    let sum = BoundaryMeasure::Sum {
        parts: vec![(2.0, BoundaryMeasure::Hausdorff), (0.5, BoundaryMeasure::dirac(&z0)), (0.0, BoundaryMeasure::dirac(&[0.0, 1.0]))],
    };
    let grid = GradedGrid::new(1e-3, 1.5, 8).unwrap();
    let field = potential_field(&dom, o, &sum, &grid).unwrap();
    for idx in (0..grid.node_count()).step_by(7) {
        let x = grid.node(idx);
        let h = potential(&dom, o, &BoundaryMeasure::Hausdorff, &x).unwrap();
        let d = potential(&dom, o, &BoundaryMeasure::dirac(&z0), &x).unwrap();
        let s = potential(&dom, o, &sum, &x).unwrap();
        assert!((s - (2.0 * h + 0.5 * d)).abs() <= 1e-12 * s);
        let stored = field.samples.value(idx);
        assert!((stored - s).abs() <= 1e-12 * s);
    }
    let hausdorff = potential_field(&dom, o, &BoundaryMeasure::Hausdorff, &grid).unwrap();
    for j in 0..grid.n_levels() {
        let first = hausdorff.samples.normalized()[grid.index(j, 0)];
        for i in 1..grid.n_theta() {
            let v = hausdorff.samples.normalized()[grid.index(j, i)];
            assert!((v - first).abs() <= 1e-8 * first);
        }
    }
}

#[test]
fn dirac_potential_lies_in_a_band() {
    let dom = BallDomain::disk();
    let o = order(0.5);
    let z0 = [1.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values: Vec<f64> = (0..100)
        .map(|_| {
            let x = random_interior(&mut rng, 1e-4);
            potential(&dom, o, &BoundaryMeasure::dirac(&z0), &x).unwrap() * x.dist2_to_boundary(&z0) / x.rho().sqrt()
        })
        .collect();
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    assert!(lo > 0.0 && hi / lo < 20.0, "band [{lo}, {hi}]");
}

#[test]
fn weak_norm_decay_of_hausdorff_potential() {
    let dom = BallDomain::disk();
    let o = order(0.5);
    let grid = GradedGrid::radial(1e-8, 1.35).unwrap();
    let field = potential_field(&dom, o, &BoundaryMeasure::Hausdorff, &grid).unwrap();
    let est = weak_norm_decay(&field.samples, o, o.p_star()).unwrap();
    assert!((est.fitted_decay + 3.0).abs() < 0.15, "{}", est.fitted_decay);
    assert!(est.band_constant.is_finite());
    let flat = FieldOnGrid::from_fn(grid, 0.0, |_| 2.0).unwrap();
    assert!(matches!(weak_norm_decay(&flat, o, 3.0), Err(Error::DegenerateField(_))));
}

#[test]
fn power_profile_is_a_super_solution() {
    let dom = BallDomain::disk();
    let o = order(0.5);
    let pts = supersolution_points(15);
    let report = check_supersolution(&dom, o, 2.5, &pts, 1e-3).unwrap();
    assert!(report.c_p < 0.0);
    assert!(report.points.iter().all(|pt| pt.relative_residual >= -1e-3));
    assert!(report.residuals_at(2.0 * report.lambda0).iter().all(|r| *r >= -1e-3));
    assert!(matches!(check_supersolution(&dom, o, 1.5, &pts, 1e-3), Err(Error::Precondition(_))));
}

#[test]
fn power_profile_laplacian_is_negative_near_the_boundary() {
    let dom = BallDomain::disk();
    let o = order(0.5);
    let beta = -2.0 * 0.5 / 1.5;
    let w = DistancePower { exponent: beta };
    for rho in [1e-3, 1e-2, 5e-2, 0.1, 0.3] {
        let x = BallPoint::polar(rho, 0.4);
        let scaled = frac_lap_eval(&dom, o, &w, &x, 1e-6).unwrap() * rho.powf(1.0 - beta);
        assert!(scaled < -0.05, "rho {rho}: {scaled}");
    }
    // constants extended by zero only feel the far field
    let constant = Scaled { factor: 3.0, inner: DistancePower { exponent: 0.0 } };
    let v = frac_lap_eval(&dom, o, &constant, &BallPoint::center(2), 1e-8).unwrap();
    assert!((v - 6.0 * PI).abs() < 1e-6, "{v}");
}

#[test]
fn truncation_examples() {
    let g = Nonlinearity::power(2.0).unwrap();
    let g4 = truncate(&g, 4.0).unwrap();
    assert_eq!(g4.eval(1.0), 1.0);
    assert_eq!(g4.eval(3.0), 4.0);
    assert_eq!(g4.eval(0.0), 0.0);
    assert!(matches!(truncate(&g, 0.0), Err(Error::InvalidLevel(_))));
    let m = 5.0;
    let gap = |n: f64| {
        let gn = truncate(&g, n).unwrap();
        (0..=1000).map(|i| (g.eval(m * i as f64 / 1000.0) - gn.eval(m * i as f64 / 1000.0)).abs()).fold(0.0, f64::max)
    };
    assert!(gap(10.0) > 0.0 && gap(100.0) == 0.0);
}

fn radial_solver(g: impl Into<fracblow_core::Reaction>, rho_min: f64) -> Solver {
    let grid = GradedGrid::radial(rho_min, 1.35).unwrap();
    Solver::new(&BallDomain::disk(), order(0.5), g, &BoundaryMeasure::Hausdorff, &grid).unwrap()
}

#[test]
fn zero_nonlinearity_returns_the_harmonic_profile() {
    let s = radial_solver(Nonlinearity::Zero, 1e-4);
    let r = s.solve(3.0, &SolveOptions::default(), None).unwrap();
    assert_eq!(r.iterations, 1);
    for (u, p) in r.solution.raw().iter().zip(s.potential()) {
        assert!((u - 3.0 * p).abs() <= 1e-14 * u);
    }
}

#[test]
fn power_solution_keeps_the_harmonic_rate() {
    let grid = GradedGrid::new(1e-5, 1.35, 16).unwrap();
    let s = Solver::new(&BallDomain::disk(), order(0.5), Nonlinearity::power(2.5).unwrap(), &BoundaryMeasure::Hausdorff, &grid)
        .unwrap();
    let r = s.solve(1.0, &SolveOptions::default().with_tol(1e-8), None).unwrap();
    assert!(r.sandwich_ok);
    assert!(r.residual < 1e-6);
    let fit = fit_boundary_rate(&r.solution, (1e-4, 1e-2)).unwrap();
    assert!((fit.exponent + 0.5).abs() < 0.02, "{}", fit.exponent);
}

#[test]
fn solutions_decrease_with_the_truncation_level() {
    let g = Nonlinearity::power(2.5).unwrap();
    let opts = SolveOptions::default().with_tol(1e-10);
    let n = 3.0;
    let un = radial_solver(truncate(&g, n).unwrap(), 1e-4).solve(4.0, &opts, None).unwrap().solution.raw();
    let u2n = radial_solver(truncate(&g, 2.0 * n).unwrap(), 1e-4).solve(4.0, &opts, None).unwrap().solution.raw();
    let full = radial_solver(g, 1e-4).solve(4.0, &opts, None).unwrap().solution.raw();
    for ((a, b), c) in un.iter().zip(&u2n).zip(&full) {
        assert!(*b <= a * (1.0 + 1e-8));
        assert!(*c <= b * (1.0 + 1e-8));
    }
}

#[test]
fn family_increases_with_k() {
    let s = radial_solver(Nonlinearity::power(2.5).unwrap(), 1e-6);
    let ks = [1.0, 2.0, 4.0, 8.0, 16.0];
    let family = solve_family(&s, &ks, &SolveOptions::default().with_tol(1e-9)).unwrap();
    for w in family.windows(2) {
        for (a, b) in w[0].solution.raw().iter().zip(w[1].solution.raw()) {
            assert!(b >= a * (1.0 - 1e-8));
        }
    }
}

#[test]
fn correction_becomes_small_relative_to_the_harmonic_profile() {
    let s = radial_solver(Nonlinearity::power(2.5).unwrap(), 1e-5);
    let kp: Vec<f64> = s.potential().to_vec();
    let corr = s.correction(&kp);
    let grid = s.grid();
    let last_decade = grid.levels_in(1e-5, 1e-4);
    let scaled: Vec<f64> = last_decade.iter().map(|&j| corr[grid.index(j, 0)] * grid.levels()[j].sqrt()).collect();
    assert!(scaled.len() >= 5);
    // levels run outward, so the scaled correction must increase along them
    for w in scaled.windows(2) {
        assert!(w[1] > w[0], "{scaled:?}");
    }
}

#[test]
fn classical_residual_is_small_at_random_nodes() {
    let grid = GradedGrid::radial(1e-4, 1.35).unwrap();
    let s = Solver::new(&BallDomain::disk(), order(0.5), Nonlinearity::power(2.5).unwrap(), &BoundaryMeasure::Hausdorff, &grid)
        .unwrap();
    let r = s.solve(1.0, &SolveOptions::default().with_tol(1e-10), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let levels: Vec<usize> = (0..10).map(|_| rng.gen_range(0..grid.n_levels())).collect();
    let residuals = classical_residual(s.order(), s.reaction(), &r, &levels).unwrap();
    for p in residuals {
        assert!(p.scaled_residual < 5e-2, "rho {}: {}", p.rho, p.scaled_residual);
    }
}

#[test]
fn supercritical_powers_are_rejected() {
    let grid = GradedGrid::radial(1e-4, 1.35).unwrap();
    let res = Solver::new(&BallDomain::disk(), order(0.5), Nonlinearity::power(3.0).unwrap(), &BoundaryMeasure::Hausdorff, &grid);
    assert!(matches!(res, Err(Error::SubcriticalityViolated(_))));
}

#[test]
fn subcriticality_verdicts() {
    let o = order(0.5);
    assert_eq!(subcritical_check(&Nonlinearity::power(2.0).unwrap(), o, 2).boundary_condition, Verdict::Convergent);
    assert_eq!(subcritical_check(&Nonlinearity::power(3.0).unwrap(), o, 2).boundary_condition, Verdict::Divergent);
    let custom = subcritical_check(&NamedCustom::SquareOverLog.build(), o, 2);
    assert_eq!(custom.boundary_condition, Verdict::Convergent);
}

#[test]
fn small_powers_blow_up_along_the_family() {
    let s = radial_solver(Nonlinearity::power(1.5).unwrap(), 1e-8);
    let ks: Vec<f64> = (0..=10).map(|j| 2f64.powi(j)).collect();
    let family = solve_family(&s, &ks, &SolveOptions::default().with_tol(1e-8)).unwrap();
    let stats = regime_statistics(&family, s.order(), 1.5).unwrap();
    assert!(stats.decade_growth >= 2.0, "{}", stats.decade_growth);
    assert!(matches!(classify_regime(&family, s.order(), 1.5).unwrap(), Regime::FamilyBlowUp));
    let center = family.last().unwrap().solution.center_value();
    assert!(center > 10.0 * family[0].solution.center_value());
}
