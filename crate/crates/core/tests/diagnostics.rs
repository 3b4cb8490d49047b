use std::sync::Arc;

use linfel_core::diagnostics::{
    almost_minimiser_mc, aronsson_residual, boundary_corrector, check_el_system, energy_identities, oracle_1d,
    Bump, BumpShape, McOptions,
};
use linfel_core::grid::{Grid, ScalarField};
use linfel_core::problem::{
    antiderivative_numeric, BoundaryData, BoundaryPreset, CoefficientModel, ProblemSpec, Reaction, ScalarReaction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec_on(grid: Grid, reaction: Reaction, preset: BoundaryPreset) -> ProblemSpec {
    let bd = BoundaryData::from_preset(Arc::new(grid), &preset).unwrap();
    ProblemSpec::new(CoefficientModel::Identity, reaction, bd).unwrap()
}

fn oracle_spec(n: usize, a: f64, b: f64) -> ProblemSpec {
    spec_on(Grid::interval(1.0, n).unwrap(), Reaction::Zero, BoundaryPreset::Oracle { a, b })
}

fn sampled_multiplier(spec: &ProblemSpec, a: f64, b: f64) -> ScalarField {
    let o = oracle_1d(a, b).unwrap();
    ScalarField::from_fn(spec.grid().clone(), |x| o.f(x[0])).unwrap()
}

fn interior_bump(spec: &ProblemSpec, centre: f64, radius: f64, height: f64) -> ScalarField {
    let bump = Bump {
        centre: [centre, 0.0],
        shape: BumpShape::Radial { radius },
    };
    let u = spec.boundary().u0();
    let b = bump.sample(spec.grid());
    u.with_values(u.values().iter().zip(b.values()).map(|(x, y)| x + height * y).collect())
        .unwrap()
}

#[test]
fn oracle_triple_passes_the_el_checks() {
    let spec = oracle_spec(513, 1.0, 0.0);
    let f = sampled_multiplier(&spec, 1.0, 0.0);
    let el = check_el_system(&spec, spec.boundary().u0(), &f, 4.0).unwrap();
    let h = spec.grid().h_min();
    assert!(el.el1 <= 1e-12, "{el:?}");
    assert!(el.flatness <= 1e-12, "{el:?}");
    assert!(el.el2 <= 10.0 * h * h, "{el:?}");
    assert_eq!(el.sign_violations, 0);
    assert!(!el.degenerate);
}

#[test]
fn random_oracle_round_trips_with_switch_on_a_node() {
    let n = 33;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let node = rng.random_range(4..n - 4);
        let s = node as f64 / (n - 1) as f64;
        let k = (0.5 + 4.0 * rng.random::<f64>()) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let a = k * (0.5 * s * s + s * (1.0 - s) - 0.5 * (1.0 - s) * (1.0 - s));
        let b = k * (2.0 * s - 1.0);
        let o = oracle_1d(a, b).unwrap();
        assert!((o.e_infty - k.abs()).abs() <= 1e-10 * k.abs(), "({a}, {b})");
        assert!((o.switch.unwrap() - s).abs() <= 1e-10);
        assert!(o.self_check(100) <= 1e-10 * (1.0 + k.abs()));
        let spec = oracle_spec(n, a, b);
        let f = sampled_multiplier(&spec, a, b);
        let el = check_el_system(&spec, spec.boundary().u0(), &f, o.e_infty).unwrap();
        let h = spec.grid().h_min();
        assert!(el.el1 <= 1e-12, "({a}, {b}) {el:?}");
        assert!(el.el2 <= 10.0 * h * h, "({a}, {b}) {el:?}");
        assert_eq!(el.sign_violations, 0);
    }
}

#[test]
fn constant_multiplier_for_constant_residual() {
    let c = -2.5;
    let spec = spec_on(
        Grid::rectangle([1.0, 1.0], [17, 17]).unwrap(),
        Reaction::Zero,
        BoundaryPreset::Quadratic { c0: 0.0, cx: 0.3, cy: 0.0, cxx: 0.5 * c, cxy: 0.0, cyy: 0.0 },
    );
    let f = ScalarField::constant(spec.grid().clone(), -1.0);
    let el = check_el_system(&spec, spec.boundary().u0(), &f, c.abs()).unwrap();
    assert!(el.el1 <= 1e-12 && el.flatness <= 1e-12, "{el:?}");
    assert!(el.el2 <= 1e-12, "{el:?}");
    let zero = ScalarField::zeros(spec.grid().clone());
    assert!(check_el_system(&spec, spec.boundary().u0(), &zero, 1.0).unwrap().degenerate);
}

#[test]
fn bump_perturbation_is_detected() {
    let spec = oracle_spec(257, 1.0, 0.0);
    let f = sampled_multiplier(&spec, 1.0, 0.0);
    let bad = interior_bump(&spec, 0.3, 0.1, 0.1);
    let el = check_el_system(&spec, &bad, &f, 4.0).unwrap();
    assert!(el.el1 > 0.01 && el.flatness > 0.01, "{el:?}");
}

#[test]
fn aronsson_residual_profiles() {
    let flat = spec_on(
        Grid::interval(1.0, 65).unwrap(),
        Reaction::Zero,
        BoundaryPreset::Quadratic { c0: 0.0, cx: 0.0, cy: 0.0, cxx: 1.5, cxy: 0.0, cyy: 0.0 },
    );
    assert!(aronsson_residual(&flat, flat.boundary().u0()).unwrap().value <= 1e-10);

    let spec = oracle_spec(257, 1.0, 0.0);
    let r = aronsson_residual(&spec, spec.boundary().u0()).unwrap();
    let g = spec.grid();
    let switch = 128;
    assert!(r.value > 0.1);
    assert!(r.node.unwrap().abs_diff(switch) <= 1);
    for &k in g.free_nodes() {
        if k.abs_diff(switch) > 1 {
            assert!(r.density.values()[k] <= 1e-10, "{k}");
        }
    }

    let wavy = spec_on(Grid::interval(1.0, 65).unwrap(), Reaction::Zero, BoundaryPreset::Sine { amplitude: 1.0 });
    let v = aronsson_residual(&wavy, wavy.boundary().u0()).unwrap().value;
    assert!(v > 1e-3, "{v}");
}

fn mc(trials: usize, threads: usize) -> McOptions {
    McOptions {
        trials,
        threads: Some(threads),
        ..Default::default()
    }
}

#[test]
fn oracle_extremal_is_an_almost_minimiser() {
    let spec = oracle_spec(129, 1.0, 0.0);
    let stats = almost_minimiser_mc(&spec, spec.boundary().u0(), &mc(200, 2), 5).unwrap();
    assert_eq!(stats.c2_bound, 0.0);
    assert_eq!(stats.violations, 0, "{stats:?}");
    assert!(stats.almost_minimising && stats.scaling_stable);
    assert!(stats.fitted_m <= 1e-8);
    assert_eq!(stats.consistent_pairs, 100);
}

#[test]
fn non_minimisers_fail_the_monte_carlo_test() {
    let wavy = spec_on(Grid::interval(1.0, 129).unwrap(), Reaction::Zero, BoundaryPreset::Sine { amplitude: 1.0 });
    let stats = almost_minimiser_mc(&wavy, wavy.boundary().u0(), &mc(40, 1), 5).unwrap();
    assert!(stats.violations > 0 && !stats.scaling_stable, "{stats:?}");
    let small = stats.per_amplitude.last().unwrap().max_d;
    let big = stats.per_amplitude[0].max_d;
    assert!(small > 50.0 * big, "{stats:?}");

    let spec = oracle_spec(129, 1.0, 0.0);
    let bad = interior_bump(&spec, 0.3, 0.1, 0.1);
    let stats = almost_minimiser_mc(&spec, &bad, &mc(40, 1), 5).unwrap();
    assert!(stats.violations > 0, "{stats:?}");
}

#[test]
fn monte_carlo_is_independent_of_worker_count() {
    let spec = spec_on(
        Grid::rectangle([1.0, 1.0], [15, 15]).unwrap(),
        Reaction::GOfU { g: ScalarReaction::NegCube },
        BoundaryPreset::Sine { amplitude: 0.5 },
    );
    let a = almost_minimiser_mc(&spec, spec.boundary().u0(), &mc(24, 1), 42).unwrap();
    let b = almost_minimiser_mc(&spec, spec.boundary().u0(), &mc(24, 5), 42).unwrap();
    assert_eq!(a, b);
    assert!(a.c2_bound > 0.0);
}

#[test]
fn corrector_vanishes_for_matched_target() {
    let spec = spec_on(
        Grid::rectangle([1.0, 0.8], [17, 15]).unwrap(),
        Reaction::Linear { c0: 0.0, cy: -1.0, cz: [0.5, 0.0] },
        BoundaryPreset::Sine { amplitude: 1.0 },
    );
    let u0 = spec.boundary().u0().clone();
    let target = spec.linearized_apply(&u0, &u0).unwrap();
    let r = boundary_corrector(&spec, &target, &u0).unwrap();
    assert_eq!(r.v.values(), u0.values());
    assert!(r.collars.iter().all(|c| c.error < 1e-12));
}

#[test]
fn corrector_in_one_dimension_is_half_rho_squared() {
    let spec = spec_on(Grid::interval(1.0, 41).unwrap(), Reaction::Zero, BoundaryPreset::Zero);
    let g = spec.grid();
    let one = ScalarField::constant(g.clone(), 1.0);
    let r = boundary_corrector(&spec, &one, spec.boundary().u0()).unwrap();
    let x = g.coords(3)[0];
    assert!((r.v.values()[3] - 0.5 * x * x).abs() < 1e-15);
    let lv = spec.linearized_apply(spec.boundary().u0(), &r.v).unwrap();
    assert!((lv.values()[0] - 1.0).abs() < 1e-9);
    assert!((lv.values()[40] - 1.0).abs() < 1e-9);
    assert!(r.collars.iter().all(|c| c.error < 1e-9), "{:?}", r.collars);
}

#[test]
fn corrector_error_shrinks_with_the_collar() {
    let spec = spec_on(
        Grid::rectangle([1.0, 1.0], [41, 41]).unwrap(),
        Reaction::Linear { c0: 0.0, cy: 2.0, cz: [1.0, -0.5] },
        BoundaryPreset::Affine { c0: 0.2, cx: 1.0, cy: 0.0 },
    );
    let target = ScalarField::from_fn(spec.grid().clone(), |x| 1.0 + x[0] * x[1]).unwrap();
    let r = boundary_corrector(&spec, &target, spec.boundary().u0()).unwrap();
    let e: Vec<f64> = r.collars.iter().map(|c| c.error).collect();
    assert!(e[0] < e[1] && e[1] < e[2], "{e:?}");
}

fn energy1_residual(n: usize) -> f64 {
    let g = Arc::new(Grid::interval(1.0, n).unwrap());
    let u0 = ScalarField::from_fn(g, |x| (std::f64::consts::PI * x[0]).sin() + 0.5 * x[0]).unwrap();
    let spec = ProblemSpec::new(
        CoefficientModel::Identity,
        Reaction::GOfU { g: ScalarReaction::NegCube },
        BoundaryData::from_field(u0),
    )
    .unwrap();
    let ids = energy_identities(&spec, spec.boundary().u0()).unwrap();
    assert!(!ids.admissibility_applicable);
    ids.energy1.relative.max(ids.energy2.relative)
}

#[test]
fn energy_identities_converge_at_second_order() {
    let coarse = energy1_residual(65);
    let fine = energy1_residual(129);
    let ratio = coarse / fine;
    assert!(coarse < 1e-2 && (3.0..5.0).contains(&ratio), "{coarse} {fine} {ratio}");
}

#[test]
fn energy_identities_vanish_for_zero_field() {
    let spec = spec_on(
        Grid::rectangle([1.0, 1.0], [9, 9]).unwrap(),
        Reaction::GOfU { g: ScalarReaction::NegCube },
        BoundaryPreset::Zero,
    );
    let ids = energy_identities(&spec, spec.boundary().u0()).unwrap();
    assert_eq!(ids.energy1.lhs, 0.0);
    assert_eq!(ids.energy2.rhs, 0.0);
    assert_eq!(ids.energy1.relative, 0.0);
    let g = ScalarReaction::NegCube;
    for y in [-1.3, 0.4, 2.0] {
        let numeric = antiderivative_numeric(&g, y);
        assert!((numeric - g.antiderivative(y)).abs() < 1e-12);
    }
}
