//! Shared fixtures and independent oracles for the integration suites.

use morseflow::catalog;
use morseflow::critical::{find_critical_points, CriticalOptions, CriticalSet, SeedSpec};
use morseflow::flow::FlowSpec;

pub fn report(criterion: &str, pass: bool, details: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("[{criterion}] {verdict}: {details}");
    assert!(pass, "[{criterion}] FAIL: {details}");
}

pub fn circle_pipeline() -> (FlowSpec, CriticalSet) {
    let m = catalog::unit_circle();
    let f = catalog::circle_height();
    let cs = find_critical_points(
        &m,
        &f,
        &SeedSpec::Random { count: 96, seed: 9 },
        &CriticalOptions::default(),
    )
    .expect("circle critical points");
    (FlowSpec::gradient_uphill(m, f), cs)
}

pub fn sphere_pipeline() -> (FlowSpec, CriticalSet) {
    let m = catalog::unit_sphere();
    let f = catalog::sphere_height();
    let cs = find_critical_points(
        &m,
        &f,
        &SeedSpec::Random {
            count: 288,
            seed: 2001,
        },
        &CriticalOptions::default(),
    )
    .expect("sphere critical points");
    (FlowSpec::gradient_uphill(m, f), cs)
}

pub fn perturbed_sphere_pipeline() -> (FlowSpec, CriticalSet) {
    let m = catalog::unit_sphere();
    let f = catalog::sphere_perturbed();
    let cs = find_critical_points(
        &m,
        &f,
        &SeedSpec::Random {
            count: 288,
            seed: 2001,
        },
        &CriticalOptions::default(),
    )
    .expect("perturbed sphere critical points");
    (FlowSpec::gradient_uphill(m, f), cs)
}

pub fn torus_pipeline() -> (FlowSpec, CriticalSet) {
    let m = catalog::flat_torus();
    let f = catalog::torus_separable();
    let cs = find_critical_points(
        &m,
        &f,
        &SeedSpec::Grid {
            per_axis: vec![16, 16],
        },
        &CriticalOptions::default(),
    )
    .expect("torus critical points");
    (FlowSpec::gradient_uphill(m, f), cs)
}

pub fn klein_pipeline() -> (FlowSpec, CriticalSet) {
    let m = catalog::klein_bottle();
    let f = catalog::klein_field();
    let cs = find_critical_points(
        &m,
        &f,
        &SeedSpec::Grid {
            per_axis: vec![12, 12],
        },
        &CriticalOptions::default(),
    )
    .expect("klein critical points");
    (FlowSpec::gradient_uphill(m, f), cs)
}
