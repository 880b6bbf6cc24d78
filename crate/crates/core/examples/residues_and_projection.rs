//! Residues of differential forms over unstable manifolds and the induced
//! projection onto the span of the stable generators.
//!
//! ```text
//! cargo run --example residues_and_projection
//! ```

use morseflow::catalog;
use morseflow::critical::{find_critical_points, CriticalOptions, SeedSpec};
use morseflow::currents::{check_integral_residues, p_apply, residue_table, QuadratureOptions};
use morseflow::expr::FormExpression;
use morseflow::flow::FlowSpec;

fn main() {
    let manifold = catalog::unit_sphere();
    let f = catalog::sphere_height();
    let cs = find_critical_points(
        &manifold,
        &f,
        &SeedSpec::Random {
            count: 288,
            seed: 2001,
        },
        &CriticalOptions::default(),
    )
    .unwrap();
    let spec = FlowSpec::gradient_uphill(manifold, f);
    let opts = QuadratureOptions::default();

    // The normalized area form has residue 1 over the unstable manifold of
    // the minimum (the sphere minus the top point).
    let area = FormExpression::parse(
        2,
        3,
        &[
            (&[1, 2], "x/(4*pi)"),
            (&[0, 2], "-y/(4*pi)"),
            (&[0, 1], "z/(4*pi)"),
        ],
    )
    .unwrap();
    let table = residue_table(&spec, &cs, &area, &opts).unwrap();
    for e in &table.residues {
        println!(
            "residue of area/4π at point {} (index {}): {:+.8} ± {:.1e}",
            e.id, e.index, e.value, e.error
        );
    }
    let sum = p_apply(&spec, &cs, &area, &opts).unwrap();
    println!("P(area/4π) = {:?}", sum.entries);

    // Degree selection: a 1-form has no index partner on the height sphere.
    let one_form = FormExpression::parse(1, 3, &[(&[0], "1")]).unwrap();
    let empty = p_apply(&spec, &cs, &one_form, &opts).unwrap();
    println!("P(dx) on the height sphere is empty: {}", empty.is_empty());

    // Integral residues on the torus: coordinate forms have unit periods.
    let torus = catalog::flat_torus();
    let g = catalog::torus_separable();
    let cs_t = find_critical_points(
        &torus,
        &g,
        &SeedSpec::Grid {
            per_axis: vec![16, 16],
        },
        &CriticalOptions::default(),
    )
    .unwrap();
    let spec_t = FlowSpec::gradient_uphill(torus, g);
    let dx = FormExpression::parse(1, 2, &[(&[0], "1")]).unwrap();
    let report = check_integral_residues(&spec_t, &cs_t, &dx, 1e-4, &opts).unwrap();
    println!(
        "dx on the torus has integral residues: {}{}",
        report.all_integral,
        report
            .spark_note
            .map(|n| format!(" ({n})"))
            .unwrap_or_default()
    );
}
