//! Assemble the integer Morse complex, verify d² = 0 exactly, and compute
//! integral homology with torsion through Smith normal form.
//!
//! ```text
//! cargo run --example integer_homology
//! ```

use morseflow::catalog;
use morseflow::complex::{
    build_complex, homology, morse_inequalities, smith_normal_form, CoefficientMode, IntMat,
};
use morseflow::connections::{find_all_connections, ConnectionOptions};
use morseflow::critical::{find_critical_points, CriticalOptions, SeedSpec};
use morseflow::flow::FlowSpec;

fn main() {
    let manifold = catalog::flat_torus();
    let f = catalog::torus_separable();
    let cs = find_critical_points(
        &manifold,
        &f,
        &SeedSpec::Grid {
            per_axis: vec![16, 16],
        },
        &CriticalOptions::default(),
    )
    .unwrap();
    let spec = FlowSpec::gradient_uphill(manifold.clone(), f);
    let conn = find_all_connections(&spec, &cs, &ConnectionOptions::default()).unwrap();
    let complex = build_complex(&manifold, &cs, &conn, CoefficientMode::Integers).unwrap();

    println!("generators per degree:");
    for (k, gens) in complex.generators_by_degree.iter().enumerate() {
        println!("  degree {k}: {gens:?}");
    }
    for k in 1..=manifold.dim() {
        let d = &complex.boundary[k];
        println!("D_{k} ({}×{}):", d.rows, d.cols);
        for i in 0..d.rows {
            let row: Vec<String> = (0..d.cols).map(|j| format!("{:+}", d[(i, j)])).collect();
            println!("  [{}]", row.join(", "));
        }
    }

    let h = homology(&complex).unwrap();
    println!("betti numbers: {:?}", h.betti);
    println!("torsion:       {:?}", h.torsion);
    let ineq = morse_inequalities(&cs.index_counts(manifold.dim()), &h);
    println!(
        "Morse inequalities hold: {}, all equalities: {}",
        ineq.all_hold(),
        ineq.all_equalities()
    );

    // Smith normal form of a small matrix with torsion.
    let a = IntMat::from_rows(vec![vec![2, 4], vec![4, 2]]);
    let d = smith_normal_form(&a);
    println!(
        "snf diag of [[2,4],[4,2]]: ({}, {}), torsion factors {:?}",
        d.s.get(0, 0),
        d.s.get(1, 1),
        d.torsion_factors()
    );
}
