//! Poincaré duality via the reversed flow and the residue-based intersection
//! pairing against direct wedge integrals.
//!
//! ```text
//! cargo run --example duality_and_pairing
//! ```

use morseflow::catalog;
use morseflow::complex::{build_complex, check_duality, cohomology, homology, CoefficientMode};
use morseflow::connections::{find_all_connections, ConnectionOptions};
use morseflow::critical::{find_critical_points, CriticalOptions, SeedSpec};
use morseflow::currents::{pairing, QuadratureOptions};
use morseflow::expr::FormExpression;
use morseflow::flow::FlowSpec;

fn main() {
    let manifold = catalog::flat_torus();
    let f = catalog::torus_separable();
    let seeds = SeedSpec::Grid {
        per_axis: vec![16, 16],
    };
    let copts = CriticalOptions::default();
    let conn_opts = ConnectionOptions::default();

    let cs = find_critical_points(&manifold, &f, &seeds, &copts).unwrap();
    let spec = FlowSpec::gradient_uphill(manifold.clone(), f.clone());
    let conn = find_all_connections(&spec, &cs, &conn_opts).unwrap();
    let complex = build_complex(&manifold, &cs, &conn, CoefficientMode::Integers).unwrap();

    // The reversed flow swaps stable and unstable manifolds.
    let neg = f.negated();
    let cs_rev = find_critical_points(&manifold, &neg, &seeds, &copts).unwrap();
    let spec_rev = FlowSpec::gradient_uphill(manifold.clone(), neg);
    let conn_rev = find_all_connections(&spec_rev, &cs_rev, &conn_opts).unwrap();
    let c_rev = build_complex(&manifold, &cs_rev, &conn_rev, CoefficientMode::Integers).unwrap();

    let h = homology(&complex).unwrap();
    let coh = cohomology(&complex).unwrap();
    let h_rev = homology(&c_rev).unwrap();
    println!("homology of the flow complex:     {:?}", h.betti);
    println!("cohomology from Hom(C, Z):        {:?}", coh.betti);
    println!("homology of the reversed complex: {:?}", h_rev.betti);
    let duality = check_duality(&manifold, &cs, &complex, &cs_rev, &c_rev).unwrap();
    println!(
        "duality: homology matches {}, boundary transposes consistent {}",
        duality.homology_matches, duality.transpose_consistent
    );

    // Pairing matrix of the coordinate 1-forms.
    let dx = FormExpression::parse(1, 2, &[(&[0], "1")]).unwrap();
    let dy = FormExpression::parse(1, 2, &[(&[1], "1")]).unwrap();
    let qopts = QuadratureOptions::default();
    println!("pairing matrix of (dx, dy):");
    for (an, a) in [("dx", &dx), ("dy", &dy)] {
        let mut row = Vec::new();
        for (_, b) in [("dx", &dx), ("dy", &dy)] {
            let rep = pairing(&spec, &cs, a, b, &qopts).unwrap();
            row.push(format!(
                "{:+.6} (wedge {:+.6})",
                rep.residue_pairing, rep.direct_integral
            ));
        }
        println!("  {an}: [{}]", row.join(", "));
    }
}
