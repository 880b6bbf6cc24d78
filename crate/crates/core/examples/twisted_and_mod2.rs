//! Homology with twisted coefficients (a rank-1 local system on the torus,
//! boundary entries weighted by deck words) and the mod-2 Klein bottle.
//!
//! ```text
//! cargo run --example twisted_and_mod2
//! ```

use morseflow::catalog;
use morseflow::complex::{build_complex, homology, CoefficientMode, IntMat, LocalSystem};
use morseflow::connections::{find_all_connections, ConnectionOptions};
use morseflow::critical::{find_critical_points, CriticalOptions, SeedSpec};
use morseflow::flow::FlowSpec;

fn main() {
    // Torus, rank-1 local system: the x-loop acts by −1, the y-loop trivially.
    let torus = catalog::flat_torus();
    let f = catalog::torus_separable();
    let cs = find_critical_points(
        &torus,
        &f,
        &SeedSpec::Grid {
            per_axis: vec![16, 16],
        },
        &CriticalOptions::default(),
    )
    .unwrap();
    let spec = FlowSpec::gradient_uphill(torus.clone(), f);
    let conn = find_all_connections(&spec, &cs, &ConnectionOptions::default()).unwrap();
    let ls = LocalSystem::new(
        1,
        vec![
            IntMat::from_rows(vec![vec![-1]]),
            IntMat::from_rows(vec![vec![1]]),
        ],
    )
    .unwrap();
    let twisted = build_complex(&torus, &cs, &conn, CoefficientMode::Twisted(ls)).unwrap();
    for k in 1..=2 {
        let d = &twisted.boundary[k];
        let rows: Vec<String> = (0..d.rows)
            .map(|i| {
                (0..d.cols)
                    .map(|j| format!("{:+}", d[(i, j)]))
                    .collect::<Vec<_>>()
                    .join(", ")
            })
            .collect();
        println!("twisted D_{k}: [{}]", rows.join("; "));
    }
    let h = homology(&twisted).unwrap();
    println!("twisted torus: betti {:?}, torsion {:?}", h.betti, h.torsion);

    // Klein bottle is non-orientable: mod-2 coefficients only.
    let klein = catalog::klein_bottle();
    let g = catalog::klein_field();
    let cs_k = find_critical_points(
        &klein,
        &g,
        &SeedSpec::Grid {
            per_axis: vec![12, 12],
        },
        &CriticalOptions::default(),
    )
    .unwrap();
    let spec_k = FlowSpec::gradient_uphill(klein.clone(), g);
    let conn_k = find_all_connections(&spec_k, &cs_k, &ConnectionOptions::default()).unwrap();
    match build_complex(&klein, &cs_k, &conn_k, CoefficientMode::Integers) {
        Err(e) => println!("integral coefficients refused on the Klein bottle: {e}"),
        Ok(_) => unreachable!(),
    }
    let c2 = build_complex(&klein, &cs_k, &conn_k, CoefficientMode::ModP(2)).unwrap();
    let h2 = homology(&c2).unwrap();
    println!("Klein bottle mod 2: dims {:?}", h2.betti);
}
