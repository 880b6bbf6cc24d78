//! Locate, classify and orient all critical points of a scalar field on a
//! catalog manifold.
//!
//! ```text
//! cargo run --example critical_points
//! ```

use morseflow::catalog;
use morseflow::critical::{find_critical_points, CriticalOptions, SeedSpec};

fn main() {
    let manifold = catalog::unit_sphere();
    let f = catalog::sphere_perturbed();
    let seeds = SeedSpec::Random {
        count: 288,
        seed: 2001,
    };
    let cs = find_critical_points(&manifold, &f, &seeds, &CriticalOptions::default()).unwrap();

    println!("field: {f} on the unit sphere");
    println!("{} critical points:", cs.points.len());
    println!("{:>3} {:>24} {:>10} {:>6}  eigenvalues", "id", "location", "value", "index");
    for p in &cs.points {
        let loc: Vec<String> = p.location.iter().map(|c| format!("{c:+.4}")).collect();
        let eig: Vec<String> = p.eigenvalues.iter().map(|e| format!("{e:+.3}")).collect();
        println!(
            "{:>3} {:>24} {:>10.5} {:>6}  [{}]",
            p.id,
            loc.join(", "),
            p.value,
            p.index,
            eig.join(", ")
        );
    }
    println!(
        "alternating index sum: {} (Euler characteristic of the sphere)",
        cs.euler_characteristic()
    );
}
