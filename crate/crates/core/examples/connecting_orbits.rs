//! Enumerate connecting flow lines between index-adjacent critical points
//! and compute their orientation signs and the signed counts.
//!
//! ```text
//! cargo run --example connecting_orbits
//! ```

use morseflow::catalog;
use morseflow::connections::{find_all_connections, intersection_pairing, ConnectionOptions};
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
    let spec = FlowSpec::gradient_uphill(manifold, f);
    let opts = ConnectionOptions::default();
    let conn = find_all_connections(&spec, &cs, &opts).unwrap();

    println!("connections on the torus (from → to: signs, deck words):");
    for (&(to, from), lines) in &conn.lines {
        let signs: Vec<String> = lines.iter().map(|l| format!("{:+}", l.sign)).collect();
        let decks: Vec<String> = lines
            .iter()
            .map(|l| format!("{:?}", l.deck.exponents))
            .collect();
        println!(
            "  {from} → {to}: {} lines, signs [{}], N = {}, deck {}",
            lines.len(),
            signs.join(", "),
            conn.count(to, from),
            decks.join(" ")
        );
    }

    // Stable/unstable manifolds of equal-index points meet only on the
    // diagonal; the pairing returns the Kronecker delta.
    let saddles: Vec<usize> = cs.of_index(1).iter().map(|c| c.id).collect();
    for &a in &saddles {
        for &b in &saddles {
            let delta = intersection_pairing(&spec, &cs, a, b, &opts).unwrap();
            println!("  U_{b} • S_{a} = {delta}");
        }
    }
}
