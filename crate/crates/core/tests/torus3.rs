//! Three-dimensional flat torus: the first case where connecting orbits
//! between middle indices require the direction-circle search.

use morseflow::complex::{build_complex, homology, CoefficientMode};
use morseflow::connections::{find_all_connections, ConnectionOptions};
use morseflow::critical::{find_critical_points, CriticalOptions, SeedSpec};
use morseflow::expr::ScalarExpression;
use morseflow::flow::FlowSpec;
use morseflow::geometry::ManifoldBackend;

#[test]
fn separable_triple_cosine_on_the_3_torus() {
    let m = ManifoldBackend::flat_torus(3);
    let f = ScalarExpression::parse("cos(2*pi*x)+cos(2*pi*y)+cos(2*pi*z)", 3).unwrap();
    let cs = find_critical_points(
        &m,
        &f,
        &SeedSpec::Grid {
            per_axis: vec![6, 6, 6],
        },
        &CriticalOptions::default(),
    )
    .unwrap();
    assert_eq!(cs.points.len(), 8);
    assert_eq!(cs.index_counts(3), vec![1, 3, 3, 1]);
    assert_eq!(cs.euler_characteristic(), 0);

    let spec = FlowSpec::gradient_uphill(m.clone(), f);
    let conn = find_all_connections(&spec, &cs, &ConnectionOptions::default()).unwrap();

    // Adjacent pairs sharing an axis circle carry two cancelling lines; the
    // index-1/index-2 pairs with disjoint invariant manifolds carry none.
    for (&(p, q), lines) in &conn.lines {
        let cp = cs.by_id(p);
        let cq = cs.by_id(q);
        // The pair is connected exactly when the locations differ in one
        // coordinate (the shared circle).
        let mut moved = 0;
        for i in 0..3 {
            if m
                .displacement(&cp.location, &cq.location)[i]
                .abs()
                > 1e-6
            {
                moved += 1;
            }
        }
        if moved == 1 {
            assert_eq!(lines.len(), 2, "pair ({p},{q}) should carry two lines");
            assert_eq!(
                conn.count(p, q),
                0,
                "signs must cancel on pair ({p},{q})"
            );
        } else {
            assert!(
                lines.is_empty(),
                "pair ({p},{q}) with {moved} moving coordinates should be empty"
            );
        }
    }
    // The middle-degree searches report their subdivision depth.
    assert!(
        conn.warnings.iter().any(|w| w.contains("depth")),
        "circle searches should report depth: {:?}",
        conn.warnings
    );

    let complex = build_complex(&m, &cs, &conn, CoefficientMode::Integers).unwrap();
    let h = homology(&complex).unwrap();
    assert_eq!(h.betti, vec![1, 3, 3, 1]);
    assert!(h.torsion.iter().all(Vec::is_empty));
}
