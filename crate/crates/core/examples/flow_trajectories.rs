//! Integrate the uphill gradient flow on the flat torus and print the
//! trajectory in the documented CSV layout (t, x1..xN).
//!
//! ```text
//! cargo run --example flow_trajectories
//! ```

use morseflow::catalog;
use morseflow::critical::{find_critical_points, CriticalOptions, SeedSpec};
use morseflow::flow::{integrate, Direction, FlowSpec, Terminal};
use nalgebra::DVector;

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

    let x0 = DVector::from_vec(vec![0.3, 0.41]);
    let traj = integrate(&spec, Some(&cs), &x0, Direction::Forward).unwrap();

    println!("t,x1,x2");
    for (t, p) in traj.times.iter().zip(&traj.points).step_by(4) {
        println!("{t},{},{}", p[0], p[1]);
    }
    match traj.status {
        Terminal::Converged { id, time } => {
            let p = cs.by_id(id);
            eprintln!(
                "converged to point {id} (index {}) at t = {time:.4}, location {:?}",
                p.index,
                p.location.as_slice()
            );
        }
        other => eprintln!("terminal status: {other:?}"),
    }
}
