//! Parse closed-form expressions and evaluate exact jets (value, gradient,
//! Hessian), plus differential forms on tangent frames.
//!
//! ```text
//! cargo run --example parse_and_differentiate
//! ```

use morseflow::expr::{FormExpression, ScalarExpression};
use nalgebra::DVector;

fn main() {
    let f = ScalarExpression::parse("cos(2*pi*x)+cos(2*pi*y)", 2).unwrap();
    println!("f       = {f}");
    let jet = f.eval_jet(&[0.25, 0.0]).unwrap();
    println!("f(1/4,0)   = {:+.6}", jet.value);
    println!("grad       = [{:+.6}, {:+.6}]", jet.gradient[0], jet.gradient[1]);
    println!(
        "hessian    = [[{:+.4}, {:+.4}], [{:+.4}, {:+.4}]]",
        jet.hessian[(0, 0)],
        jet.hessian[(0, 1)],
        jet.hessian[(1, 0)],
        jet.hessian[(1, 1)]
    );

    // Printing round-trips through the parser.
    let printed = f.to_string();
    let reparsed = ScalarExpression::parse(&printed, 2).unwrap();
    println!("roundtrip  = {} (stable: {})", reparsed, printed == reparsed.to_string());

    // A 1-form evaluated on a tangent vector: x·dy at (2, 0) on e2.
    let omega = FormExpression::parse(1, 2, &[(&[1], "x")]).unwrap();
    let e2 = DVector::from_vec(vec![0.0, 1.0]);
    let value = omega.eval(&[2.0, 0.0], &[e2]).unwrap();
    println!("x·dy at (2,0) on e2 = {value}");

    // Alternating: swapping arguments of a 2-form flips the sign.
    let area = FormExpression::parse(2, 3, &[(&[0, 1], "1")]).unwrap();
    let u = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let v = DVector::from_vec(vec![0.0, 1.0, 0.0]);
    let p = [0.0, 0.0, 1.0];
    println!(
        "dx∧dy(e1, e2) = {}, dx∧dy(e2, e1) = {}",
        area.eval(&p, &[u.clone(), v.clone()]).unwrap(),
        area.eval(&p, &[v, u]).unwrap()
    );
}
