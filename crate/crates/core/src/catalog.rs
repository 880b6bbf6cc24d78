//! Ready-made backends and scalar fields used across the examples and tests.

use crate::expr::ScalarExpression;
use crate::geometry::ManifoldBackend;

pub fn unit_circle() -> ManifoldBackend {
    ManifoldBackend::implicit(2, ScalarExpression::parse("x^2+y^2-1", 2).unwrap())
}

pub fn unit_sphere() -> ManifoldBackend {
    ManifoldBackend::implicit(3, ScalarExpression::parse("x^2+y^2+z^2-1", 3).unwrap())
}

pub fn flat_torus() -> ManifoldBackend {
    ManifoldBackend::flat_torus(2)
}

pub fn klein_bottle() -> ManifoldBackend {
    ManifoldBackend::klein_bottle()
}

/// Height function on the circle (two critical points).
pub fn circle_height() -> ScalarExpression {
    ScalarExpression::parse("x", 2).unwrap()
}

/// Height function on the sphere (perfect Morse function).
pub fn sphere_height() -> ScalarExpression {
    ScalarExpression::parse("z", 3).unwrap()
}

/// Height plus a quadratic bump: exactly four nondegenerate critical points
/// on the sphere — two maxima, one saddle, one minimum.
pub fn sphere_perturbed() -> ScalarExpression {
    ScalarExpression::parse("z + x^2", 3).unwrap()
}

/// Separable double-cosine field on the torus (four critical points).
pub fn torus_separable() -> ScalarExpression {
    ScalarExpression::parse("cos(2*pi*x)+cos(2*pi*y)", 2).unwrap()
}

/// Deck-invariant field on the Klein bottle (four critical points in the
/// canonical cell).
pub fn klein_field() -> ScalarExpression {
    ScalarExpression::parse("cos(4*pi*x)+cos(2*pi*y)", 2).unwrap()
}
