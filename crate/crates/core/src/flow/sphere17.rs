//! Closed-form catalog flow on the unit 2-sphere: translation in a
//! stereographic chart, extended over the sphere with a single zero at the
//! antipode of the chart's center.
//!
//! In the chart `y = (P1, P2)/(1 + P3)` the flow is `y ↦ y + t·u` for a fixed
//! unit vector `u`; the vector field vanishes only at the south pole
//! `(0, 0, −1)` (the chart's point at infinity) where the zero is quadratic,
//! not hyperbolic. The flow map and its differential are evaluated exactly
//! from the chart formulas, no ODE integration involved.

use nalgebra::{DMatrix, DVector};

const POLE_EPS: f64 = 1e-13;

/// The unique zero of the vector field.
pub fn fixed_point() -> DVector<f64> {
    DVector::from_vec(vec![0.0, 0.0, -1.0])
}

pub fn to_chart(p: &DVector<f64>) -> DVector<f64> {
    let d = 1.0 + p[2];
    DVector::from_vec(vec![p[0] / d, p[1] / d])
}

pub fn from_chart(y: &DVector<f64>) -> DVector<f64> {
    let d = 1.0 + y.norm_squared();
    DVector::from_vec(vec![2.0 * y[0] / d, 2.0 * y[1] / d, (2.0 - d) / d])
}

/// Jacobian of the chart map, a 2×3 matrix.
pub fn chart_jacobian(p: &DVector<f64>) -> DMatrix<f64> {
    let d = 1.0 + p[2];
    DMatrix::from_row_slice(
        2,
        3,
        &[
            1.0 / d,
            0.0,
            -p[0] / (d * d),
            0.0,
            1.0 / d,
            -p[1] / (d * d),
        ],
    )
}

/// Jacobian of the inverse chart map, a 3×2 matrix.
pub fn chart_inv_jacobian(y: &DVector<f64>) -> DMatrix<f64> {
    let d = 1.0 + y.norm_squared();
    let d2 = d * d;
    DMatrix::from_row_slice(
        3,
        2,
        &[
            2.0 / d - 4.0 * y[0] * y[0] / d2,
            -4.0 * y[0] * y[1] / d2,
            -4.0 * y[0] * y[1] / d2,
            2.0 / d - 4.0 * y[1] * y[1] / d2,
            -4.0 * y[0] / d2,
            -4.0 * y[1] / d2,
        ],
    )
}

/// Flow map `φ_t` applied to a sphere point.
pub fn flow_point(p: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
    if 1.0 + p[2] < POLE_EPS {
        return fixed_point();
    }
    let y = to_chart(p) + u * t;
    from_chart(&y)
}

/// Vector field `V(p) = d/dt φ_t(p)|_{t=0}`.
pub fn velocity(p: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    if 1.0 + p[2] < POLE_EPS {
        return DVector::zeros(3);
    }
    chart_inv_jacobian(&to_chart(p)) * u
}

/// Differential `dφ_t(p)·v` for a tangent vector `v`.
pub fn flow_differential(
    p: &DVector<f64>,
    u: &DVector<f64>,
    t: f64,
    v: &DVector<f64>,
) -> DVector<f64> {
    if 1.0 + p[2] < POLE_EPS {
        return DVector::zeros(3);
    }
    let y = to_chart(p);
    let w = chart_jacobian(p) * v;
    let yt = y + u * t;
    chart_inv_jacobian(&yt) * w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v3(x: f64, y: f64, z: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y, z])
    }

    #[test]
    fn chart_roundtrip() {
        let p = v3(0.48, -0.6, 0.64);
        let q = from_chart(&to_chart(&p));
        assert!((q - p).norm() < 1e-14);
    }

    #[test]
    fn flow_is_a_group() {
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let p = v3(0.6, 0.8, 0.0);
        let a = flow_point(&flow_point(&p, &u, 0.7), &u, 1.1);
        let b = flow_point(&p, &u, 1.8);
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn velocity_matches_finite_difference() {
        let u = DVector::from_vec(vec![0.6, 0.8]);
        let p = v3(0.0, 0.6, 0.8);
        let h = 1e-6;
        let fd = (flow_point(&p, &u, h) - flow_point(&p, &u, -h)) / (2.0 * h);
        let v = velocity(&p, &u);
        assert!((fd - v).norm() < 1e-9);
        // Tangency to the sphere.
        assert!(velocity(&p, &u).dot(&p).abs() < 1e-12);
    }

    #[test]
    fn all_orbits_reach_the_fixed_point() {
        let u = DVector::from_vec(vec![1.0, 0.0]);
        for p in [v3(0.0, 0.0, 1.0), v3(1.0, 0.0, 0.0), v3(0.0, -1.0, 0.0)] {
            let far = flow_point(&p, &u, 1e6);
            assert!((far - fixed_point()).norm() < 1e-4);
        }
    }
}
