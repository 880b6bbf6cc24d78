//! Second-order dual numbers: value, gradient and Hessian propagated together.

use nalgebra::{DMatrix, DVector};

use super::JetValue;

/// Upper bound on the number of variables; keeps jets on the stack.
pub const MAX_VARS: usize = 4;

/// Truncated second-order Taylor data of a function of `n ≤ 4` variables.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    n: usize,
    v: f64,
    g: [f64; MAX_VARS],
    h: [[f64; MAX_VARS]; MAX_VARS],
}

impl Jet {
    pub fn constant(v: f64, n: usize) -> Self {
        Jet {
            n,
            v,
            g: [0.0; MAX_VARS],
            h: [[0.0; MAX_VARS]; MAX_VARS],
        }
    }

    pub fn variable(v: f64, index: usize, n: usize) -> Self {
        let mut j = Jet::constant(v, n);
        j.g[index] = 1.0;
        j
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    pub fn gradient(&self) -> &[f64] {
        &self.g[..self.n]
    }

    pub fn hessian_entry(&self, i: usize, j: usize) -> f64 {
        self.h[i][j]
    }

    pub fn into_jet_value(self, n: usize) -> JetValue {
        let gradient = DVector::from_fn(n, |i, _| self.g[i]);
        let hessian = DMatrix::from_fn(n, n, |i, j| self.h[i][j]);
        JetValue {
            value: self.v,
            gradient,
            hessian,
        }
    }

    pub fn neg(mut self) -> Self {
        self.v = -self.v;
        for i in 0..self.n {
            self.g[i] = -self.g[i];
            for j in 0..self.n {
                self.h[i][j] = -self.h[i][j];
            }
        }
        self
    }

    pub fn add(mut self, o: &Jet) -> Self {
        self.v += o.v;
        for i in 0..self.n {
            self.g[i] += o.g[i];
            for j in 0..self.n {
                self.h[i][j] += o.h[i][j];
            }
        }
        self
    }

    pub fn sub(mut self, o: &Jet) -> Self {
        self.v -= o.v;
        for i in 0..self.n {
            self.g[i] -= o.g[i];
            for j in 0..self.n {
                self.h[i][j] -= o.h[i][j];
            }
        }
        self
    }

    pub fn mul(&self, o: &Jet) -> Self {
        let mut r = Jet::constant(self.v * o.v, self.n);
        for i in 0..self.n {
            r.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for j in 0..self.n {
                r.h[i][j] = self.h[i][j] * o.v
                    + self.v * o.h[i][j]
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i];
            }
        }
        r
    }

    pub fn div(&self, o: &Jet) -> Self {
        // q = a/b, computed from a = q*b.
        let q = self.v / o.v;
        let mut r = Jet::constant(q, self.n);
        for i in 0..self.n {
            r.g[i] = (self.g[i] - q * o.g[i]) / o.v;
        }
        for i in 0..self.n {
            for j in 0..self.n {
                r.h[i][j] = (self.h[i][j]
                    - q * o.h[i][j]
                    - r.g[i] * o.g[j]
                    - r.g[j] * o.g[i])
                    / o.v;
            }
        }
        r
    }

    fn chain(&self, f: f64, df: f64, ddf: f64) -> Self {
        let mut r = Jet::constant(f, self.n);
        for i in 0..self.n {
            r.g[i] = df * self.g[i];
            for j in 0..self.n {
                r.h[i][j] = df * self.h[i][j] + ddf * self.g[i] * self.g[j];
            }
        }
        r
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn powi(&self, k: i32) -> Self {
        match k {
            0 => Jet::constant(1.0, self.n),
            1 => *self,
            _ => {
                let kf = f64::from(k);
                let f = self.v.powi(k);
                let df = kf * self.v.powi(k - 1);
                let ddf = kf * (kf - 1.0) * self.v.powi(k - 2);
                self.chain(f, df, ddf)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_hessian() {
        // f(x, y) = x*y at (3, 5): hessian off-diagonal 1.
        let x = Jet::variable(3.0, 0, 2);
        let y = Jet::variable(5.0, 1, 2);
        let f = x.mul(&y);
        assert_eq!(f.value(), 15.0);
        assert_eq!(f.gradient(), &[5.0, 3.0]);
        assert_eq!(f.hessian_entry(0, 1), 1.0);
        assert_eq!(f.hessian_entry(0, 0), 0.0);
    }

    #[test]
    fn quotient_rule() {
        // f(x) = 1/x at 2: f' = -1/4, f'' = 1/4.
        let one = Jet::constant(1.0, 1);
        let x = Jet::variable(2.0, 0, 1);
        let f = one.div(&x);
        assert!((f.value() - 0.5).abs() < 1e-15);
        assert!((f.gradient()[0] + 0.25).abs() < 1e-15);
        assert!((f.hessian_entry(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn negative_integer_power() {
        // x^-2 at 2: value 1/4, d = -2/8 = -0.25, dd = 6/16 = 0.375.
        let x = Jet::variable(2.0, 0, 1);
        let f = x.powi(-2);
        assert!((f.value() - 0.25).abs() < 1e-15);
        assert!((f.gradient()[0] + 0.25).abs() < 1e-15);
        assert!((f.hessian_entry(0, 0) - 0.375).abs() < 1e-15);
    }
}
