//! Differential forms with closed-form coefficient functions.

use nalgebra::DVector;

use super::{ExprError, ScalarExpression};

/// A degree-k differential form `Σ_I c_I(x) dx_I` on `R^N`, one scalar
/// coefficient per strictly increasing multi-index `I = (i1 < … < ik)`.
#[derive(Debug, Clone)]
pub struct FormExpression {
    degree: usize,
    num_vars: usize,
    coefficients: Vec<(Vec<usize>, ScalarExpression)>,
}

impl FormExpression {
    pub fn new(
        degree: usize,
        num_vars: usize,
        mut coefficients: Vec<(Vec<usize>, ScalarExpression)>,
    ) -> Result<Self, ExprError> {
        for (index, coeff) in &coefficients {
            if index.len() != degree {
                return Err(ExprError::FormIndex(format!(
                    "multi-index {index:?} has length {}, degree is {degree}",
                    index.len()
                )));
            }
            if !index.windows(2).all(|w| w[0] < w[1]) {
                return Err(ExprError::FormIndex(format!(
                    "multi-index {index:?} is not strictly increasing"
                )));
            }
            if index.iter().any(|&i| i >= num_vars) {
                return Err(ExprError::FormIndex(format!(
                    "multi-index {index:?} out of range for {num_vars} variables"
                )));
            }
            if coeff.num_vars() != num_vars {
                return Err(ExprError::FormIndex(format!(
                    "coefficient of {index:?} has {} variables, form has {num_vars}",
                    coeff.num_vars()
                )));
            }
        }
        coefficients.sort_by(|a, b| a.0.cmp(&b.0));
        coefficients.dedup_by(|a, b| a.0 == b.0);
        if degree == 0 && coefficients.len() != 1 {
            return Err(ExprError::FormIndex(
                "degree-0 form needs exactly one coefficient with empty index".into(),
            ));
        }
        Ok(FormExpression {
            degree,
            num_vars,
            coefficients,
        })
    }

    /// Convenience constructor: parse `(indices, text)` pairs.
    pub fn parse(
        degree: usize,
        num_vars: usize,
        parts: &[(&[usize], &str)],
    ) -> Result<Self, ExprError> {
        let coefficients = parts
            .iter()
            .map(|(index, text)| {
                Ok((
                    index.to_vec(),
                    ScalarExpression::parse(text, num_vars)?,
                ))
            })
            .collect::<Result<Vec<_>, ExprError>>()?;
        FormExpression::new(degree, num_vars, coefficients)
    }

    /// The constant function `c` as a 0-form.
    pub fn constant(c: f64, num_vars: usize) -> Self {
        let coeff = ScalarExpression::from_ast(super::Expr::Const(c), num_vars).unwrap();
        FormExpression {
            degree: 0,
            num_vars,
            coefficients: vec![(Vec::new(), coeff)],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn coefficients(&self) -> &[(Vec<usize>, ScalarExpression)] {
        &self.coefficients
    }

    /// Evaluate the form at `point` on `degree` tangent vectors.
    ///
    /// Multilinear and alternating in the vectors:
    /// `Σ_I c_I(point) · det(minor_I)` where `minor_I` picks the columns `I`
    /// of the k×N matrix whose rows are the vectors.
    pub fn eval(&self, point: &[f64], vectors: &[DVector<f64>]) -> Result<f64, ExprError> {
        if vectors.len() != self.degree {
            return Err(ExprError::FormVectors {
                expected: self.degree,
                got: vectors.len(),
            });
        }
        for v in vectors {
            if v.len() != self.num_vars {
                return Err(ExprError::PointDimension {
                    expected: self.num_vars,
                    got: v.len(),
                });
            }
        }
        let mut total = 0.0;
        for (index, coeff) in &self.coefficients {
            let c = coeff.eval(point)?;
            if c != 0.0 {
                total += c * det_minor(vectors, index);
            }
        }
        Ok(total)
    }
}

/// Determinant of the k×k minor `vectors[r][index[c]]`.
pub fn det_minor(vectors: &[DVector<f64>], index: &[usize]) -> f64 {
    let k = index.len();
    debug_assert_eq!(vectors.len(), k);
    match k {
        0 => 1.0,
        1 => vectors[0][index[0]],
        2 => {
            vectors[0][index[0]] * vectors[1][index[1]]
                - vectors[0][index[1]] * vectors[1][index[0]]
        }
        _ => {
            let mut m = nalgebra::DMatrix::zeros(k, k);
            for (r, v) in vectors.iter().enumerate() {
                for (c, &i) in index.iter().enumerate() {
                    m[(r, c)] = v[i];
                }
            }
            m.determinant()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize, n: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn basis_pairing_on_r3() {
        // dx ∧ dy on R^3 applied to (e1, e2) is 1; swapping gives -1.
        let w = FormExpression::parse(2, 3, &[(&[0, 1], "1")]).unwrap();
        let p = [0.3, -0.7, 2.0];
        assert_eq!(w.eval(&p, &[e(0, 3), e(1, 3)]).unwrap(), 1.0);
        assert_eq!(w.eval(&p, &[e(1, 3), e(0, 3)]).unwrap(), -1.0);
    }

    #[test]
    fn coefficient_evaluation() {
        // x·dy at (2, 0) on e2 gives 2.
        let w = FormExpression::parse(1, 2, &[(&[1], "x")]).unwrap();
        assert_eq!(w.eval(&[2.0, 0.0], &[e(1, 2)]).unwrap(), 2.0);
    }

    #[test]
    fn alternating_in_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let w = FormExpression::parse(2, 3, &[(&[0, 1], "x+y"), (&[0, 2], "z"), (&[1, 2], "x*z")])
            .unwrap();
        for _ in 0..50 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let ab = w.eval(&p, &[a.clone(), b.clone()]).unwrap();
            let ba = w.eval(&p, &[b, a]).unwrap();
            assert!((ab + ba).abs() < 1e-12);
        }
    }

    #[test]
    fn degree_zero_needs_single_coefficient() {
        assert!(FormExpression::parse(0, 2, &[]).is_err());
        let c = FormExpression::parse(0, 2, &[(&[], "x+1")]).unwrap();
        assert_eq!(c.eval(&[2.0, 0.0], &[]).unwrap(), 3.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let w = FormExpression::parse(1, 2, &[(&[0], "1")]).unwrap();
        assert!(w.eval(&[0.0, 0.0], &[]).is_err());
        assert!(FormExpression::parse(2, 2, &[(&[1, 0], "1")]).is_err());
        assert!(FormExpression::parse(1, 2, &[(&[2], "1")]).is_err());
    }
}
