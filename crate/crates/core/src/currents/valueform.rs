//! Pointwise form values: forms with numeric coefficients at a fixed point,
//! exterior derivatives through coefficient jets, and wedge products.

use nalgebra::DVector;

use crate::expr::{det_minor, ExprError, FormExpression};

/// A form at one point: numeric coefficient per increasing multi-index.
#[derive(Debug, Clone)]
pub struct ValueForm {
    pub degree: usize,
    pub num_vars: usize,
    pub terms: Vec<(Vec<usize>, f64)>,
}

impl ValueForm {
    pub fn eval(&self, vectors: &[DVector<f64>]) -> f64 {
        debug_assert_eq!(vectors.len(), self.degree);
        self.terms
            .iter()
            .map(|(index, c)| c * det_minor(vectors, index))
            .sum()
    }

    fn add_term(&mut self, index: Vec<usize>, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.iter_mut().find(|(i, _)| *i == index) {
            Some((_, existing)) => *existing += c,
            None => self.terms.push((index, c)),
        }
    }

    /// Coefficients of `α` evaluated at `point`.
    pub fn of(alpha: &FormExpression, point: &[f64]) -> Result<ValueForm, ExprError> {
        let mut out = ValueForm {
            degree: alpha.degree(),
            num_vars: alpha.num_vars(),
            terms: Vec::with_capacity(alpha.coefficients().len()),
        };
        for (index, coeff) in alpha.coefficients() {
            out.add_term(index.clone(), coeff.eval(point)?);
        }
        Ok(out)
    }

    /// `dα` at `point`: gradients of the coefficients wedged in.
    pub fn exterior_derivative(
        alpha: &FormExpression,
        point: &[f64],
    ) -> Result<ValueForm, ExprError> {
        let mut out = ValueForm {
            degree: alpha.degree() + 1,
            num_vars: alpha.num_vars(),
            terms: Vec::new(),
        };
        for (index, coeff) in alpha.coefficients() {
            let jet = coeff.eval_jet_raw(point)?;
            for j in 0..alpha.num_vars() {
                let g = jet.gradient()[j];
                if g == 0.0 {
                    continue;
                }
                if let Some((sign, merged)) = insert_index(index, j) {
                    out.add_term(merged, sign * g);
                }
            }
        }
        Ok(out)
    }

    /// `d(dα)` at `point` assembled naively from coefficient Hessians; the
    /// antisymmetrization cancels symmetric second derivatives, so the result
    /// measures roundoff in the jet machinery.
    pub fn second_derivative(
        alpha: &FormExpression,
        point: &[f64],
    ) -> Result<ValueForm, ExprError> {
        let n = alpha.num_vars();
        let mut out = ValueForm {
            degree: alpha.degree() + 2,
            num_vars: n,
            terms: Vec::new(),
        };
        for (index, coeff) in alpha.coefficients() {
            let jet = coeff.eval_jet_raw(point)?;
            for j in 0..n {
                let Some((sign_j, idx_j)) = insert_index(index, j) else {
                    continue;
                };
                for k in 0..n {
                    let h = jet.hessian_entry(k, j);
                    if h == 0.0 {
                        continue;
                    }
                    if let Some((sign_k, idx_kj)) = insert_index(&idx_j, k) {
                        out.add_term(idx_kj, sign_k * sign_j * h);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn wedge(&self, other: &ValueForm) -> ValueForm {
        debug_assert_eq!(self.num_vars, other.num_vars);
        let mut out = ValueForm {
            degree: self.degree + other.degree,
            num_vars: self.num_vars,
            terms: Vec::new(),
        };
        for (i, a) in &self.terms {
            for (j, b) in &other.terms {
                if let Some((sign, merged)) = merge_indices(i, j) {
                    out.add_term(merged, sign * a * b);
                }
            }
        }
        out
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max)
    }
}

/// Insert `j` into a strictly increasing index, returning the permutation
/// sign; None if already present.
fn insert_index(index: &[usize], j: usize) -> Option<(f64, Vec<usize>)> {
    if index.contains(&j) {
        return None;
    }
    let pos = index.iter().take_while(|&&i| i < j).count();
    let mut merged = Vec::with_capacity(index.len() + 1);
    merged.extend_from_slice(&index[..pos]);
    merged.push(j);
    merged.extend_from_slice(&index[pos..]);
    let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
    Some((sign, merged))
}

/// Sort the concatenation of two increasing indices, with sign; None if they
/// overlap.
fn merge_indices(a: &[usize], b: &[usize]) -> Option<(f64, Vec<usize>)> {
    let mut sign = 1.0;
    let mut merged = a.to_vec();
    for &j in b {
        if merged.contains(&j) {
            return None;
        }
        // j enters past every current element greater than it.
        let pos = merged.iter().take_while(|&&i| i < j).count();
        if (merged.len() - pos) % 2 == 1 {
            sign = -sign;
        }
        merged.insert(pos, j);
    }
    Some((sign, merged))
}

/// Anything evaluable as a differential form at a point on a frame.
pub trait FormField {
    fn degree(&self) -> usize;
    fn num_vars(&self) -> usize;
    fn eval(&self, point: &[f64], vectors: &[DVector<f64>]) -> Result<f64, ExprError>;
}

impl FormField for FormExpression {
    fn degree(&self) -> usize {
        FormExpression::degree(self)
    }
    fn num_vars(&self) -> usize {
        FormExpression::num_vars(self)
    }
    fn eval(&self, point: &[f64], vectors: &[DVector<f64>]) -> Result<f64, ExprError> {
        FormExpression::eval(self, point, vectors)
    }
}

/// The exterior derivative of a form expression, evaluated through jets.
pub struct ExteriorDerivative<'a>(pub &'a FormExpression);

impl FormField for ExteriorDerivative<'_> {
    fn degree(&self) -> usize {
        self.0.degree() + 1
    }
    fn num_vars(&self) -> usize {
        self.0.num_vars()
    }
    fn eval(&self, point: &[f64], vectors: &[DVector<f64>]) -> Result<f64, ExprError> {
        Ok(ValueForm::exterior_derivative(self.0, point)?.eval(vectors))
    }
}

/// The wedge `α ∧ β` evaluated pointwise.
pub struct WedgeField<'a> {
    pub alpha: &'a FormExpression,
    pub beta: &'a FormExpression,
}

impl FormField for WedgeField<'_> {
    fn degree(&self) -> usize {
        self.alpha.degree() + self.beta.degree()
    }
    fn num_vars(&self) -> usize {
        self.alpha.num_vars()
    }
    fn eval(&self, point: &[f64], vectors: &[DVector<f64>]) -> Result<f64, ExprError> {
        let a = ValueForm::of(self.alpha, point)?;
        let b = ValueForm::of(self.beta, point)?;
        Ok(a.wedge(&b).eval(vectors))
    }
}
