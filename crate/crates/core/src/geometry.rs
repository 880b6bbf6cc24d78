//! Compact manifolds as implicit hypersurfaces or flat quotients.
//!
//! The backend owns the metric convention: implicit hypersurfaces carry the
//! metric induced from the ambient Euclidean space, flat quotients carry the
//! flat metric of the covering `R^n`. Orientation of a hypersurface is the
//! outward co-orientation through `∇c` (tangent frame positive iff appending
//! the outward normal gives a positive ambient frame); quotients use the
//! standard coordinate orientation, with the Klein bottle flagged
//! non-orientable.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::expr::{ExprError, ScalarExpression};

const RETRACT_TOL: f64 = 1e-12;
const RETRACT_MAX_STEPS: usize = 50;
const REGULARITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("retraction did not converge after {RETRACT_MAX_STEPS} Newton steps near {point:?}")]
    RetractionFailed { point: Vec<f64> },
    #[error("constraint gradient below {REGULARITY_TOL} at {point:?} (irregular level set)")]
    SingularConstraint { point: Vec<f64> },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Affine isometry `x ↦ L·x + t` of the covering Euclidean space.
#[derive(Debug, Clone)]
pub struct AffineIsometry {
    pub linear: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl AffineIsometry {
    pub fn translation_by(t: DVector<f64>) -> Self {
        let n = t.len();
        AffineIsometry {
            linear: DMatrix::identity(n, n),
            translation: t,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.translation
    }

    pub fn apply_linear(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.linear * v
    }
}

/// Deck transformation as an exponent word over the backend's generators.
///
/// For the torus the generators are the unit translations and the word is the
/// lattice vector. For the Klein bottle the word is the canonical form
/// `g^a ∘ t^b` with `g` the glide `(x, y) ↦ (x + 1/2, −y)` and `t` the unit
/// `y`-translation; composition uses `g t^b = t^{−b} g`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeckWord {
    pub exponents: Vec<i64>,
}

impl DeckWord {
    pub fn identity(len: usize) -> Self {
        DeckWord {
            exponents: vec![0; len],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuotientKind {
    Torus,
    KleinBottle,
}

/// The manifold `X` together with its metric and orientation data.
#[derive(Debug, Clone)]
pub enum ManifoldBackend {
    /// Regular zero level `c^{-1}(0)` of an ambient expression, codimension 1.
    ImplicitHypersurface {
        ambient_dim: usize,
        constraint: ScalarExpression,
    },
    /// `R^n` modulo a deck group acting freely; fundamental cell inside the
    /// unit box.
    FlatQuotient { dim: usize, kind: QuotientKind },
}

/// Orthonormal tangent vectors at a base point, with a sign relative to the
/// manifold orientation when the frame has full rank (orientable case).
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub base: DVector<f64>,
    pub vectors: Vec<DVector<f64>>,
    pub orientation_sign: i8,
}

impl ManifoldBackend {
    pub fn implicit(ambient_dim: usize, constraint: ScalarExpression) -> Self {
        assert_eq!(constraint.num_vars(), ambient_dim);
        ManifoldBackend::ImplicitHypersurface {
            ambient_dim,
            constraint,
        }
    }

    pub fn flat_torus(dim: usize) -> Self {
        ManifoldBackend::FlatQuotient {
            dim,
            kind: QuotientKind::Torus,
        }
    }

    pub fn klein_bottle() -> Self {
        ManifoldBackend::FlatQuotient {
            dim: 2,
            kind: QuotientKind::KleinBottle,
        }
    }

    /// Dimension of the manifold itself.
    pub fn dim(&self) -> usize {
        match self {
            ManifoldBackend::ImplicitHypersurface { ambient_dim, .. } => ambient_dim - 1,
            ManifoldBackend::FlatQuotient { dim, .. } => *dim,
        }
    }

    /// Dimension of the space points live in (ambient space or cover).
    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldBackend::ImplicitHypersurface { ambient_dim, .. } => *ambient_dim,
            ManifoldBackend::FlatQuotient { dim, .. } => *dim,
        }
    }

    pub fn orientable(&self) -> bool {
        match self {
            ManifoldBackend::ImplicitHypersurface { .. } => true,
            ManifoldBackend::FlatQuotient { kind, .. } => *kind == QuotientKind::Torus,
        }
    }

    pub fn deck_generators(&self) -> Vec<AffineIsometry> {
        match self {
            ManifoldBackend::ImplicitHypersurface { .. } => Vec::new(),
            ManifoldBackend::FlatQuotient { dim, kind } => match kind {
                QuotientKind::Torus => (0..*dim)
                    .map(|i| {
                        let mut t = DVector::zeros(*dim);
                        t[i] = 1.0;
                        AffineIsometry::translation_by(t)
                    })
                    .collect(),
                QuotientKind::KleinBottle => {
                    let glide = AffineIsometry {
                        linear: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
                        translation: DVector::from_vec(vec![0.5, 0.0]),
                    };
                    let ty = AffineIsometry::translation_by(DVector::from_vec(vec![0.0, 1.0]));
                    vec![glide, ty]
                }
            },
        }
    }

    pub fn word_isometry(&self, word: &DeckWord) -> AffineIsometry {
        match self {
            ManifoldBackend::ImplicitHypersurface { ambient_dim, .. } => AffineIsometry {
                linear: DMatrix::identity(*ambient_dim, *ambient_dim),
                translation: DVector::zeros(*ambient_dim),
            },
            ManifoldBackend::FlatQuotient { dim, kind } => match kind {
                QuotientKind::Torus => {
                    let t = DVector::from_fn(*dim, |i, _| word.exponents[i] as f64);
                    AffineIsometry::translation_by(t)
                }
                QuotientKind::KleinBottle => {
                    let a = word.exponents[0];
                    let b = word.exponents[1];
                    let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
                    AffineIsometry {
                        linear: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, sign]),
                        translation: DVector::from_vec(vec![0.5 * a as f64, sign * b as f64]),
                    }
                }
            },
        }
    }

    pub fn invert_word(&self, word: &DeckWord) -> DeckWord {
        match self {
            ManifoldBackend::FlatQuotient {
                kind: QuotientKind::KleinBottle,
                ..
            } => {
                // (g^a t^b)^{-1} = g^{-a} t^{-(-1)^a b}
                let a = word.exponents[0];
                let b = word.exponents[1];
                let s = if a % 2 == 0 { 1 } else { -1 };
                DeckWord {
                    exponents: vec![-a, -s * b],
                }
            }
            _ => DeckWord {
                exponents: word.exponents.iter().map(|e| -e).collect(),
            },
        }
    }

    pub fn compose_words(&self, first: &DeckWord, then: &DeckWord) -> DeckWord {
        match self {
            ManifoldBackend::FlatQuotient {
                kind: QuotientKind::KleinBottle,
                ..
            } => {
                // (g^a t^b)(g^c t^d) = g^{a+c} t^{(-1)^c b + d}
                let (a, b) = (then.exponents[0], then.exponents[1]);
                let (c, d) = (first.exponents[0], first.exponents[1]);
                let s = if c % 2 == 0 { 1 } else { -1 };
                DeckWord {
                    exponents: vec![a + c, s * b + d],
                }
            }
            _ => DeckWord {
                exponents: first
                    .exponents
                    .iter()
                    .zip(&then.exponents)
                    .map(|(a, b)| a + b)
                    .collect(),
            },
        }
    }

    /// Project a nearby ambient point onto the manifold.
    ///
    /// Implicit backends run Newton along `∇c` until `|c| < 1e−12`; quotients
    /// reduce to the canonical fundamental cell. Returns the point together
    /// with the deck word `w` such that the input equals `w(reduced)`
    /// (identity word for implicit backends).
    pub fn retract(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DeckWord), GeomError> {
        match self {
            ManifoldBackend::ImplicitHypersurface { constraint, .. } => {
                let mut p = x.clone();
                for _ in 0..RETRACT_MAX_STEPS {
                    let jet = constraint.eval_jet_raw(p.as_slice())?;
                    let c = jet.value();
                    if c.abs() < RETRACT_TOL {
                        return Ok((p, DeckWord::identity(0)));
                    }
                    let grad = DVector::from_row_slice(jet.gradient());
                    let g2 = grad.norm_squared();
                    if g2.sqrt() < REGULARITY_TOL {
                        return Err(GeomError::SingularConstraint {
                            point: p.as_slice().to_vec(),
                        });
                    }
                    p -= grad * (c / g2);
                }
                Err(GeomError::RetractionFailed {
                    point: x.as_slice().to_vec(),
                })
            }
            ManifoldBackend::FlatQuotient { kind, .. } => Ok(self.reduce_quotient(x, *kind)),
        }
    }

    fn reduce_quotient(&self, x: &DVector<f64>, kind: QuotientKind) -> (DVector<f64>, DeckWord) {
        match kind {
            QuotientKind::Torus => {
                let mut r = x.clone();
                let mut exps = Vec::with_capacity(x.len());
                for i in 0..x.len() {
                    let m = x[i].floor();
                    r[i] = x[i] - m;
                    if r[i] >= 1.0 {
                        // Guard against x[i] just below an integer rounding up.
                        r[i] -= 1.0;
                        exps.push(m as i64 + 1);
                    } else {
                        exps.push(m as i64);
                    }
                }
                (r, DeckWord { exponents: exps })
            }
            QuotientKind::KleinBottle => {
                // Canonical cell [0, 1/2) × [0, 1); x = g^a t^b (reduced).
                let mut a = (2.0 * x[0]).floor() as i64;
                let mut rx = x[0] - 0.5 * a as f64;
                if rx >= 0.5 {
                    // Rounding can land exactly on the cell edge.
                    rx -= 0.5;
                    a += 1;
                }
                let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
                let yy = sign * x[1];
                let mut b = yy.floor() as i64;
                let mut ry = yy - b as f64;
                if ry >= 1.0 {
                    ry -= 1.0;
                    b += 1;
                }
                (
                    DVector::from_vec(vec![rx, ry]),
                    DeckWord {
                        exponents: vec![a, b],
                    },
                )
            }
        }
    }

    /// Shortest displacement from `base` (a canonical-cell point) to `x`
    /// modulo the deck group; for implicit backends this is plain `x − base`.
    pub fn displacement(&self, x: &DVector<f64>, base: &DVector<f64>) -> DVector<f64> {
        self.nearest_word_and_displacement(x, base).1
    }

    /// The deck word `w` minimizing `|x − w(base)|`, with that displacement.
    pub fn nearest_word_and_displacement(
        &self,
        x: &DVector<f64>,
        base: &DVector<f64>,
    ) -> (DeckWord, DVector<f64>) {
        match self {
            ManifoldBackend::ImplicitHypersurface { .. } => (DeckWord::identity(0), x - base),
            ManifoldBackend::FlatQuotient { kind, .. } => match kind {
                QuotientKind::Torus => {
                    let exps: Vec<i64> =
                        (0..x.len()).map(|i| (x[i] - base[i]).round() as i64).collect();
                    let d = DVector::from_fn(x.len(), |i, _| {
                        let d = x[i] - base[i];
                        d - d.round()
                    });
                    (DeckWord { exponents: exps }, d)
                }
                QuotientKind::KleinBottle => {
                    let mut best: Option<(DeckWord, DVector<f64>)> = None;
                    let a0 = (2.0 * (x[0] - base[0])).round() as i64;
                    for a in (a0 - 1)..=(a0 + 1) {
                        let s = if a % 2 == 0 { 1.0 } else { -1.0 };
                        let word = DeckWord {
                            exponents: vec![a, 0],
                        };
                        let moved = self.word_isometry(&word).apply(base);
                        // The y-increment per unit of b is s, so divide by s.
                        let b0 = ((x[1] - moved[1]) * s).round() as i64;
                        for b in (b0 - 1)..=(b0 + 1) {
                            let img = DVector::from_vec(vec![
                                moved[0],
                                moved[1] + s * b as f64,
                            ]);
                            let d = x - &img;
                            if best.as_ref().is_none_or(|(_, bd)| d.norm() < bd.norm()) {
                                best = Some((
                                    DeckWord {
                                        exponents: vec![a, b],
                                    },
                                    d,
                                ));
                            }
                        }
                    }
                    best.unwrap()
                }
            },
        }
    }

    /// Distance between two points on the manifold (deck-aware for quotients).
    pub fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.displacement(a, b).norm()
    }

    /// Outward unit normal `∇c/|∇c|` for implicit backends.
    pub fn unit_normal(&self, x: &DVector<f64>) -> Result<DVector<f64>, GeomError> {
        match self {
            ManifoldBackend::ImplicitHypersurface { constraint, .. } => {
                let jet = constraint.eval_jet_raw(x.as_slice())?;
                let grad = DVector::from_row_slice(jet.gradient());
                let norm = grad.norm();
                if norm < REGULARITY_TOL {
                    return Err(GeomError::SingularConstraint {
                        point: x.as_slice().to_vec(),
                    });
                }
                Ok(grad / norm)
            }
            ManifoldBackend::FlatQuotient { .. } => {
                panic!("unit_normal is only defined for implicit backends")
            }
        }
    }

    /// Orthogonal projection of an ambient vector onto the tangent space.
    pub fn tangent_project(
        &self,
        x: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>, GeomError> {
        match self {
            ManifoldBackend::ImplicitHypersurface { .. } => {
                let n = self.unit_normal(x)?;
                Ok(v - &n * v.dot(&n))
            }
            ManifoldBackend::FlatQuotient { .. } => Ok(v.clone()),
        }
    }

    /// Deterministic orthonormal tangent basis at `x` (coordinate axes,
    /// Gram-Schmidt against the normal for implicit backends).
    pub fn tangent_basis(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>, GeomError> {
        match self {
            ManifoldBackend::ImplicitHypersurface { ambient_dim, .. } => {
                let normal = self.unit_normal(x)?;
                let mut basis: Vec<DVector<f64>> = Vec::with_capacity(ambient_dim - 1);
                for i in 0..*ambient_dim {
                    if basis.len() == ambient_dim - 1 {
                        break;
                    }
                    let mut v = DVector::zeros(*ambient_dim);
                    v[i] = 1.0;
                    v -= &normal * v.dot(&normal);
                    for b in &basis {
                        let d = v.dot(b);
                        v -= b * d;
                    }
                    let norm = v.norm();
                    if norm > 1e-6 {
                        basis.push(v / norm);
                    }
                }
                Ok(basis)
            }
            ManifoldBackend::FlatQuotient { dim, .. } => Ok((0..*dim)
                .map(|i| {
                    let mut v = DVector::zeros(*dim);
                    v[i] = 1.0;
                    v
                })
                .collect()),
        }
    }

    /// Riemannian gradient of `f` restricted to the manifold: the tangential
    /// part of the ambient/chart gradient.
    pub fn riemannian_gradient(
        &self,
        f: &ScalarExpression,
        x: &DVector<f64>,
    ) -> Result<DVector<f64>, GeomError> {
        let jet = f.eval_jet_raw(x.as_slice())?;
        let grad = DVector::from_row_slice(jet.gradient());
        self.tangent_project(x, &grad)
    }

    /// Hessian of `f|_M` in an orthonormal tangent basis, valid at critical
    /// points. For implicit backends the second-fundamental-form correction
    /// `Hess f − (⟨∇f, n̂⟩/|∇c|)·Hess c` is applied before restricting.
    pub fn tangent_hessian(
        &self,
        f: &ScalarExpression,
        x: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, Vec<DVector<f64>>), GeomError> {
        let basis = self.tangent_basis(x)?;
        let n = basis.len();
        let jet_f = f.eval_jet_raw(x.as_slice())?;
        let dim = self.ambient_dim();
        let mut ambient = DMatrix::from_fn(dim, dim, |i, j| jet_f.hessian_entry(i, j));
        if let ManifoldBackend::ImplicitHypersurface { constraint, .. } = self {
            let jet_c = constraint.eval_jet_raw(x.as_slice())?;
            let grad_c = DVector::from_row_slice(jet_c.gradient());
            let grad_f = DVector::from_row_slice(jet_f.gradient());
            let norm_c = grad_c.norm();
            if norm_c < REGULARITY_TOL {
                return Err(GeomError::SingularConstraint {
                    point: x.as_slice().to_vec(),
                });
            }
            let mu = grad_f.dot(&grad_c) / (norm_c * norm_c);
            // ⟨∇f, n̂⟩/|∇c| = ⟨∇f, ∇c⟩/|∇c|².
            for i in 0..dim {
                for j in 0..dim {
                    ambient[(i, j)] -= mu * jet_c.hessian_entry(i, j);
                }
            }
        }
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            let hi = &ambient * &basis[i];
            for j in 0..=i {
                let v = hi.dot(&basis[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok((h, basis))
    }

    /// Signed volume of a full tangent frame against the manifold
    /// orientation: positive iff the frame is positively oriented.
    pub fn frame_det(&self, x: &DVector<f64>, vectors: &[DVector<f64>]) -> Result<f64, GeomError> {
        let n = self.dim();
        assert_eq!(vectors.len(), n, "frame_det needs a full frame");
        match self {
            ManifoldBackend::ImplicitHypersurface { ambient_dim, .. } => {
                let normal = self.unit_normal(x)?;
                let mut m = DMatrix::zeros(*ambient_dim, *ambient_dim);
                for (c, v) in vectors.iter().enumerate() {
                    m.set_column(c, v);
                }
                m.set_column(n, &normal);
                Ok(m.determinant())
            }
            ManifoldBackend::FlatQuotient { dim, .. } => {
                let mut m = DMatrix::zeros(*dim, *dim);
                for (c, v) in vectors.iter().enumerate() {
                    m.set_column(c, v);
                }
                Ok(m.determinant())
            }
        }
    }

    /// Draw a quasi-uniform sample point on the manifold.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Result<DVector<f64>, GeomError> {
        match self {
            ManifoldBackend::ImplicitHypersurface { ambient_dim, .. } => {
                // Gaussian direction, normalized, then projected; works for the
                // catalog's sphere-like constraints.
                loop {
                    let v = DVector::from_fn(*ambient_dim, |_, _| {
                        let u1: f64 = rng.gen_range(1e-12..1.0);
                        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                        (-2.0 * u1.ln()).sqrt() * u2.cos()
                    });
                    let norm = v.norm();
                    if norm < 1e-6 {
                        continue;
                    }
                    if let Ok((p, _)) = self.retract(&(v / norm)) {
                        return Ok(p);
                    }
                }
            }
            ManifoldBackend::FlatQuotient { dim, kind } => {
                let x = DVector::from_fn(*dim, |_, _| rng.gen_range(0.0..1.0));
                Ok(self.reduce_quotient(&x, *kind).0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere() -> ManifoldBackend {
        let c = ScalarExpression::parse("x^2+y^2+z^2-1", 3).unwrap();
        ManifoldBackend::implicit(3, c)
    }

    fn v3(x: f64, y: f64, z: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y, z])
    }

    #[test]
    fn sphere_retraction_is_radial() {
        let m = sphere();
        let (p, _) = m.retract(&v3(0.0, 0.0, 2.0)).unwrap();
        assert!((p - v3(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn retraction_is_idempotent() {
        let m = sphere();
        let (p, _) = m.retract(&v3(0.4, -0.8, 0.9)).unwrap();
        let (q, _) = m.retract(&p).unwrap();
        assert!((p - q).norm() < 1e-12);
    }

    #[test]
    fn torus_reduction_with_deck_element() {
        let m = ManifoldBackend::flat_torus(2);
        let x = DVector::from_vec(vec![1.25, -0.5]);
        let (r, w) = m.retract(&x).unwrap();
        assert!((r[0] - 0.25).abs() < 1e-15);
        assert!((r[1] - 0.5).abs() < 1e-15);
        assert_eq!(w.exponents, vec![1, -1]);
        // x = w(reduced)
        let img = m.word_isometry(&w).apply(&r);
        assert!((img - x).norm() < 1e-15);
    }

    #[test]
    fn klein_reduction_uses_glide() {
        let m = ManifoldBackend::klein_bottle();
        let x = DVector::from_vec(vec![0.6, 0.8]);
        let (r, w) = m.retract(&x).unwrap();
        assert!(r[0] >= 0.0 && r[0] < 0.5);
        assert!(r[1] >= 0.0 && r[1] < 1.0);
        let img = m.word_isometry(&w).apply(&r);
        assert!((img - x).norm() < 1e-12);
        // (0.6, 0.8) = g(0.1, -0.8) = g t^{-1} (0.1, 0.2)
        assert!((r[0] - 0.1).abs() < 1e-12);
        assert!((r[1] - 0.2).abs() < 1e-12);
        assert_eq!(w.exponents, vec![1, -1]);
    }

    #[test]
    fn klein_words_compose_and_invert() {
        let m = ManifoldBackend::klein_bottle();
        let a = DeckWord {
            exponents: vec![1, 2],
        };
        let b = DeckWord {
            exponents: vec![3, -1],
        };
        // Check against explicit isometry composition: (b∘a)(x) = b(a(x)).
        let x = DVector::from_vec(vec![0.3, 0.7]);
        let via_words = m
            .word_isometry(&m.compose_words(&a, &b))
            .apply(&x);
        let via_isos = m.word_isometry(&b).apply(&m.word_isometry(&a).apply(&x));
        assert!((via_words - via_isos).norm() < 1e-12);
        let inv = m.invert_word(&a);
        let id = m.compose_words(&a, &inv);
        assert!(id.is_identity());
    }

    #[test]
    fn tangent_projection_removes_normal() {
        let m = sphere();
        let x = v3(0.0, 0.0, 1.0);
        let p = m.tangent_project(&x, &v3(1.0, 2.0, 3.0)).unwrap();
        assert!((&p - v3(1.0, 2.0, 0.0)).norm() < 1e-12);
        let c = ScalarExpression::parse("x^2+y^2+z^2-1", 3).unwrap();
        let grad_c = DVector::from_row_slice(c.eval_jet_raw(x.as_slice()).unwrap().gradient());
        assert!(p.dot(&grad_c).abs() < 1e-12);
    }

    #[test]
    fn riemannian_gradient_of_height() {
        let m = sphere();
        let f = ScalarExpression::parse("z", 3).unwrap();
        let g = m.riemannian_gradient(&f, &v3(1.0, 0.0, 0.0)).unwrap();
        assert!((g - v3(0.0, 0.0, 1.0)).norm() < 1e-12);
        let g_pole = m.riemannian_gradient(&f, &v3(0.0, 0.0, 1.0)).unwrap();
        assert!(g_pole.norm() < 1e-12);
    }

    #[test]
    fn tangent_hessian_of_height_at_poles() {
        let m = sphere();
        let f = ScalarExpression::parse("z", 3).unwrap();
        let (h, _) = m.tangent_hessian(&f, &v3(0.0, 0.0, 1.0)).unwrap();
        assert!((h[(0, 0)] + 1.0).abs() < 1e-12);
        assert!((h[(1, 1)] + 1.0).abs() < 1e-12);
        assert!(h[(0, 1)].abs() < 1e-12);
        let (h_s, _) = m.tangent_hessian(&f, &v3(0.0, 0.0, -1.0)).unwrap();
        assert!((h_s[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((h_s[(1, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn torus_gradient_in_chart() {
        let m = ManifoldBackend::flat_torus(2);
        let f = ScalarExpression::parse("cos(2*pi*x)+cos(2*pi*y)", 2).unwrap();
        let g = m
            .riemannian_gradient(&f, &DVector::from_vec(vec![0.5, 0.25]))
            .unwrap();
        let tau = std::f64::consts::TAU;
        assert!(g[0].abs() < 1e-12);
        assert!((g[1] + tau).abs() < 1e-12);
    }

    #[test]
    fn orientation_sign_flips_with_odd_permutation() {
        let m = sphere();
        let x = v3(0.0, 0.0, 1.0);
        let b = m.tangent_basis(&x).unwrap();
        let pos = m.frame_det(&x, &[b[0].clone(), b[1].clone()]).unwrap();
        let neg = m.frame_det(&x, &[b[1].clone(), b[0].clone()]).unwrap();
        assert!(pos * neg < 0.0);
    }

    #[test]
    fn displacement_wraps_on_torus() {
        let m = ManifoldBackend::flat_torus(2);
        let a = DVector::from_vec(vec![0.95, 0.1]);
        let b = DVector::from_vec(vec![0.05, 0.1]);
        assert!(m.distance(&a, &b) < 0.11);
    }
}
