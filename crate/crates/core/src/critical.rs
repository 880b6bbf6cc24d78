//! Critical points of `f` on `X`: location, Morse index, oriented eigenframes.
//!
//! Newton iteration on the projected gradient runs from every seed; converged
//! points are merged up to the deck group, classified through the tangent
//! Hessian, and given deterministic orientations of their stable and unstable
//! eigenspaces. The orientation convention is the one every downstream sign
//! depends on: the concatenated frame (unstable, stable) is positively
//! oriented on orientable backends.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::ScalarExpression;
use crate::geometry::{GeomError, ManifoldBackend, TangentFrame};

#[derive(Debug, Error)]
pub enum CriticalError {
    #[error(
        "degenerate critical point at {location:?}: eigenvalue {eigenvalue:.3e} below the \
         nondegeneracy tolerance {tol:.1e} (the theory requires a Morse function)"
    )]
    Degenerate {
        location: Vec<f64>,
        eigenvalue: f64,
        tol: f64,
    },
    #[error("no critical points found from {0} seeds")]
    NoneFound(usize),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// How to choose Newton starting points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeedSpec {
    /// Deterministic grid with the given per-axis counts over the sampling box.
    Grid { per_axis: Vec<usize> },
    /// `count` seeds from a seeded PRNG.
    Random { count: usize, seed: u64 },
}

impl SeedSpec {
    /// Default sampling at desk scale: `32·3^n` seeds from a fixed seed.
    pub fn default_for(manifold: &ManifoldBackend) -> Self {
        let n = manifold.dim() as u32;
        SeedSpec::Random {
            count: 32 * 3usize.pow(n),
            seed: 0x6d6f7273,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalOptions {
    pub grad_tol: f64,
    pub nondegen_tol: f64,
    pub merge_tol: f64,
    pub max_newton: usize,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions {
            grad_tol: 1e-10,
            nondegen_tol: 1e-6,
            merge_tol: 1e-6,
            max_newton: 100,
        }
    }
}

/// A nondegenerate critical point with its oriented eigenframes.
///
/// `unstable_frame` spans the positive-eigenvalue eigenspace (dimension
/// `n − index`), `stable_frame` the negative one (dimension `index`);
/// eigenvalues are sorted ascending and each frame is ordered by ascending
/// eigenvalue with deterministically normalized signs.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub id: usize,
    pub location: DVector<f64>,
    pub value: f64,
    pub index: usize,
    pub eigenvalues: Vec<f64>,
    pub unstable_frame: TangentFrame,
    pub stable_frame: TangentFrame,
}

impl CriticalPoint {
    /// Eigenvectors ordered stable-then-unstable, i.e. ascending eigenvalue.
    pub fn full_frame(&self) -> Vec<DVector<f64>> {
        self.stable_frame
            .vectors
            .iter()
            .chain(self.unstable_frame.vectors.iter())
            .cloned()
            .collect()
    }
}

/// All critical points, sorted by (value, id).
#[derive(Debug, Clone)]
pub struct CriticalSet {
    pub points: Vec<CriticalPoint>,
    pub merge_tol: f64,
}

impl CriticalSet {
    pub fn by_id(&self, id: usize) -> &CriticalPoint {
        self.points.iter().find(|p| p.id == id).expect("unknown id")
    }

    pub fn of_index(&self, k: usize) -> Vec<&CriticalPoint> {
        self.points.iter().filter(|p| p.index == k).collect()
    }

    pub fn index_counts(&self, dim: usize) -> Vec<usize> {
        let mut counts = vec![0; dim + 1];
        for p in &self.points {
            counts[p.index] += 1;
        }
        counts
    }

    /// Alternating sum `Σ (−1)^λ` over the points.
    pub fn euler_characteristic(&self) -> i64 {
        self.points
            .iter()
            .map(|p| if p.index % 2 == 0 { 1 } else { -1 })
            .sum()
    }
}

/// Locate, merge, classify and orient all critical points of `f` on `M`.
pub fn find_critical_points(
    manifold: &ManifoldBackend,
    f: &ScalarExpression,
    seeds: &SeedSpec,
    opts: &CriticalOptions,
) -> Result<CriticalSet, CriticalError> {
    let seed_points = generate_seeds(manifold, seeds);
    let total = seed_points.len();
    let converged: Vec<DVector<f64>> = seed_points
        .into_par_iter()
        .filter_map(|s| newton_refine(manifold, f, s, opts))
        .collect();

    // Deterministic merge in seed order, first occurrence wins.
    let mut reps: Vec<DVector<f64>> = Vec::new();
    for p in converged {
        if !reps.iter().any(|r| manifold.distance(&p, r) < opts.merge_tol) {
            reps.push(p);
        }
    }
    if reps.is_empty() {
        return Err(CriticalError::NoneFound(total));
    }

    let mut points = Vec::with_capacity(reps.len());
    for loc in reps {
        points.push(classify(manifold, f, loc, opts)?);
    }
    // Stable ordering: by value, then lexicographic location.
    points.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .unwrap()
            .then_with(|| {
                a.location
                    .as_slice()
                    .partial_cmp(b.location.as_slice())
                    .unwrap()
            })
    });
    for (id, p) in points.iter_mut().enumerate() {
        p.id = id;
    }
    Ok(CriticalSet {
        points,
        merge_tol: opts.merge_tol,
    })
}

fn generate_seeds(manifold: &ManifoldBackend, seeds: &SeedSpec) -> Vec<DVector<f64>> {
    match seeds {
        SeedSpec::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count)
                .filter_map(|_| manifold.sample_point(&mut rng).ok())
                .collect()
        }
        SeedSpec::Grid { per_axis } => {
            let dim = manifold.ambient_dim();
            assert_eq!(per_axis.len(), dim, "grid spec must match ambient dim");
            let implicit = matches!(manifold, ManifoldBackend::ImplicitHypersurface { .. });
            let mut out = Vec::new();
            let mut idx = vec![0usize; dim];
            loop {
                let mut x = DVector::zeros(dim);
                for a in 0..dim {
                    let frac = (idx[a] as f64 + 0.5) / per_axis[a] as f64;
                    x[a] = if implicit { -1.1 + 2.2 * frac } else { frac };
                }
                if let Ok((p, _)) = manifold.retract(&x) {
                    out.push(p);
                }
                // Odometer increment.
                let mut a = 0;
                loop {
                    if a == dim {
                        return out;
                    }
                    idx[a] += 1;
                    if idx[a] < per_axis[a] {
                        break;
                    }
                    idx[a] = 0;
                    a += 1;
                }
            }
        }
    }
}

fn newton_refine(
    manifold: &ManifoldBackend,
    f: &ScalarExpression,
    seed: DVector<f64>,
    opts: &CriticalOptions,
) -> Option<DVector<f64>> {
    const STEP_CAP: f64 = 0.25;
    let mut x = seed;
    for _ in 0..opts.max_newton {
        let grad = manifold.riemannian_gradient(f, &x).ok()?;
        if grad.norm() < opts.grad_tol {
            let (reduced, _) = manifold.retract(&x).ok()?;
            return Some(reduced);
        }
        let (h, basis) = manifold.tangent_hessian(f, &x).ok()?;
        let n = basis.len();
        let g_loc = DVector::from_fn(n, |i, _| grad.dot(&basis[i]));
        let mut delta = solve_damped(&h, &g_loc, 0.0)?;
        if !delta.iter().all(|d| d.is_finite()) || delta.norm() > 1e6 {
            delta = solve_damped(&h, &g_loc, 1e-9)?;
        }
        let norm = delta.norm();
        if norm > STEP_CAP {
            delta *= STEP_CAP / norm;
        }
        let mut step = DVector::zeros(manifold.ambient_dim());
        for i in 0..n {
            step += &basis[i] * delta[i];
        }
        x = manifold.retract(&(x + step)).ok()?.0;
    }
    None
}

fn solve_damped(h: &DMatrix<f64>, g: &DVector<f64>, damping: f64) -> Option<DVector<f64>> {
    let n = h.nrows();
    let mut damp = damping;
    for _ in 0..6 {
        let m = h + DMatrix::identity(n, n) * damp;
        if let Some(sol) = m.lu().solve(&(-g)) {
            if sol.iter().all(|v| v.is_finite()) {
                return Some(sol);
            }
        }
        damp = if damp == 0.0 { 1e-9 } else { damp * 100.0 };
    }
    None
}

fn classify(
    manifold: &ManifoldBackend,
    f: &ScalarExpression,
    location: DVector<f64>,
    opts: &CriticalOptions,
) -> Result<CriticalPoint, CriticalError> {
    let value = f.eval(location.as_slice()).map_err(GeomError::from)?;
    let (h, basis) = manifold.tangent_hessian(f, &location)?;
    let eig = h.clone().symmetric_eigen();
    let n = basis.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if let Some(&bad) = eigenvalues
        .iter()
        .find(|v| v.abs() <= opts.nondegen_tol)
    {
        return Err(CriticalError::Degenerate {
            location: location.as_slice().to_vec(),
            eigenvalue: bad,
            tol: opts.nondegen_tol,
        });
    }
    let index = eigenvalues.iter().filter(|v| **v < 0.0).count();

    // Eigenvectors in ambient coordinates, ascending eigenvalue, each
    // sign-normalized so its largest-magnitude coordinate is positive.
    let ambient_vecs: Vec<DVector<f64>> = order
        .iter()
        .map(|&i| {
            let col = eig.eigenvectors.column(i);
            let mut v = DVector::zeros(manifold.ambient_dim());
            for (j, b) in basis.iter().enumerate() {
                v += b * col[j];
            }
            normalize_sign(&mut v);
            v
        })
        .collect();

    let stable: Vec<DVector<f64>> = ambient_vecs[..index].to_vec();
    let unstable: Vec<DVector<f64>> = ambient_vecs[index..].to_vec();
    let mut point = CriticalPoint {
        id: 0,
        location,
        value,
        index,
        eigenvalues,
        unstable_frame: TangentFrame {
            base: DVector::zeros(0),
            vectors: unstable,
            orientation_sign: 1,
        },
        stable_frame: TangentFrame {
            base: DVector::zeros(0),
            vectors: stable,
            orientation_sign: 1,
        },
    };
    point.unstable_frame.base = point.location.clone();
    point.stable_frame.base = point.location.clone();
    orient(&mut point, manifold)?;
    Ok(point)
}

fn normalize_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        *v *= -1.0;
    }
}

/// Fix the orientations of the stable and unstable eigenframes.
///
/// On orientable backends the sign of one vector is adjusted so the
/// concatenated frame (unstable, stable) is positively oriented; this makes
/// `U_p × S_p` agree with the orientation of `X` at `p`. Non-orientable
/// backends keep the normalized frames without global consistency and are
/// restricted to mod-2 outputs downstream.
pub fn orient(point: &mut CriticalPoint, manifold: &ManifoldBackend) -> Result<(), GeomError> {
    if !manifold.orientable() {
        return Ok(());
    }
    let mut frame: Vec<DVector<f64>> = point
        .unstable_frame
        .vectors
        .iter()
        .chain(point.stable_frame.vectors.iter())
        .cloned()
        .collect();
    let det = manifold.frame_det(&point.location, &frame)?;
    if det < 0.0 {
        if !point.stable_frame.vectors.is_empty() {
            point.stable_frame.vectors[0] *= -1.0;
        } else {
            let last = point.unstable_frame.vectors.len() - 1;
            point.unstable_frame.vectors[last] *= -1.0;
        }
        frame = point
            .unstable_frame
            .vectors
            .iter()
            .chain(point.stable_frame.vectors.iter())
            .cloned()
            .collect();
    }
    debug_assert!(manifold.frame_det(&point.location, &frame)? > 0.0);
    Ok(())
}

/// Deterministic admissible sample points on the manifold, at least
/// `margin` away from every critical point.
pub fn sample_away_from(
    manifold: &ManifoldBackend,
    cs: &CriticalSet,
    count: usize,
    margin: f64,
    seed: u64,
) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut guard = 0;
    while out.len() < count && guard < 100 * count {
        guard += 1;
        if let Ok(p) = manifold.sample_point(&mut rng) {
            if cs
                .points
                .iter()
                .all(|c| manifold.distance(&p, &c.location) > margin)
            {
                out.push(p);
            }
        }
    }
    out
}

#[allow(dead_code)]
fn gen_range_guard<R: Rng>(_r: &mut R) {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarExpression;

    fn sphere() -> ManifoldBackend {
        ManifoldBackend::implicit(3, ScalarExpression::parse("x^2+y^2+z^2-1", 3).unwrap())
    }

    #[test]
    fn sphere_height_has_two_points() {
        let m = sphere();
        let f = ScalarExpression::parse("z", 3).unwrap();
        let seeds = SeedSpec::Random {
            count: 100,
            seed: 42,
        };
        let cs = find_critical_points(&m, &f, &seeds, &CriticalOptions::default()).unwrap();
        assert_eq!(cs.points.len(), 2);
        let mut indices: Vec<usize> = cs.points.iter().map(|p| p.index).collect();
        indices.sort_unstable();
        assert_eq!(indices, vec![0, 2]);
        let values: Vec<f64> = cs.points.iter().map(|p| p.value).collect();
        assert!((values[0] + 1.0).abs() < 1e-9);
        assert!((values[1] - 1.0).abs() < 1e-9);
        assert_eq!(cs.euler_characteristic(), 2);
    }

    #[test]
    fn torus_separable_grid() {
        let m = ManifoldBackend::flat_torus(2);
        let f = ScalarExpression::parse("cos(2*pi*x)+cos(2*pi*y)", 2).unwrap();
        let seeds = SeedSpec::Grid {
            per_axis: vec![16, 16],
        };
        let cs = find_critical_points(&m, &f, &seeds, &CriticalOptions::default()).unwrap();
        assert_eq!(cs.points.len(), 4);
        let mut indices: Vec<usize> = cs.points.iter().map(|p| p.index).collect();
        indices.sort_unstable();
        assert_eq!(indices, vec![0, 1, 1, 2]);
        for p in &cs.points {
            for i in 0..2 {
                let doubled = 2.0 * p.location[i];
                assert!(
                    (doubled - doubled.round()).abs() < 1e-8,
                    "expected half-integer coordinates, got {:?}",
                    p.location
                );
            }
        }
        assert_eq!(cs.euler_characteristic(), 0);
    }

    #[test]
    fn degenerate_field_aborts() {
        let m = sphere();
        let f = ScalarExpression::parse("z^2", 3).unwrap();
        let seeds = SeedSpec::Random {
            count: 60,
            seed: 3,
        };
        let err = find_critical_points(&m, &f, &seeds, &CriticalOptions::default()).unwrap_err();
        assert!(matches!(err, CriticalError::Degenerate { .. }));
    }

    #[test]
    fn repeatability_is_bitwise() {
        let m = ManifoldBackend::flat_torus(2);
        let f = ScalarExpression::parse("cos(2*pi*x)+cos(2*pi*y)", 2).unwrap();
        let seeds = SeedSpec::Random {
            count: 200,
            seed: 11,
        };
        let a = find_critical_points(&m, &f, &seeds, &CriticalOptions::default()).unwrap();
        let b = find_critical_points(&m, &f, &seeds, &CriticalOptions::default()).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.location.as_slice(), q.location.as_slice());
            assert_eq!(p.index, q.index);
        }
    }

    #[test]
    fn frames_are_positively_oriented() {
        let m = sphere();
        let f = ScalarExpression::parse("z", 3).unwrap();
        let seeds = SeedSpec::Random {
            count: 100,
            seed: 42,
        };
        let cs = find_critical_points(&m, &f, &seeds, &CriticalOptions::default()).unwrap();
        for p in &cs.points {
            assert_eq!(p.unstable_frame.vectors.len(), 2 - p.index);
            assert_eq!(p.stable_frame.vectors.len(), p.index);
            let frame: Vec<_> = p
                .unstable_frame
                .vectors
                .iter()
                .chain(p.stable_frame.vectors.iter())
                .cloned()
                .collect();
            assert!(m.frame_det(&p.location, &frame).unwrap() > 0.0);
        }
    }

    #[test]
    fn perturbed_sphere_counts() {
        let m = sphere();
        let f = ScalarExpression::parse("z + x^2", 3).unwrap();
        let seeds = SeedSpec::Random {
            count: 288,
            seed: 7,
        };
        let cs = find_critical_points(&m, &f, &seeds, &CriticalOptions::default()).unwrap();
        let counts = cs.index_counts(2);
        assert_eq!(counts, vec![1, 1, 2], "min, saddle, two maxima");
        assert_eq!(cs.euler_characteristic(), 2);
    }

    #[test]
    fn klein_field_counts() {
        let m = ManifoldBackend::klein_bottle();
        let f = ScalarExpression::parse("cos(4*pi*x)+cos(2*pi*y)", 2).unwrap();
        let seeds = SeedSpec::Grid {
            per_axis: vec![12, 12],
        };
        let cs = find_critical_points(&m, &f, &seeds, &CriticalOptions::default()).unwrap();
        assert_eq!(cs.points.len(), 4);
        assert_eq!(cs.euler_characteristic(), 0);
    }
}
