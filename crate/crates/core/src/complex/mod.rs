//! The integer Morse complex and its homology.
//!
//! Generators are the stable manifolds of the critical points, graded by
//! Morse index; the boundary matrix entry for a pair `(p, q)` with
//! `λ_q = λ_p − 1` is `(−1)^{λ_p}·N_{p,q}` with `N_{p,q}` the signed count of
//! connecting lines. `d² = 0` is checked in exact integer arithmetic, and
//! integral, mod-p and twisted homology all reduce to Smith normal form.

pub mod snf;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use thiserror::Error;

use crate::connections::ConnectionData;
use crate::critical::CriticalSet;
use crate::geometry::ManifoldBackend;

pub use snf::{smith_normal_form, SnfDecomposition};

#[derive(Debug, Error)]
pub enum ComplexError {
    #[error(
        "d² ≠ 0: composite entry ({row},{col}) in degrees {degree}→{}→{} equals {value} \
         (a flow line is missing or a sign is wrong)", degree - 1, degree - 2
    )]
    D2NotZero {
        degree: usize,
        row: usize,
        col: usize,
        value: i128,
    },
    #[error("non-orientable backends support mod-2 coefficients only")]
    NonOrientableNeedsMod2,
    #[error("twisted coefficients require a flat-quotient backend")]
    TwistedNeedsQuotient,
    #[error("local system matrix {0} is not unimodular (|det| = {1})")]
    NotUnimodular(usize, String),
    #[error("local system has {got} generator matrices, deck group has {expected}")]
    GeneratorCount { expected: usize, got: usize },
    #[error("modulus {0} is not a prime ≥ 2")]
    BadModulus(u64),
    #[error("torsion coefficient exceeds u64")]
    TorsionOverflow,
    #[error("reversed-flow run failed: {0}")]
    ReversedRun(String),
}

/// Dense integer matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl IntMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMat {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c));
        IntMat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn transpose(&self) -> IntMat {
        let mut t = IntMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Exact product in i128 (boundary matrices are small).
    pub fn mul_i128(&self, o: &IntMat) -> Vec<i128> {
        assert_eq!(self.cols, o.rows);
        let mut out = vec![0i128; self.rows * o.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)] as i128;
                if a == 0 {
                    continue;
                }
                for j in 0..o.cols {
                    out[i * o.cols + j] += a * o[(k, j)] as i128;
                }
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for IntMat {
    type Output = i64;
    fn index(&self, (i, j): (usize, usize)) -> &i64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Representation of the deck group by invertible integer matrices, one per
/// deck generator; twists boundary entries by the flow lines' deck words.
#[derive(Debug, Clone)]
pub struct LocalSystem {
    pub rank: usize,
    pub generators: Vec<IntMat>,
}

impl LocalSystem {
    pub fn new(rank: usize, generators: Vec<IntMat>) -> Result<Self, ComplexError> {
        for (i, g) in generators.iter().enumerate() {
            assert_eq!(g.rows, rank);
            assert_eq!(g.cols, rank);
            let det = det_exact(g);
            if det != BigInt::from(1) && det != BigInt::from(-1) {
                return Err(ComplexError::NotUnimodular(i, det.to_string()));
            }
        }
        Ok(LocalSystem { rank, generators })
    }

    /// `ρ(word) = Π generator_i^{e_i}` (exponents from the deck word).
    pub fn evaluate(&self, word: &crate::geometry::DeckWord) -> IntMat {
        let mut out = IntMat::identity(self.rank);
        for (g, &e) in self.generators.iter().zip(&word.exponents) {
            if e == 0 {
                continue;
            }
            let m = if e > 0 { g.clone() } else { unimodular_inverse(g) };
            for _ in 0..e.unsigned_abs() {
                out = mat_mul_small(&out, &m);
            }
        }
        out
    }
}

fn mat_mul_small(a: &IntMat, b: &IntMat) -> IntMat {
    let prod = a.mul_i128(b);
    IntMat {
        rows: a.rows,
        cols: b.cols,
        data: prod
            .into_iter()
            .map(|v| i64::try_from(v).expect("local-system product overflow"))
            .collect(),
    }
}

/// Inverse of a unimodular matrix via the adjugate (exact, |det| = 1).
fn unimodular_inverse(a: &IntMat) -> IntMat {
    let n = a.rows;
    let det = det_exact(a);
    let sign = if det == BigInt::from(1) { 1i64 } else { -1 };
    let mut inv = IntMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // Cofactor C_ji for the adjugate.
            let minor = minor_det(a, j, i);
            let c = if (i + j) % 2 == 0 { minor } else { -minor };
            inv[(i, j)] = sign * c;
        }
    }
    inv
}

fn minor_det(a: &IntMat, skip_row: usize, skip_col: usize) -> i64 {
    let n = a.rows;
    let idx: Vec<usize> = (0..n).filter(|&r| r != skip_row).collect();
    let jdx: Vec<usize> = (0..n).filter(|&c| c != skip_col).collect();
    let sub = IntMat::from_rows(
        idx.iter()
            .map(|&i| jdx.iter().map(|&j| a[(i, j)]).collect())
            .collect(),
    );
    let d = det_exact(&sub);
    i64::try_from(d).expect("minor determinant overflow")
}

/// Exact determinant by fraction-free (Bareiss) elimination.
pub fn det_exact(a: &IntMat) -> BigInt {
    use num_traits::{One, Zero};
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 {
        return BigInt::one();
    }
    let mut m: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| BigInt::from(a[(i, j)])).collect())
        .collect();
    let mut prev = BigInt::one();
    let mut sign = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !m[i][k].is_zero()) else {
                return BigInt::zero();
            };
            m.swap(k, p);
            sign = -sign;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let num = &m[k][k] * &m[i][j] - &m[i][k] * &m[k][j];
                m[i][j] = num / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * m[n - 1][n - 1].clone()
}

#[derive(Debug, Clone)]
pub enum CoefficientMode {
    Integers,
    ModP(u64),
    Twisted(LocalSystem),
}

impl CoefficientMode {
    fn block_size(&self) -> usize {
        match self {
            CoefficientMode::Twisted(ls) => ls.rank,
            _ => 1,
        }
    }
}

/// The graded integer Morse complex `(S_f^Z, d)`.
///
/// `boundary[k]` maps degree k to degree k−1; its entry `(row, col)` is the
/// coefficient of the row generator in the boundary of the column generator
/// (an `r×r` block in twisted mode).
#[derive(Debug, Clone)]
pub struct MorseComplex {
    pub generators_by_degree: Vec<Vec<usize>>,
    pub boundary: Vec<IntMat>,
    pub mode: CoefficientMode,
}

impl MorseComplex {
    pub fn dim(&self) -> usize {
        self.generators_by_degree.len() - 1
    }

    pub fn rank_of_degree(&self, k: usize) -> usize {
        self.generators_by_degree
            .get(k)
            .map_or(0, |g| g.len() * self.mode.block_size())
    }
}

/// Homology: one Betti number per degree plus the torsion coefficients
/// `d_1 | d_2 | …` (each ≥ 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomologyResult {
    pub betti: Vec<usize>,
    pub torsion: Vec<Vec<u64>>,
}

impl HomologyResult {
    pub fn euler_characteristic(&self) -> i64 {
        self.betti
            .iter()
            .enumerate()
            .map(|(k, &b)| if k % 2 == 0 { b as i64 } else { -(b as i64) })
            .sum()
    }
}

/// Assemble the boundary matrices from the connection data and verify
/// `d² = 0` exactly.
pub fn build_complex(
    manifold: &ManifoldBackend,
    cs: &CriticalSet,
    connections: &ConnectionData,
    mode: CoefficientMode,
) -> Result<MorseComplex, ComplexError> {
    let n = manifold.dim();
    match &mode {
        CoefficientMode::ModP(p) => {
            if !is_prime(*p) {
                return Err(ComplexError::BadModulus(*p));
            }
        }
        CoefficientMode::Twisted(ls) => {
            if !matches!(manifold, ManifoldBackend::FlatQuotient { .. }) {
                return Err(ComplexError::TwistedNeedsQuotient);
            }
            let expected = manifold.deck_generators().len();
            if ls.generators.len() != expected {
                return Err(ComplexError::GeneratorCount {
                    expected,
                    got: ls.generators.len(),
                });
            }
        }
        CoefficientMode::Integers => {}
    }
    if !manifold.orientable() && !matches!(mode, CoefficientMode::ModP(2)) {
        return Err(ComplexError::NonOrientableNeedsMod2);
    }

    let generators_by_degree: Vec<Vec<usize>> = (0..=n)
        .map(|k| {
            let mut ids: Vec<usize> = cs.of_index(k).iter().map(|c| c.id).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    let r = mode.block_size();

    let mut boundary = Vec::with_capacity(n + 2);
    boundary.push(IntMat::zeros(0, generators_by_degree[0].len() * r));
    for k in 1..=n {
        let cols_ids = &generators_by_degree[k];
        let rows_ids = &generators_by_degree[k - 1];
        let mut d = IntMat::zeros(rows_ids.len() * r, cols_ids.len() * r);
        let sign_k = if k % 2 == 0 { 1i64 } else { -1 };
        for (cj, &p) in cols_ids.iter().enumerate() {
            for (ri, &q) in rows_ids.iter().enumerate() {
                match &mode {
                    CoefficientMode::Twisted(ls) => {
                        // (−1)^{λ_p} Σ_γ n_γ ρ(deck(γ)) as an r×r block.
                        if let Some(lines) = connections.lines.get(&(p, q)) {
                            let mut block = IntMat::zeros(r, r);
                            for line in lines {
                                let rho = ls.evaluate(&line.deck);
                                for a in 0..r {
                                    for b in 0..r {
                                        block[(a, b)] += line.sign * rho[(a, b)];
                                    }
                                }
                            }
                            for a in 0..r {
                                for b in 0..r {
                                    d[(ri * r + a, cj * r + b)] = sign_k * block[(a, b)];
                                }
                            }
                        }
                    }
                    CoefficientMode::Integers => {
                        d[(ri, cj)] = sign_k * connections.count(p, q);
                    }
                    CoefficientMode::ModP(modulus) => {
                        let count = if manifold.orientable() {
                            connections.count(p, q)
                        } else {
                            connections.line_count(p, q) as i64
                        };
                        d[(ri, cj)] = sign_k * count.rem_euclid(*modulus as i64);
                    }
                }
            }
        }
        boundary.push(d);
    }
    boundary.push(IntMat::zeros(generators_by_degree[n].len() * r, 0));

    let complex = MorseComplex {
        generators_by_degree,
        boundary,
        mode,
    };
    verify_d_squared(&complex)?;
    Ok(complex)
}

fn verify_d_squared(c: &MorseComplex) -> Result<(), ComplexError> {
    let modulus = match &c.mode {
        CoefficientMode::ModP(p) => Some(*p as i128),
        _ => None,
    };
    for k in 2..c.boundary.len() - 1 {
        let dk = &c.boundary[k];
        let dk1 = &c.boundary[k - 1];
        if dk.cols == 0 || dk1.rows == 0 {
            continue;
        }
        let prod = dk1.mul_i128(dk);
        for (flat, &v) in prod.iter().enumerate() {
            let v = modulus.map_or(v, |m| v.rem_euclid(m));
            if v != 0 {
                return Err(ComplexError::D2NotZero {
                    degree: k,
                    row: flat / dk.cols,
                    col: flat % dk.cols,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Homology of the complex: SNF over Z (integral and twisted modes) or ranks
/// over GF(p).
pub fn homology(c: &MorseComplex) -> Result<HomologyResult, ComplexError> {
    let n = c.dim();
    match &c.mode {
        CoefficientMode::ModP(p) => {
            let mut betti = Vec::with_capacity(n + 1);
            for k in 0..=n {
                let rank_k = rank_mod_p(&c.boundary[k], *p);
                let rank_k1 = rank_mod_p(&c.boundary[k + 1], *p);
                betti.push(c.rank_of_degree(k) - rank_k - rank_k1);
            }
            Ok(HomologyResult {
                betti,
                torsion: vec![Vec::new(); n + 1],
            })
        }
        _ => {
            let snfs: Vec<SnfDecomposition> =
                c.boundary.iter().map(smith_normal_form).collect();
            let mut betti = Vec::with_capacity(n + 1);
            let mut torsion = Vec::with_capacity(n + 1);
            for k in 0..=n {
                let rank_k = snfs[k].rank();
                let rank_k1 = snfs[k + 1].rank();
                betti.push(c.rank_of_degree(k) - rank_k - rank_k1);
                let factors = snfs[k + 1]
                    .torsion_factors()
                    .into_iter()
                    .map(|d| u64::try_from(d).map_err(|_| ComplexError::TorsionOverflow))
                    .collect::<Result<Vec<u64>, _>>()?;
                torsion.push(factors);
            }
            Ok(HomologyResult { betti, torsion })
        }
    }
}

/// Cohomology of `Hom(C, Z)` from the transposed boundaries.
pub fn cohomology(c: &MorseComplex) -> Result<HomologyResult, ComplexError> {
    assert!(
        !matches!(c.mode, CoefficientMode::ModP(_)),
        "integral cochain complex only"
    );
    let n = c.dim();
    let delta: Vec<IntMat> = (0..=n + 1)
        .map(|k| c.boundary[k].transpose())
        .collect();
    // δ^k = (D_{k+1})ᵀ maps degree k to degree k+1.
    let snfs: Vec<SnfDecomposition> = delta.iter().map(smith_normal_form).collect();
    let mut betti = Vec::with_capacity(n + 1);
    let mut torsion = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let rank_out = snfs[k + 1].rank();
        let rank_in = snfs[k].rank();
        betti.push(c.rank_of_degree(k) - rank_out - rank_in);
        let factors = snfs[k]
            .torsion_factors()
            .into_iter()
            .map(|d| u64::try_from(d).map_err(|_| ComplexError::TorsionOverflow))
            .collect::<Result<Vec<u64>, _>>()?;
        torsion.push(factors);
    }
    Ok(HomologyResult { betti, torsion })
}

fn rank_mod_p(a: &IntMat, p: u64) -> usize {
    let p = p as i64;
    let mut m: Vec<Vec<i64>> = (0..a.rows)
        .map(|i| (0..a.cols).map(|j| a[(i, j)].rem_euclid(p)).collect())
        .collect();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..a.cols {
        let Some(pivot) = (row..a.rows).find(|&i| m[i][col] % p != 0) else {
            continue;
        };
        m.swap(row, pivot);
        let inv = mod_inverse(m[row][col], p);
        for j in col..a.cols {
            m[row][j] = m[row][j] * inv % p;
        }
        for i in 0..a.rows {
            if i != row && m[i][col] != 0 {
                let factor = m[i][col];
                for j in col..a.cols {
                    m[i][j] = (m[i][j] - factor * m[row][j]).rem_euclid(p);
                }
            }
        }
        rank += 1;
        row += 1;
        if row == a.rows {
            break;
        }
    }
    rank
}

fn mod_inverse(a: i64, p: i64) -> i64 {
    // Extended Euclid; p prime.
    let (mut t, mut new_t) = (0i64, 1i64);
    let (mut r, mut new_r) = (p, a.rem_euclid(p));
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    assert_eq!(r, 1, "modulus must be prime");
    t.rem_euclid(p)
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// One row of the strong Morse inequalities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InequalityRow {
    pub degree: usize,
    pub morse_sum: i64,
    pub betti_sum: i64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorseInequalities {
    pub rows: Vec<InequalityRow>,
    pub euler_equal: bool,
}

impl MorseInequalities {
    pub fn all_hold(&self) -> bool {
        self.euler_equal && self.rows.iter().all(|r| r.holds)
    }

    pub fn all_equalities(&self) -> bool {
        self.euler_equal && self.rows.iter().all(|r| r.morse_sum == r.betti_sum)
    }
}

/// Strong Morse inequalities: alternating partial sums of critical-point
/// counts dominate those of Betti numbers, with equality of the full sums.
pub fn morse_inequalities(counts: &[usize], h: &HomologyResult) -> MorseInequalities {
    let n = counts.len() - 1;
    let mut rows = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut morse_sum = 0i64;
        let mut betti_sum = 0i64;
        for i in 0..=k {
            let sign = if (k - i) % 2 == 0 { 1i64 } else { -1 };
            morse_sum += sign * counts[i] as i64;
            betti_sum += sign * h.betti[i] as i64;
        }
        rows.push(InequalityRow {
            degree: k,
            morse_sum,
            betti_sum,
            holds: morse_sum >= betti_sum,
        });
    }
    let euler_counts: i64 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| if i % 2 == 0 { c as i64 } else { -(c as i64) })
        .sum();
    MorseInequalities {
        euler_equal: euler_counts == h.euler_characteristic(),
        rows,
    }
}

/// Outcome of the Poincaré-duality cross-check between the complex of `f`
/// and the complex of `−f`.
#[derive(Debug, Clone)]
pub struct DualityReport {
    /// Per degree k: homology of the dual complex in degree n−k vs the
    /// cohomology of the original in degree n−k.
    pub per_degree: Vec<(usize, bool)>,
    pub homology_matches: bool,
    /// The −f boundary matrices equal sign-twisted transposes of the
    /// originals up to one orientation sign per generator.
    pub transpose_consistent: bool,
}

impl DualityReport {
    pub fn holds(&self) -> bool {
        self.homology_matches && self.transpose_consistent
    }
}

/// Build the Morse complex of the reversed flow (`−f`, swapping stable and
/// unstable manifolds) and compare it against the dual of `c`.
pub fn poincare_dual(
    spec: &crate::flow::FlowSpec,
    seeds: &crate::critical::SeedSpec,
    critical_opts: &crate::critical::CriticalOptions,
    connection_opts: &crate::connections::ConnectionOptions,
    cs: &CriticalSet,
    c: &MorseComplex,
) -> Result<(MorseComplex, DualityReport), ComplexError> {
    let f = spec
        .function()
        .expect("duality needs a gradient flow")
        .negated();
    let manifold = spec.manifold.clone();
    let cs_rev = crate::critical::find_critical_points(&manifold, &f, seeds, critical_opts)
        .map_err(|e| ComplexError::ReversedRun(e.to_string()))?;
    let spec_rev = crate::flow::FlowSpec {
        manifold: manifold.clone(),
        kind: crate::flow::FlowKind::GradientUphill(f),
        controls: spec.controls,
    };
    let conn_rev = crate::connections::find_all_connections(&spec_rev, &cs_rev, connection_opts)
        .map_err(|e| ComplexError::ReversedRun(e.to_string()))?;
    let c_rev = build_complex(&manifold, &cs_rev, &conn_rev, CoefficientMode::Integers)?;
    let report = check_duality(&manifold, cs, c, &cs_rev, &c_rev)?;
    Ok((c_rev, report))
}

/// Compare the Morse complex of `−f` against the dual of the complex of `f`.
///
/// Generators are matched across the two runs by location; the reversed flow
/// swaps stable and unstable manifolds so a point of index λ reappears with
/// index n−λ.
pub fn check_duality(
    manifold: &ManifoldBackend,
    cs: &CriticalSet,
    c: &MorseComplex,
    cs_rev: &CriticalSet,
    c_rev: &MorseComplex,
) -> Result<DualityReport, ComplexError> {
    assert!(manifold.orientable(), "duality needs an orientable backend");
    assert!(
        matches!(c.mode, CoefficientMode::Integers)
            && matches!(c_rev.mode, CoefficientMode::Integers),
        "duality check runs on untwisted integral complexes"
    );
    let n = manifold.dim();

    // Identify each reversed-run point with an original point by location.
    let mut rev_to_orig: BTreeMap<usize, usize> = BTreeMap::new();
    for pr in &cs_rev.points {
        let orig = cs
            .points
            .iter()
            .min_by(|a, b| {
                manifold
                    .distance(&a.location, &pr.location)
                    .partial_cmp(&manifold.distance(&b.location, &pr.location))
                    .unwrap()
            })
            .expect("empty critical set");
        assert!(
            manifold.distance(&orig.location, &pr.location) < 1e-6,
            "reversed-run critical point has no partner"
        );
        assert_eq!(orig.index, n - pr.index, "index must complement");
        rev_to_orig.insert(pr.id, orig.id);
    }

    // Homology comparison: H_{n−k}(dual) vs H^{n−k}(C).
    let h_rev = homology(c_rev)?;
    let coh = cohomology(c)?;
    let mut per_degree = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let ok = h_rev.betti[n - k] == coh.betti[n - k]
            && h_rev.torsion[n - k] == coh.torsion[n - k];
        per_degree.push((k, ok));
    }
    let homology_matches = per_degree.iter().all(|(_, ok)| *ok);

    let transpose_consistent =
        transposes_match_up_to_diagonal(cs, c, cs_rev, c_rev, &rev_to_orig, n);

    Ok(DualityReport {
        per_degree,
        homology_matches,
        transpose_consistent,
    })
}

/// Check `D'_{n−k+1} = ε_k · Σ₁ · (D_k)ᵀ · Σ₂` for some per-generator signs
/// Σ and per-degree signs ε.
///
/// Each nonzero entry gives the XOR constraint `s_p ⊕ s_q ⊕ ε_k = parity`;
/// with one boolean per critical point and per degree the system is tiny, so
/// brute-force the ε assignment (≤ 2^n) and 2-color the point signs.
fn transposes_match_up_to_diagonal(
    cs: &CriticalSet,
    c: &MorseComplex,
    _cs_rev: &CriticalSet,
    c_rev: &MorseComplex,
    rev_to_orig: &BTreeMap<usize, usize>,
    n: usize,
) -> bool {
    let point_var: BTreeMap<usize, usize> = cs
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id, i))
        .collect();
    let num_points = cs.points.len();

    // Collect the constraints (p, q, degree, parity) once, checking the
    // magnitudes on the way.
    let mut constraints: Vec<(usize, usize, usize, usize)> = Vec::new();
    for k in 1..=n {
        let dk = &c.boundary[k];
        let rows_ids = &c.generators_by_degree[k - 1];
        let cols_ids = &c.generators_by_degree[k];
        // Dual-side matrix mapping degree n−k+1 to n−k in the reversed run.
        let d_rev = &c_rev.boundary[n - k + 1];
        let rev_row_of: BTreeMap<usize, usize> = c_rev.generators_by_degree[n - k]
            .iter()
            .enumerate()
            .map(|(i, &rid)| (rev_to_orig[&rid], i))
            .collect();
        let rev_col_of: BTreeMap<usize, usize> = c_rev.generators_by_degree[n - k + 1]
            .iter()
            .enumerate()
            .map(|(i, &rid)| (rev_to_orig[&rid], i))
            .collect();
        for (ri, &q) in rows_ids.iter().enumerate() {
            for (cj, &p) in cols_ids.iter().enumerate() {
                let orig = dk[(ri, cj)];
                let (Some(&rr), Some(&rc)) = (rev_row_of.get(&p), rev_col_of.get(&q)) else {
                    return false;
                };
                let dual = d_rev[(rr, rc)];
                if orig.abs() != dual.abs() {
                    return false;
                }
                if orig != 0 {
                    let parity = (orig.signum() != dual.signum()) as usize;
                    constraints.push((point_var[&p], point_var[&q], k, parity));
                }
            }
        }
    }

    'masks: for mask in 0..(1u32 << n) {
        let eps = |k: usize| -> usize { ((mask >> (k - 1)) & 1) as usize };
        let mut graph: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_points];
        for &(a, b, k, parity) in &constraints {
            let par = (parity + eps(k)) % 2;
            graph[a].push((b, par));
            graph[b].push((a, par));
        }
        let mut color: Vec<Option<bool>> = vec![None; num_points];
        for start in 0..num_points {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(false);
            let mut queue = vec![start];
            while let Some(v) = queue.pop() {
                let cv = color[v].unwrap();
                for &(w, parity) in &graph[v] {
                    let want = cv ^ (parity == 1);
                    match color[w] {
                        None => {
                            color[w] = Some(want);
                            queue.push(w);
                        }
                        Some(cw) if cw != want => continue 'masks,
                        Some(_) => {}
                    }
                }
            }
        }
        return true;
    }
    false
}
