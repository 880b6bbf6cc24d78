//! Smith normal form over the integers with automatic escalation to
//! arbitrary precision when machine arithmetic would overflow.

use num_bigint::BigInt;

use super::IntMat;

/// Minimal integer interface the elimination needs; `i128` uses checked
/// arithmetic so overflow aborts the fast path, `BigInt` never fails.
pub trait SnfScalar: Clone + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn checked_add(&self, o: &Self) -> Option<Self>;
    fn checked_mul(&self, o: &Self) -> Option<Self>;
    fn checked_neg(&self) -> Option<Self>;
    /// Truncated division (toward zero) and remainder.
    fn div_rem_trunc(&self, o: &Self) -> (Self, Self);
    fn abs_lt(&self, o: &Self) -> bool;
}

impl SnfScalar for i128 {
    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    fn from_i64(v: i64) -> Self {
        v as i128
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn is_negative(&self) -> bool {
        *self < 0
    }
    fn checked_add(&self, o: &Self) -> Option<Self> {
        i128::checked_add(*self, *o)
    }
    fn checked_mul(&self, o: &Self) -> Option<Self> {
        i128::checked_mul(*self, *o)
    }
    fn checked_neg(&self) -> Option<Self> {
        i128::checked_neg(*self)
    }
    fn div_rem_trunc(&self, o: &Self) -> (Self, Self) {
        (self / o, self % o)
    }
    fn abs_lt(&self, o: &Self) -> bool {
        self.unsigned_abs() < o.unsigned_abs()
    }
}

impl SnfScalar for BigInt {
    fn zero() -> Self {
        num_traits::Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn is_negative(&self) -> bool {
        num_traits::Signed::is_negative(self)
    }
    fn checked_add(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }
    fn checked_mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn checked_neg(&self) -> Option<Self> {
        Some(-self)
    }
    fn div_rem_trunc(&self, o: &Self) -> (Self, Self) {
        (self / o, self % o)
    }
    fn abs_lt(&self, o: &Self) -> bool {
        num_traits::Signed::abs(self) < num_traits::Signed::abs(o)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: SnfScalar> Mat<T> {
    pub fn from_int_mat(a: &IntMat) -> Self {
        Mat {
            rows: a.rows,
            cols: a.cols,
            data: a.data.iter().map(|&v| T::from_i64(v)).collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
        }
        Mat {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, o: &Mat<T>) -> Option<Mat<T>> {
        assert_eq!(self.cols, o.rows);
        let mut out = Mat {
            rows: self.rows,
            cols: o.cols,
            data: vec![T::zero(); self.rows * o.cols],
        };
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let prod = a.checked_mul(o.get(k, j))?;
                    let sum = out.get(i, j).checked_add(&prod)?;
                    out.set(i, j, sum);
                }
            }
        }
        Some(out)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row_a ← row_a + q·row_b; None on overflow.
    fn row_add(&mut self, a: usize, b: usize, q: &T) -> Option<()> {
        for j in 0..self.cols {
            let add = q.checked_mul(self.get(b, j))?;
            let v = self.get(a, j).checked_add(&add)?;
            self.set(a, j, v);
        }
        Some(())
    }

    fn col_add(&mut self, a: usize, b: usize, q: &T) -> Option<()> {
        for i in 0..self.rows {
            let add = q.checked_mul(self.get(i, b))?;
            let v = self.get(i, a).checked_add(&add)?;
            self.set(i, a, v);
        }
        Some(())
    }

    fn negate_row(&mut self, a: usize) -> Option<()> {
        for j in 0..self.cols {
            let v = self.get(a, j).checked_neg()?;
            self.set(a, j, v);
        }
        Some(())
    }
}

/// `U·A·V = S` with `U`, `V` unimodular and `S` diagonal with a divisibility
/// chain `s_i | s_{i+1}`, `s_i ≥ 0`.
#[derive(Clone, Debug)]
pub struct SnfDecomposition {
    pub u: Mat<BigInt>,
    pub s: Mat<BigInt>,
    pub v: Mat<BigInt>,
}

impl SnfDecomposition {
    pub fn rank(&self) -> usize {
        let n = self.s.rows.min(self.s.cols);
        (0..n).filter(|&i| !self.s.get(i, i).is_zero()).count()
    }

    /// Diagonal entries ≥ 2, in divisibility order.
    pub fn torsion_factors(&self) -> Vec<BigInt> {
        let n = self.s.rows.min(self.s.cols);
        (0..n)
            .map(|i| self.s.get(i, i).clone())
            .filter(|d| *d > <BigInt as SnfScalar>::one())
            .collect()
    }
}

/// Compute the Smith normal form; i128 fast path, BigInt on overflow.
pub fn smith_normal_form(a: &IntMat) -> SnfDecomposition {
    if let Some((u, s, v)) = snf_work::<i128>(Mat::from_int_mat(a)) {
        return SnfDecomposition {
            u: promote(&u),
            s: promote(&s),
            v: promote(&v),
        };
    }
    let (u, s, v) =
        snf_work::<BigInt>(Mat::from_int_mat(a)).expect("BigInt SNF cannot overflow");
    SnfDecomposition { u, s, v }
}

fn promote(m: &Mat<i128>) -> Mat<BigInt> {
    Mat {
        rows: m.rows,
        cols: m.cols,
        data: m.data.iter().map(|v| BigInt::from(*v)).collect(),
    }
}

#[allow(clippy::type_complexity)]
fn snf_work<T: SnfScalar>(mut a: Mat<T>) -> Option<(Mat<T>, Mat<T>, Mat<T>)> {
    let mut u = Mat::<T>::identity(a.rows);
    let mut v = Mat::<T>::identity(a.cols);
    let n = a.rows.min(a.cols);
    let mut t = 0;
    while t < n {
        // Smallest nonzero entry of the trailing block as pivot.
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..a.rows {
            for j in t..a.cols {
                if !a.get(i, j).is_zero()
                    && pivot.is_none_or(|(pi, pj)| a.get(i, j).abs_lt(a.get(pi, pj)))
                {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        a.swap_rows(t, pi);
        u.swap_rows(t, pi);
        a.swap_cols(t, pj);
        v.swap_cols(t, pj);

        'reduce: loop {
            // Clear the pivot column.
            for i in (t + 1)..a.rows {
                if a.get(i, t).is_zero() {
                    continue;
                }
                let (q, r) = a.get(i, t).div_rem_trunc(a.get(t, t));
                let mq = q.checked_neg()?;
                a.row_add(i, t, &mq)?;
                u.row_add(i, t, &mq)?;
                if !r.is_zero() {
                    // Remainder is smaller: make it the new pivot.
                    a.swap_rows(t, i);
                    u.swap_rows(t, i);
                    continue 'reduce;
                }
            }
            // Clear the pivot row.
            for j in (t + 1)..a.cols {
                if a.get(t, j).is_zero() {
                    continue;
                }
                let (q, r) = a.get(t, j).div_rem_trunc(a.get(t, t));
                let mq = q.checked_neg()?;
                a.col_add(j, t, &mq)?;
                v.col_add(j, t, &mq)?;
                if !r.is_zero() {
                    a.swap_cols(t, j);
                    v.swap_cols(t, j);
                    continue 'reduce;
                }
            }
            // Divisibility: pivot must divide the whole trailing block.
            for i in (t + 1)..a.rows {
                for j in (t + 1)..a.cols {
                    let (_, r) = a.get(i, j).div_rem_trunc(a.get(t, t));
                    if !r.is_zero() {
                        let one = T::one();
                        a.row_add(t, i, &one)?;
                        u.row_add(t, i, &one)?;
                        continue 'reduce;
                    }
                }
            }
            break;
        }
        if a.get(t, t).is_negative() {
            a.negate_row(t)?;
            u.negate_row(t)?;
        }
        t += 1;
    }
    Some((u, a, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn imat(rows: usize, cols: usize, vals: &[i64]) -> IntMat {
        IntMat {
            rows,
            cols,
            data: vals.to_vec(),
        }
    }

    fn check(a: &IntMat) {
        let d = smith_normal_form(a);
        // U·A·V = S, exactly.
        let big_a = Mat::<BigInt>::from_int_mat(a);
        let ua = d.u.mul(&big_a).unwrap();
        let uav = ua.mul(&d.v).unwrap();
        assert_eq!(uav, d.s, "U·A·V ≠ S");
        // Diagonal, nonnegative, divisibility chain.
        for i in 0..d.s.rows {
            for j in 0..d.s.cols {
                if i != j {
                    assert!(d.s.get(i, j).is_zero());
                }
            }
        }
        let n = d.s.rows.min(d.s.cols);
        for i in 0..n {
            assert!(!d.s.get(i, i).is_negative());
            if i + 1 < n && !d.s.get(i, i).is_zero() && !d.s.get(i + 1, i + 1).is_zero() {
                let (_, r) = d.s.get(i + 1, i + 1).div_rem_trunc(d.s.get(i, i));
                assert!(r.is_zero(), "divisibility chain broken");
            }
            if d.s.get(i, i).is_zero() && i + 1 < n {
                assert!(d.s.get(i + 1, i + 1).is_zero(), "zeros must trail");
            }
        }
        // Unimodularity via |det| = 1 (BigInt Bareiss through SNF of U itself
        // would be circular; use the diagonal of a fresh triangularization).
        assert_eq!(det_abs(&d.u), BigInt::from(1));
        assert_eq!(det_abs(&d.v), BigInt::from(1));
    }

    // Fraction-free determinant magnitude.
    fn det_abs(m: &Mat<BigInt>) -> BigInt {
        assert_eq!(m.rows, m.cols);
        let n = m.rows;
        let mut a: Vec<Vec<BigInt>> = (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
            .collect();
        let mut prev = <BigInt as SnfScalar>::one();
        for k in 0..n {
            if SnfScalar::is_zero(&a[k][k]) {
                let Some(p) = (k + 1..n).find(|&i| !SnfScalar::is_zero(&a[i][k])) else {
                    return <BigInt as SnfScalar>::zero();
                };
                a.swap(k, p);
            }
            for i in (k + 1)..n {
                for j in (k + 1)..n {
                    let num = &a[k][k] * &a[i][j] - &a[i][k] * &a[k][j];
                    a[i][j] = num / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        num_traits::Signed::abs(&a[n - 1][n - 1])
    }

    #[test]
    fn scalar_and_rank_one() {
        check(&imat(1, 1, &[2]));
        check(&imat(2, 2, &[1, 0, 0, 0]));
    }

    #[test]
    fn known_torsion() {
        // diag-izable to (1, 6): classic 2x2 with factors 1 | 6.
        let a = imat(2, 2, &[2, 4, 4, 2]);
        let d = smith_normal_form(&a);
        assert_eq!(*d.s.get(0, 0), BigInt::from(2));
        assert_eq!(*d.s.get(1, 1), BigInt::from(6));
    }

    #[test]
    fn random_matrices_satisfy_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let rows = rng.gen_range(1..=7);
            let cols = rng.gen_range(1..=7);
            let data: Vec<i64> = (0..rows * cols).map(|_| rng.gen_range(-9..=9)).collect();
            check(&imat(rows, cols, &data));
        }
    }

    #[test]
    fn large_entries_escalate_without_panicking() {
        // Entries chosen so intermediate products overflow i64 comfortably.
        let a = imat(
            3,
            3,
            &[
                i64::MAX / 3,
                1,
                7,
                5,
                i64::MAX / 5,
                2,
                11,
                3,
                i64::MAX / 7,
            ],
        );
        check(&a);
    }
}
