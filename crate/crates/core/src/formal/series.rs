//! Formal series graded by powers of `hbar^(1/2)`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::coeff::Scalar;
use super::poly::Polynomial;
use crate::error::{Error, Result};

/// `sum_k hbar^(k/2) P_k(u)` with polynomial coefficients in `dim` variables.
///
/// `order` is the largest grade that is known; `None` marks an exact finite sum.
#[derive(Clone, PartialEq)]
pub struct HbarGradedSeries<C> {
    dim: usize,
    order: Option<i32>,
    grades: BTreeMap<i32, Polynomial<C>>,
}

impl<C: std::fmt::Debug> std::fmt::Debug for HbarGradedSeries<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HbarGradedSeries")
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("grades", &self.grades)
            .finish()
    }
}

fn min_order(a: Option<i32>, b: Option<i32>) -> Option<i32> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl<C: Scalar> HbarGradedSeries<C> {
    pub fn zero(dim: usize, order: Option<i32>) -> Self {
        Self { dim, order, grades: BTreeMap::new() }
    }

    pub fn one(dim: usize, order: Option<i32>) -> Self {
        Self::from_grade(Polynomial::one(dim), 0, order)
    }

    /// `hbar^(grade/2) * p`.
    pub fn from_grade(p: Polynomial<C>, grade: i32, order: Option<i32>) -> Self {
        let mut s = Self::zero(p.dim(), order);
        s.add_at(grade, &p);
        s
    }

    /// The polynomial `p` with no hbar dependence.
    pub fn from_polynomial(p: Polynomial<C>) -> Self {
        Self::from_grade(p, 0, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> Option<i32> {
        self.order
    }

    pub fn grades(&self) -> impl Iterator<Item = (i32, &Polynomial<C>)> {
        self.grades.iter().map(|(k, p)| (*k, p))
    }

    pub fn grade(&self, k: i32) -> Polynomial<C> {
        self.grades.get(&k).cloned().unwrap_or_else(|| Polynomial::zero(self.dim))
    }

    pub fn min_grade(&self) -> Option<i32> {
        self.grades.keys().next().copied()
    }

    pub fn max_grade(&self) -> Option<i32> {
        self.grades.keys().next_back().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.grades.is_empty()
    }

    /// True when every coefficient is a constant polynomial.
    pub fn is_scalar(&self) -> bool {
        self.grades.values().all(|p| p.is_constant())
    }

    /// Adds `hbar^(grade/2) * p`, ignoring grades above the order.
    pub fn add_at(&mut self, grade: i32, p: &Polynomial<C>) {
        assert_eq!(p.dim(), self.dim, "series dimension mismatch");
        if self.order.is_some_and(|n| grade > n) || p.is_zero() {
            return;
        }
        let entry = self.grades.entry(grade).or_insert_with(|| Polynomial::zero(p.dim()));
        *entry += p;
        if entry.is_zero() {
            self.grades.remove(&grade);
        }
    }

    /// Lowers the order to `order`, dropping higher grades.
    pub fn truncate(&self, order: i32) -> Self {
        let order = min_order(self.order, Some(order));
        let mut out = Self::zero(self.dim, order);
        for (k, p) in &self.grades {
            out.add_at(*k, p);
        }
        out
    }

    /// Multiplication by `hbar^(k/2)`; the order moves with the grades.
    pub fn shift(&self, k: i32) -> Self {
        Self {
            dim: self.dim,
            order: self.order.map(|n| n + k),
            grades: self.grades.iter().map(|(g, p)| (g + k, p.clone())).collect(),
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = Self::zero(self.dim, self.order);
        for (k, p) in &self.grades {
            out.add_at(*k, &p.scale(c));
        }
        out
    }

    /// Multiplies every coefficient by the hbar-independent polynomial `q`.
    pub fn mul_poly(&self, q: &Polynomial<C>) -> Self {
        let mut out = Self::zero(self.dim, self.order);
        for (k, p) in &self.grades {
            out.add_at(*k, &(p * q));
        }
        out
    }

    pub fn map_polys<D: Scalar>(&self, f: impl Fn(&Polynomial<C>) -> Polynomial<D>) -> HbarGradedSeries<D> {
        let mut out: Option<HbarGradedSeries<D>> = None;
        for (k, p) in &self.grades {
            let q = f(p);
            let o = out.get_or_insert_with(|| HbarGradedSeries::zero(q.dim(), self.order));
            o.add_at(*k, &q);
        }
        out.unwrap_or_else(|| {
            let probe = f(&Polynomial::zero(self.dim));
            HbarGradedSeries::zero(probe.dim(), self.order)
        })
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim, min_order(self.order, other.order));
        for (k, p) in self.grades.iter().chain(other.grades.iter()) {
            out.add_at(*k, p);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-C::one()))
    }

    /// Product truncated at the smaller of the two orders.
    pub fn mul(&self, other: &Self) -> Self {
        self.mul_with_order(other, min_order(self.order, other.order))
    }

    pub fn mul_with_order(&self, other: &Self, order: Option<i32>) -> Self {
        assert_eq!(self.dim, other.dim, "series dimension mismatch");
        let mut out = Self::zero(self.dim, order);
        for (ka, pa) in &self.grades {
            for (kb, pb) in &other.grades {
                let k = ka + kb;
                if order.is_some_and(|n| k > n) {
                    continue;
                }
                out.add_at(k, &(pa * pb));
            }
        }
        out
    }

    /// `sum_{m >= 0} s^m / m!` truncated at grade `order`.
    pub fn graded_exp(&self, order: i32) -> Result<Self> {
        if let Some(g) = self.min_grade().filter(|&g| g <= 0) {
            return Err(Error::NonPositiveGrade { grade: g });
        }
        let s = self.truncate(order);
        let mut sum = Self::one(self.dim, Some(order));
        let mut term = Self::one(self.dim, Some(order));
        for m in 1..=order.max(0) {
            term = term.mul_with_order(&s, Some(order)).scale(&C::from_ratio(1, m as i64));
            if term.is_zero() {
                break;
            }
            sum = sum.add(&term);
        }
        Ok(sum)
    }

    /// Inverse of a series whose lowest grade is a nonzero constant, returned
    /// through grade `order` (capped by what the input determines).
    pub fn inverse(&self, order: i32) -> Result<Self> {
        let g0 = self.min_grade().ok_or(Error::NotInvertible)?;
        let lead = &self.grades[&g0];
        if !lead.is_constant() {
            return Err(Error::NotInvertible);
        }
        let a0 = lead.constant_term();
        let known = self.order.map(|n| n - 2 * g0);
        let out_order = min_order(Some(order), known).expect("order given");
        // s = hbar^(g0/2) a0 (1 + r), 1/s = hbar^(-g0/2) a0^-1 sum (-r)^m
        let rel_order = out_order + g0;
        let inv_a0 = a0.recip();
        let r = self.shift(-g0).scale(&inv_a0).sub(&Self::one(self.dim, None)).truncate(rel_order);
        let neg_r = r.scale(&-C::one());
        let mut sum = Self::one(self.dim, Some(rel_order));
        let mut term = Self::one(self.dim, Some(rel_order));
        for _ in 1..=rel_order.max(0) {
            term = term.mul_with_order(&neg_r, Some(rel_order));
            if term.is_zero() {
                break;
            }
            sum = sum.add(&term);
        }
        Ok(sum.scale(&inv_a0).shift(-g0))
    }

    /// Recentering `p` at `center` and, with `rescale`, assigning the part of
    /// degree `k` in `u = x - center` to grade `k`.
    pub fn regrade(p: &Polynomial<C>, center: &[C], rescale: bool) -> Result<Self> {
        let r = p.recenter(center)?;
        if !rescale {
            return Ok(Self::from_polynomial(r));
        }
        let mut out = Self::zero(p.dim(), None);
        if let Some(top) = r.degree() {
            for k in 0..=top {
                out.add_at(k as i32, &r.homogeneous_part(k));
            }
        }
        Ok(out)
    }

    /// Numerical value at `hbar` and the real point `u`, principal square root.
    pub fn evaluate(&self, hbar: Complex64, u: &[f64]) -> Complex64 {
        let root = hbar.sqrt();
        self.grades.iter().map(|(k, p)| p.eval_real(u) * root.powi(*k)).sum()
    }

    /// Constant terms of the coefficients, by grade.
    pub fn scalar_coefficients(&self) -> BTreeMap<i32, C> {
        self.grades.iter().map(|(k, p)| (*k, p.constant_term())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::Exact;

    fn u() -> Polynomial<Exact> {
        Polynomial::variable(1, 0).unwrap()
    }

    fn q(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    #[test]
    fn exp_of_linear_term() {
        let s = HbarGradedSeries::from_grade(u(), 1, None);
        let e = s.graded_exp(3).unwrap();
        assert_eq!(e.grade(0), Polynomial::one(1));
        assert_eq!(e.grade(1), u());
        assert_eq!(e.grade(2), u().pow(2).scale(&q(1, 2)));
        assert_eq!(e.grade(3), u().pow(3).scale(&q(1, 6)));
        assert_eq!(e.max_grade(), Some(3));
    }

    #[test]
    fn exp_of_quartic_interaction() {
        let s = HbarGradedSeries::from_grade(-u().pow(4), 2, None);
        let e = s.graded_exp(4).unwrap();
        let want: Vec<(i32, Polynomial<Exact>)> =
            vec![(0, Polynomial::one(1)), (2, -u().pow(4)), (4, u().pow(8).scale(&q(1, 2)))];
        assert_eq!(e.grades().map(|(k, p)| (k, p.clone())).collect::<Vec<_>>(), want);
    }

    #[test]
    fn exp_of_zero_is_one() {
        let e = HbarGradedSeries::<Exact>::zero(2, None).graded_exp(5).unwrap();
        assert_eq!(e, HbarGradedSeries::one(2, Some(5)));
    }

    #[test]
    fn exp_rejects_nonpositive_grades() {
        let s = HbarGradedSeries::from_grade(u(), 0, None);
        assert_eq!(s.graded_exp(2).unwrap_err(), Error::NonPositiveGrade { grade: 0 });
        let s = HbarGradedSeries::from_grade(u(), -2, None);
        assert_eq!(s.graded_exp(2).unwrap_err(), Error::NonPositiveGrade { grade: -2 });
    }

    #[test]
    fn regrade_examples() {
        let x2 = u().pow(2);
        let r = HbarGradedSeries::regrade(&x2, &[q(0, 1)], true).unwrap();
        assert_eq!(r.grades().count(), 1);
        assert_eq!(r.grade(2), x2);

        let r = HbarGradedSeries::regrade(&x2, &[q(1, 1)], true).unwrap();
        assert_eq!(r.grade(0), Polynomial::one(1));
        assert_eq!(r.grade(1), u().scale(&q(2, 1)));
        assert_eq!(r.grade(2), x2);

        let p = &u().pow(4) + &x2;
        let r = HbarGradedSeries::regrade(&p, &[q(0, 1)], true).unwrap();
        assert_eq!(r.grades().map(|(k, _)| k).collect::<Vec<_>>(), vec![2, 4]);
    }

    #[test]
    fn inverse_of_gaussian_normalizer() {
        // (1 + a hbar + b hbar^2) * inverse = 1 through the known order
        let s = HbarGradedSeries::from_grade(Polynomial::constant(1, q(1, 1)), 0, Some(4))
            .add(&HbarGradedSeries::from_grade(Polynomial::constant(1, q(3, 4)), 2, None))
            .add(&HbarGradedSeries::from_grade(Polynomial::constant(1, q(-5, 2)), 4, None))
            .shift(1);
        let inv = s.inverse(6).unwrap();
        assert_eq!(inv.min_grade(), Some(-1));
        let prod = s.mul(&inv);
        assert_eq!(prod.truncate(2), HbarGradedSeries::one(1, Some(2)));
    }

    #[test]
    fn truncation_is_respected_by_products() {
        let a = HbarGradedSeries::from_grade(u(), 1, Some(2));
        let b = HbarGradedSeries::from_grade(u(), 2, None);
        let p = a.mul(&b);
        assert!(p.is_zero());
        assert_eq!(p.order(), Some(2));
    }
}
