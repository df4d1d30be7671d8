//! Sparse multivariate polynomials with terms kept in lexicographic exponent order.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::coeff::{Float, Scalar};
use crate::error::{Error, Result};

/// Exponent vector of a monomial.
pub type Exponents = Vec<u32>;

/// Polynomial in `dim` variables. Zero coefficients are never stored.
#[derive(Clone, PartialEq)]
pub struct Polynomial<C> {
    dim: usize,
    terms: BTreeMap<Exponents, C>,
}

impl<C: Scalar> Polynomial<C> {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, C::one())
    }

    pub fn constant(dim: usize, c: C) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn variable(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
        let mut e = vec![0; dim];
        e[i] = 1;
        Ok(Self::monomial(e, C::one()))
    }

    pub fn monomial(exps: Exponents, c: C) -> Self {
        let mut p = Self::zero(exps.len());
        p.add_term(exps, c);
        p
    }

    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponents, C)>,
    {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            if e.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: e.len() });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &C)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Exponents, C)> {
        self.terms.into_iter()
    }

    pub fn coefficient(&self, exps: &[u32]) -> C {
        self.terms.get(exps).cloned().unwrap_or_else(C::zero)
    }

    pub fn constant_term(&self) -> C {
        self.coefficient(&vec![0; self.dim])
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Lowest total degree among the terms; `None` for the zero polynomial.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).min()
    }

    pub fn is_constant(&self) -> bool {
        self.degree().unwrap_or(0) == 0
    }

    /// Adds `c * x^exps` in place.
    pub fn add_term(&mut self, exps: Exponents, c: C) {
        debug_assert_eq!(exps.len(), self.dim);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.dim);
        }
        let terms = self
            .terms
            .iter()
            .map(|(e, a)| (e.clone(), a.clone() * c))
            .filter(|(_, a)| !a.is_zero())
            .collect();
        Self { dim: self.dim, terms }
    }

    fn check_same_dim(&self, other: &Self) {
        assert_eq!(self.dim, other.dim, "polynomial dimension mismatch");
    }

    /// Product with all terms of total degree above `max_degree` dropped.
    pub fn mul_truncated(&self, other: &Self, max_degree: Option<u32>) -> Self {
        self.check_same_dim(other);
        let mut out = Self::zero(self.dim);
        if self.is_zero() || other.is_zero() {
            return out;
        }
        let rhs: Vec<(&Exponents, u32, &C)> =
            other.terms.iter().map(|(e, c)| (e, e.iter().sum::<u32>(), c)).collect();
        for (ea, ca) in &self.terms {
            let da: u32 = ea.iter().sum();
            for (eb, db, cb) in &rhs {
                if let Some(m) = max_degree {
                    if da + db > m {
                        continue;
                    }
                }
                let e: Exponents = ea.iter().zip(eb.iter()).map(|(a, b)| a + b).collect();
                out.add_term(e, ca.clone() * *cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        self.pow_truncated(k, None)
    }

    pub fn pow_truncated(&self, k: u32, max_degree: Option<u32>) -> Self {
        let mut acc = Self::one(self.dim).truncate(max_degree);
        let mut base = self.truncate(max_degree);
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul_truncated(&base, max_degree);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul_truncated(&base, max_degree);
            }
        }
        acc
    }

    /// Drops terms of total degree above `max_degree`.
    pub fn truncate(&self, max_degree: Option<u32>) -> Self {
        match max_degree {
            None => self.clone(),
            Some(m) => Self {
                dim: self.dim,
                terms: self
                    .terms
                    .iter()
                    .filter(|(e, _)| e.iter().sum::<u32>() <= m)
                    .map(|(e, c)| (e.clone(), c.clone()))
                    .collect(),
            },
        }
    }

    /// Part of total degree exactly `k`.
    pub fn homogeneous_part(&self, k: u32) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() == k)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Composition `p(images[0], ..., images[d-1])`.
    pub fn substitute(&self, images: &[Polynomial<C>]) -> Result<Self> {
        self.substitute_impl(images, None)
    }

    /// Composition truncated at total degree `max_degree` in the image variables.
    pub fn substitute_truncated(&self, images: &[Polynomial<C>], max_degree: u32) -> Result<Self> {
        self.substitute_impl(images, Some(max_degree))
    }

    fn substitute_impl(&self, images: &[Polynomial<C>], max_degree: Option<u32>) -> Result<Self> {
        if images.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: images.len() });
        }
        let target = match images.first() {
            Some(p) => p.dim,
            None => 0,
        };
        if let Some(bad) = images.iter().find(|p| p.dim != target) {
            return Err(Error::DimensionMismatch { expected: target, found: bad.dim });
        }
        // powers[i][k] = images[i]^k, filled lazily up to the largest exponent used
        let mut max_exp = vec![0u32; self.dim];
        for e in self.terms.keys() {
            for (m, &a) in max_exp.iter_mut().zip(e) {
                *m = (*m).max(a);
            }
        }
        let powers: Vec<Vec<Polynomial<C>>> = images
            .iter()
            .zip(&max_exp)
            .map(|(img, &m)| {
                let img = img.truncate(max_degree);
                let mut pw = Vec::with_capacity(m as usize + 1);
                pw.push(Self::one(target));
                for k in 1..=m as usize {
                    let next = pw[k - 1].mul_truncated(&img, max_degree);
                    pw.push(next);
                }
                pw
            })
            .collect();
        let mut out = Self::zero(target);
        for (e, c) in &self.terms {
            let mut term = Self::constant(target, c.clone());
            for (i, &a) in e.iter().enumerate() {
                if a > 0 {
                    term = term.mul_truncated(&powers[i][a as usize], max_degree);
                    if term.is_zero() {
                        break;
                    }
                }
            }
            out += &term;
        }
        Ok(out)
    }

    pub fn partial_derivative(&self, i: usize) -> Result<Self> {
        if i >= self.dim {
            return Err(Error::IndexOutOfRange { index: i, dim: self.dim });
        }
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut f = e.clone();
            f[i] -= 1;
            out.add_term(f, c.clone() * C::from_i64(e[i] as i64));
        }
        Ok(out)
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.dim).map(|i| self.partial_derivative(i).expect("index in range")).collect()
    }

    pub fn evaluate(&self, point: &[C]) -> Result<C> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: point.len() });
        }
        let mut acc = C::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (x, &a) in point.iter().zip(e) {
                if a > 0 {
                    t *= x.pow(a);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Floating-point evaluation at a real point.
    pub fn eval_real(&self, point: &[f64]) -> Complex64 {
        debug_assert_eq!(point.len(), self.dim);
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut m = 1.0;
            for (x, &a) in point.iter().zip(e) {
                if a > 0 {
                    m *= x.powi(a as i32);
                }
            }
            acc += c.to_c64() * m;
        }
        acc
    }

    /// `p(center + u)` as a polynomial in `u`.
    pub fn recenter(&self, center: &[C]) -> Result<Self> {
        if center.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: center.len() });
        }
        if center.iter().all(|c| c.is_zero()) {
            return Ok(self.clone());
        }
        let images: Vec<Self> = center
            .iter()
            .enumerate()
            .map(|(i, c)| Self::variable(self.dim, i).expect("in range") + Self::constant(self.dim, c.clone()))
            .collect();
        self.substitute(&images)
    }

    /// `p(x - center)`, the inverse of [`recenter`](Self::recenter).
    pub fn uncenter(&self, center: &[C]) -> Result<Self> {
        let neg: Vec<C> = center.iter().map(|c| -c.clone()).collect();
        self.recenter(&neg)
    }

    /// Drops terms of degree above `max_degree` measured in `x - center`.
    pub fn truncate_about(&self, center: &[C], max_degree: u32) -> Result<Self> {
        self.recenter(center)?.truncate(Some(max_degree)).uncenter(center)
    }

    /// Re-embeds into `new_dim` variables, sending variable `i` to `map[i]`.
    pub fn embed(&self, new_dim: usize, map: &[usize]) -> Result<Self> {
        if map.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: map.len() });
        }
        if let Some(&bad) = map.iter().find(|&&j| j >= new_dim) {
            return Err(Error::IndexOutOfRange { index: bad, dim: new_dim });
        }
        let mut out = Self::zero(new_dim);
        for (e, c) in &self.terms {
            let mut f = vec![0; new_dim];
            for (i, &a) in e.iter().enumerate() {
                f[map[i]] += a;
            }
            out.add_term(f, c.clone());
        }
        Ok(out)
    }

    pub fn map_coeffs<D: Scalar>(&self, f: impl Fn(&C) -> D) -> Polynomial<D> {
        let mut out = Polynomial::zero(self.dim);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), f(c));
        }
        out
    }

    pub fn to_float(&self) -> Polynomial<Float> {
        self.map_coeffs(|c| c.to_c64())
    }

    /// Largest coefficient modulus, used as a scale for float tolerances.
    pub fn coefficient_scale(&self) -> f64 {
        self.terms.values().map(|c| c.to_c64().norm()).fold(0.0, f64::max)
    }

    /// Drops float coefficients below `tol` relative to the largest one. Exact
    /// polynomials are returned unchanged.
    pub fn chop(&self, tol: f64) -> Self {
        if C::BACKEND == super::coeff::Backend::Exact {
            return self.clone();
        }
        let cut = self.coefficient_scale() * tol;
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.to_c64().norm() > cut)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Canonical text form with the given variable names.
    pub fn to_text(&self, names: &[String]) -> String {
        super::text::format_polynomial(self, names)
    }
}

impl<C: Scalar> Add for &Polynomial<C> {
    type Output = Polynomial<C>;
    fn add(self, rhs: &Polynomial<C>) -> Polynomial<C> {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<C: Scalar> Add for Polynomial<C> {
    type Output = Polynomial<C>;
    fn add(mut self, rhs: Polynomial<C>) -> Polynomial<C> {
        self += &rhs;
        self
    }
}

impl<'a, C: Scalar> std::ops::AddAssign<&'a Polynomial<C>> for Polynomial<C> {
    fn add_assign(&mut self, rhs: &'a Polynomial<C>) {
        self.check_same_dim(rhs);
        for (e, c) in &rhs.terms {
            self.add_term(e.clone(), c.clone());
        }
    }
}

impl<C: Scalar> Sub for &Polynomial<C> {
    type Output = Polynomial<C>;
    fn sub(self, rhs: &Polynomial<C>) -> Polynomial<C> {
        self.check_same_dim(rhs);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
}

impl<C: Scalar> Sub for Polynomial<C> {
    type Output = Polynomial<C>;
    fn sub(self, rhs: Polynomial<C>) -> Polynomial<C> {
        &self - &rhs
    }
}

impl<C: Scalar> Mul for &Polynomial<C> {
    type Output = Polynomial<C>;
    fn mul(self, rhs: &Polynomial<C>) -> Polynomial<C> {
        self.mul_truncated(rhs, None)
    }
}

impl<C: Scalar> Mul for Polynomial<C> {
    type Output = Polynomial<C>;
    fn mul(self, rhs: Polynomial<C>) -> Polynomial<C> {
        self.mul_truncated(&rhs, None)
    }
}

impl<C: Scalar> Neg for &Polynomial<C> {
    type Output = Polynomial<C>;
    fn neg(self) -> Polynomial<C> {
        Polynomial {
            dim: self.dim,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect(),
        }
    }
}

impl<C: Scalar> Neg for Polynomial<C> {
    type Output = Polynomial<C>;
    fn neg(self) -> Polynomial<C> {
        -&self
    }
}

impl<C: Scalar> fmt::Display for Polynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = super::text::default_names(self.dim);
        f.write_str(&super::text::format_polynomial(self, &names))
    }
}

impl<C: fmt::Debug> fmt::Debug for Polynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial[{}]", self.dim)?;
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::Exact;

    fn q(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    fn x(dim: usize, i: usize) -> Polynomial<Exact> {
        Polynomial::variable(dim, i).unwrap()
    }

    #[test]
    fn binomial_substitution() {
        let p = x(1, 0).pow(2);
        let img = x(1, 0) + Polynomial::one(1);
        let got = p.substitute(&[img]).unwrap();
        let want = Polynomial::from_terms(1, [(vec![0], q(1, 1)), (vec![1], q(2, 1)), (vec![2], q(1, 1))]).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn cubic_shift_substitution() {
        let img = x(1, 0) + x(1, 0).pow(3);
        let got = x(1, 0).substitute(std::slice::from_ref(&img)).unwrap();
        assert_eq!(got, img);
    }

    #[test]
    fn swap_leaves_symmetric_product() {
        let p = &x(2, 0) * &x(2, 1);
        let got = p.substitute(&[x(2, 1), x(2, 0)]).unwrap();
        assert_eq!(got, p);
    }

    #[test]
    fn substitute_rejects_wrong_arity() {
        let p = x(2, 0);
        assert!(matches!(p.substitute(&[x(1, 0)]), Err(Error::DimensionMismatch { .. })));
        let mixed = [x(1, 0), x(2, 0)];
        assert!(matches!(p.substitute(&mixed), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn derivatives() {
        let d = x(1, 0).pow(3).partial_derivative(0).unwrap();
        assert_eq!(d, x(1, 0).pow(2).scale(&q(3, 1)));
        let p = &x(2, 0).pow(2) * &x(2, 1);
        assert_eq!(p.partial_derivative(1).unwrap(), x(2, 0).pow(2));
        assert!(Polynomial::constant(1, q(5, 1)).partial_derivative(0).unwrap().is_zero());
        assert!(matches!(p.partial_derivative(2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn recenter_and_back() {
        let p = &x(2, 0).pow(3) + &(&x(2, 0) * &x(2, 1)).scale(&q(-2, 3));
        let c = [q(1, 2), q(-3, 1)];
        let r = p.recenter(&c).unwrap();
        assert_eq!(r.uncenter(&c).unwrap(), p);
        assert_eq!(r.constant_term(), p.evaluate(&c).unwrap());
    }

    #[test]
    fn truncated_products_drop_high_degrees() {
        let p = x(1, 0) + Polynomial::one(1);
        let sq = p.pow_truncated(4, Some(2));
        let want = Polynomial::from_terms(1, [(vec![0], q(1, 1)), (vec![1], q(4, 1)), (vec![2], q(6, 1))]).unwrap();
        assert_eq!(sq, want);
    }

    #[test]
    fn zero_coefficients_are_not_stored() {
        let p = &x(1, 0) - &x(1, 0);
        assert!(p.is_zero());
        assert_eq!(p.len(), 0);
    }
}
