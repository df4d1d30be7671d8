//! Gaussian pairing sums: the Wick operator, its brute-force oracle and the
//! integration-by-parts identity.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::formal::{Polynomial, Scalar};
use crate::linalg::Matrix;

/// Degree cap for the memoized contraction.
pub const DEFAULT_DEGREE_CAP: u32 = 24;
/// Degree cap for the pairing enumeration.
pub const BRUTE_FORCE_DEGREE_CAP: u32 = 12;

/// Nondegenerate symmetric bilinear form `A_ij` with its inverse and determinant.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm<C> {
    matrix: Matrix<C>,
    inverse: Matrix<C>,
    det: C,
}

impl<C: Scalar> QuadraticForm<C> {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<C> {
        &self.matrix
    }

    pub fn inverse(&self) -> &Matrix<C> {
        &self.inverse
    }

    pub fn det(&self) -> &C {
        &self.det
    }

    pub fn propagator(&self) -> Propagator<C> {
        Propagator { g: self.inverse.clone(), origin: PropagatorOrigin::InverseOfForm }
    }

    /// `A(x, x)` as a polynomial.
    pub fn as_polynomial(&self) -> Polynomial<C> {
        let d = self.dim();
        let mut p = Polynomial::zero(d);
        for i in 0..d {
            for j in 0..d {
                let mut e = vec![0; d];
                e[i] += 1;
                e[j] += 1;
                p.add_term(e, self.matrix[(i, j)].clone());
            }
        }
        p
    }
}

/// Checks symmetry and inverts `a`, keeping the determinant.
pub fn invert_symmetric<C: Scalar>(a: &Matrix<C>) -> Result<QuadraticForm<C>> {
    if !a.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let det = a.determinant()?;
    if det.negligible(a.max_norm().powi(a.rows() as i32)) {
        return Err(Error::SingularMatrix);
    }
    let inverse = a.inverse()?;
    Ok(QuadraticForm { matrix: a.clone(), inverse, det })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PropagatorOrigin {
    InverseOfForm,
    /// A generalized inverse supplied by the caller, with a description of the
    /// subspace it inverts on.
    Supplied { projector: String },
}

/// Symmetric contraction kernel `G^{ij}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagator<C> {
    g: Matrix<C>,
    origin: PropagatorOrigin,
}

impl<C: Scalar> Propagator<C> {
    /// Wraps a caller-supplied symmetric matrix. Whether it is the right
    /// generalized inverse is the caller's business.
    pub fn supplied(g: Matrix<C>, projector: impl Into<String>) -> Result<Self> {
        if !g.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        Ok(Self { g, origin: PropagatorOrigin::Supplied { projector: projector.into() } })
    }

    pub fn dim(&self) -> usize {
        self.g.rows()
    }

    pub fn matrix(&self) -> &Matrix<C> {
        &self.g
    }

    pub fn origin(&self) -> &PropagatorOrigin {
        &self.origin
    }
}

/// Memoized evaluator of the Wick operator for one propagator.
///
/// `W(x^e)` is computed by pairing the first variable present with every other
/// factor: `W(e) = sum_j e'_j G[a][j] W(e' - 1_j)` where `e' = e - 1_a`.
pub struct Contractor<'a, C> {
    g: &'a Matrix<C>,
    cap: u32,
    memo: HashMap<Vec<u32>, C>,
}

impl<'a, C: Scalar> Contractor<'a, C> {
    pub fn new(g: &'a Propagator<C>) -> Self {
        Self::with_cap(g, DEFAULT_DEGREE_CAP)
    }

    pub fn with_cap(g: &'a Propagator<C>, cap: u32) -> Self {
        Self { g: &g.g, cap, memo: HashMap::new() }
    }

    pub fn monomial(&mut self, e: &[u32]) -> Result<C> {
        let deg: u32 = e.iter().sum();
        if deg > self.cap {
            return Err(Error::DegreeCapExceeded { degree: deg, cap: self.cap });
        }
        if e.len() != self.g.rows() {
            return Err(Error::DimensionMismatch { expected: self.g.rows(), found: e.len() });
        }
        Ok(self.eval(e.to_vec(), deg))
    }

    fn eval(&mut self, mut e: Vec<u32>, deg: u32) -> C {
        if deg % 2 == 1 {
            return C::zero();
        }
        if deg == 0 {
            return C::one();
        }
        if let Some(v) = self.memo.get(&e) {
            return v.clone();
        }
        let key = e.clone();
        let a = e.iter().position(|&k| k > 0).expect("positive degree");
        e[a] -= 1;
        let mut acc = C::zero();
        for j in 0..e.len() {
            if e[j] == 0 {
                continue;
            }
            let gaj = &self.g[(a, j)];
            if gaj.is_zero() {
                continue;
            }
            let mult = C::from_i64(e[j] as i64);
            let gaj = gaj.clone();
            e[j] -= 1;
            let sub = self.eval(e.clone(), deg - 2);
            e[j] += 1;
            acc += mult * gaj * sub;
        }
        self.memo.insert(key, acc.clone());
        acc
    }

    pub fn value(&mut self, p: &Polynomial<C>) -> Result<C> {
        let mut acc = C::zero();
        for (e, c) in p.terms() {
            let w = self.monomial(e)?;
            if !w.is_zero() {
                acc += c.clone() * w;
            }
        }
        Ok(acc)
    }
}

fn check_dims<C: Scalar>(p: &Polynomial<C>, g: &Propagator<C>) -> Result<()> {
    if p.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: p.dim() });
    }
    Ok(())
}

/// The Wick operator applied to `p` with contraction kernel `g`.
pub fn wick_value<C: Scalar>(p: &Polynomial<C>, g: &Propagator<C>) -> Result<C> {
    check_dims(p, g)?;
    Contractor::new(g).value(p)
}

pub fn wick_value_with_cap<C: Scalar>(p: &Polynomial<C>, g: &Propagator<C>, cap: u32) -> Result<C> {
    check_dims(p, g)?;
    Contractor::with_cap(g, cap).value(p)
}

/// Enumerates all perfect matchings of every monomial directly.
pub fn wick_value_bruteforce<C: Scalar>(p: &Polynomial<C>, g: &Propagator<C>) -> Result<C> {
    wick_value_bruteforce_with_cap(p, g, BRUTE_FORCE_DEGREE_CAP)
}

pub fn wick_value_bruteforce_with_cap<C: Scalar>(p: &Polynomial<C>, g: &Propagator<C>, cap: u32) -> Result<C> {
    check_dims(p, g)?;
    let mut acc = C::zero();
    for (e, c) in p.terms() {
        let deg: u32 = e.iter().sum();
        if deg > cap {
            return Err(Error::DegreeCapExceeded { degree: deg, cap });
        }
        if deg % 2 == 1 {
            continue;
        }
        let idx: Vec<usize> = e.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize)).collect();
        let mut used = vec![false; idx.len()];
        acc += c.clone() * matchings(&idx, &mut used, &g.g);
    }
    Ok(acc)
}

fn matchings<C: Scalar>(idx: &[usize], used: &mut [bool], g: &Matrix<C>) -> C {
    let Some(first) = used.iter().position(|u| !u) else {
        return C::one();
    };
    used[first] = true;
    let mut acc = C::zero();
    for k in first + 1..idx.len() {
        if used[k] {
            continue;
        }
        used[k] = true;
        let rest = matchings(idx, used, g);
        used[k] = false;
        acc += g[(idx[first], idx[k])].clone() * rest;
    }
    used[first] = false;
    acc
}

/// Whether `W_A(∂_i P - A_ij x^j P)` vanishes.
pub fn check_wick_ibp<C: Scalar>(p: &Polynomial<C>, a: &QuadraticForm<C>, i: usize) -> Result<bool> {
    let d = a.dim();
    if p.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
    }
    let mut q = p.partial_derivative(i)?;
    for j in 0..d {
        let aij = &a.matrix()[(i, j)];
        if aij.is_zero() {
            continue;
        }
        let xj = Polynomial::variable(d, j)?;
        q = &q - &(&xj * p).scale(aij);
    }
    let w = wick_value(&q, &a.propagator())?;
    let scale = p.coefficient_scale() * (1.0 + a.inverse().max_norm()).powi(p.degree().unwrap_or(0) as i32 + 2);
    Ok(w.negligible(scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::Exact;

    fn q(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    fn mat(rows: &[&[i64]]) -> Matrix<Exact> {
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&v| Exact::from_i64(v)).collect()).collect()).unwrap()
    }

    fn xpow(e: Vec<u32>) -> Polynomial<Exact> {
        Polynomial::monomial(e, Exact::one())
    }

    use num_traits::One;

    #[test]
    fn invert_examples() {
        let f = invert_symmetric(&mat(&[&[1]])).unwrap();
        assert_eq!(f.inverse(), &mat(&[&[1]]));
        assert_eq!(f.det(), &q(1, 1));
        let f = invert_symmetric(&mat(&[&[-1]])).unwrap();
        assert_eq!(f.inverse(), &mat(&[&[-1]]));
        assert_eq!(f.det(), &q(-1, 1));
        let f = invert_symmetric(&mat(&[&[0, 1], &[1, 0]])).unwrap();
        assert_eq!(f.inverse(), &mat(&[&[0, 1], &[1, 0]]));
        assert_eq!(f.det(), &q(-1, 1));
        assert_eq!(invert_symmetric(&mat(&[&[1, 1], &[1, 1]])).unwrap_err(), Error::SingularMatrix);
        assert_eq!(invert_symmetric(&mat(&[&[1, 2], &[0, 1]])).unwrap_err(), Error::NotSymmetric);
    }

    #[test]
    fn double_factorials() {
        let g = invert_symmetric(&mat(&[&[1]])).unwrap().propagator();
        for (k, want) in [(4, 3), (6, 15), (8, 105), (3, 0)] {
            assert_eq!(wick_value(&xpow(vec![k]), &g).unwrap(), q(want, 1));
        }
    }

    #[test]
    fn mixed_moment() {
        let g = Propagator::supplied(mat(&[&[2, 0], &[0, 5]]), "test").unwrap();
        let p = xpow(vec![2, 2]);
        assert_eq!(wick_value(&p, &g).unwrap(), q(10, 1));
        assert_eq!(wick_value_bruteforce(&p, &g).unwrap(), q(10, 1));
    }

    #[test]
    fn bruteforce_examples() {
        let g = Propagator::supplied(mat(&[&[7]]), "test").unwrap();
        assert_eq!(wick_value_bruteforce(&xpow(vec![2]), &g).unwrap(), q(7, 1));
        let g = invert_symmetric(&Matrix::<Exact>::identity(4)).unwrap().propagator();
        assert_eq!(wick_value_bruteforce(&xpow(vec![1, 1, 1, 1]), &g).unwrap(), q(0, 1));
        let err = wick_value_bruteforce(&xpow(vec![14]), &invert_symmetric(&mat(&[&[1]])).unwrap().propagator());
        assert_eq!(err.unwrap_err(), Error::DegreeCapExceeded { degree: 14, cap: 12 });
    }

    #[test]
    fn memoized_cap() {
        let g = invert_symmetric(&mat(&[&[1]])).unwrap().propagator();
        assert!(matches!(wick_value(&xpow(vec![26]), &g), Err(Error::DegreeCapExceeded { .. })));
        assert!(wick_value_with_cap(&xpow(vec![26]), &g, 30).is_ok());
    }

    #[test]
    fn ibp_examples() {
        let a = invert_symmetric(&mat(&[&[1]])).unwrap();
        assert!(check_wick_ibp(&xpow(vec![1]), &a, 0).unwrap());
        assert!(check_wick_ibp(&xpow(vec![3]), &a, 0).unwrap());
    }
}
