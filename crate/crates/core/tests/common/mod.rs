#![allow(dead_code)]

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wicklab::expansion::{FormalDiffeo, Integrand};
use wicklab::formal::{parse_expression, Exact, Polynomial, Scalar};
use wicklab::linalg::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn parse(src: &str, vars: &[&str]) -> Polynomial<Exact> {
    parse_expression(src, &names(vars)).unwrap()
}

pub fn rational(rng: &mut impl Rng, num: i64, den: i64) -> Exact {
    Exact::from_ratio(rng.gen_range(-num..=num), rng.gen_range(1..=den))
}

pub fn nonzero_rational(rng: &mut impl Rng, num: i64, den: i64) -> Exact {
    loop {
        let q = rational(rng, num, den);
        if !q.is_zero() {
            return q;
        }
    }
}

pub fn symmetric(rng: &mut impl Rng, d: usize) -> Matrix<Exact> {
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let q = rational(rng, 5, 4);
            m[(i, j)] = q.clone();
            m[(j, i)] = q;
        }
    }
    m
}

/// `L Lᵀ + 1` with `L` lower triangular with small rational entries.
pub fn positive_definite(rng: &mut impl Rng, d: usize) -> Matrix<Exact> {
    let mut l = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            l[(i, j)] = rational(rng, 2, 2);
        }
    }
    l.mul(&l.transpose()).unwrap().add(&Matrix::identity(d))
}

pub fn exponents(rng: &mut impl Rng, d: usize, degree: u32) -> Vec<u32> {
    let mut e = vec![0; d];
    for _ in 0..degree {
        e[rng.gen_range(0..d)] += 1;
    }
    e
}

/// Up to `terms` random monomials of total degree in `lo..=hi`.
pub fn poly(rng: &mut impl Rng, d: usize, lo: u32, hi: u32, terms: usize) -> Polynomial<Exact> {
    let mut p = Polynomial::zero(d);
    for _ in 0..terms {
        let deg = rng.gen_range(lo..=hi);
        p.add_term(exponents(rng, d, deg), rational(rng, 3, 3));
    }
    p
}

pub fn quadratic(a: &Matrix<Exact>) -> Polynomial<Exact> {
    let d = a.rows();
    let mut p = Polynomial::zero(d);
    for i in 0..d {
        for j in 0..d {
            let mut e = vec![0; d];
            e[i] += 1;
            e[j] += 1;
            p.add_term(e, a[(i, j)].clone() * Exact::from_ratio(1, 2));
        }
    }
    p
}

/// `½ xᵀAx` plus cubic and quartic terms, observable of degree at most 2.
pub fn integrand(rng: &mut impl Rng, d: usize) -> Integrand<Exact> {
    let a = positive_definite(rng, d);
    let action = &quadratic(&a) + &poly(rng, d, 3, 4, 3);
    let observable = &Polynomial::one(d) + &poly(rng, d, 1, 2, 2);
    Integrand::new(action, observable).unwrap()
}

/// A map fixing the origin with triangular linear part and nonlinear terms
/// of degree `2..=max_degree`.
pub fn diffeo(rng: &mut impl Rng, d: usize, max_degree: u32) -> FormalDiffeo<Exact> {
    let comps = (0..d)
        .map(|i| {
            let mut p = Polynomial::zero(d);
            let mut e = vec![0; d];
            e[i] = 1;
            p.add_term(e, nonzero_rational(rng, 2, 2));
            for j in 0..i {
                let mut e = vec![0; d];
                e[j] = 1;
                p.add_term(e, rational(rng, 2, 2));
            }
            if max_degree >= 2 {
                p = &p + &poly(rng, d, 2, max_degree, 2);
            }
            p
        })
        .collect();
    FormalDiffeo::new(comps).unwrap()
}

pub fn zero_point(d: usize) -> Vec<Exact> {
    vec![Exact::zero(); d]
}
