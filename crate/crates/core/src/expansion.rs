//! Wick expansion about a nondegenerate critical point, formal coordinate
//! changes, total derivatives and auxiliary fields.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formal::{parse_coefficient, HbarGradedSeries, Polynomial, Scalar};
use crate::linalg::{poly_determinant, Matrix};
use crate::wick::{invert_symmetric, Contractor, Propagator, QuadraticForm};

/// Default Newton tolerance on `|grad S|`.
pub const NEWTON_TOL: f64 = 1e-12;
/// Hessian condition number above which a critical point counts as degenerate.
pub const CONDITION_LIMIT: f64 = 1e8;
/// Relative tolerance for float-mode criticality checks.
const FLOAT_CRITICAL_TOL: f64 = 1e-9;

/// Symbolic factor `(2πħ)^(dims/2) · det^(-1/2) · e^(-s0/ħ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Prefactor<C> {
    pub dims: i32,
    pub det: C,
    pub s0: C,
}

impl<C: Scalar> Prefactor<C> {
    pub fn identity() -> Self {
        Self { dims: 0, det: C::one(), s0: C::zero() }
    }

    pub fn combine(&self, other: &Self) -> Self {
        Self { dims: self.dims + other.dims, det: self.det.clone() * &other.det, s0: self.s0.clone() + &other.s0 }
    }

    pub fn inverse(&self) -> Self {
        Self { dims: -self.dims, det: self.det.recip(), s0: -self.s0.clone() }
    }

    /// Principal-branch numerical value.
    pub fn evaluate(&self, hbar: Complex64) -> Complex64 {
        let two_pi_h = hbar * (2.0 * std::f64::consts::PI);
        two_pi_h.powf(self.dims as f64 / 2.0) / self.det.to_c64().sqrt() * (-self.s0.to_c64() / hbar).exp()
    }

    pub fn to_float(&self) -> Prefactor<Complex64> {
        Prefactor { dims: self.dims, det: self.det.to_c64(), s0: self.s0.to_c64() }
    }
}

/// `dV · f · e^{-S/ħ}` times a symbolic prefactor.
///
/// The observable carries explicit powers of `ħ^(1/2)`; only even grades are
/// accepted by the expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct Integrand<C> {
    pub action: Polynomial<C>,
    pub observable: HbarGradedSeries<C>,
    pub prefactor: Prefactor<C>,
}

impl<C: Scalar> Integrand<C> {
    pub fn new(action: Polynomial<C>, observable: Polynomial<C>) -> Result<Self> {
        Self::with_series(action, HbarGradedSeries::from_polynomial(observable))
    }

    pub fn with_series(action: Polynomial<C>, observable: HbarGradedSeries<C>) -> Result<Self> {
        if action.dim() != observable.dim() {
            return Err(Error::DimensionMismatch { expected: action.dim(), found: observable.dim() });
        }
        Ok(Self { action, observable, prefactor: Prefactor::identity() })
    }

    pub fn dim(&self) -> usize {
        self.action.dim()
    }

    pub fn to_float(&self) -> Integrand<Complex64> {
        Integrand {
            action: self.action.to_float(),
            observable: self.observable.map_polys(|p| p.to_float()),
            prefactor: self.prefactor.to_float(),
        }
    }
}

/// Output of the Wick expansion: `prefactor · Σ_k c_k ħ^k` for `kmin <= k <= order`.
#[derive(Clone, Debug, PartialEq)]
pub struct WickSeries<C> {
    pub prefactor: Prefactor<C>,
    pub kmin: i32,
    pub order: i32,
    pub coeffs: Vec<C>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WickSeriesJson {
    #[serde(rename = "S0")]
    pub s0: String,
    #[serde(rename = "detA")]
    pub det_a: String,
    pub d: i32,
    pub kmin: i32,
    #[serde(rename = "N")]
    pub n: i32,
    pub coeffs: Vec<String>,
}

impl<C: Scalar> WickSeries<C> {
    pub fn s0(&self) -> &C {
        &self.prefactor.s0
    }

    pub fn det(&self) -> &C {
        &self.prefactor.det
    }

    pub fn dims(&self) -> i32 {
        self.prefactor.dims
    }

    /// `c_k`, zero outside the stored range.
    pub fn coeff(&self, k: i32) -> C {
        if k < self.kmin {
            return C::zero();
        }
        self.coeffs.get((k - self.kmin) as usize).cloned().unwrap_or_else(C::zero)
    }

    pub fn is_zero_series(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.close_to(&C::zero(), tol))
    }

    /// `prefactor · Σ_{k <= n} c_k ħ^k`.
    pub fn partial_sum(&self, hbar: Complex64, n: i32) -> Complex64 {
        let sum: Complex64 = (self.kmin..=n.min(self.order)).map(|k| self.coeff(k).to_c64() * hbar.powi(k)).sum();
        self.prefactor.evaluate(hbar) * sum
    }

    /// Whether both series describe the same function: equal `S0` and `d`, and
    /// `c_k = sqrt(det/other.det) · other.c_k` through the common order.
    pub fn normalized_eq(&self, other: &Self, tol: f64) -> bool {
        if self.dims() != other.dims() || !self.s0().close_to(other.s0(), tol) {
            return false;
        }
        let ratio = self.det().clone() / other.det().clone();
        let Some(root) = ratio.sqrt_in_field() else {
            return false;
        };
        let top = self.order.min(other.order);
        let low = self.kmin.min(other.kmin);
        (low..=top).all(|k| self.coeff(k).close_to(&(root.clone() * other.coeff(k)), tol))
    }

    /// Coefficient lists equal through the common order.
    pub fn coeffs_eq(&self, other: &Self, tol: f64) -> bool {
        let top = self.order.min(other.order);
        let low = self.kmin.min(other.kmin);
        (low..=top).all(|k| self.coeff(k).close_to(&other.coeff(k), tol))
    }

    pub fn to_json(&self) -> WickSeriesJson {
        WickSeriesJson {
            s0: self.s0().to_text(),
            det_a: self.det().to_text(),
            d: self.dims(),
            kmin: self.kmin,
            n: self.order,
            coeffs: self.coeffs.iter().map(|c| c.to_text()).collect(),
        }
    }

    pub fn from_json(j: &WickSeriesJson) -> Result<Self> {
        let conv = |s: &str| parse_coefficient(s).map(|c| C::from_rationals(&c.re, &c.im));
        Ok(Self {
            prefactor: Prefactor { dims: j.d, det: conv(&j.det_a)?, s0: conv(&j.s0)? },
            kmin: j.kmin,
            order: j.n,
            coeffs: j.coeffs.iter().map(|s| conv(s)).collect::<Result<_>>()?,
        })
    }

    pub fn to_float(&self) -> WickSeries<Complex64> {
        WickSeries {
            prefactor: self.prefactor.to_float(),
            kmin: self.kmin,
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c.to_c64()).collect(),
        }
    }
}

/// `S = S0 + ½A(x-x0, x-x0) - Sbar`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSplit<C> {
    pub s0: C,
    pub form: QuadraticForm<C>,
    /// In the original coordinates.
    pub sbar: Polynomial<C>,
}

struct RawSplit<C> {
    s0: C,
    hessian: Matrix<C>,
    /// In `u = x - x0`.
    sbar_centered: Polynomial<C>,
}

fn is_critical_value<C: Scalar>(g: &C, scale: f64) -> bool {
    match C::BACKEND {
        crate::formal::Backend::Exact => g.is_zero(),
        crate::formal::Backend::Float => g.to_c64().norm() <= FLOAT_CRITICAL_TOL * (1.0 + scale),
    }
}

fn split_raw<C: Scalar>(s: &Polynomial<C>, x0: &[C]) -> Result<RawSplit<C>> {
    let d = s.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x0.len() });
    }
    let r = s.recenter(x0)?;
    let scale = s.coefficient_scale();
    let s0 = r.constant_term();
    for (i, g) in r.homogeneous_part(1).gradient().iter().enumerate() {
        let gi = g.constant_term();
        if !is_critical_value(&gi, scale) {
            return Err(Error::NotCritical { component: i, value: gi.to_text() });
        }
    }
    let quad = r.homogeneous_part(2);
    let hessian = Matrix::from_fn(d, d, |i, j| {
        let mut e = vec![0; d];
        e[i] += 1;
        e[j] += 1;
        let c = quad.coefficient(&e);
        if i == j { c * C::from_i64(2) } else { c }
    });
    let mut sbar = Polynomial::zero(d);
    for (e, c) in r.terms() {
        if e.iter().sum::<u32>() >= 3 {
            sbar.add_term(e.clone(), -c.clone());
        }
    }
    Ok(RawSplit { s0, hessian, sbar_centered: sbar })
}

/// Splits `S` at the critical point `x0`.
pub fn split_action<C: Scalar>(s: &Polynomial<C>, x0: &[C]) -> Result<ActionSplit<C>> {
    let raw = split_raw(s, x0)?;
    let form = invert_symmetric(&raw.hessian).map_err(|e| match e {
        Error::SingularMatrix => Error::SingularHessian,
        other => other,
    })?;
    Ok(ActionSplit { s0: raw.s0, form, sbar: raw.sbar_centered.uncenter(x0)? })
}

/// The Wick expansion of `integrand` about `x0` through `ħ^order`.
pub fn wick_expand<C: Scalar>(integrand: &Integrand<C>, x0: &[C], order: i32) -> Result<WickSeries<C>> {
    let split = split_action(&integrand.action, x0)?;
    let g = split.form.propagator();
    let raw = split_raw(&integrand.action, x0)?;
    let (kmin, n_out, coeffs) = contract(integrand, x0, &raw.sbar_centered, &g, order, u32::MAX)?;
    let local = Prefactor { dims: integrand.dim() as i32, det: split.form.det().clone(), s0: split.s0 };
    Ok(WickSeries { prefactor: local.combine(&integrand.prefactor), kmin, order: n_out, coeffs })
}

/// Coefficients `c_k` obtained by contracting with a supplied propagator, for
/// Hessians that are only invertible on a subspace. Returns `(kmin, coeffs)`.
pub fn wick_expand_with_propagator<C: Scalar>(
    integrand: &Integrand<C>,
    x0: &[C],
    order: i32,
    g: &Propagator<C>,
    degree_cap: u32,
) -> Result<(i32, Vec<C>)> {
    let raw = split_raw(&integrand.action, x0)?;
    let (kmin, _, coeffs) = contract(integrand, x0, &raw.sbar_centered, g, order, degree_cap)?;
    Ok((kmin, coeffs))
}

/// The grade-`2k` polynomials of `exp(Sbar/ħ)·f` under `x = x0 + ħ^(1/2) u`.
pub fn graded_integrand<C: Scalar>(
    integrand: &Integrand<C>,
    x0: &[C],
    sbar_centered: &Polynomial<C>,
    order: i32,
) -> Result<(i32, i32, HbarGradedSeries<C>)> {
    let d = integrand.dim();
    let f = &integrand.observable;
    if let Some((g, _)) = f.grades().find(|(g, _)| g % 2 != 0) {
        return Err(Error::OddObservableGrade { grade: g });
    }
    let gmin = f.min_grade().unwrap_or(0);
    let kmin = gmin.div_euclid(2);
    let n_out = match f.order() {
        Some(n) => order.min(n.div_euclid(2)),
        None => order,
    };
    let top = 2 * n_out;
    let mut interaction = HbarGradedSeries::zero(d, None);
    if let Some(deg) = sbar_centered.degree() {
        for m in 3..=deg {
            interaction.add_at(m as i32 - 2, &sbar_centered.homogeneous_part(m));
        }
    }
    let exp_order = top - gmin;
    let weight = if exp_order >= 0 { interaction.graded_exp(exp_order)? } else { HbarGradedSeries::zero(d, Some(exp_order)) };
    let mut regraded = HbarGradedSeries::zero(d, Some(top));
    for (g, p) in f.grades() {
        if g > top {
            continue;
        }
        let r = p.recenter(x0)?;
        let max_m = (top - g) as u32;
        for m in 0..=r.degree().unwrap_or(0).min(max_m) {
            regraded.add_at(g + m as i32, &r.homogeneous_part(m));
        }
    }
    Ok((kmin, n_out, weight.mul_with_order(&regraded, Some(top))))
}

fn contract<C: Scalar>(
    integrand: &Integrand<C>,
    x0: &[C],
    sbar_centered: &Polynomial<C>,
    g: &Propagator<C>,
    order: i32,
    degree_cap: u32,
) -> Result<(i32, i32, Vec<C>)> {
    if g.dim() != integrand.dim() {
        return Err(Error::DimensionMismatch { expected: integrand.dim(), found: g.dim() });
    }
    let (kmin, n_out, total) = graded_integrand(integrand, x0, sbar_centered, order)?;
    let ks: Vec<i32> = (kmin..=n_out).collect();
    let coeffs = ks
        .par_iter()
        .map(|&k| Contractor::with_cap(g, degree_cap).value(&total.grade(2 * k)))
        .collect::<Result<Vec<C>>>()?;
    Ok((kmin, n_out, coeffs))
}

/// A polynomial map `x ↦ Φ(x)` with invertible linear part at `anchor`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalDiffeo<C> {
    components: Vec<Polynomial<C>>,
    anchor: Vec<C>,
    linear: Matrix<C>,
}

impl<C: Scalar> FormalDiffeo<C> {
    pub fn new(components: Vec<Polynomial<C>>) -> Result<Self> {
        let d = components.len();
        Self::with_anchor(components, vec![C::zero(); d])
    }

    pub fn with_anchor(components: Vec<Polynomial<C>>, anchor: Vec<C>) -> Result<Self> {
        let d = components.len();
        if anchor.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: anchor.len() });
        }
        if let Some(bad) = components.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
        }
        let mut linear = Matrix::zeros(d, d);
        for (i, p) in components.iter().enumerate() {
            for j in 0..d {
                linear[(i, j)] = p.partial_derivative(j)?.evaluate(&anchor)?;
            }
        }
        if linear.determinant()?.negligible(linear.max_norm().powi(d as i32)) {
            return Err(Error::SingularMatrix);
        }
        Ok(Self { components, anchor, linear })
    }

    pub fn identity(d: usize) -> Self {
        let comps = (0..d).map(|i| Polynomial::variable(d, i).expect("in range")).collect();
        Self::new(comps).expect("identity is invertible")
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial<C>] {
        &self.components
    }

    pub fn anchor(&self) -> &[C] {
        &self.anchor
    }

    pub fn linear_part(&self) -> &Matrix<C> {
        &self.linear
    }

    pub fn apply(&self, x: &[C]) -> Result<Vec<C>> {
        self.components.iter().map(|p| p.evaluate(x)).collect()
    }

    /// `det DΦ` as a polynomial.
    pub fn jacobian_determinant(&self) -> Result<Polynomial<C>> {
        let rows: Vec<Vec<Polynomial<C>>> = self.components.iter().map(|p| p.gradient()).collect();
        poly_determinant(&rows, None)
    }

    /// Components re-expressed in `u = x - anchor`.
    fn centered_images(&self) -> Result<Vec<Polynomial<C>>> {
        self.components.iter().map(|p| p.recenter(&self.anchor)).collect()
    }

    /// Jet of `Φ^{-1}` about `Φ(anchor)` through total degree `degree`.
    pub fn inverse_jet(&self, degree: u32) -> Result<Self> {
        let d = self.dim();
        let y0 = self.apply(&self.anchor)?;
        let linv = self.linear.inverse()?;
        // Φ(a + v) = y0 + L v + R(v); solve L v + R(v) = w by fixed-point iteration.
        let centered = self.centered_images()?;
        let nonlinear: Vec<Polynomial<C>> = centered
            .iter()
            .map(|p| {
                let mut q = Polynomial::zero(d);
                for (e, c) in p.terms() {
                    if e.iter().sum::<u32>() >= 2 {
                        q.add_term(e.clone(), c.clone());
                    }
                }
                q
            })
            .collect();
        let w: Vec<Polynomial<C>> = (0..d).map(|i| Polynomial::variable(d, i)).collect::<Result<_>>()?;
        let apply_linv = |vecs: &[Polynomial<C>]| -> Vec<Polynomial<C>> {
            (0..d)
                .map(|i| {
                    let mut acc = Polynomial::zero(d);
                    for (j, vj) in vecs.iter().enumerate() {
                        acc += &vj.scale(&linv[(i, j)]);
                    }
                    acc
                })
                .collect()
        };
        let mut v = apply_linv(&w);
        for _ in 1..degree {
            let r: Vec<Polynomial<C>> =
                nonlinear.iter().map(|q| q.substitute_truncated(&v, degree)).collect::<Result<_>>()?;
            let rhs: Vec<Polynomial<C>> = w.iter().zip(&r).map(|(a, b)| a - b).collect();
            v = apply_linv(&rhs);
        }
        let comps: Vec<Polynomial<C>> = v
            .iter()
            .zip(&self.anchor)
            .map(|(vi, ai)| (vi + &Polynomial::constant(d, ai.clone())).uncenter(&y0))
            .collect::<Result<_>>()?;
        Self::with_anchor(comps, y0)
    }
}

/// Pulls `integrand` back along `phi`: action `S∘Φ` and observable
/// `(f∘Φ)·det DΦ`, with the determinant's sign made positive at the anchor.
/// With `degree_cap`, everything is truncated at that degree about the anchor.
pub fn transform_integrand<C: Scalar>(
    integrand: &Integrand<C>,
    phi: &FormalDiffeo<C>,
    degree_cap: Option<u32>,
) -> Result<Integrand<C>> {
    let d = integrand.dim();
    if phi.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: phi.dim() });
    }
    let anchor = phi.anchor();
    let images = phi.centered_images()?;
    let compose = |p: &Polynomial<C>| -> Result<Polynomial<C>> {
        match degree_cap {
            Some(m) => p.substitute_truncated(&images, m),
            None => p.substitute(&images),
        }
    };
    let jac = phi.jacobian_determinant()?.recenter(anchor)?;
    let jac = if jac.constant_term().real_sign() == Some(std::cmp::Ordering::Less) { -jac } else { jac };
    let action = compose(&integrand.action)?.uncenter(anchor)?;
    let mut observable = HbarGradedSeries::zero(d, integrand.observable.order());
    for (g, p) in integrand.observable.grades() {
        let q = compose(p)?.mul_truncated(&jac, degree_cap);
        observable.add_at(g, &q.uncenter(anchor)?);
    }
    Ok(Integrand { action, observable, prefactor: integrand.prefactor.clone() })
}

/// The integrand representing `∂_i [f e^{-S/ħ}]`: observable `∂_i f - ħ^{-1} f ∂_i S`.
pub fn total_derivative<C: Scalar>(integrand: &Integrand<C>, i: usize) -> Result<Integrand<C>> {
    let ds = integrand.action.partial_derivative(i)?;
    let f = &integrand.observable;
    let mut df = HbarGradedSeries::zero(f.dim(), f.order());
    for (g, p) in f.grades() {
        df.add_at(g, &p.partial_derivative(i)?);
    }
    let observable = df.sub(&f.mul_poly(&ds).shift(-2));
    Ok(Integrand { action: integrand.action.clone(), observable, prefactor: integrand.prefactor.clone() })
}

/// Whether the expansion of the total derivative in direction `i` vanishes.
pub fn check_schwinger_dyson<C: Scalar>(integrand: &Integrand<C>, i: usize, x0: &[C], order: i32) -> Result<bool> {
    let series = wick_expand(&total_derivative(integrand, i)?, x0, order)?;
    Ok(series.is_zero_series(1e-9))
}

/// `Σ_i ∂_i V^i`.
pub fn divergence<C: Scalar>(v: &[Polynomial<C>]) -> Result<Polynomial<C>> {
    let d = v.len();
    let mut acc = Polynomial::zero(d);
    for (i, vi) in v.iter().enumerate() {
        if vi.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: vi.dim() });
        }
        acc += &vi.partial_derivative(i)?;
    }
    Ok(acc)
}

/// Second-order action `|Tx + V(x)|² / 2c` and its first-order form
/// `-(c|y|²/2 + ⟨Tx + V(x), y⟩)` in `(x, y)`, both expanded about the origin
/// with `f = 1`. Returns `(second_order, first_order)`.
pub fn eliminate_auxiliary<C: Scalar>(
    t: &Matrix<C>,
    v: &[Polynomial<C>],
    c: &C,
    order: i32,
) -> Result<(WickSeries<C>, WickSeries<C>)> {
    let d = t.rows();
    if !t.is_square() || v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: v.len() });
    }
    if t.determinant()?.negligible(t.max_norm().powi(d as i32)) {
        return Err(Error::SingularMatrix);
    }
    if c.is_zero() {
        return Err(Error::InvalidArgument("c must be nonzero".into()));
    }
    for (i, vi) in v.iter().enumerate() {
        if vi.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: vi.dim() });
        }
        if vi.min_degree().is_some_and(|m| m < 2) {
            return Err(Error::VHasLowDegree { component: i });
        }
    }
    let e: Vec<Polynomial<C>> = (0..d)
        .map(|i| {
            let mut acc = v[i].clone();
            for j in 0..d {
                acc += &Polynomial::variable(d, j).expect("in range").scale(&t[(i, j)]);
            }
            acc
        })
        .collect();
    let mut second = Polynomial::zero(d);
    for ei in &e {
        second += &(ei * ei);
    }
    let second = second.scale(&(C::from_i64(2) * c.clone()).recip());

    let n = 2 * d;
    let xs: Vec<usize> = (0..d).collect();
    let mut first = Polynomial::zero(n);
    for (i, ei) in e.iter().enumerate() {
        let yi = Polynomial::variable(n, d + i)?;
        first += &(&ei.embed(n, &xs)? * &yi);
        first += &(&yi * &yi).scale(&(c.clone() * C::from_ratio(1, 2)));
    }
    let first = -first;

    let so = wick_expand(&Integrand::new(second, Polynomial::one(d))?, &vec![C::zero(); d], order)?;
    let fo = wick_expand(&Integrand::new(first, Polynomial::one(n))?, &vec![C::zero(); n], order)?;
    Ok((so, fo))
}

/// Newton iteration on `grad S` from `guess`.
pub fn find_critical_point(s: &Polynomial<Complex64>, guess: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let d = s.dim();
    if guess.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: guess.len() });
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let grad = s.gradient();
    let hess: Vec<Vec<Polynomial<Complex64>>> = grad.iter().map(|g| g.gradient()).collect();
    let eval_grad = |x: &[f64]| nalgebra::DVector::from_iterator(d, grad.iter().map(|g| g.eval_real(x).re));
    let eval_hess = |x: &[f64]| nalgebra::DMatrix::from_fn(d, d, |i, j| hess[i][j].eval_real(x).re);
    let mut x = guess.to_vec();
    for _ in 0..max_iter {
        let g = eval_grad(&x);
        if g.norm() == 0.0 {
            break;
        }
        let Some(step) = eval_hess(&x).lu().solve(&(-g)) else {
            break;
        };
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi += si;
        }
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step.norm() <= 4.0 * f64::EPSILON * (1.0 + xnorm) {
            break;
        }
    }
    let residual = eval_grad(&x).norm();
    if residual.is_nan() || residual > tol {
        return Err(Error::NoConvergence { iterations: max_iter, residual });
    }
    let eig = nalgebra::SymmetricEigen::new(eval_hess(&x)).eigenvalues;
    let lmax = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lmin = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let condition = lmax.max(1.0) / lmin;
    if condition.is_nan() || condition > CONDITION_LIMIT {
        return Err(Error::DegenerateCritical { condition });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::{parse_expression, Exact};
    use num_traits::Zero;

    fn q(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    fn poly(src: &str, names: &[&str]) -> Polynomial<Exact> {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        parse_expression(src, &names).unwrap()
    }

    fn series(s: &str, f: &str, order: i32) -> WickSeries<Exact> {
        let i = Integrand::new(poly(s, &["x"]), poly(f, &["x"])).unwrap();
        wick_expand(&i, &[q(0, 1)], order).unwrap()
    }

    #[test]
    fn split_examples() {
        let sp = split_action(&poly("1/2*x^2 + x^4", &["x"]), &[q(0, 1)]).unwrap();
        assert_eq!(sp.s0, q(0, 1));
        assert_eq!(sp.form.matrix()[(0, 0)], q(1, 1));
        assert_eq!(sp.sbar, poly("-x^4", &["x"]));
        let sp = split_action(&poly("1/2*x^2", &["x"]), &[q(0, 1)]).unwrap();
        assert!(sp.sbar.is_zero());
        let sp = split_action(&poly("1/2*x^2 + x^4 + 1/2*x^6", &["x"]), &[q(0, 1)]).unwrap();
        assert_eq!(sp.sbar, poly("-x^4 - 1/2*x^6", &["x"]));
    }

    #[test]
    fn split_errors() {
        let e = split_action(&poly("x + x^2", &["x"]), &[q(0, 1)]).unwrap_err();
        assert!(matches!(e, Error::NotCritical { component: 0, .. }));
        assert_eq!(split_action(&poly("x^4", &["x"]), &[q(0, 1)]).unwrap_err(), Error::SingularHessian);
    }

    #[test]
    fn split_reconstructs_action_off_origin() {
        let s = poly("(x - 1)^2*(x + 2) + 3", &["x"]);
        let sp = split_action(&s, &[q(1, 1)]).unwrap();
        let u = poly("x - 1", &["x"]);
        let quad = (&u * &u).scale(&(sp.form.matrix()[(0, 0)].clone() * q(1, 2)));
        assert_eq!(&(&quad - &sp.sbar) + &Polynomial::constant(1, sp.s0.clone()), s);
    }

    #[test]
    fn gaussian_has_trivial_series() {
        let w = series("1/2*x^2", "1", 4);
        assert_eq!(w.coeffs, vec![q(1, 1), q(0, 1), q(0, 1), q(0, 1), q(0, 1)]);
        assert_eq!(w.dims(), 1);
        assert_eq!(w.det(), &q(1, 1));
    }

    #[test]
    fn quartic_coefficients() {
        let w = series("1/2*x^2 + x^4", "1", 2);
        assert_eq!(w.coeffs, vec![q(1, 1), q(-3, 1), q(105, 2)]);
    }

    #[test]
    fn change_of_variables_cancels() {
        let w = series("1/2*x^2 + x^4 + 1/2*x^6", "1 + 3*x^2", 2);
        assert_eq!(w.coeffs, vec![q(1, 1), q(0, 1), q(0, 1)]);
    }

    #[test]
    fn transform_reproduces_substitution() {
        let i = Integrand::new(poly("1/2*x^2", &["x"]), Polynomial::one(1)).unwrap();
        let phi = FormalDiffeo::new(vec![poly("x + x^3", &["x"])]).unwrap();
        let t = transform_integrand(&i, &phi, None).unwrap();
        assert_eq!(t.action, poly("1/2*x^2 + x^4 + 1/2*x^6", &["x"]));
        assert_eq!(t.observable.grade(0), poly("1 + 3*x^2", &["x"]));
    }

    #[test]
    fn transform_by_identity_and_rotation() {
        let i = Integrand::new(poly("x^2 + x*y^3", &["x", "y"]), poly("x + 1", &["x", "y"])).unwrap();
        let id = FormalDiffeo::identity(2);
        assert_eq!(transform_integrand(&i, &id, None).unwrap(), i);
        // rotation by the Pythagorean angle (3/5, 4/5) has unit Jacobian
        let rot = FormalDiffeo::new(vec![poly("3/5*x - 4/5*y", &["x", "y"]), poly("4/5*x + 3/5*y", &["x", "y"])]).unwrap();
        let t = transform_integrand(&i, &rot, None).unwrap();
        assert_eq!(t.observable.grade(0), poly("3/5*x - 4/5*y + 1", &["x", "y"]));
    }

    #[test]
    fn inverse_jet_inverts_to_order() {
        let phi = FormalDiffeo::new(vec![poly("2*x + x^2 - y^3", &["x", "y"]), poly("y - x*y", &["x", "y"])]).unwrap();
        let inv = phi.inverse_jet(5).unwrap();
        for (i, comp) in phi.components().iter().enumerate() {
            let back = comp.substitute_truncated(inv.components(), 5).unwrap();
            assert_eq!(back, Polynomial::variable(2, i).unwrap(), "component {i}");
        }
    }

    #[test]
    fn total_derivative_examples() {
        let i = Integrand::new(poly("1/2*x^2", &["x"]), Polynomial::one(1)).unwrap();
        let t = total_derivative(&i, 0).unwrap();
        assert_eq!(t.observable.grade(-2), poly("-x", &["x"]));
        assert!(t.observable.grade(0).is_zero());
        let i = Integrand::new(poly("1/2*x^2", &["x"]), poly("x", &["x"])).unwrap();
        let t = total_derivative(&i, 0).unwrap();
        assert_eq!(t.observable.grade(0), Polynomial::one(1));
        assert_eq!(t.observable.grade(-2), poly("-x^2", &["x"]));
        let w = wick_expand(&t, &[q(0, 1)], 3).unwrap();
        assert_eq!(w.kmin, -1);
        assert!(w.coeffs.iter().all(|c| c.is_zero()));
    }

    #[test]
    fn schwinger_dyson_examples() {
        let i = Integrand::new(poly("1/2*x^2 + x^4", &["x"]), poly("x^2", &["x"])).unwrap();
        assert!(check_schwinger_dyson(&i, 0, &[q(0, 1)], 3).unwrap());
        let i = Integrand::new(poly("1/2*x^2", &["x"]), Polynomial::one(1)).unwrap();
        assert!(check_schwinger_dyson(&i, 0, &[q(0, 1)], 3).unwrap());
    }

    #[test]
    fn divergence_examples() {
        assert_eq!(divergence(&[poly("x", &["x", "y"]), poly("y", &["x", "y"])]).unwrap(), Polynomial::constant(2, q(2, 1)));
        assert_eq!(divergence(&[poly("x^3", &["x"])]).unwrap(), poly("3*x^2", &["x"]));
        assert!(divergence(&[poly("-y", &["x", "y"]), poly("x", &["x", "y"])]).unwrap().is_zero());
    }

    #[test]
    fn auxiliary_field_examples() {
        let t = Matrix::identity(1);
        for c in [q(1, 1), q(-1, 1)] {
            let (so, fo) = eliminate_auxiliary(&t, &[poly("x^2", &["x"])], &c, 3).unwrap();
            assert_eq!(so.coeffs, fo.coeffs);
            assert_eq!(so.dims(), 1);
            assert_eq!(fo.dims(), 2);
        }
        let (so, fo) = eliminate_auxiliary(&t, &[Polynomial::zero(1)], &q(1, 1), 3).unwrap();
        assert_eq!(so.coeffs, vec![q(1, 1), q(0, 1), q(0, 1), q(0, 1)]);
        assert_eq!(fo.coeffs, so.coeffs);
        let e = eliminate_auxiliary(&t, &[poly("x + x^2", &["x"])], &q(1, 1), 3).unwrap_err();
        assert_eq!(e, Error::VHasLowDegree { component: 0 });
        let e = eliminate_auxiliary(&Matrix::zeros(1, 1), &[poly("x^2", &["x"])], &q(1, 1), 3).unwrap_err();
        assert_eq!(e, Error::SingularMatrix);
    }

    #[test]
    fn newton_examples() {
        let f = |src: &str| poly(src, &["x"]).to_float();
        let x = find_critical_point(&f("(x - 2)^2/2"), &[0.0], NEWTON_TOL, 100).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
        let x = find_critical_point(&f("x^2/2 + x^4"), &[0.1], NEWTON_TOL, 100).unwrap();
        assert!(x[0].abs() < 1e-14);
        assert!(matches!(find_critical_point(&f("x^3"), &[1.0], NEWTON_TOL, 100), Err(Error::DegenerateCritical { .. })));
        assert!(matches!(find_critical_point(&f("x^3"), &[1.0], NEWTON_TOL, 3), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn json_round_trip() {
        let w = series("1/2*x^2 + x^4", "1", 2);
        let j = w.to_json();
        assert_eq!(j.coeffs, vec!["1", "-3", "105/2"]);
        let text = serde_json::to_string(&j).unwrap();
        assert!(text.contains("\"S0\":\"0\"") && text.contains("\"detA\":\"1\""));
        let back: WickSeriesJson = serde_json::from_str(&text).unwrap();
        assert_eq!(WickSeries::<Exact>::from_json(&back).unwrap(), w);
    }
}
