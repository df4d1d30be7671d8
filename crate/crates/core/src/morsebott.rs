//! Wick expansion about a compact one-dimensional critical manifold `Z`.
//!
//! A fibration is described by charts `x(θ, t) = γ(θ) + Σ v_α(θ) t^α` where `θ`
//! parameterizes `Z` and `t` are fiber coordinates. At each quadrature node the
//! integrand is pulled back to the fiber, multiplied by `det[∂_θ x | ∂_t x]`,
//! Wick expanded in `t`, and the resulting coefficients are integrated over `θ`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{wick_expand, Integrand, Prefactor, WickSeries};
use crate::formal::{Float, HbarGradedSeries, Polynomial, Scalar};
use crate::linalg::poly_determinant;
use crate::quadrature::{gauss_legendre, trapezoid_periodic, Rule};

pub const DEFAULT_NODES: usize = 64;
/// Tolerance for `|grad S|` on `Z` and for the spread of `S` along `Z`.
pub const ON_Z_TOL: f64 = 1e-8;

/// The embedding of one fiber and its `θ`-derivative, as polynomials in the
/// fiber coordinates.
#[derive(Clone, Debug)]
pub struct FiberChart {
    pub x: Vec<Polynomial<Float>>,
    pub dx_dtheta: Vec<Polynomial<Float>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Base {
    Circle { start: f64, period: f64 },
    Interval { a: f64, b: f64 },
}

type ChartFn = dyn Fn(f64) -> FiberChart + Send + Sync;

#[derive(Clone)]
pub struct Fibration {
    dim: usize,
    base: Base,
    chart: Arc<ChartFn>,
}

impl std::fmt::Debug for Fibration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fibration").field("dim", &self.dim).field("base", &self.base).finish()
    }
}

fn constant(dim: usize, v: f64) -> Polynomial<Float> {
    Polynomial::constant(dim, Complex64::new(v, 0.0))
}

fn fiber_var(dim: usize, i: usize) -> Polynomial<Float> {
    Polynomial::variable(dim, i).expect("fiber index in range")
}

impl Fibration {
    /// General fibration from a chart function.
    pub fn from_fn(dim: usize, base: Base, chart: impl Fn(f64) -> FiberChart + Send + Sync + 'static) -> Self {
        Self { dim, base, chart: Arc::new(chart) }
    }

    /// Radial fibers over the circle of the given radius in the plane:
    /// `x = (r + t)(cos θ, sin θ)`.
    pub fn circle_radial(radius: f64) -> Self {
        Self::from_fn(2, Base::Circle { start: 0.0, period: 2.0 * PI }, move |th| {
            let (s, c) = th.sin_cos();
            let t = fiber_var(1, 0);
            let r = &constant(1, radius) + &t;
            FiberChart {
                x: vec![r.scale(&Complex64::new(c, 0.0)), r.scale(&Complex64::new(s, 0.0))],
                dx_dtheta: vec![r.scale(&Complex64::new(-s, 0.0)), r.scale(&Complex64::new(c, 0.0))],
            }
        })
    }

    /// Fibers parallel to the last coordinate axes over the line
    /// `x_base = θ`, other coordinates zero.
    pub fn coordinate_line(dim: usize, base_index: usize, base: Base) -> Self {
        Self::from_fn(dim, base, move |th| {
            let m = dim - 1;
            let mut x = Vec::with_capacity(dim);
            let mut dx = Vec::with_capacity(dim);
            let mut k = 0;
            for i in 0..dim {
                if i == base_index {
                    x.push(constant(m, th));
                    dx.push(constant(m, 1.0));
                } else {
                    x.push(fiber_var(m, k));
                    dx.push(Polynomial::zero(m));
                    k += 1;
                }
            }
            FiberChart { x, dx_dtheta: dx }
        })
    }

    /// Adds `s · t_0` to the last coordinate of every fiber.
    pub fn sheared(&self, s: f64) -> Self {
        let inner = self.chart.clone();
        let dim = self.dim;
        Self::from_fn(dim, self.base, move |th| {
            let mut ch = inner(th);
            let m = ch.x[0].dim();
            ch.x[dim - 1] += &fiber_var(m, 0).scale(&Complex64::new(s, 0.0));
            ch
        })
    }

    /// Adds `kappa · t_0²` to the first coordinate of every fiber.
    pub fn bent(&self, kappa: f64) -> Self {
        let inner = self.chart.clone();
        Self::from_fn(self.dim, self.base, move |th| {
            let mut ch = inner(th);
            let m = ch.x[0].dim();
            let t = fiber_var(m, 0);
            ch.x[0] += &(&t * &t).scale(&Complex64::new(kappa, 0.0));
            ch
        })
    }

    /// Composes every fiber with the polynomial map `phi`.
    pub fn precomposed(&self, phi: Vec<Polynomial<Float>>) -> Result<Self> {
        if phi.len() != self.dim || phi.iter().any(|p| p.dim() != self.dim) {
            return Err(Error::DimensionMismatch { expected: self.dim, found: phi.len() });
        }
        let jac: Vec<Vec<Polynomial<Float>>> = phi.iter().map(|p| p.gradient()).collect();
        let inner = self.chart.clone();
        Ok(Self::from_fn(self.dim, self.base, move |th| {
            let ch = inner(th);
            let x: Vec<_> = phi.iter().map(|p| p.substitute(&ch.x).expect("dims checked")).collect();
            let dx = jac
                .iter()
                .map(|row| {
                    let mut acc = Polynomial::zero(ch.x[0].dim());
                    for (dphi, v) in row.iter().zip(&ch.dx_dtheta) {
                        acc += &(&dphi.substitute(&ch.x).expect("dims checked") * v);
                    }
                    acc
                })
                .collect();
            FiberChart { x, dx_dtheta: dx }
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fiber_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn chart(&self, theta: f64) -> FiberChart {
        (self.chart)(theta)
    }

    /// Quadrature nodes and weights over the base.
    pub fn nodes(&self, n: usize) -> (Vec<f64>, Vec<f64>, Rule) {
        match self.base {
            Base::Circle { start, period } => {
                let (x, w) = trapezoid_periodic(n, start, period);
                (x, w, Rule::Trapezoid)
            }
            Base::Interval { a, b } => {
                let (x, w) = gauss_legendre(n, a, b);
                (x, w, Rule::GaussLegendre)
            }
        }
    }
}

/// Integrated base coefficients: `(2πħ)^(m/2) det_ref^(-1/2) e^(-C/ħ) Σ b_k ħ^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MorseBottSeries {
    pub series: WickSeries<Float>,
    pub nodes: usize,
    pub rule: Rule,
    /// Largest deviation of `S` along `Z` from its value at the first node.
    pub action_spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseBottSeriesJson {
    #[serde(flatten)]
    pub series: crate::expansion::WickSeriesJson,
    pub nodes: usize,
    pub rule: Rule,
}

impl MorseBottSeries {
    pub fn value_on_z(&self) -> Complex64 {
        self.series.prefactor.s0
    }

    pub fn to_json(&self) -> MorseBottSeriesJson {
        MorseBottSeriesJson { series: self.series.to_json(), nodes: self.nodes, rule: self.rule }
    }
}

fn check_on_z(s: &Polynomial<Float>, point: &[f64], theta: f64) -> Result<()> {
    let residual = s.gradient().iter().map(|g| g.eval_real(point).norm_sqr()).sum::<f64>().sqrt();
    if residual > ON_Z_TOL * (1.0 + s.coefficient_scale()) {
        return Err(Error::NotOnZ { residual });
    }
    let _ = theta;
    Ok(())
}

/// Wick expansion in the fiber over `Z(theta)`, base frozen.
pub fn fiber_wick_expand<C: Scalar>(
    integrand: &Integrand<C>,
    fib: &Fibration,
    theta: f64,
    order: i32,
) -> Result<WickSeries<Float>> {
    let d = integrand.dim();
    if fib.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: fib.dim() });
    }
    let fl = integrand.to_float();
    let ch = fib.chart(theta);
    let m = fib.fiber_dim();
    let origin = vec![0.0; m];
    let point: Vec<f64> = ch.x.iter().map(|p| p.eval_real(&origin).re).collect();
    check_on_z(&fl.action, &point, theta)?;

    let cap = (2 * order.max(0) + 2) as u32;
    let action = fl.action.substitute_truncated(&ch.x, cap)?;
    let mut columns: Vec<Vec<Polynomial<Float>>> = vec![ch.dx_dtheta.clone()];
    for k in 0..m {
        columns.push(ch.x.iter().map(|p| p.partial_derivative(k)).collect::<Result<_>>()?);
    }
    let rows: Vec<Vec<Polynomial<Float>>> = (0..d).map(|i| columns.iter().map(|c| c[i].clone()).collect()).collect();
    let mut density = poly_determinant(&rows, Some(cap))?;
    if density.constant_term().re < 0.0 {
        density = -density;
    }
    let mut observable = HbarGradedSeries::zero(m, fl.observable.order());
    for (g, p) in fl.observable.grades() {
        let q = p.substitute_truncated(&ch.x, cap)?.mul_truncated(&density, Some(cap));
        observable.add_at(g, &q);
    }
    let fiber = Integrand { action, observable, prefactor: fl.prefactor.clone() };
    let zero = vec![Complex64::new(0.0, 0.0); m];
    wick_expand(&fiber, &zero, order).map_err(|e| match e {
        Error::SingularHessian | Error::SingularMatrix => Error::DegenerateFiberHessian { theta },
        other => other,
    })
}

/// Samples the fiber expansion at `nodes` base points and integrates each
/// coefficient over `Z`, after normalizing all nodes to the fiber determinant
/// of the first node.
pub fn wick_expand_morsebott<C: Scalar>(
    integrand: &Integrand<C>,
    fib: &Fibration,
    order: i32,
    nodes: usize,
) -> Result<MorseBottSeries> {
    if nodes == 0 {
        return Err(Error::InvalidArgument("at least one quadrature node is required".into()));
    }
    let (thetas, weights, rule) = fib.nodes(nodes);
    let per_node: Vec<WickSeries<Float>> =
        thetas.par_iter().map(|&th| fiber_wick_expand(integrand, fib, th, order)).collect::<Result<_>>()?;
    let reference = &per_node[0];
    let c0 = reference.prefactor.s0;
    let spread = per_node.iter().map(|w| (w.prefactor.s0 - c0).norm()).fold(0.0, f64::max);
    if spread > ON_Z_TOL * (1.0 + c0.norm()) {
        return Err(Error::NonConstantActionOnZ { spread });
    }
    let kmin = per_node.iter().map(|w| w.kmin).min().expect("nonempty");
    let top = per_node.iter().map(|w| w.order).min().expect("nonempty");
    let det_ref = reference.prefactor.det;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); (top - kmin + 1).max(0) as usize];
    for (w, node) in weights.iter().zip(&per_node) {
        let norm = (det_ref / node.prefactor.det).sqrt() * *w;
        for (k, slot) in (kmin..=top).zip(coeffs.iter_mut()) {
            *slot += node.coeff(k) * norm;
        }
    }
    let prefactor = Prefactor { dims: reference.prefactor.dims, det: det_ref, s0: c0 };
    Ok(MorseBottSeries {
        series: WickSeries { prefactor, kmin, order: top, coeffs },
        nodes,
        rule,
        action_spread: spread,
    })
}

/// Whether two fibrations of the same `Z` give the same integrated series.
pub fn check_fibration_independence<C: Scalar>(
    integrand: &Integrand<C>,
    a: &Fibration,
    b: &Fibration,
    order: i32,
    nodes: usize,
    tol: f64,
) -> Result<bool> {
    let sa = wick_expand_morsebott(integrand, a, order, nodes)?;
    let sb = wick_expand_morsebott(integrand, b, order, nodes)?;
    Ok(sa.series.normalized_eq(&sb.series, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::{parse_expression, Exact};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn hat(f: &str) -> Integrand<Exact> {
        let n = names(&["x", "y"]);
        Integrand::new(parse_expression("1/4*(x^2 + y^2 - 1)^2", &n).unwrap(), parse_expression(f, &n).unwrap()).unwrap()
    }

    fn close(a: Complex64, b: f64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn mexican_hat_fiber_data() {
        let w = fiber_wick_expand(&hat("1"), &Fibration::circle_radial(1.0), 0.0, 0).unwrap();
        assert!(close(w.prefactor.det, 2.0, 1e-12));
        assert!(close(w.prefactor.s0, 0.0, 1e-12));
        assert!(close(w.coeffs[0], 1.0, 1e-12));
    }

    #[test]
    fn mexican_hat_leading_terms() {
        let fib = Fibration::circle_radial(1.0);
        let s = wick_expand_morsebott(&hat("1"), &fib, 1, 64).unwrap();
        assert!(close(s.series.coeffs[0], 2.0 * PI, 1e-10));
        assert!(close(s.series.prefactor.det, 2.0, 1e-12));
        let s = wick_expand_morsebott(&hat("x^2"), &fib, 0, 64).unwrap();
        assert!(close(s.series.coeffs[0], PI, 1e-10));
        assert_eq!(s.rule, Rule::Trapezoid);
    }

    #[test]
    fn gaussian_fiber_is_trivial() {
        let n = names(&["x", "y"]);
        let i = Integrand::new(parse_expression("1/2*y^2", &n).unwrap(), Polynomial::one(2)).unwrap();
        let fib = Fibration::coordinate_line(2, 0, Base::Interval { a: -1.0, b: 2.0 });
        let w = fiber_wick_expand(&i, &fib, 0.7, 3).unwrap();
        assert!(close(w.coeffs[0], 1.0, 1e-14));
        assert!(w.coeffs[1..].iter().all(|c| c.norm() < 1e-14));
        let s = wick_expand_morsebott(&i, &fib, 2, 16).unwrap();
        assert!(close(s.series.coeffs[0], 3.0, 1e-12));
        assert!(s.series.coeffs[1..].iter().all(|c| c.norm() < 1e-13));
        assert_eq!(s.rule, Rule::GaussLegendre);
    }

    #[test]
    fn cubic_fiber_vertex_scales_with_base_squared() {
        // S = y²/2 + a y³: c_1 = 15/2 a² from the squared cubic vertex
        let n = names(&["x", "y"]);
        let i = Integrand::new(parse_expression("1/2*y^2 + x*y^3", &n).unwrap(), Polynomial::one(2)).unwrap();
        let fib = Fibration::coordinate_line(2, 0, Base::Interval { a: -1.0, b: 1.0 });
        for a in [0.5, -1.5, 2.0] {
            let w = fiber_wick_expand(&i, &fib, a, 1).unwrap();
            assert!(close(w.coeffs[1], 7.5 * a * a, 1e-12), "a = {a}");
        }
    }

    #[test]
    fn off_manifold_and_nonconstant_errors() {
        let fib = Fibration::circle_radial(1.5);
        assert!(matches!(fiber_wick_expand(&hat("1"), &fib, 0.0, 1), Err(Error::NotOnZ { .. })));
        let n = names(&["x", "y"]);
        // critical along the x-axis but S varies there
        let i = Integrand::new(parse_expression("1/2*y^2*(1 + x^2)", &n).unwrap(), Polynomial::one(2)).unwrap();
        let fib = Fibration::coordinate_line(2, 0, Base::Interval { a: -1.0, b: 1.0 });
        assert!(wick_expand_morsebott(&i, &fib, 1, 8).is_ok());
        let i = Integrand::new(parse_expression("x + 1/2*y^2", &n).unwrap(), Polynomial::one(2)).unwrap();
        assert!(matches!(wick_expand_morsebott(&i, &fib, 1, 8), Err(Error::NotOnZ { .. })));
    }

    #[test]
    fn fibrations_agree() {
        let radial = Fibration::circle_radial(1.0);
        let i = hat("1 + x^2*y");
        assert!(check_fibration_independence(&i, &radial, &radial, 2, 64, 0.0).unwrap());
        assert!(check_fibration_independence(&i, &radial, &radial.sheared(0.3), 2, 64, 1e-9).unwrap());
        assert!(check_fibration_independence(&i, &radial, &radial.bent(0.4), 2, 64, 1e-9).unwrap());
    }

    #[test]
    fn node_doubling_is_converged() {
        let fib = Fibration::circle_radial(1.0).sheared(0.2);
        let i = hat("x^2 + y");
        let a = wick_expand_morsebott(&i, &fib, 2, 32).unwrap();
        let b = wick_expand_morsebott(&i, &fib, 2, 64).unwrap();
        for (x, y) in a.series.coeffs.iter().zip(&b.series.coeffs) {
            assert!((x - y).norm() <= 1e-10, "{x} vs {y}");
        }
    }
}
