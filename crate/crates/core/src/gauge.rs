//! Faddeev-Popov gauge fixing for linear (and affine) group actions: slices,
//! FP determinants, slice and weighted gauge-fixed Wick expansions, and
//! numerical volume and degree checks.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::{wick_expand, Integrand, WickSeries};
use crate::formal::{HbarGradedSeries, Polynomial, Scalar};
use crate::linalg::{poly_determinant, Matrix};
use crate::oracle::{integrate_function, integrate_numeric_about, CompiledPoly, Domain};

/// Relative tolerance of the float-mode invariance check.
const INVARIANCE_TOL: f64 = 1e-10;

/// One Lie algebra generator, acting by the vector field `x ↦ X x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator<C> {
    pub matrix: Matrix<C>,
    pub shift: Vec<C>,
}

impl<C: Scalar> Generator<C> {
    pub fn linear(matrix: Matrix<C>) -> Self {
        let d = matrix.rows();
        Self { matrix, shift: vec![C::zero(); d] }
    }

    pub fn translation(v: Vec<C>) -> Self {
        let d = v.len();
        Self { matrix: Matrix::zeros(d, d), shift: v }
    }

    fn is_linear(&self) -> bool {
        self.shift.iter().all(|c| c.is_zero())
    }
}

/// Volume-preserving action of a `g`-dimensional group on `ℝ^d`, given by
/// generators declared orthonormal.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupAction<C> {
    dim: usize,
    generators: Vec<Generator<C>>,
}

impl<C: Scalar> GroupAction<C> {
    pub fn new(dim: usize, generators: Vec<Generator<C>>) -> Result<Self> {
        for (a, g) in generators.iter().enumerate() {
            if g.matrix.rows() != dim || g.matrix.cols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: g.matrix.rows() });
            }
            if g.shift.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: g.shift.len() });
            }
            let trace = (0..dim).fold(C::zero(), |acc, i| acc + &g.matrix[(i, i)]);
            if !trace.negligible(g.matrix.max_norm()) {
                return Err(Error::InvalidArgument(format!("generator {a} is not traceless")));
            }
        }
        Ok(Self { dim, generators })
    }

    /// Rotations of `ℝ²`.
    pub fn so2() -> Self {
        Self::rotation(2, 0, 1).expect("valid plane")
    }

    /// Rotations in the `(i, j)` coordinate plane of `ℝ^dim`.
    pub fn rotation(dim: usize, i: usize, j: usize) -> Result<Self> {
        if i >= dim || j >= dim || i == j {
            return Err(Error::InvalidArgument(format!("bad rotation plane ({i}, {j}) in dimension {dim}")));
        }
        let mut m = Matrix::zeros(dim, dim);
        m[(i, j)] = -C::one();
        m[(j, i)] = C::one();
        Self::new(dim, vec![Generator::linear(m)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Generator<C>] {
        &self.generators
    }

    /// `vector_fields()[a][i]` is the `i`-th component of `X_a x + b_a`.
    pub fn vector_fields(&self) -> Vec<Vec<Polynomial<C>>> {
        self.generators
            .iter()
            .map(|g| {
                (0..self.dim)
                    .map(|i| {
                        let mut p = Polynomial::constant(self.dim, g.shift[i].clone());
                        for j in 0..self.dim {
                            let c = &g.matrix[(i, j)];
                            if !c.is_zero() {
                                p += &Polynomial::variable(self.dim, j).expect("in range").scale(c);
                            }
                        }
                        p
                    })
                    .collect()
            })
            .collect()
    }

    /// Whether `ι_x` is injective.
    pub fn is_free_at(&self, x: &[C]) -> Result<bool> {
        Ok(orbit_map(self, x)?.rank() == self.group_dim())
    }

    /// `∇p · (X_a x + b_a)`.
    pub fn lie_derivative(&self, a: usize, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        let fields = self.vector_fields();
        let field = fields.get(a).ok_or(Error::IndexOutOfRange { index: a, dim: self.group_dim() })?;
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: p.dim() });
        }
        let mut out = Polynomial::zero(self.dim);
        for (i, v) in field.iter().enumerate() {
            out += &(&p.partial_derivative(i)? * v);
        }
        Ok(out)
    }

    /// Exact mode: the Lie derivatives vanish identically. Float mode: they
    /// vanish to `1e-10` relative to `p`.
    pub fn check_invariant(&self, p: &Polynomial<C>, what: &str) -> Result<()> {
        let scale = p.coefficient_scale()
            * self.generators.iter().map(|g| g.matrix.max_norm().max(g.shift.iter().map(|c| c.to_c64().norm()).fold(0.0, f64::max))).fold(1.0, f64::max)
            * (p.degree().unwrap_or(0) as f64 + 1.0);
        for a in 0..self.group_dim() {
            let l = self.lie_derivative(a, p)?;
            let bad = match C::BACKEND {
                crate::formal::Backend::Exact => !l.is_zero(),
                crate::formal::Backend::Float => l.coefficient_scale() > INVARIANCE_TOL * scale,
            };
            if bad {
                return Err(Error::NotInvariant(format!("{what} under generator {a}")));
            }
        }
        Ok(())
    }

    /// `Vol(G) = (2π)^g` for commuting rotation generators (`X³ = -X`), the
    /// only compact actions handled.
    pub fn volume(&self) -> Option<f64> {
        let mats: Vec<DMatrix<f64>> = self.generators.iter().map(|g| g.matrix.to_real_dmatrix()).collect();
        for (a, g) in self.generators.iter().enumerate() {
            let x = &mats[a];
            if !g.is_linear() || x.norm() == 0.0 || (x * x * x + x).norm() > 1e-12 * x.norm() {
                return None;
            }
            for y in &mats[..a] {
                if (x * y - y * x).norm() > 1e-12 {
                    return None;
                }
            }
        }
        Some((2.0 * PI).powi(self.group_dim() as i32))
    }
}

/// The `d × g` matrix whose column `a` is `X_a x + b_a`.
pub fn orbit_map<C: Scalar>(action: &GroupAction<C>, x: &[C]) -> Result<Matrix<C>> {
    if x.len() != action.dim {
        return Err(Error::DimensionMismatch { expected: action.dim, found: x.len() });
    }
    let mut m = Matrix::zeros(action.dim, action.group_dim());
    for (a, g) in action.generators.iter().enumerate() {
        let col = g.matrix.mul_vec(x)?;
        for i in 0..action.dim {
            m[(i, a)] = col[i].clone() + &g.shift[i];
        }
    }
    Ok(m)
}

/// A gauge slice: an affine subspace or a level set `F = q0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Slice<C> {
    Affine { base: Vec<C>, directions: Vec<Vec<C>> },
    LevelSet { f: Vec<Polynomial<C>>, q0: Vec<C> },
}

impl<C: Scalar> Slice<C> {
    pub fn dim(&self) -> usize {
        match self {
            Slice::Affine { base, .. } => base.len(),
            Slice::LevelSet { f, .. } => f.first().map_or(0, |p| p.dim()),
        }
    }

    /// Codimension of the slice.
    pub fn codim(&self) -> usize {
        match self {
            Slice::Affine { base, directions } => base.len() - directions.len(),
            Slice::LevelSet { f, .. } => f.len(),
        }
    }

    /// Distance-like residual of `x` from the slice.
    pub fn residual(&self, x: &[C]) -> Result<f64> {
        match self {
            Slice::Affine { base, directions } => {
                let diff: Vec<f64> = x.iter().zip(base).map(|(a, b)| (a.clone() - b).to_c64().re).collect();
                let t = DMatrix::from_fn(base.len(), directions.len(), |i, j| directions[j][i].to_c64().re);
                let v = nalgebra::DVector::from_vec(diff);
                if directions.is_empty() {
                    return Ok(v.norm());
                }
                let coef = t.clone().svd(true, true).solve(&v, 1e-14).map_err(|e| Error::QuadratureFailure(e.to_string()))?;
                Ok((t * coef - v).norm())
            }
            Slice::LevelSet { f, q0 } => {
                let mut r = 0.0f64;
                for (p, q) in f.iter().zip(q0) {
                    r = r.max((p.evaluate(x)? - q).to_c64().norm());
                }
                Ok(r)
            }
        }
    }

    fn contains_exact(&self, x: &[C]) -> Result<bool> {
        match self {
            Slice::Affine { base, directions } => {
                let diff: Vec<C> = x.iter().zip(base).map(|(a, b)| a.clone() - b).collect();
                let span = Matrix::from_fn(base.len(), directions.len(), |i, j| directions[j][i].clone());
                let with = Matrix::from_fn(base.len(), directions.len() + 1, |i, j| {
                    if j < directions.len() {
                        directions[j][i].clone()
                    } else {
                        diff[i].clone()
                    }
                });
                Ok(span.rank() == with.rank())
            }
            Slice::LevelSet { f, q0 } => {
                for (p, q) in f.iter().zip(q0) {
                    if !(p.evaluate(x)? - q).is_zero() {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    fn check_contains(&self, x: &[C]) -> Result<()> {
        let ok = match C::BACKEND {
            crate::formal::Backend::Exact => self.contains_exact(x)?,
            crate::formal::Backend::Float => self.residual(x)? <= 1e-9 * (1.0 + x.iter().map(|c| c.to_c64().norm()).fold(0.0, f64::max)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::NotOnSlice { residual: self.residual(x)? })
        }
    }

    /// A polynomial parametrization `w ↦ x(w)` of the slice near `z` with
    /// `x(0) = z`, in `d - codim` variables, exact to degree `degree`.
    pub fn parametrize(&self, z: &[C], degree: u32) -> Result<Vec<Polynomial<C>>> {
        let d = self.dim();
        if z.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: z.len() });
        }
        self.check_contains(z)?;
        match self {
            Slice::Affine { directions, .. } => {
                let span = Matrix::from_fn(d, directions.len(), |i, j| directions[j][i].clone());
                if span.rank() != directions.len() {
                    return Err(Error::InvalidArgument("slice directions are linearly dependent".into()));
                }
                Ok(affine_images(z, directions, &[], &[]))
            }
            Slice::LevelSet { f, q0 } => level_set_jet(f, q0, z, degree),
        }
    }

    /// Tangent directions at `x` (float).
    fn tangent_basis(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = x.len();
        match self {
            Slice::Affine { directions, .. } => Ok(DMatrix::from_fn(d, directions.len(), |i, j| directions[j][i].to_c64().re)),
            Slice::LevelSet { f, .. } => {
                let jac = DMatrix::from_fn(f.len(), d, |a, i| f[a].partial_derivative(i).map(|p| p.eval_real(x).re).unwrap_or(0.0));
                let svd = jac.svd(false, true);
                let vt = svd.v_t.ok_or_else(|| Error::QuadratureFailure("SVD failed".into()))?;
                let rank = svd.singular_values.iter().filter(|s| **s > 1e-12 * svd.singular_values.max()).count();
                if rank < f.len() {
                    return Err(Error::NonTransverse);
                }
                // rows of v_t beyond the rank span the kernel; pad when the
                // reduced SVD is short
                let full = if vt.nrows() < d { complete_basis(&vt, d) } else { vt };
                Ok(full.rows(rank, d - rank).transpose())
            }
        }
    }
}

fn complete_basis(vt: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let mut rows: Vec<nalgebra::DVector<f64>> = vt.row_iter().map(|r| r.transpose()).collect();
    for e in 0..d {
        if rows.len() == d {
            break;
        }
        let mut v = nalgebra::DVector::from_fn(d, |i, _| if i == e { 1.0 } else { 0.0 });
        for r in &rows {
            let c = r.dot(&v);
            v -= r * c;
        }
        if v.norm() > 1e-8 {
            rows.push(v.normalize());
        }
    }
    DMatrix::from_fn(d, d, |i, j| rows[i][j])
}

/// `x(w) = z + Σ_j w_j t_j + Σ_a s_a n_a` as polynomials in `w`.
fn affine_images<C: Scalar>(z: &[C], tangents: &[Vec<C>], normals: &[Vec<C>], s: &[Polynomial<C>]) -> Vec<Polynomial<C>> {
    let k = tangents.len();
    (0..z.len())
        .map(|i| {
            let mut p = Polynomial::constant(k, z[i].clone());
            for (j, t) in tangents.iter().enumerate() {
                if !t[i].is_zero() {
                    p += &Polynomial::variable(k, j).expect("in range").scale(&t[i]);
                }
            }
            for (a, n) in normals.iter().enumerate() {
                if !n[i].is_zero() {
                    p += &s[a].scale(&n[i]);
                }
            }
            p
        })
        .collect()
}

/// Implicit-function jet of `F = q0` at `z`: `x(w) = z + T w + N s(w)` with
/// `T` spanning `ker dF(z)` and `N = dF(z)^T`.
fn level_set_jet<C: Scalar>(f: &[Polynomial<C>], q0: &[C], z: &[C], degree: u32) -> Result<Vec<Polynomial<C>>> {
    let d = z.len();
    let g = f.len();
    if q0.len() != g {
        return Err(Error::DimensionMismatch { expected: g, found: q0.len() });
    }
    let mut jac = Matrix::zeros(g, d);
    for a in 0..g {
        for i in 0..d {
            jac[(a, i)] = f[a].partial_derivative(i)?.evaluate(z)?;
        }
    }
    if jac.rank() < g {
        return Err(Error::NonTransverse);
    }
    let tangents = jac.nullspace();
    let normals: Vec<Vec<C>> = (0..g).map(|a| jac.row(a).to_vec()).collect();
    let k = tangents.len();
    let m_inv = jac.mul(&jac.transpose())?.inverse()?;
    let mut s = vec![Polynomial::zero(k); g];
    for _ in 0..=degree {
        let images = affine_images(z, &tangents, &normals, &s);
        let resid: Vec<Polynomial<C>> = f
            .iter()
            .zip(q0)
            .map(|(p, q)| Ok(&p.substitute_truncated(&images, degree)? - &Polynomial::constant(k, q.clone())))
            .collect::<Result<_>>()?;
        if resid.iter().all(|r| r.chop(1e-15).is_zero()) {
            break;
        }
        for a in 0..g {
            for (b, r) in resid.iter().enumerate() {
                if !m_inv[(a, b)].is_zero() {
                    s[a] = &s[a] - &r.scale(&m_inv[(a, b)]);
                }
            }
        }
    }
    Ok(affine_images(z, &tangents, &normals, &s))
}

/// `J = det^{1/2}(ι⊥^T ι⊥)` at a point `w` of the slice, where `ι⊥` is the
/// orbit map projected onto the Euclidean normal space of the slice.
pub fn fp_determinant_slice<C: Scalar>(action: &GroupAction<C>, slice: &Slice<C>, w: &[C]) -> Result<f64> {
    let d = action.dim();
    if slice.dim() != d || w.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: w.len() });
    }
    if slice.codim() != action.group_dim() {
        return Err(Error::InvalidArgument(format!(
            "slice codimension {} differs from group dimension {}",
            slice.codim(),
            action.group_dim()
        )));
    }
    slice.check_contains(w)?;
    let wf: Vec<f64> = w.iter().map(|c| c.to_c64().re).collect();
    let t = slice.tangent_basis(&wf)?;
    let iota = orbit_map(action, w)?.to_real_dmatrix();
    let proj = if t.ncols() == 0 {
        DMatrix::identity(d, d)
    } else {
        let gram_t = t.transpose() * &t;
        let inv = gram_t.try_inverse().ok_or_else(|| Error::InvalidArgument("degenerate slice directions".into()))?;
        DMatrix::identity(d, d) - &t * inv * t.transpose()
    };
    let perp = proj * iota;
    let gram = perp.transpose() * &perp;
    let det = gram.determinant();
    let scale = (perp.norm() * perp.norm()).powi(action.group_dim() as i32).max(f64::MIN_POSITIVE);
    if det <= 1e-24 * scale || det <= 0.0 {
        return Err(Error::NonTransverse);
    }
    Ok(det.sqrt())
}

/// Slice coordinates, restricted action and `J`-weighted observable, all as
/// polynomials in `w` truncated at `degree` about `w = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceIntegrand<C> {
    pub images: Vec<Polynomial<C>>,
    /// `det[ι_{x(w)} | ∂x/∂w]`, positive at `w = 0`.
    pub density: Polynomial<C>,
    pub integrand: Integrand<C>,
}

/// Restricts `integrand` to the slice through `z`.
pub fn slice_integrand<C: Scalar>(
    integrand: &Integrand<C>,
    action: &GroupAction<C>,
    slice: &Slice<C>,
    z: &[C],
    degree: u32,
) -> Result<SliceIntegrand<C>> {
    let d = integrand.dim();
    if action.dim() != d || slice.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: action.dim() });
    }
    if slice.codim() != action.group_dim() {
        return Err(Error::InvalidArgument(format!(
            "slice codimension {} differs from group dimension {}",
            slice.codim(),
            action.group_dim()
        )));
    }
    action.check_invariant(&integrand.action, "action")?;
    for (g, p) in integrand.observable.grades() {
        action.check_invariant(p, &format!("observable grade {g}"))?;
    }
    let images = slice.parametrize(z, degree)?;
    let k = d - action.group_dim();
    let fields = action.vector_fields();
    let mut columns: Vec<Vec<Polynomial<C>>> = Vec::with_capacity(d);
    for field in &fields {
        columns.push(field.iter().map(|v| v.substitute_truncated(&images, degree)).collect::<Result<_>>()?);
    }
    for j in 0..k {
        columns.push(images.iter().map(|x| x.partial_derivative(j)).collect::<Result<_>>()?);
    }
    let rows: Vec<Vec<Polynomial<C>>> = (0..d).map(|i| columns.iter().map(|c| c[i].clone()).collect()).collect();
    let density = poly_determinant(&rows, Some(degree))?;
    let density = match density.constant_term().real_sign() {
        Some(Ordering::Less) => -density,
        Some(Ordering::Greater) => density,
        _ if density.constant_term().negligible(1.0) => return Err(Error::NonTransverse),
        _ => density,
    };
    let action_w = integrand.action.substitute_truncated(&images, degree)?;
    let mut observable = HbarGradedSeries::zero(k, integrand.observable.order());
    for (g, p) in integrand.observable.grades() {
        observable.add_at(g, &p.substitute_truncated(&images, degree)?.mul_truncated(&density, Some(degree)));
    }
    Ok(SliceIntegrand {
        images,
        density,
        integrand: Integrand { action: action_w, observable, prefactor: integrand.prefactor.clone() },
    })
}

/// Wick expansion within the slice about `z`, with the observable multiplied
/// by the quotient density. Jets are kept to degree `2N + 2`.
pub fn gauge_fixed_expand_slice<C: Scalar>(
    integrand: &Integrand<C>,
    action: &GroupAction<C>,
    slice: &Slice<C>,
    z: &[C],
    order: i32,
) -> Result<WickSeries<C>> {
    let degree = (2 * order.max(0) + 2) as u32;
    let restricted = slice_integrand(integrand, action, slice, z, degree)?;
    let k = restricted.integrand.dim();
    wick_expand(&restricted.integrand, &vec![C::zero(); k], order)
}

/// Gauge map `F: ℝ^d → ℝ^g`, weight exponent `h` on the target with a
/// nondegenerate critical point at `q0`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGauge<C> {
    pub f: Vec<Polynomial<C>>,
    pub h: Polynomial<C>,
    pub q0: Vec<C>,
}

impl<C: Scalar> WeightedGauge<C> {
    pub fn new(f: Vec<Polynomial<C>>, h: Polynomial<C>, q0: Vec<C>) -> Result<Self> {
        let g = f.len();
        if h.dim() != g {
            return Err(Error::DimensionMismatch { expected: g, found: h.dim() });
        }
        if q0.len() != g {
            return Err(Error::DimensionMismatch { expected: g, found: q0.len() });
        }
        if let Some(p) = f.iter().find(|p| p.dim() != f[0].dim()) {
            return Err(Error::DimensionMismatch { expected: f[0].dim(), found: p.dim() });
        }
        Ok(Self { f, h, q0 })
    }

    /// `c_ħ`, the Wick expansion of `∫ dq e^{-h/ħ}` about `q0`.
    pub fn normalizer(&self, order: i32) -> Result<WickSeries<C>> {
        let one = Polynomial::one(self.h.dim());
        wick_expand(&Integrand::new(self.h.clone(), one)?, &self.q0, order)
    }
}

/// The integrand on all of `ℝ^d` with action `S + h∘F` and observable
/// `f · det(dF∘ι_x) · c_ħ^{-1}`; the prefactor of `c_ħ` is divided out.
pub fn weighted_fp_integrand<C: Scalar>(
    integrand: &Integrand<C>,
    action: &GroupAction<C>,
    wg: &WeightedGauge<C>,
    order: i32,
) -> Result<Integrand<C>> {
    let d = integrand.dim();
    let g = action.group_dim();
    if wg.f.len() != g {
        return Err(Error::DimensionMismatch { expected: g, found: wg.f.len() });
    }
    if action.dim() != d || wg.f.iter().any(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: action.dim() });
    }
    let fields = action.vector_fields();
    let mut rows = vec![Vec::with_capacity(g); g];
    for (a, row) in rows.iter_mut().enumerate() {
        let grad = wg.f[a].gradient();
        for field in &fields {
            let mut entry = Polynomial::zero(d);
            for (gi, vi) in grad.iter().zip(field) {
                entry += &(gi * vi);
            }
            row.push(entry);
        }
    }
    let delta = poly_determinant(&rows, None)?;
    let gauge_term = wg.h.substitute(&wg.f)?;
    let normalizer = wg.normalizer(order)?;
    let mut c_series = HbarGradedSeries::zero(d, Some(2 * normalizer.order));
    for k in normalizer.kmin..=normalizer.order {
        c_series.add_at(2 * k, &Polynomial::constant(d, normalizer.coeff(k)));
    }
    let c_inv = c_series.inverse(2 * normalizer.order)?;
    let observable = integrand.observable.mul(&c_inv).mul_poly(&delta);
    Ok(Integrand {
        action: &integrand.action + &gauge_term,
        observable,
        prefactor: integrand.prefactor.combine(&normalizer.prefactor.inverse()),
    })
}

/// Whether the weighted expansion about `z` and the slice expansion describe
/// the same series through order `N`.
pub fn check_weighted_equals_slice<C: Scalar>(
    integrand: &Integrand<C>,
    action: &GroupAction<C>,
    slice: &Slice<C>,
    wg: &WeightedGauge<C>,
    z: &[C],
    order: i32,
) -> Result<bool> {
    let (sliced, weighted) = rayon::join(
        || gauge_fixed_expand_slice(integrand, action, slice, z, order),
        || weighted_fp_integrand(integrand, action, wg, order).and_then(|w| wick_expand(&w, z, order)),
    );
    Ok(weighted?.normalized_eq(&sliced?, 1e-9))
}

/// Jet of `atan(y/x)` about `(r, 0)` with `r > 0`, to total degree `degree`.
pub fn angle_jet<C: Scalar>(r: C, degree: u32) -> Result<Polynomial<C>> {
    if r.real_sign() != Some(Ordering::Greater) {
        return Err(Error::InvalidArgument("angle jets are taken about a point on the positive x-axis".into()));
    }
    let u = Polynomial::<C>::variable(2, 0)?;
    let y = Polynomial::<C>::variable(2, 1)?;
    let cap = Some(degree);
    // 1/x = (1/r) Σ (-u/r)^n with u = x - r
    let ratio = u.scale(&-r.recip());
    let mut inv_x = Polynomial::zero(2);
    let mut term = Polynomial::one(2);
    for _ in 0..=degree {
        inv_x += &term;
        term = term.mul_truncated(&ratio, cap);
    }
    let q = y.mul_truncated(&inv_x.scale(&r.recip()), cap);
    // atan q = Σ (-1)^n q^{2n+1} / (2n+1)
    let q2 = q.mul_truncated(&q, cap);
    let mut out = Polynomial::zero(2);
    let mut power = q.clone();
    let mut n = 0i64;
    while !power.is_zero() {
        let c = C::from_ratio(if n % 2 == 0 { 1 } else { -1 }, 2 * n + 1);
        out += &power.scale(&c);
        power = power.mul_truncated(&q2, cap);
        n += 1;
    }
    out.uncenter(&[r, C::zero()])
}

/// A map to the circle, `α = arg(F1 + i F2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleMap<C> {
    pub re: Polynomial<C>,
    pub im: Polynomial<C>,
}

impl<C: Scalar> CircleMap<C> {
    /// `(x, y)`, the angle map on `ℝ²`.
    pub fn angle() -> Self {
        Self { re: Polynomial::variable(2, 0).expect("dim 2"), im: Polynomial::variable(2, 1).expect("dim 2") }
    }

    /// `(x² - y², 2xy)`, twice the angle.
    pub fn double_angle() -> Self {
        let x = Polynomial::<C>::variable(2, 0).expect("dim 2");
        let y = Polynomial::<C>::variable(2, 1).expect("dim 2");
        Self { re: &x.pow(2) - &y.pow(2), im: (&x * &y).scale(&C::from_i64(2)) }
    }
}

fn rotation_generator<C: Scalar>(action: &GroupAction<C>) -> Result<DMatrix<f64>> {
    if action.group_dim() != 1 || action.volume().is_none() {
        return Err(Error::InvalidArgument("expected a single rotation generator".into()));
    }
    Ok(action.generators()[0].matrix.to_real_dmatrix())
}

/// Winding number of `θ ↦ F(R_θ w)` over one period, by angle tracking.
pub fn orbit_degree<C: Scalar>(f: &CircleMap<C>, action: &GroupAction<C>, w: &[f64], samples: usize) -> Result<i64> {
    let x = rotation_generator(action)?;
    let d = action.dim();
    if w.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: w.len() });
    }
    if samples < 3 {
        return Err(Error::InvalidArgument("need at least 3 samples".into()));
    }
    let x2 = &x * &x;
    let wv = nalgebra::DVector::from_column_slice(w);
    let (fre, fim) = (CompiledPoly::new(&f.re), CompiledPoly::new(&f.im));
    let values: Vec<Complex64> = (0..=samples)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / samples as f64;
            let r = DMatrix::identity(d, d) + &x * theta.sin() + &x2 * (1.0 - theta.cos());
            let p = r * &wv;
            Complex64::new(fre.eval(p.as_slice()).re, fim.eval(p.as_slice()).re)
        })
        .collect();
    let size = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if values.iter().any(|v| v.norm() <= 1e-12 * size.max(1.0)) {
        return Err(Error::DegenerateOnOrbit("F vanishes on the orbit".into()));
    }
    if values.iter().all(|v| (v - values[0]).norm() <= 1e-12 * size) {
        return Err(Error::DegenerateOnOrbit("F is constant on the orbit".into()));
    }
    let mut total = 0.0;
    for pair in values.windows(2) {
        let step = (pair[1] / pair[0]).arg();
        if step.abs() > 0.75 * PI {
            return Err(Error::DegenerateOnOrbit("orbit undersampled".into()));
        }
        total += step;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Weight on the circle with unit mass, `(1 + cos α) / 2π`.
pub fn circle_weight(alpha_cos: f64) -> f64 {
    (1.0 + alpha_cos) / (2.0 * PI)
}

/// `∫ φ(F(x)) dα(ι_x) f e^{-S/ħ} dx` over `ℝ^d` for a circle-valued `F` and
/// one rotation generator, with `φ` from [`circle_weight`].
pub fn weighted_integral_numeric<C: Scalar>(
    integrand: &Integrand<C>,
    action: &GroupAction<C>,
    f: &CircleMap<C>,
    hbar: f64,
    center: &[f64],
    tol: f64,
) -> Result<Complex64> {
    rotation_generator(action)?;
    let fields = action.vector_fields();
    let d_alpha = |p: &Polynomial<C>| -> Result<Polynomial<C>> {
        let mut out = Polynomial::zero(p.dim());
        for (i, v) in fields[0].iter().enumerate() {
            out += &(&p.partial_derivative(i)? * v);
        }
        Ok(out)
    };
    let (dre, dim) = (CompiledPoly::new(&d_alpha(&f.re)?), CompiledPoly::new(&d_alpha(&f.im)?));
    let (fre, fim) = (CompiledPoly::new(&f.re), CompiledPoly::new(&f.im));
    // fold φ(α) dα(ι) into the observable by integrating a float integrand
    let base = integrand.to_float();
    let s = CompiledPoly::new(&base.action);
    let obs: Vec<(i32, CompiledPoly)> = base.observable.grades().map(|(g, p)| (g, CompiledPoly::new(p))).collect();
    let hb = Complex64::new(hbar, 0.0);
    let root = hb.sqrt();
    let s_ref = s.eval(center).re;
    let integrand_fn = |x: &[f64]| -> Complex64 {
        let (a, b) = (fre.eval(x).re, fim.eval(x).re);
        let n2 = a * a + b * b;
        if n2 < 1e-300 {
            return Complex64::new(0.0, 0.0);
        }
        let dal = (a * dim.eval(x).re - b * dre.eval(x).re) / n2;
        let phi = circle_weight(a / n2.sqrt());
        let fval: Complex64 = obs.iter().map(|(g, p)| p.eval(x) * root.powi(*g)).sum();
        fval * phi * dal * (-(s.eval(x) - s_ref) / hb).exp()
    };
    let bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); integrand.dim()];
    let (v, _) = integrate_function(&integrand_fn, &bounds, center, tol)?;
    Ok(v * (-s_ref / hbar).exp() * integrand.prefactor.evaluate(hb))
}

/// `∫_𝒮 J_𝒮 f e^{-S/ħ}` over the affine slice `base + Σ w_j v_j` with `w`
/// restricted to `ranges`, with `J_𝒮` from [`fp_determinant_slice`] and the
/// Euclidean area of the parametrization.
pub fn slice_integral_numeric<C: Scalar>(
    integrand: &Integrand<C>,
    action: &GroupAction<C>,
    slice: &Slice<C>,
    ranges: &[(f64, f64)],
    hbar: f64,
    tol: f64,
) -> Result<Complex64> {
    let Slice::Affine { base, directions } = slice else {
        return Err(Error::InvalidArgument("numeric slice integrals need an affine slice".into()));
    };
    if ranges.len() != directions.len() {
        return Err(Error::DimensionMismatch { expected: directions.len(), found: ranges.len() });
    }
    let d = base.len();
    let basef: Vec<f64> = base.iter().map(|c| c.to_c64().re).collect();
    let dirs: Vec<Vec<f64>> = directions.iter().map(|v| v.iter().map(|c| c.to_c64().re).collect()).collect();
    let t = DMatrix::from_fn(d, dirs.len(), |i, j| dirs[j][i]);
    let area = (t.transpose() * &t).determinant().sqrt();
    let proj = DMatrix::identity(d, d) - &t * (t.transpose() * &t).try_inverse().ok_or(Error::NonTransverse)? * t.transpose();
    let fields: Vec<(DMatrix<f64>, nalgebra::DVector<f64>)> = action
        .generators()
        .iter()
        .map(|g| (g.matrix.to_real_dmatrix(), nalgebra::DVector::from_iterator(d, g.shift.iter().map(|c| c.to_c64().re))))
        .collect();
    let fp = |x: &[f64]| -> f64 {
        let xv = nalgebra::DVector::from_column_slice(x);
        let iota = DMatrix::from_columns(&fields.iter().map(|(m, b)| m * &xv + b).collect::<Vec<_>>());
        let perp = &proj * iota;
        (perp.transpose() * &perp).determinant().max(0.0).sqrt()
    };
    let base_i = integrand.to_float();
    let s = CompiledPoly::new(&base_i.action);
    let obs: Vec<(i32, CompiledPoly)> = base_i.observable.grades().map(|(g, p)| (g, CompiledPoly::new(p))).collect();
    let hb = Complex64::new(hbar, 0.0);
    let root = hb.sqrt();
    let to_x = |w: &[f64]| -> Vec<f64> { (0..d).map(|i| basef[i] + w.iter().zip(&dirs).map(|(wj, v)| wj * v[i]).sum::<f64>()).collect() };
    let center: Vec<f64> = ranges.iter().map(|(a, b)| if a.is_finite() && b.is_finite() { 0.5 * (a + b) } else if a.is_finite() { *a + 1.0 } else if b.is_finite() { *b - 1.0 } else { 0.0 }).collect();
    let s_ref = s.eval(&to_x(&center)).re;
    let f = |w: &[f64]| -> Complex64 {
        let x = to_x(w);
        let j = fp(&x);
        if j == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let fval: Complex64 = obs.iter().map(|(g, p)| p.eval(&x) * root.powi(*g)).sum();
        fval * j * area * (-(s.eval(&x) - s_ref) / hb).exp()
    };
    let (v, _) = integrate_function(&f, ranges, &center, tol)?;
    Ok(v * (-s_ref / hbar).exp() * integrand.prefactor.evaluate(hb))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FpVolumeReport {
    pub hbar: f64,
    pub full: Complex64,
    pub sliced: Complex64,
    pub volume: f64,
    pub relative_error: f64,
}

/// Compares `∫_M f e^{-S/ħ}` with `Vol(G) ∫_𝒮 J_𝒮 f e^{-S/ħ}`.
pub fn check_fp_volume_numeric<C: Scalar>(
    integrand: &Integrand<C>,
    action: &GroupAction<C>,
    slice: &Slice<C>,
    ranges: &[(f64, f64)],
    hbar: f64,
    tol: f64,
) -> Result<FpVolumeReport> {
    let volume = action
        .volume()
        .ok_or_else(|| Error::InvalidArgument("the group volume is known only for products of SO(2)".into()))?;
    action.check_invariant(&integrand.action, "action")?;
    let (full, sliced) = rayon::join(
        || integrate_numeric_about(integrand, Complex64::new(hbar, 0.0), &Domain::Whole, None, tol),
        || slice_integral_numeric(integrand, action, slice, ranges, hbar, tol),
    );
    let full = full?;
    let sliced = sliced? * volume;
    Ok(FpVolumeReport { hbar, full, sliced, volume, relative_error: ((full - sliced) / full).norm() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::{parse_expression, Exact, Float};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn poly(s: &str) -> Polynomial<Exact> {
        parse_expression(s, &names(&["x", "y"])).unwrap()
    }

    fn q(n: i64) -> Exact {
        Exact::from_i64(n)
    }

    fn hat() -> Integrand<Exact> {
        Integrand::new(poly("1/4*(x^2 + y^2 - 1)^2"), poly("1")).unwrap()
    }

    fn x_axis() -> Slice<Exact> {
        Slice::Affine { base: vec![q(0), q(0)], directions: vec![vec![q(1), q(0)]] }
    }

    #[test]
    fn orbit_map_columns() {
        let so2 = GroupAction::<Exact>::so2();
        let m = orbit_map(&so2, &[q(3), q(0)]).unwrap();
        assert_eq!((m[(0, 0)].clone(), m[(1, 0)].clone()), (q(0), q(3)));
        assert!(!so2.is_free_at(&[q(0), q(0)]).unwrap());
        let tr = GroupAction::new(2, vec![Generator::translation(vec![q(1), q(2)])]).unwrap();
        let m = orbit_map(&tr, &[q(5), q(-7)]).unwrap();
        assert_eq!((m[(0, 0)].clone(), m[(1, 0)].clone()), (q(1), q(2)));
        let bad = Matrix::from_rows(vec![vec![q(1), q(0)], vec![q(0), q(0)]]).unwrap();
        assert!(GroupAction::new(2, vec![Generator::linear(bad)]).is_err());
    }

    #[test]
    fn fp_determinant_values() {
        let so2 = GroupAction::<Exact>::so2();
        assert!((fp_determinant_slice(&so2, &x_axis(), &[q(2), q(0)]).unwrap() - 2.0).abs() < 1e-15);
        assert!((fp_determinant_slice(&so2, &x_axis(), &[q(1), q(0)]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(fp_determinant_slice(&so2, &x_axis(), &[q(1), q(1)]), Err(Error::NotOnSlice { .. })));
        assert_eq!(fp_determinant_slice(&so2, &x_axis(), &[q(0), q(0)]), Err(Error::NonTransverse));
        // tilted line through (1, 0) along (1, 1): |ι × t| / |t|
        let tilted = Slice::Affine { base: vec![q(1), q(0)], directions: vec![vec![q(1), q(1)]] };
        for s in [0i64, 1, 3] {
            let p = [q(1 + s), q(s)];
            let j = fp_determinant_slice(&so2, &tilted, &p).unwrap();
            let (x, y) = ((1 + s) as f64, s as f64);
            let cross = (-y * 1.0 - x * 1.0).abs() / 2f64.sqrt();
            assert!((j - cross).abs() < 1e-14, "{j} vs {cross}");
        }
    }

    #[test]
    fn level_set_fp_determinant() {
        let so2 = GroupAction::<Exact>::so2();
        let circle_slice = Slice::LevelSet { f: vec![poly("y - x^2 + 1")], q0: vec![q(0)] };
        // at (1, 0): tangent (1, 2), normal (-2, 1)/√5, ι = (0, 1)
        let j = fp_determinant_slice(&so2, &circle_slice, &[q(1), q(0)]).unwrap();
        assert!((j - 1.0 / 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn mexican_hat_slice_data() {
        let so2 = GroupAction::<Exact>::so2();
        let r = slice_integrand(&hat(), &so2, &x_axis(), &[q(1), q(0)], 6).unwrap();
        let w = names(&["w"]);
        assert_eq!(r.density, parse_expression("1 + w", &w).unwrap());
        assert_eq!(r.integrand.action, parse_expression("1/4*((1 + w)^2 - 1)^2", &w).unwrap());
    }

    #[test]
    fn slice_series_matches_one_dimensional_expansion() {
        let so2 = GroupAction::<Exact>::so2();
        let n = 3;
        let series = gauge_fixed_expand_slice(&hat(), &so2, &x_axis(), &[q(1), q(0)], n).unwrap();
        let w = names(&["w"]);
        let direct = Integrand::new(parse_expression("1/4*(w^2 - 1)^2", &w).unwrap(), parse_expression("w", &w).unwrap()).unwrap();
        let reference = wick_expand(&direct, &[q(1)], n).unwrap();
        assert_eq!(series, reference);
        assert_eq!(series.coeff(0), q(1));
        assert_eq!(*series.det(), q(2));
        let y_axis = Slice::Affine { base: vec![q(0), q(0)], directions: vec![vec![q(0), q(1)]] };
        let rotated = gauge_fixed_expand_slice(&hat(), &so2, &y_axis, &[q(0), q(1)], n).unwrap();
        assert_eq!(rotated, series);
        let curved = Slice::LevelSet { f: vec![poly("y - x^2 + 1")], q0: vec![q(0)] };
        let bent = gauge_fixed_expand_slice(&hat(), &so2, &curved, &[q(1), q(0)], n).unwrap();
        assert!(bent.normalized_eq(&series, 0.0), "{bent:?} vs {series:?}");
    }

    #[test]
    fn gaussian_slice_is_trivial() {
        let tr = GroupAction::new(2, vec![Generator::translation(vec![q(1), q(0)])]).unwrap();
        let g = Integrand::new(poly("1/2*y^2"), poly("1")).unwrap();
        let y_line = Slice::Affine { base: vec![q(0), q(0)], directions: vec![vec![q(0), q(1)]] };
        let s = gauge_fixed_expand_slice(&g, &tr, &y_line, &[q(0), q(0)], 3).unwrap();
        assert_eq!(s.coeffs, vec![q(1), q(0), q(0), q(0)]);
        // a slice of the wrong codimension
        let plane = Slice::Affine { base: vec![q(0), q(0)], directions: vec![vec![q(0), q(1)], vec![q(1), q(0)]] };
        assert!(matches!(gauge_fixed_expand_slice(&g, &tr, &plane, &[q(0), q(0)], 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn non_invariant_inputs_rejected() {
        let so2 = GroupAction::<Exact>::so2();
        let i = Integrand::new(poly("1/2*x^2 + y^2"), poly("1")).unwrap();
        assert!(matches!(gauge_fixed_expand_slice(&i, &so2, &x_axis(), &[q(0), q(0)], 1), Err(Error::NotInvariant(_))));
        let f = Integrand::new(poly("1/4*(x^2 + y^2 - 1)^2"), poly("x")).unwrap();
        assert!(matches!(gauge_fixed_expand_slice(&f, &so2, &x_axis(), &[q(1), q(0)], 1), Err(Error::NotInvariant(_))));
    }

    fn y_gauge(xi: Exact) -> WeightedGauge<Exact> {
        let h = parse_expression("1/2*q^2", &names(&["q"])).unwrap().scale(&xi.recip());
        WeightedGauge::new(vec![poly("y")], h, vec![q(0)]).unwrap()
    }

    #[test]
    fn weighted_integrand_shape() {
        let so2 = GroupAction::<Exact>::so2();
        let w = weighted_fp_integrand(&hat(), &so2, &y_gauge(q(1)), 3).unwrap();
        assert_eq!(w.action, poly("1/4*(x^2 + y^2 - 1)^2 + 1/2*y^2"));
        assert_eq!(w.observable.grade(0), poly("x"));
        assert_eq!(w.prefactor.dims, -1);
        let norm = y_gauge(q(1)).normalizer(3).unwrap();
        assert_eq!(norm.coeffs, vec![q(1), q(0), q(0), q(0)]);
        assert_eq!(*norm.det(), q(1));
    }

    #[test]
    fn weighted_equals_slice() {
        let so2 = GroupAction::<Exact>::so2();
        for xi in [Exact::from_ratio(1, 2), q(1), q(2)] {
            assert!(check_weighted_equals_slice(&hat(), &so2, &x_axis(), &y_gauge(xi), &[q(1), q(0)], 3).unwrap());
        }
        // a non-Gaussian weight
        let h = parse_expression("1/2*q^2 + q^4", &names(&["q"])).unwrap();
        let wg = WeightedGauge::new(vec![poly("y")], h, vec![q(0)]).unwrap();
        assert!(check_weighted_equals_slice(&hat(), &so2, &x_axis(), &wg, &[q(1), q(0)], 3).unwrap());
    }

    #[test]
    fn angle_jet_and_local_degree() {
        let jet = angle_jet(q(1), 5).unwrap();
        let v = jet.to_float().eval_real(&[1.05, 0.03]).re;
        assert!((v - (0.03f64 / 1.05).atan()).abs() < 1e-8);
        let so2 = GroupAction::<Exact>::so2();
        let n = 2;
        let deg = (2 * n + 4) as u32;
        let h = parse_expression("1/2*q^2", &names(&["q"])).unwrap();
        let single = WeightedGauge::new(vec![angle_jet(q(1), deg).unwrap()], h.clone(), vec![q(0)]).unwrap();
        let double = WeightedGauge::new(vec![angle_jet(q(1), deg).unwrap().scale(&q(2))], h, vec![q(0)]).unwrap();
        let a = wick_expand(&weighted_fp_integrand(&hat(), &so2, &single, n).unwrap(), &[q(1), q(0)], n).unwrap();
        let b = wick_expand(&weighted_fp_integrand(&hat(), &so2, &double, n).unwrap(), &[q(1), q(0)], n).unwrap();
        let sliced = gauge_fixed_expand_slice(&hat(), &so2, &x_axis(), &[q(1), q(0)], n).unwrap();
        assert!(a.normalized_eq(&sliced, 0.0));
        assert!(b.normalized_eq(&sliced, 0.0));
    }

    #[test]
    fn orbit_degrees() {
        let so2 = GroupAction::<Exact>::so2();
        assert_eq!(orbit_degree(&CircleMap::angle(), &so2, &[0.7, -0.2], 64).unwrap(), 1);
        assert_eq!(orbit_degree(&CircleMap::double_angle(), &so2, &[2.0, 1.0], 64).unwrap(), 2);
        let constant = CircleMap { re: poly("1"), im: poly("0") };
        assert!(matches!(orbit_degree(&constant, &so2, &[1.0, 0.0], 64), Err(Error::DegenerateOnOrbit(_))));
    }

    #[test]
    fn fp_volume_identity() {
        let so2 = GroupAction::<Exact>::so2();
        let ray = [(0.0, f64::INFINITY)];
        let r = check_fp_volume_numeric(&hat(), &so2, &x_axis(), &ray, 0.1, 1e-10).unwrap();
        assert!(r.relative_error < 1e-8, "{r:?}");
        let r2 = Integrand::new(poly("1/4*(x^2 + y^2 - 1)^2"), poly("x^2 + y^2")).unwrap();
        let r = check_fp_volume_numeric(&r2, &so2, &x_axis(), &ray, 0.1, 1e-10).unwrap();
        assert!(r.relative_error < 1e-8, "{r:?}");
        let g = Integrand::new(poly("1/2*(x^2 + y^2)"), poly("1")).unwrap();
        let r = check_fp_volume_numeric(&g, &so2, &x_axis(), &ray, 0.1, 1e-10).unwrap();
        assert!((r.full.re - 2.0 * PI * 0.1).abs() < 1e-10 && r.relative_error < 1e-8, "{r:?}");
    }

    #[test]
    fn numeric_weighted_integral_picks_up_degree() {
        let so2 = GroupAction::<Exact>::so2();
        let hbar = 0.1;
        let ray = [(0.0, f64::INFINITY)];
        let sliced = slice_integral_numeric(&hat(), &so2, &x_axis(), &ray, hbar, 1e-11).unwrap();
        let one = weighted_integral_numeric(&hat(), &so2, &CircleMap::angle(), hbar, &[1.0, 0.0], 1e-9).unwrap();
        let two = weighted_integral_numeric(&hat(), &so2, &CircleMap::double_angle(), hbar, &[1.0, 0.0], 1e-9).unwrap();
        assert!(((one / sliced) - 1.0).norm() < 1e-7, "{one} {sliced}");
        assert!(((two / sliced) - 2.0).norm() < 1e-7, "{two} {sliced}");
    }

    #[test]
    fn float_backend_invariance_tolerance() {
        let so2 = GroupAction::<Float>::so2();
        let p = poly("x^2 + y^2").to_float();
        assert!(so2.check_invariant(&p, "p").is_ok());
        let skew = &p + &poly("x").to_float().scale(&Complex64::new(1e-6, 0.0));
        assert!(so2.check_invariant(&skew, "p").is_err());
    }
}
