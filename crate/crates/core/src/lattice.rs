//! Periodic lattice scalar field: the Laplacian, propagators on a complement
//! of the constant mode, and the diagrams produced by the change of variables
//! `φ ↦ φ + φ³`.

use std::ops::Mul;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{wick_expand_with_propagator, Integrand};
use crate::formal::{Exact, HbarGradedSeries, Polynomial, Scalar};
use crate::linalg::Matrix;
use crate::wick::{Contractor, Propagator, DEFAULT_DEGREE_CAP};

/// A periodic box with `n` sites per side.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec {
    dim: usize,
    n: usize,
    spacing: BigRational,
}

impl LatticeSpec {
    pub fn new(dim: usize, n: usize, spacing: BigRational) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidArgument(format!("lattice dimension must be 1 or 2, got {dim}")));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 sites per side, got {n}")));
        }
        if spacing <= BigRational::zero() {
            return Err(Error::InvalidArgument("spacing must be positive".into()));
        }
        Ok(Self { dim, n, spacing })
    }

    pub fn ring(n: usize) -> Result<Self> {
        Self::new(1, n, BigRational::one())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> &BigRational {
        &self.spacing
    }

    pub fn sites(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn neighbor(&self, site: usize, axis: usize, step: isize) -> usize {
        let stride = self.n.pow(axis as u32);
        let coord = (site / stride) % self.n;
        let moved = (coord as isize + step).rem_euclid(self.n as isize) as usize;
        site - coord * stride + moved * stride
    }
}

fn exact(r: &BigRational) -> Exact {
    Exact::from_rationals(r, &BigRational::zero())
}

/// The matrix of the pairing `(φ, Δφ) = Σ_i δx^d φ_i (Δφ)_i`, i.e. the second
/// difference scaled by `δx^{d-2}`.
pub fn lattice_laplacian(spec: &LatticeSpec) -> Matrix<Exact> {
    let n = spec.sites();
    let weight = exact(&num_traits::pow(spec.spacing.clone(), spec.dim).mul(num_traits::pow(spec.spacing.recip(), 2)));
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for axis in 0..spec.dim {
            a[(i, i)] += Exact::from_i64(2);
            for step in [-1, 1] {
                let j = spec.neighbor(i, axis, step);
                a[(i, j)] -= Exact::one();
            }
        }
    }
    a.scale(&weight)
}

/// How the constant zero mode is removed before inverting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroMode {
    /// Inverse on the orthogonal complement of constants.
    #[default]
    MeanZero,
    /// Inverse on `{φ_0 = 0}`, padded with zeros.
    Pinned,
}

impl std::fmt::Display for ZeroMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ZeroMode::MeanZero => "mean-zero",
            ZeroMode::Pinned => "pinned",
        })
    }
}

impl std::str::FromStr for ZeroMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-zero" => Ok(ZeroMode::MeanZero),
            "pinned" => Ok(ZeroMode::Pinned),
            _ => Err(Error::InvalidArgument(format!("unknown zero-mode treatment `{s}`"))),
        }
    }
}

fn check_constant_kernel(a: &Matrix<Exact>) -> Result<()> {
    if !a.is_square() || !a.is_symmetric() {
        return Err(Error::WrongKernel);
    }
    let n = a.rows();
    let ones = vec![Exact::one(); n];
    if a.mul_vec(&ones)?.iter().any(|c| !c.is_zero()) || a.rank() + 1 != n {
        return Err(Error::WrongKernel);
    }
    Ok(())
}

/// `G = (A + J/N)^{-1} - J/N`, so that `G A = A G = I - J/N`.
pub fn zero_mode_propagator(a: &Matrix<Exact>) -> Result<Propagator<Exact>> {
    check_constant_kernel(a)?;
    let n = a.rows();
    let j = Matrix::from_fn(n, n, |_, _| Exact::from_ratio(1, n as i64));
    let g = a.add(&j).inverse()?.add(&j.scale(&-Exact::one()));
    Propagator::supplied(g, "orthogonal complement of constants")
}

/// Inverse of `A` with row and column `site` removed, padded with zeros.
pub fn pinned_propagator(a: &Matrix<Exact>, site: usize) -> Result<Propagator<Exact>> {
    check_constant_kernel(a)?;
    let n = a.rows();
    if site >= n {
        return Err(Error::IndexOutOfRange { index: site, dim: n });
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != site).collect();
    let inv = a.select(&keep, &keep).inverse()?;
    let mut g = Matrix::zeros(n, n);
    for (r, &i) in keep.iter().enumerate() {
        for (c, &j) in keep.iter().enumerate() {
            g[(i, j)] = inv[(r, c)].clone();
        }
    }
    Propagator::supplied(g, format!("complement {{phi_{site} = 0}}"))
}

pub fn propagator_for(a: &Matrix<Exact>, mode: ZeroMode) -> Result<Propagator<Exact>> {
    match mode {
        ZeroMode::MeanZero => zero_mode_propagator(a),
        ZeroMode::Pinned => pinned_propagator(a, 0),
    }
}

/// Action `½(φ,Δφ) + (φ,Δφ³) + ½(φ³,Δφ³)` and observable `Π(1 + 3φ_i²)`
/// truncated at degree `max_degree`.
pub fn transformed_integrand(a: &Matrix<Exact>, max_degree: u32) -> Result<Integrand<Exact>> {
    let n = a.rows();
    let phi: Vec<Polynomial<Exact>> = (0..n).map(|i| Polynomial::variable(n, i)).collect::<Result<_>>()?;
    let cubes: Vec<Polynomial<Exact>> = phi.iter().map(|p| p.pow(3)).collect();
    let pair = |u: &[Polynomial<Exact>], v: &[Polynomial<Exact>]| -> Polynomial<Exact> {
        let mut out = Polynomial::zero(n);
        for i in 0..n {
            for j in 0..n {
                if !a[(i, j)].is_zero() {
                    out += &(&u[i] * &v[j]).scale(&a[(i, j)]);
                }
            }
        }
        out
    };
    let half = Exact::from_ratio(1, 2);
    let action = &(&pair(&phi, &phi).scale(&half) + &pair(&phi, &cubes)) + &pair(&cubes, &cubes).scale(&half);
    let mut observable = Polynomial::one(n);
    let three = Exact::from_i64(3);
    for p in &phi {
        let factor = &Polynomial::one(n) + &p.pow(2).scale(&three);
        observable = observable.mul_truncated(&factor, Some(max_degree));
    }
    Integrand::with_series(action, HbarGradedSeries::from_polynomial(observable))
}

/// Exact values of the lattice cancellation check.
#[derive(Clone, Debug, PartialEq)]
pub struct CancellationReport {
    pub spec: LatticeSpec,
    pub zero_mode: ZeroMode,
    pub order: i32,
    /// Contraction of `Σ 3φ_i²`.
    pub observable_diagram: Exact,
    /// Contraction of `-(φ, Δφ³)`.
    pub quartic_diagram: Exact,
    /// `c_0, c_1, ...` of the transformed integrand.
    pub coeffs: Vec<Exact>,
}

impl CancellationReport {
    /// `c_1`, the full order-`ħ` coefficient.
    pub fn order_one_total(&self) -> Exact {
        self.coeffs.get(1).cloned().unwrap_or_else(Exact::zero)
    }

    /// Whether every coefficient beyond `c_0` vanishes.
    pub fn cancels(&self) -> bool {
        self.coeffs.iter().skip(1).all(|c| c.is_zero())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.spec.dim,
            "n": self.spec.n,
            "spacing": self.spec.spacing.to_string(),
            "zero_mode": self.zero_mode.to_string(),
            "order": self.order,
            "diagrams": {
                "observable": self.observable_diagram.to_text(),
                "quartic_vertex": self.quartic_diagram.to_text(),
                "sum": (self.observable_diagram.clone() + &self.quartic_diagram).to_text(),
            },
            "coeffs": self.coeffs.iter().map(|c| c.to_text()).collect::<Vec<_>>(),
            "total": self.order_one_total().to_text(),
            "cancels": self.cancels(),
        })
    }
}

/// Wick expands the transformed lattice integrand through `order` (1 or 2)
/// and evaluates the two order-`ħ` diagrams separately.
pub fn run_cancellation_demo(spec: &LatticeSpec, order: i32, zero_mode: ZeroMode) -> Result<CancellationReport> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidArgument(format!("the lattice demo runs at order 1 or 2, got {order}")));
    }
    let a = lattice_laplacian(spec);
    let g = propagator_for(&a, zero_mode)?;
    let n = spec.sites();
    let integrand = transformed_integrand(&a, 2 * order as u32)?;
    let origin = vec![Exact::zero(); n];
    let (diagrams, expansion) = rayon::join(
        || -> Result<(Exact, Exact)> {
            let mut contractor = Contractor::with_cap(&g, DEFAULT_DEGREE_CAP);
            let mut tadpole = Polynomial::zero(n);
            let mut quartic = Polynomial::zero(n);
            for i in 0..n {
                let phi_i = Polynomial::variable(n, i)?;
                tadpole += &phi_i.pow(2).scale(&Exact::from_i64(3));
                for j in 0..n {
                    if !a[(i, j)].is_zero() {
                        quartic += &(&phi_i * &Polynomial::variable(n, j)?.pow(3)).scale(&a[(i, j)]);
                    }
                }
            }
            Ok((contractor.value(&tadpole)?, -contractor.value(&quartic)?))
        },
        || wick_expand_with_propagator(&integrand, &origin, order, &g, DEFAULT_DEGREE_CAP),
    );
    let (observable_diagram, quartic_diagram) = diagrams?;
    let (kmin, coeffs) = expansion?;
    debug_assert_eq!(kmin, 0);
    Ok(CancellationReport { spec: spec.clone(), zero_mode, order, observable_diagram, quartic_diagram, coeffs })
}

/// Runs the demo for several ring sizes concurrently.
pub fn run_rings(sizes: &[usize], order: i32, zero_mode: ZeroMode) -> Result<Vec<CancellationReport>> {
    sizes.par_iter().map(|&n| run_cancellation_demo(&LatticeSpec::ring(n)?, order, zero_mode)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn q(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    #[test]
    fn ring_laplacian() {
        let a = lattice_laplacian(&LatticeSpec::ring(4).unwrap());
        for i in 0..4 {
            assert_eq!(a[(i, i)], q(2, 1));
            assert_eq!(a[(i, (i + 1) % 4)], q(-1, 1));
            assert_eq!(a[(i, (i + 3) % 4)], q(-1, 1));
            assert_eq!(a[(i, (i + 2) % 4)], q(0, 1));
        }
        let ones = vec![Exact::one(); 4];
        assert!(a.mul_vec(&ones).unwrap().iter().all(|c| c.is_zero()));
        let square = lattice_laplacian(&LatticeSpec::new(2, 2, BigRational::one()).unwrap());
        assert_eq!(square.rank(), 3);
        // spacing enters as δx^{d-2}
        let half = lattice_laplacian(&LatticeSpec::new(1, 4, BigRational::new(1.into(), 2.into())).unwrap());
        assert_eq!(half[(0, 0)], q(4, 1));
    }

    #[test]
    fn mean_zero_propagator() {
        let a = lattice_laplacian(&LatticeSpec::ring(4).unwrap());
        let g = zero_mode_propagator(&a).unwrap();
        let p = Matrix::from_fn(4, 4, |i, j| if i == j { q(3, 4) } else { q(-1, 4) });
        assert_eq!(g.matrix().mul(&a).unwrap(), p);
        assert_eq!(a.mul(g.matrix()).unwrap(), p);
        assert!(g.matrix().is_symmetric());
        for n in [4usize, 5, 8] {
            let a = lattice_laplacian(&LatticeSpec::ring(n).unwrap());
            let g = zero_mode_propagator(&a).unwrap();
            let closed: f64 = (1..n).map(|k| 1.0 / (2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos())).sum::<f64>() / n as f64;
            for i in 0..n {
                assert_eq!(g.matrix()[(i, i)], g.matrix()[(0, 0)]);
                assert!((g.matrix()[(i, i)].to_c64().re - closed).abs() < 1e-13);
            }
        }
        assert_eq!(g.matrix()[(0, 0)], q(5, 16));
    }

    #[test]
    fn wrong_kernel_rejected() {
        let id: Matrix<Exact> = Matrix::identity(3);
        assert_eq!(zero_mode_propagator(&id).unwrap_err(), Error::WrongKernel);
        let two_blocks = Matrix::from_fn(4, 4, |i, j| match (i / 2 == j / 2, i == j) {
            (true, true) => q(1, 1),
            (true, false) => q(-1, 1),
            _ => q(0, 1),
        });
        assert_eq!(zero_mode_propagator(&two_blocks).unwrap_err(), Error::WrongKernel);
    }

    #[test]
    fn pinned_cancellation_is_exact() {
        for n in [4usize, 8] {
            let r = run_cancellation_demo(&LatticeSpec::ring(n).unwrap(), 1, ZeroMode::Pinned).unwrap();
            assert_eq!(r.observable_diagram.clone() + &r.quartic_diagram, Exact::zero());
            assert_eq!(r.order_one_total(), Exact::zero());
            assert!(!r.observable_diagram.is_zero());
        }
        let r = run_cancellation_demo(&LatticeSpec::ring(4).unwrap(), 2, ZeroMode::Pinned).unwrap();
        assert!(r.cancels(), "{:?}", r.coeffs);
    }

    #[test]
    fn mean_zero_leaves_a_zero_mode_remainder() {
        // Δ G = I - J/N on the ring, so the quartic diagram is short by 3 Σ G_ii / N
        let r = run_cancellation_demo(&LatticeSpec::ring(4).unwrap(), 1, ZeroMode::MeanZero).unwrap();
        assert_eq!(r.observable_diagram, q(15, 4));
        assert_eq!(r.quartic_diagram, q(-45, 16));
        assert_eq!(r.order_one_total(), q(15, 16));
    }

    #[test]
    fn kernel_shift_moves_the_total_by_three_c() {
        let a = lattice_laplacian(&LatticeSpec::ring(4).unwrap());
        let g = zero_mode_propagator(&a).unwrap();
        let integrand = transformed_integrand(&a, 2).unwrap();
        let origin = vec![Exact::zero(); 4];
        let (_, base) = wick_expand_with_propagator(&integrand, &origin, 1, &g, DEFAULT_DEGREE_CAP).unwrap();
        for c in [1i64, -2] {
            let j = Matrix::from_fn(4, 4, |_, _| Exact::from_i64(c));
            let shifted = Propagator::supplied(g.matrix().add(&j), "shifted").unwrap();
            let (_, s) = wick_expand_with_propagator(&integrand, &origin, 1, &shifted, DEFAULT_DEGREE_CAP).unwrap();
            assert_eq!(s[1].clone() - &base[1], Exact::from_i64(3 * c));
        }
    }

    #[test]
    fn report_json_has_exact_strings() {
        let r = run_cancellation_demo(&LatticeSpec::ring(4).unwrap(), 1, ZeroMode::Pinned).unwrap();
        let j = r.to_json();
        assert_eq!(j["total"], "0");
        assert_eq!(j["zero_mode"], "pinned");
        assert_eq!(j["cancels"], true);
    }
}
