//! Numerical integration of convergent instances and checks that the Wick
//! expansion is asymptotic to them.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{Integrand, WickSeries};
use crate::formal::{Polynomial, Scalar};
use crate::quadrature::adaptive_simpson;

/// Uniform panels per axis before adaptive refinement, so narrow peaks are
/// never stepped over.
const PANELS: usize = 64;
const MAX_DEPTH: u32 = 40;
const MAX_GROWTH: usize = 60;

/// Integration region. Box bounds may be infinite; infinite sides are cut
/// where the integrand has decayed.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Whole,
    Box(Vec<(f64, f64)>),
}

/// A polynomial flattened for fast real evaluation.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    terms: Vec<(Complex64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    pub fn new<C: Scalar>(p: &Polynomial<C>) -> Self {
        let terms = p
            .terms()
            .map(|(e, c)| {
                let pows = e.iter().enumerate().filter(|(_, &a)| a > 0).map(|(i, &a)| (i, a as i32)).collect();
                (c.to_c64(), pows)
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, pows) in &self.terms {
            let mut m = 1.0;
            for &(i, a) in pows {
                m *= x[i].powi(a);
            }
            acc += c * m;
        }
        acc
    }
}

/// `f(x, ħ) e^{-S(x)/ħ}` evaluated with the exponent shifted by `shift`.
struct Evaluator {
    action: CompiledPoly,
    observable: Vec<(i32, CompiledPoly)>,
    hbar: Complex64,
    root: Complex64,
}

impl Evaluator {
    fn new<C: Scalar>(i: &Integrand<C>, hbar: Complex64) -> Self {
        Self {
            action: CompiledPoly::new(&i.action),
            observable: i.observable.grades().map(|(g, p)| (g, CompiledPoly::new(p))).collect(),
            hbar,
            root: hbar.sqrt(),
        }
    }

    fn observable(&self, x: &[f64]) -> Complex64 {
        self.observable.iter().map(|(g, p)| p.eval(x) * self.root.powi(*g)).sum()
    }

    fn eval(&self, x: &[f64], shift: Complex64) -> Complex64 {
        let f = self.observable(x);
        if f == Complex64::new(0.0, 0.0) {
            return f;
        }
        f * (-(self.action.eval(x) - shift) / self.hbar).exp()
    }
}

fn grid_points(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut k| {
            (0..d)
                .map(|i| {
                    let j = k % per_axis;
                    k /= per_axis;
                    lo[i] + (hi[i] - lo[i]) * j as f64 / (per_axis - 1) as f64
                })
                .collect()
        })
        .collect()
}

fn face_max<F: Fn(&[f64]) -> Complex64 + Sync>(f: &F, lo: &[f64], hi: &[f64], axis: usize, at: f64, per_axis: usize) -> f64 {
    let mut lo2 = lo.to_vec();
    let mut hi2 = hi.to_vec();
    lo2[axis] = at;
    hi2[axis] = at;
    let d = lo.len();
    let pts = if d == 1 { vec![vec![at]] } else { grid_points(&lo2, &hi2, per_axis) };
    pts.iter().map(|p| f(p).norm()).fold(0.0, f64::max)
}

/// Finite box on which `f` has decayed to `tol` times its sampled peak.
fn truncate_box<F: Fn(&[f64]) -> Complex64 + Sync>(
    f: &F,
    bounds: &[(f64, f64)],
    center: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = bounds.len();
    let per_axis = match d {
        1 => 257,
        2 => 65,
        _ => 21,
    };
    let mut half = vec![1.0f64; d];
    for _ in 0..MAX_GROWTH {
        let lo: Vec<f64> = (0..d).map(|i| bounds[i].0.max(center[i] - half[i])).collect();
        let hi: Vec<f64> = (0..d).map(|i| bounds[i].1.min(center[i] + half[i])).collect();
        let peak = grid_points(&lo, &hi, per_axis).iter().map(|p| f(p).norm()).fold(0.0, f64::max);
        if !peak.is_finite() {
            return Err(Error::QuadratureFailure("integrand overflows".into()));
        }
        let mut done = true;
        for i in 0..d {
            for (side, open) in [(lo[i], bounds[i].0 < lo[i]), (hi[i], bounds[i].1 > hi[i])] {
                if open && face_max(f, &lo, &hi, i, side, per_axis) > tol * peak {
                    done = false;
                }
            }
        }
        if done && peak > 0.0 {
            return Ok((lo, hi));
        }
        if done && peak == 0.0 {
            return Ok((lo, hi));
        }
        for h in half.iter_mut() {
            *h *= 1.5;
        }
    }
    Err(Error::NoDecay)
}

fn nested<F: Fn(&[f64]) -> Complex64 + Sync>(
    f: &F,
    prefix: &[f64],
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    panels: usize,
    err: &mut f64,
) -> Result<Complex64> {
    let k = prefix.len();
    let d = lo.len();
    let width = hi[k] - lo[k];
    if width == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let panel = width / panels as f64;
    let panel_tol = tol / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let a = lo[k] + p as f64 * panel;
        let b = if p + 1 == panels { hi[k] } else { a + panel };
        let inner_err = std::cell::Cell::new(0.0f64);
        let failure = std::cell::RefCell::new(None);
        let g = |x: f64| -> Complex64 {
            let mut pre = prefix.to_vec();
            pre.push(x);
            if pre.len() == d {
                f(&pre)
            } else {
                let mut e = 0.0;
                match nested(f, &pre, lo, hi, panel_tol / (width * 4.0), PANELS, &mut e) {
                    Ok(v) => {
                        inner_err.set(inner_err.get().max(e));
                        v
                    }
                    Err(err) => {
                        failure.borrow_mut().get_or_insert(err);
                        Complex64::new(0.0, 0.0)
                    }
                }
            }
        };
        let (v, e) = adaptive_simpson(&g, a, b, panel_tol / 2.0, MAX_DEPTH)?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        total += v;
        *err += e + inner_err.get() * (b - a);
    }
    Ok(total)
}

/// Nested adaptive Simpson integration of `f` over `domain` (infinite sides
/// truncated where `|f|` falls below `tol` times its peak). `tol` is relative
/// to the size of the result. Returns the value and an error estimate.
pub fn integrate_function<F: Fn(&[f64]) -> Complex64 + Sync>(
    f: &F,
    bounds: &[(f64, f64)],
    center: &[f64],
    tol: f64,
) -> Result<(Complex64, f64)> {
    let d = bounds.len();
    if d == 0 || d > 3 {
        return Err(Error::InvalidArgument(format!("numeric integration supports 1 to 3 dimensions, got {d}")));
    }
    let (lo, hi) = truncate_box(f, bounds, center, tol * 1e-3)?;
    // rough magnitude for the absolute tolerance
    let per_axis = [0, 257, 65, 21][d];
    let pts = grid_points(&lo, &hi, per_axis);
    let cell: f64 = (0..d).map(|i| (hi[i] - lo[i]) / (per_axis - 1) as f64).product();
    let rough: Complex64 = pts.iter().map(|p| f(p)).sum::<Complex64>() * cell;
    let peak = pts.iter().map(|p| f(p).norm()).fold(0.0, f64::max) * cell;
    let scale = rough.norm().max(peak * 1e-6);
    if scale == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let abs_tol = tol * scale;
    let mut err = 0.0;
    let value = if d == 1 {
        nested(f, &[], &lo, &hi, abs_tol, PANELS, &mut err)?
    } else {
        // outermost panels in parallel
        let panel = (hi[0] - lo[0]) / PANELS as f64;
        let parts: Vec<(Complex64, f64)> = (0..PANELS)
            .into_par_iter()
            .map(|p| {
                let mut lo2 = lo.clone();
                let mut hi2 = hi.clone();
                lo2[0] = lo[0] + p as f64 * panel;
                hi2[0] = if p + 1 == PANELS { hi[0] } else { lo2[0] + panel };
                let mut e = 0.0;
                let v = nested(f, &[], &lo2, &hi2, abs_tol / PANELS as f64, 1, &mut e)?;
                Ok((v, e))
            })
            .collect::<Result<_>>()?;
        parts.iter().for_each(|(_, e)| err += e);
        parts.iter().map(|(v, _)| v).sum()
    };
    if err > abs_tol.max(tol * value.norm()) * 10.0 {
        return Err(Error::ToleranceNotMet { estimate: err / value.norm().max(f64::MIN_POSITIVE), tol });
    }
    Ok((value, err))
}

/// `prefactor(ħ) · ∫ f e^{-S/ħ} dx` by nested adaptive quadrature. `tol` is
/// relative.
pub fn integrate_numeric<C: Scalar>(integrand: &Integrand<C>, hbar: Complex64, domain: &Domain, tol: f64) -> Result<Complex64> {
    integrate_numeric_about(integrand, hbar, domain, None, tol)
}

/// As [`integrate_numeric`], with a hint where the integrand peaks.
pub fn integrate_numeric_about<C: Scalar>(
    integrand: &Integrand<C>,
    hbar: Complex64,
    domain: &Domain,
    center: Option<&[f64]>,
    tol: f64,
) -> Result<Complex64> {
    if hbar.re <= 0.0 {
        return Err(Error::InvalidArgument("numeric integration needs Re ħ > 0".into()));
    }
    let d = integrand.dim();
    let bounds = match domain {
        Domain::Whole => vec![(f64::NEG_INFINITY, f64::INFINITY); d],
        Domain::Box(b) => {
            if b.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: b.len() });
            }
            b.clone()
        }
    };
    let origin = vec![0.0; d];
    let center = center.unwrap_or(&origin);
    let ev = Evaluator::new(integrand, hbar);
    // shift the exponent by the smallest action seen near the center
    let probe_lo: Vec<f64> = (0..d).map(|i| bounds[i].0.max(center[i] - 2.0)).collect();
    let probe_hi: Vec<f64> = (0..d).map(|i| bounds[i].1.min(center[i] + 2.0)).collect();
    let shift = grid_points(&probe_lo, &probe_hi, [0, 401, 81, 21][d.min(3)])
        .iter()
        .map(|p| ev.action.eval(p))
        .filter(|s| s.re.is_finite())
        .min_by(|a, b| a.re.total_cmp(&b.re))
        .unwrap_or(Complex64::new(0.0, 0.0));
    let shift = Complex64::new(shift.re, 0.0);
    let (value, _) = integrate_function(&|x: &[f64]| ev.eval(x, shift), &bounds, center, tol)?;
    let correction = (-shift / hbar).exp();
    Ok(value * correction * integrand.prefactor.evaluate(hbar))
}

/// Numerical values against partial sums of one or more Wick series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub hbar: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `partial_sums[n][j]` at order `n` and grid point `j`.
    pub partial_sums: Vec<Vec<Complex64>>,
    pub remainders: Vec<Vec<Complex64>>,
    /// Remainders divided by the leading prefactor.
    pub relative_remainders: Vec<Vec<f64>>,
    /// Least-squares slope of `log |relative remainder|` against `log ħ`.
    pub slopes: Vec<f64>,
    /// True when some prefactor has a non-positive determinant, so the
    /// principal square root is a convention.
    pub branch_convention_dependent: bool,
}

#[derive(Clone, Debug, Serialize)]
struct SlopeSummary<'a> {
    hbar: &'a [f64],
    slopes: &'a [f64],
    branch_convention_dependent: bool,
}

impl AsymptoticsReport {
    /// CSV with columns `hbar, I_re, I_im, partial_sum_n..., remainder_n...`.
    pub fn to_csv(&self) -> String {
        let orders = self.partial_sums.len();
        let mut header = vec!["hbar".to_string(), "I_re".into(), "I_im".into()];
        header.extend((0..orders).map(|n| format!("partial_sum_{n}")));
        header.extend((0..orders).map(|n| format!("remainder_{n}")));
        let mut out = header.join(",");
        out.push('\n');
        for (j, h) in self.hbar.iter().enumerate() {
            let mut row = vec![format!("{h:e}"), format!("{:e}", self.values[j].re), format!("{:e}", self.values[j].im)];
            row.extend((0..orders).map(|n| format!("{:e}", self.partial_sums[n][j].re)));
            row.extend((0..orders).map(|n| format!("{:e}", self.remainders[n][j].re)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(SlopeSummary {
            hbar: &self.hbar,
            slopes: &self.slopes,
            branch_convention_dependent: self.branch_convention_dependent,
        })
        .expect("serializable")
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Relative quadrature tolerance of the sweep by dimension.
pub const SWEEP_TOL: [f64; 3] = [1e-13, 1e-10, 1e-9];

/// Compares `I(ħ)` with `Σ_series prefactor · Σ_{k<=n} c_k ħ^k` for every
/// `n <= order` over a strictly decreasing grid.
pub fn asymptotics_sweep<C: Scalar>(
    integrand: &Integrand<C>,
    x0: &[f64],
    series: &[WickSeries<C>],
    grid: &[f64],
    order: i32,
) -> Result<AsymptoticsReport> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] >= w[0]) || grid.iter().any(|h| *h <= 0.0) {
        return Err(Error::InvalidArgument("the ħ grid must be positive and strictly decreasing".into()));
    }
    if series.is_empty() {
        return Err(Error::InvalidArgument("at least one series is required".into()));
    }
    let tol = SWEEP_TOL[integrand.dim().clamp(1, 3) - 1];
    let values: Vec<Complex64> = grid
        .par_iter()
        .map(|&h| integrate_numeric_about(integrand, Complex64::new(h, 0.0), &Domain::Whole, Some(x0), tol))
        .collect::<Result<_>>()?;
    let orders = (order.max(0) + 1) as usize;
    let mut partial_sums = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; orders];
    let mut remainders = partial_sums.clone();
    let mut relative = vec![vec![0.0; grid.len()]; orders];
    for (j, &h) in grid.iter().enumerate() {
        let hb = Complex64::new(h, 0.0);
        let lead = series[0].prefactor.evaluate(hb).norm();
        for n in 0..orders {
            let ps: Complex64 = series.iter().map(|w| w.partial_sum(hb, n as i32)).sum();
            partial_sums[n][j] = ps;
            remainders[n][j] = values[j] - ps;
            relative[n][j] = remainders[n][j].norm() / lead;
        }
    }
    let logs: Vec<f64> = grid.iter().map(|h| h.ln()).collect();
    let slopes = relative.iter().map(|r| fit_slope(&logs, &r.iter().map(|v| v.ln()).collect::<Vec<_>>())).collect();
    let branch = series.iter().any(|w| w.det().real_sign() != Some(std::cmp::Ordering::Greater));
    Ok(AsymptoticsReport {
        hbar: grid.to_vec(),
        values,
        partial_sums,
        remainders,
        relative_remainders: relative,
        slopes,
        branch_convention_dependent: branch,
    })
}

/// Smooth plateau: 1 on `|u| <= 1`, 0 for `|u| >= 2`.
pub fn plateau(u: f64) -> f64 {
    let a = u.abs();
    if a <= 1.0 {
        return 1.0;
    }
    if a >= 2.0 {
        return 0.0;
    }
    let bump = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let s = 2.0 - a;
    bump(s) / (bump(s) + bump(1.0 - s))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscillatoryResult {
    pub value: Complex64,
    pub error_estimate: f64,
    /// `(δ, ε, regulated integral)` at each stage of the schedule.
    pub stages: Vec<(f64, f64, Complex64)>,
}

/// Ratio fixing the cutoff scale to the damping: `ε = sqrt(δ / 40)` puts the
/// cutoff where `e^{-δx²}` is already below `e^{-40}`.
const CUTOFF_RATIO: f64 = 40.0;

/// `∫ ψ(εx) f(x) e^{-S/ħ} e^{-δx²} dx` at `ħ = i t`, extrapolated to
/// `δ, ε → 0` along `δ_j = δ0 / 2^j`, `ε_j = sqrt(δ_j / 40)`.
pub fn oscillatory_integrate_1d<C: Scalar>(
    integrand: &Integrand<C>,
    t: f64,
    delta0: f64,
    stages: usize,
) -> Result<OscillatoryResult> {
    if integrand.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: integrand.dim() });
    }
    if t == 0.0 || delta0 <= 0.0 || stages < 2 {
        return Err(Error::InvalidArgument("need t != 0, δ0 > 0 and at least two stages".into()));
    }
    let ds = integrand.action.partial_derivative(0)?;
    if ds.is_zero() {
        return Err(Error::ExtrapolationUnstable("S' vanishes identically".into()));
    }
    let hbar = Complex64::new(0.0, t);
    let ev = Evaluator::new(integrand, hbar);
    let dsc = CompiledPoly::new(&ds);
    let mut results = Vec::with_capacity(stages);
    for j in 0..stages {
        let delta = delta0 / 2f64.powi(j as i32);
        let eps = (delta / CUTOFF_RATIO).sqrt();
        let reach = 2.0 / eps;
        // panel count from the fastest phase on the range
        let rate = (0..=200)
            .map(|k| dsc.eval(&[reach * k as f64 / 200.0]).norm().max(dsc.eval(&[-reach * k as f64 / 200.0]).norm()))
            .fold(0.0, f64::max)
            / t.abs();
        let panels = ((2.0 * reach * rate / std::f64::consts::PI).ceil() as usize).clamp(64, 4_000_000);
        let g = |x: f64| plateau(eps * x) * (-delta * x * x).exp() * ev.eval(&[x], Complex64::new(0.0, 0.0));
        let h = 2.0 * reach / panels as f64;
        let parts: Vec<Complex64> = (0..panels)
            .into_par_iter()
            .map(|p| {
                let a = -reach + p as f64 * h;
                adaptive_simpson(&g, a, a + h, 1e-14 * h, 12).map(|(v, _)| v)
            })
            .collect::<Result<_>>()?;
        let value: Complex64 = parts.iter().sum();
        results.push((delta, eps, value * integrand.prefactor.evaluate(hbar)));
    }
    // Neville extrapolation to δ = 0
    let xs: Vec<f64> = results.iter().map(|r| r.0).collect();
    let mut table: Vec<Complex64> = results.iter().map(|r| r.2).collect();
    let mut previous = table[table.len() - 1];
    let mut estimate = f64::INFINITY;
    for level in 1..stages {
        for i in (level..stages).rev() {
            let (xa, xb) = (xs[i - level], xs[i]);
            table[i] = (table[i] * xa - table[i - 1] * xb) / (xa - xb);
        }
        estimate = (table[stages - 1] - previous).norm();
        previous = table[stages - 1];
    }
    let value = table[stages - 1];
    if !value.re.is_finite() || !value.im.is_finite() || estimate > 0.5 * value.norm().max(1e-300) && value.norm() > 0.0 {
        return Err(Error::ExtrapolationUnstable(format!("estimate {estimate:e} for value {value}")));
    }
    Ok(OscillatoryResult { value, error_estimate: estimate, stages: results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::{parse_expression, Exact};
    use std::f64::consts::PI;

    fn integrand(s: &str, f: &str, vars: &[&str]) -> Integrand<Exact> {
        let n: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
        Integrand::new(parse_expression(s, &n).unwrap(), parse_expression(f, &n).unwrap()).unwrap()
    }

    #[test]
    fn gaussian_closed_form() {
        let i = integrand("1/2*x^2", "1", &["x"]);
        let v = integrate_numeric(&i, Complex64::new(0.1, 0.0), &Domain::Whole, 1e-12).unwrap();
        assert!((v.re - 0.7926654595212022).abs() < 1e-11, "{v}");
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn box_domain_half_line() {
        let i = integrand("1/2*x^2", "1", &["x"]);
        let v = integrate_numeric(&i, Complex64::new(1.0, 0.0), &Domain::Box(vec![(0.0, f64::INFINITY)]), 1e-12).unwrap();
        assert!((v.re - (PI / 2.0).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn mexican_hat_polar_identity() {
        let hbar = 0.05;
        let i = integrand("1/4*(x^2 + y^2 - 1)^2", "1", &["x", "y"]);
        let full = integrate_numeric(&i, Complex64::new(hbar, 0.0), &Domain::Whole, 1e-10).unwrap();
        let radial = |w: &[f64]| Complex64::new(w[0] * (-(w[0] * w[0] - 1.0).powi(2) / 4.0 / hbar).exp(), 0.0);
        let (r, _) = integrate_function(&radial, &[(0.0, f64::INFINITY)], &[1.0], 1e-12).unwrap();
        let polar = 2.0 * PI * r;
        assert!(((full - polar) / polar).norm() < 1e-8, "{full} vs {polar}");
    }

    #[test]
    fn quartic_against_dense_reference() {
        let hbar = 0.01;
        let i = integrand("1/2*x^2 + x^4", "1", &["x"]);
        let v = integrate_numeric(&i, Complex64::new(hbar, 0.0), &Domain::Whole, 1e-13).unwrap();
        // composite Gauss-Legendre reference on [-2, 2]
        let (xs, ws) = crate::quadrature::gauss_legendre(400, -2.0, 2.0);
        let r: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (-(x * x / 2.0 + x.powi(4)) / hbar).exp()).sum();
        assert!((v.re - r).abs() < 1e-10 * r, "{v} vs {r}");
    }

    #[test]
    fn plateau_shape() {
        assert_eq!(plateau(0.5), 1.0);
        assert_eq!(plateau(-2.5), 0.0);
        assert!((plateau(1.5) - 0.5).abs() < 1e-15);
        assert!(plateau(1.2) > plateau(1.8));
    }

    #[test]
    fn fresnel_integral() {
        let t = 0.1;
        let i = integrand("1/2*x^2", "1", &["x"]);
        let r = oscillatory_integrate_1d(&i, t, 0.2, 6).unwrap();
        let want = (Complex64::new(0.0, 2.0 * PI * t)).sqrt();
        assert!((r.value - want).norm() < 1e-4, "{} vs {want}", r.value);
    }

    #[test]
    fn oscillatory_degenerate_inputs() {
        let zero = integrand("1/2*x^2", "0", &["x"]);
        let r = oscillatory_integrate_1d(&zero, 0.1, 0.2, 4).unwrap();
        assert_eq!(r.value, Complex64::new(0.0, 0.0));
        let flat = integrand("3", "1", &["x"]);
        assert!(matches!(oscillatory_integrate_1d(&flat, 0.1, 0.2, 4), Err(Error::ExtrapolationUnstable(_))));
    }

    #[test]
    fn slope_fit() {
        let xs = [1.0f64, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((fit_slope(&xs, &ys) - 2.0).abs() < 1e-14);
    }
}
