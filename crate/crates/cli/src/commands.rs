use num_rational::BigRational;
use num_traits::Zero;
use serde_json::{json, Value};
use wicklab::expansion::{
    find_critical_point, total_derivative, transform_integrand, wick_expand, FormalDiffeo, Integrand, WickSeries, NEWTON_TOL,
};
use wicklab::formal::text::parse_real_constant;
use wicklab::formal::{Backend, Exact, Float, Polynomial, Scalar};
use wicklab::gauge::{check_fp_volume_numeric, gauge_fixed_expand_slice, weighted_fp_integrand};
use wicklab::lattice::{run_cancellation_demo, LatticeSpec, ZeroMode};
use wicklab::morsebott::{wick_expand_morsebott, DEFAULT_NODES};
use wicklab::oracle::asymptotics_sweep;

use crate::problem::{coeffs, BackendChoice, Problem};
use crate::CliError;

/// Flags shared by all subcommands.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub order: Option<i32>,
    pub backend: Option<BackendChoice>,
    pub tolerance: Option<f64>,
    pub nodes: Option<usize>,
    pub grid: Option<Vec<f64>>,
    pub seed: u64,
}

/// A report and whether the identity it checks held.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: Value,
    pub csv: Option<String>,
    pub passed: bool,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Self { report, csv: None, passed: true }
    }

    fn check(report: Value, passed: bool) -> Self {
        Self { report, csv: None, passed }
    }
}

const DEFAULT_ORDER: i32 = 2;

fn order(p: &Problem, s: &Settings) -> i32 {
    s.order.or(p.order).unwrap_or(DEFAULT_ORDER)
}

fn backend(p: &Problem, s: &Settings) -> BackendChoice {
    s.backend.or(p.backend).unwrap_or_default()
}

fn tolerance<C: Scalar>(s: &Settings, float_default: f64) -> f64 {
    match C::BACKEND {
        Backend::Exact => 0.0,
        Backend::Float => s.tolerance.unwrap_or(float_default),
    }
}

fn series_json<C: Scalar>(w: &WickSeries<C>) -> Value {
    serde_json::to_value(w.to_json()).expect("series serialize")
}

fn integrand<C: Scalar>(p: &Problem) -> Result<Integrand<C>, CliError> {
    Ok(Integrand::new(p.action_poly()?, p.observable_poly()?)?)
}

/// The problem's point; in float mode refined to a critical point by Newton.
fn expansion_point<C: Scalar>(p: &Problem, action: &Polynomial<C>) -> Result<Vec<C>, CliError> {
    let x0: Vec<C> = p.point()?;
    if C::BACKEND == Backend::Exact {
        return Ok(x0);
    }
    let guess: Vec<f64> = x0.iter().map(|c| c.to_c64().re).collect();
    let refined = find_critical_point(&action.map_coeffs(|c| c.to_c64()), &guess, NEWTON_TOL, 100)?;
    refined
        .into_iter()
        .map(|v| {
            let re = BigRational::from_float(v).ok_or_else(|| CliError::Usage(format!("non-finite critical point coordinate {v}")))?;
            Ok(C::from_rationals(&re, &BigRational::zero()))
        })
        .collect()
}

macro_rules! dispatch {
    ($p:expr, $s:expr, $f:ident) => {
        match backend($p, $s) {
            BackendChoice::Exact => $f::<Exact>($p, $s),
            BackendChoice::Float => $f::<Float>($p, $s),
        }
    };
}

pub fn expand(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    dispatch!(p, s, expand_in)
}

fn expand_in<C: Scalar>(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let i = integrand::<C>(p)?;
    let x0 = expansion_point(p, &i.action)?;
    Ok(Outcome::ok(series_json(&wick_expand(&i, &x0, order(p, s))?)))
}

pub fn transform(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    dispatch!(p, s, transform_in)
}

/// Expands the integrand about `Φ(anchor)` and its pullback about `anchor`.
fn transform_in<C: Scalar>(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let t = p.transform.as_ref().ok_or_else(|| CliError::Usage("the problem has no `transform` block".into()))?;
    let n = order(p, s);
    let i = integrand::<C>(p)?;
    let anchor: Vec<C> = match &t.anchor {
        Some(a) => coeffs(a)?,
        None => p.point()?,
    };
    let phi = FormalDiffeo::with_anchor(p.expressions(&t.components)?, anchor.clone())?;
    let x0 = phi.apply(&anchor)?;
    let pulled = transform_integrand(&i, &phi, Some((2 * n + 2) as u32))?;
    let (original, transformed) =
        rayon::join(|| wick_expand(&i, &x0, n), || wick_expand(&pulled, &anchor, n));
    let (original, transformed) = (original?, transformed?);
    let agree = transformed.normalized_eq(&original, tolerance::<C>(s, 1e-9));
    Ok(Outcome::check(
        json!({ "original": series_json(&original), "transformed": series_json(&transformed), "agree": agree }),
        agree,
    ))
}

pub fn check_ibp(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    dispatch!(p, s, check_ibp_in)
}

/// Expands `∂_i(f e^{-S/ħ})` for every coordinate; all series must vanish.
fn check_ibp_in<C: Scalar>(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let i = integrand::<C>(p)?;
    let x0 = expansion_point(p, &i.action)?;
    let n = order(p, s);
    let tol = tolerance::<C>(s, 1e-9);
    let mut rows = Vec::new();
    let mut all_zero = true;
    for k in 0..i.dim() {
        let w = wick_expand(&total_derivative(&i, k)?, &x0, n)?;
        let zero = w.is_zero_series(tol);
        all_zero &= zero;
        rows.push(json!({ "coordinate": k, "series": series_json(&w), "zero": zero }));
    }
    Ok(Outcome::check(json!({ "derivatives": rows, "all_zero": all_zero }), all_zero))
}

pub fn morse_bott(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    dispatch!(p, s, morse_bott_in)
}

fn morse_bott_in<C: Scalar>(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let mb = p.morse_bott.as_ref().ok_or_else(|| CliError::Usage("the problem has no `morse_bott` block".into()))?;
    let i = integrand::<C>(p)?;
    let n = order(p, s);
    let nodes = s.nodes.or(mb.nodes).unwrap_or(DEFAULT_NODES);
    let series = wick_expand_morsebott(&i, &mb.fibration.build(p.dimension)?, n, nodes)?;
    let mut report = serde_json::to_value(series.to_json()).expect("series serialize");
    let mut passed = true;
    if let Some(alt) = &mb.alternate {
        let other = wick_expand_morsebott(&i, &alt.build(p.dimension)?, n, nodes)?;
        let tol = s.tolerance.unwrap_or(1e-9);
        passed = series.series.normalized_eq(&other.series, tol);
        report = json!({ "series": report, "alternate": other.to_json(), "agree": passed });
    }
    Ok(Outcome::check(report, passed))
}

pub fn gauge_slice(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    dispatch!(p, s, gauge_slice_in)
}

fn gauge_slice_in<C: Scalar>(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let g = p.gauge.as_ref().ok_or_else(|| CliError::Usage("the problem has no `gauge` block".into()))?;
    let i = integrand::<C>(p)?;
    let action = g.action::<C>(p.dimension)?;
    let n = order(p, s);
    let series = gauge_fixed_expand_slice(&i, &action, &g.slice.slice(p)?, &g.slice.point(p)?, n)?;
    let Some(alt) = &g.alternate_slice else {
        return Ok(Outcome::ok(series_json(&series)));
    };
    let other = gauge_fixed_expand_slice(&i, &action, &alt.slice(p)?, &alt.point(p)?, n)?;
    let agree = series.normalized_eq(&other, tolerance::<C>(s, 1e-9));
    Ok(Outcome::check(json!({ "series": series_json(&series), "alternate": series_json(&other), "agree": agree }), agree))
}

pub fn gauge_weighted(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    dispatch!(p, s, gauge_weighted_in)
}

fn gauge_weighted_in<C: Scalar>(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let g = p.gauge.as_ref().ok_or_else(|| CliError::Usage("the problem has no `gauge` block".into()))?;
    let i = integrand::<C>(p)?;
    let action = g.action::<C>(p.dimension)?;
    let wg = g.weighted::<C>(p)?;
    let z = g.slice.point::<C>(p)?;
    let n = order(p, s);
    let (sliced, weighted) = rayon::join(
        || gauge_fixed_expand_slice(&i, &action, &g.slice.slice(p)?, &z, n).map_err(CliError::from),
        || -> Result<_, CliError> { Ok(wick_expand(&weighted_fp_integrand(&i, &action, &wg, n)?, &z, n)?) },
    );
    let (sliced, weighted) = (sliced?, weighted?);
    let agree = weighted.normalized_eq(&sliced, tolerance::<C>(s, 1e-9));
    Ok(Outcome::check(json!({ "slice": series_json(&sliced), "weighted": series_json(&weighted), "agree": agree }), agree))
}

fn grid(p: &Problem, s: &Settings, fallback: &[f64]) -> Vec<f64> {
    s.grid.clone().or_else(|| p.sweep.as_ref().map(|w| w.grid.clone())).unwrap_or_else(|| fallback.to_vec())
}

pub fn fp_volume(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let g = p.gauge.as_ref().ok_or_else(|| CliError::Usage("the problem has no `gauge` block".into()))?;
    let i = integrand::<Float>(p)?;
    let action = g.action::<Float>(p.dimension)?;
    let slice = g.slice.slice::<Float>(p)?;
    let ranges = g.ranges()?;
    let tol = s.tolerance.unwrap_or(1e-8);
    let mut rows = Vec::new();
    let mut passed = true;
    for h in grid(p, s, &[0.1]) {
        let r = check_fp_volume_numeric(&i, &action, &slice, &ranges, h, tol * 1e-2)?;
        passed &= r.relative_error <= tol;
        rows.push(serde_json::to_value(&r).expect("report serializes"));
    }
    Ok(Outcome::check(json!({ "reports": rows, "tolerance": tol, "passed": passed }), passed))
}

pub fn asymptotics(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let n = order(p, s);
    let exact = integrand::<Exact>(p)?;
    let float = exact.to_float();
    let series: Vec<WickSeries<Float>> = if let Some(mb) = &p.morse_bott {
        let nodes = s.nodes.or(mb.nodes).unwrap_or(DEFAULT_NODES);
        vec![wick_expand_morsebott(&float, &mb.fibration.build(p.dimension)?, n, nodes)?.series]
    } else {
        let points = match p.sweep.as_ref().and_then(|w| w.points.clone()) {
            Some(ps) => ps,
            None => vec![p.point.clone().ok_or_else(|| CliError::Usage("the problem has no expansion `point`".into()))?],
        };
        points
            .iter()
            .map(|pt| -> Result<_, CliError> {
                let x0: Vec<Exact> = coeffs(pt)?;
                Ok(wick_expand(&exact, &x0, n)?.to_float())
            })
            .collect::<Result<_, _>>()?
    };
    let center: Vec<f64> = match &p.point {
        Some(pt) => coeffs::<Float>(pt)?.iter().map(|c| c.re).collect(),
        None => vec![0.0; p.dimension],
    };
    let grid = grid(p, s, &[0.02, 0.01, 0.005, 0.0025]);
    let report = asymptotics_sweep(&float, &center, &series, &grid, n)?;
    let mut summary = report.summary_json();
    summary["series"] = Value::Array(series.iter().map(series_json).collect());
    let mut passed = true;
    if let Some(expected) = p.sweep.as_ref().and_then(|w| w.expected_slope) {
        let tol = p.sweep.as_ref().and_then(|w| w.slope_tolerance).unwrap_or(0.3);
        let slope = *report.slopes.last().expect("at least one order");
        passed = (slope - expected).abs() <= tol;
        summary["expected_slope"] = json!(expected);
        summary["passed"] = json!(passed);
    }
    Ok(Outcome { report: summary, csv: Some(report.to_csv()), passed })
}

/// Flags of the lattice demo.
#[derive(Clone, Debug)]
pub struct LatticeArgs {
    pub n: usize,
    pub dim: usize,
    pub spacing: String,
    pub zero_mode: ZeroMode,
}

pub fn lattice_demo(args: &LatticeArgs, s: &Settings) -> Result<Outcome, CliError> {
    let spacing = parse_real_constant(&args.spacing)?;
    let spec = LatticeSpec::new(args.dim, args.n, spacing)?;
    let r = run_cancellation_demo(&spec, s.order.unwrap_or(1), args.zero_mode)?;
    Ok(Outcome::check(r.to_json(), r.cancels()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> Problem {
        Problem::from_json(r#"{"dimension": 1, "variables": ["x"], "action": "1/2*x^2 + x^4", "point": ["0"]}"#).unwrap()
    }

    #[test]
    fn expand_quartic() {
        let out = expand(&quartic(), &Settings { order: Some(2), ..Default::default() }).unwrap();
        assert_eq!(out.report["coeffs"], json!(["1", "-3", "105/2"]));
        assert!(out.passed);
    }

    #[test]
    fn float_backend_refines_the_point() {
        let mut p = quartic();
        p.point = Some(vec!["0.01".into()]);
        let out = expand(&p, &Settings { order: Some(1), backend: Some(BackendChoice::Float), ..Default::default() }).unwrap();
        assert_eq!(out.report["coeffs"][1].as_str().unwrap().parse::<f64>().unwrap(), -3.0);
    }

    #[test]
    fn check_ibp_passes() {
        let out = check_ibp(&quartic(), &Settings { order: Some(3), ..Default::default() }).unwrap();
        assert!(out.passed);
        assert_eq!(out.report["all_zero"], true);
    }
}
