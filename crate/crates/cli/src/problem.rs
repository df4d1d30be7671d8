//! Problem files: a JSON document with expressions as strings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wicklab::formal::{default_names, format_polynomial, parse_coefficient, parse_expression, Exact, Polynomial, Scalar};
use wicklab::gauge::{Generator, GroupAction, Slice, WeightedGauge};
use wicklab::linalg::Matrix;
use wicklab::morsebott::{Base, Fibration};
use wicklab::Error;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Exact,
    Float,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<String>>,
    pub action: String,
    #[serde(default = "one")]
    pub observable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morse_bott: Option<MorseBottBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
}

fn one() -> String {
    "1".into()
}

/// A polynomial map `x ↦ Φ(x)` and the point it is anchored at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformBlock {
    pub components: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeBlock {
    /// One `d × d` matrix per generator.
    pub generators: Vec<Vec<Vec<String>>>,
    /// Constant parts of affine generators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<Vec<String>>>,
    pub slice: SliceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate_slice: Option<SliceSpec>,
    /// Parameter ranges of an affine slice for numeric integration; `null`
    /// is unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<Vec<(Option<f64>, Option<f64>)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted: Option<WeightedSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_set: Option<LevelSetSpec>,
    /// Point of `Z` on the slice to expand about.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub base: Vec<String>,
    pub directions: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSetSpec {
    #[serde(rename = "F")]
    pub f: Vec<String>,
    pub q0: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedSpec {
    #[serde(rename = "F")]
    pub f: Vec<String>,
    pub h: String,
    pub q0: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_variables: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorseBottBlock {
    pub fibration: FibrationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate: Option<FibrationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FibrationSpec {
    /// Radial fibers over the circle `|x| = radius` in the plane.
    CircleRadial {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shear: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bend: Option<f64>,
    },
    /// Base along coordinate `base_index` over an interval or a circle
    /// `[start, period]`; fibers along the remaining coordinates.
    CoordinateLine {
        base_index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval: Option<(f64, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        circle: Option<(f64, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shear: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bend: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub grid: Vec<f64>,
    /// Critical points whose series are summed (defaults to `point`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tolerance: Option<f64>,
}

fn canonical_coeffs(v: &[String]) -> Result<Vec<String>, Error> {
    v.iter().map(|s| parse_coefficient(s).map(|c| c.to_text())).collect()
}

fn canonical_exprs(v: &[String], names: &[String]) -> Result<Vec<String>, Error> {
    v.iter().map(|s| parse_expression(s, names).map(|p| format_polynomial(&p, names))).collect()
}

fn canonical_slice(s: &SliceSpec, names: &[String]) -> Result<SliceSpec, Error> {
    Ok(SliceSpec {
        affine: s
            .affine
            .as_ref()
            .map(|a| -> Result<_, Error> {
                Ok(AffineSpec {
                    base: canonical_coeffs(&a.base)?,
                    directions: a.directions.iter().map(|d| canonical_coeffs(d)).collect::<Result<_, _>>()?,
                })
            })
            .transpose()?,
        level_set: s
            .level_set
            .as_ref()
            .map(|l| -> Result<_, Error> { Ok(LevelSetSpec { f: canonical_exprs(&l.f, names)?, q0: canonical_coeffs(&l.q0)? }) })
            .transpose()?,
        point: s.point.as_deref().map(canonical_coeffs).transpose()?,
    })
}

impl Problem {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problems serialize")
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.clone().unwrap_or_else(|| default_names(self.dimension))
    }

    /// Same problem with every expression and number in canonical text form.
    pub fn canonical(&self) -> Result<Self, CliError> {
        self.validate()?;
        let names = self.names();
        let expr = |s: &str| parse_expression(s, &names).map(|p| format_polynomial(&p, &names));
        let gauge = match &self.gauge {
            None => None,
            Some(g) => Some(GaugeBlock {
                generators: g
                    .generators
                    .iter()
                    .map(|m| m.iter().map(|r| canonical_coeffs(r)).collect::<Result<_, _>>())
                    .collect::<Result<_, _>>()?,
                shifts: g.shifts.as_ref().map(|s| s.iter().map(|r| canonical_coeffs(r)).collect::<Result<_, _>>()).transpose()?,
                slice: canonical_slice(&g.slice, &names)?,
                alternate_slice: g.alternate_slice.as_ref().map(|s| canonical_slice(s, &names)).transpose()?,
                ranges: g.ranges.clone(),
                weighted: match &g.weighted {
                    None => None,
                    Some(w) => {
                        let targets = target_names(w);
                        Some(WeightedSpec {
                            f: canonical_exprs(&w.f, &names)?,
                            h: format_polynomial(&parse_expression(&w.h, &targets)?, &targets),
                            q0: canonical_coeffs(&w.q0)?,
                            target_variables: w.target_variables.clone(),
                        })
                    }
                },
            }),
        };
        Ok(Problem {
            dimension: self.dimension,
            variables: self.variables.clone(),
            action: expr(&self.action)?,
            observable: expr(&self.observable)?,
            point: self.point.as_deref().map(canonical_coeffs).transpose()?,
            order: self.order,
            backend: self.backend,
            transform: match &self.transform {
                None => None,
                Some(t) => Some(TransformBlock {
                    components: canonical_exprs(&t.components, &names)?,
                    anchor: t.anchor.as_deref().map(canonical_coeffs).transpose()?,
                }),
            },
            gauge,
            morse_bott: self.morse_bott.clone(),
            sweep: match &self.sweep {
                None => None,
                Some(s) => Some(SweepBlock {
                    points: s.points.as_ref().map(|ps| ps.iter().map(|p| canonical_coeffs(p)).collect::<Result<_, _>>()).transpose()?,
                    ..s.clone()
                }),
            },
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let names = self.names();
        if names.len() != self.dimension {
            return Err(CliError::Usage(format!("{} variable names for dimension {}", names.len(), self.dimension)));
        }
        if let Some(p) = &self.point {
            if p.len() != self.dimension {
                return Err(Error::DimensionMismatch { expected: self.dimension, found: p.len() }.into());
            }
        }
        Ok(())
    }

    pub fn action_poly<C: Scalar>(&self) -> Result<Polynomial<C>, CliError> {
        Ok(lift(&parse_expression(&self.action, &self.names())?))
    }

    pub fn observable_poly<C: Scalar>(&self) -> Result<Polynomial<C>, CliError> {
        Ok(lift(&parse_expression(&self.observable, &self.names())?))
    }

    pub fn point<C: Scalar>(&self) -> Result<Vec<C>, CliError> {
        let p = self.point.as_ref().ok_or_else(|| CliError::Usage("the problem has no expansion `point`".into()))?;
        coeffs(p)
    }

    pub fn expressions<C: Scalar>(&self, v: &[String]) -> Result<Vec<Polynomial<C>>, CliError> {
        let names = self.names();
        v.iter().map(|s| Ok(lift(&parse_expression(s, &names)?))).collect()
    }
}

pub fn lift<C: Scalar>(p: &Polynomial<Exact>) -> Polynomial<C> {
    p.map_coeffs(|c| C::from_rationals(&c.re, &c.im))
}

pub fn coeffs<C: Scalar>(v: &[String]) -> Result<Vec<C>, CliError> {
    v.iter().map(|s| parse_coefficient(s).map(|c| C::from_rationals(&c.re, &c.im)).map_err(CliError::from)).collect()
}

fn target_names(w: &WeightedSpec) -> Vec<String> {
    w.target_variables.clone().unwrap_or_else(|| {
        if w.f.len() == 1 {
            vec!["q".to_string()]
        } else {
            (1..=w.f.len()).map(|i| format!("q{i}")).collect()
        }
    })
}

impl GaugeBlock {
    pub fn action<C: Scalar>(&self, dim: usize) -> Result<GroupAction<C>, CliError> {
        let mut gens = Vec::with_capacity(self.generators.len());
        for (a, m) in self.generators.iter().enumerate() {
            let rows = m.iter().map(|r| coeffs(r)).collect::<Result<Vec<Vec<C>>, _>>()?;
            let matrix = Matrix::from_rows(rows)?;
            let shift = match &self.shifts {
                Some(s) => coeffs(s.get(a).ok_or_else(|| CliError::Usage(format!("missing shift for generator {a}")))?)?,
                None => vec![C::zero(); dim],
            };
            gens.push(Generator { matrix, shift });
        }
        Ok(GroupAction::new(dim, gens)?)
    }

    pub fn weighted<C: Scalar>(&self, problem: &Problem) -> Result<WeightedGauge<C>, CliError> {
        let w = self.weighted.as_ref().ok_or_else(|| CliError::Usage("the gauge block has no `weighted` section".into()))?;
        let targets = target_names(w);
        let h = lift(&parse_expression(&w.h, &targets)?);
        Ok(WeightedGauge::new(problem.expressions(&w.f)?, h, coeffs(&w.q0)?)?)
    }

    pub fn ranges(&self) -> Result<Vec<(f64, f64)>, CliError> {
        let r = self.ranges.as_ref().ok_or_else(|| CliError::Usage("the gauge block has no slice `ranges`".into()))?;
        Ok(r.iter().map(|(a, b)| (a.unwrap_or(f64::NEG_INFINITY), b.unwrap_or(f64::INFINITY))).collect())
    }
}

impl SliceSpec {
    pub fn slice<C: Scalar>(&self, problem: &Problem) -> Result<Slice<C>, CliError> {
        match (&self.affine, &self.level_set) {
            (Some(a), None) => Ok(Slice::Affine {
                base: coeffs(&a.base)?,
                directions: a.directions.iter().map(|d| coeffs(d)).collect::<Result<_, _>>()?,
            }),
            (None, Some(l)) => Ok(Slice::LevelSet { f: problem.expressions(&l.f)?, q0: coeffs(&l.q0)? }),
            _ => Err(CliError::Usage("a slice needs exactly one of `affine` or `level_set`".into())),
        }
    }

    pub fn point<C: Scalar>(&self, problem: &Problem) -> Result<Vec<C>, CliError> {
        match &self.point {
            Some(p) => coeffs(p),
            None => problem.point(),
        }
    }
}

impl FibrationSpec {
    pub fn build(&self, dim: usize) -> Result<Fibration, CliError> {
        let (fib, shear, bend) = match self {
            FibrationSpec::CircleRadial { radius, shear, bend } => {
                if dim != 2 {
                    return Err(CliError::Usage("circle-radial fibrations live in dimension 2".into()));
                }
                (Fibration::circle_radial(*radius), shear, bend)
            }
            FibrationSpec::CoordinateLine { base_index, interval, circle, shear, bend } => {
                if *base_index >= dim {
                    return Err(Error::IndexOutOfRange { index: *base_index, dim }.into());
                }
                let base = match (interval, circle) {
                    (Some((a, b)), None) => Base::Interval { a: *a, b: *b },
                    (None, Some((start, period))) => Base::Circle { start: *start, period: *period },
                    _ => return Err(CliError::Usage("a coordinate-line base needs exactly one of `interval` or `circle`".into())),
                };
                (Fibration::coordinate_line(dim, *base_index, base), shear, bend)
            }
        };
        let fib = match shear {
            Some(s) => fib.sheared(*s),
            None => fib,
        };
        Ok(match bend {
            Some(k) => fib.bent(*k),
            None => fib,
        })
    }
}
