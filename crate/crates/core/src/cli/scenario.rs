//! Scenario files: one JSON document describing lattice, stencil,
//! coefficients, data and study parameters.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::Problem;
use crate::error::{Error, Result};
use crate::fields::{check_dim, parse_expr, time_samples, CoefficientSet, DataSet, FieldExpr, Lattice, TIME_SAMPLES};
use crate::operator::{manufacture_rhs, Scheme, DEFAULT_MAX_SPACING};
use crate::parabolic::Integrator;
use crate::stencil::{StencilSet, StencilVector};
use crate::validate::{ProbeParams, TestBank};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StencilSpec {
    pub vectors: Vec<Vec<i32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative_weight: Option<f64>,
}

/// Coefficients keyed by stencil vector written as `"1"`, `"-1"`, `"1,0"`, ...
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    #[serde(default)]
    pub q: BTreeMap<String, String>,
    #[serde(default)]
    pub p: BTreeMap<String, String>,
    pub c: String,
    pub reaction_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    #[serde(default = "zero_string")]
    pub f: String,
    #[serde(default = "zero_string")]
    pub g: String,
}

fn zero_string() -> String {
    "0".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default)]
    pub k: usize,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_floor: Option<f64>,
    #[serde(default)]
    pub form_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elliptic_tol: Option<f64>,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            order: default_order(),
            k: 0,
            slack: default_slack(),
            q_floor: None,
            form_weight: 0.0,
            max_spacing: None,
            elliptic_tol: None,
        }
    }
}

fn default_order() -> u32 {
    3
}

fn default_slack() -> f64 {
    0.25
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Monotonicity,
    CFloor,
    QDrift,
    Symmetry,
    QFloor,
    #[serde(rename = "gradient_condition")]
    GradientCondition,
    ProbeFirstOrder,
    ProbeHigherOrder,
}

fn default_checks() -> Vec<CheckName> {
    vec![CheckName::Monotonicity, CheckName::CFloor, CheckName::QDrift]
}

fn default_integrator() -> Integrator {
    Integrator::Rk4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub lattice: LatticeSpec,
    pub stencil: StencilSpec,
    pub coefficients: CoefficientSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manufactured: Option<String>,
    pub t_final: f64,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub study: StudySpec,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckName>,
    #[serde(default)]
    pub seed: u64,
}

fn scenario_err(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

fn parse_field(src: &str, what: &str, dim: usize) -> Result<FieldExpr> {
    let e = parse_expr(src).map_err(|e| scenario_err(format!("{what}: {e}")))?;
    check_dim(&e, dim, what).map_err(|e| scenario_err(e.to_string()))?;
    Ok(e)
}

fn parse_vector_key(key: &str) -> Result<StencilVector> {
    key.split(',')
        .map(|p| p.trim().parse::<i32>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(StencilVector::new)
        .map_err(|_| scenario_err(format!("'{key}' is not a stencil vector (expected e.g. \"1,0\")")))
}

/// Validated, compiled form of a scenario.
#[derive(Clone, Debug)]
pub struct Built {
    pub stencil: StencilSet,
    pub coeffs: CoefficientSet,
    pub data: DataSet,
    pub exact: Option<FieldExpr>,
    pub max_spacing: f64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| scenario_err(format!("malformed scenario: {e}")))?;
        s.build()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| scenario_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    /// Lattice sizes for studies (`n_list`, else `[n]`).
    pub fn n_list(&self) -> Vec<usize> {
        match (&self.lattice.n_list, self.lattice.n) {
            (Some(l), _) => l.clone(),
            (None, Some(n)) => vec![n],
            (None, None) => Vec::new(),
        }
    }

    /// Lattice size for single runs (`n`, else the finest of `n_list`).
    pub fn run_n(&self) -> Option<usize> {
        self.lattice
            .n
            .or_else(|| self.lattice.n_list.as_ref().and_then(|l| l.iter().copied().max()))
    }

    /// Validation lattices: every size mentioned.
    pub fn validation_sizes(&self) -> Vec<usize> {
        let mut v = self.n_list();
        v.extend(self.lattice.n);
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn t_samples(&self) -> Vec<f64> {
        time_samples(self.t_final, TIME_SAMPLES)
    }

    pub fn probe_params(&self) -> ProbeParams {
        ProbeParams {
            order: self.study.order,
            slack: self.study.slack,
            form_weight: self.study.form_weight,
        }
    }

    pub fn test_bank(&self) -> Result<TestBank> {
        TestBank::standard(self.dim(), self.seed)
    }

    pub fn build(&self) -> Result<Built> {
        let dim = self.lattice.dim;
        if !(1..=3).contains(&dim) {
            return Err(scenario_err(format!("dimension must be 1, 2 or 3 (got {dim})")));
        }
        if self.n_list().is_empty() {
            return Err(scenario_err("lattice needs 'n' or 'n_list'"));
        }
        for n in self.validation_sizes() {
            Lattice::new(dim, n).map_err(|e| scenario_err(e.to_string()))?;
        }
        if !(self.t_final >= 0.0) {
            return Err(scenario_err("t_final must be >= 0"));
        }
        let needs_weights = self
            .checks
            .iter()
            .any(|c| matches!(c, CheckName::ProbeFirstOrder | CheckName::ProbeHigherOrder));
        if needs_weights && self.stencil.weights.is_none() {
            return Err(scenario_err("the probes need explicit 'weights' in the stencil"));
        }
        if self.checks.contains(&CheckName::QFloor) && self.study.q_floor.is_none() {
            return Err(scenario_err("the q_floor check needs 'study.q_floor'"));
        }
        let vectors: Vec<StencilVector> = self.stencil.vectors.iter().cloned().map(StencilVector::new).collect();
        let weights = self.stencil.weights.clone().unwrap_or_else(|| vec![1.0; vectors.len()]);
        let stencil = StencilSet::new(vectors, weights, self.stencil.derivative_weight.unwrap_or(1.0))
            .map_err(|e| scenario_err(e.to_string()))?;
        if stencil.dim() != dim {
            return Err(scenario_err(format!(
                "stencil vectors have {} components, lattice dimension is {dim}",
                stencil.dim()
            )));
        }
        let pairs = |m: &BTreeMap<String, String>, what: &str| -> Result<Vec<(StencilVector, FieldExpr)>> {
            m.iter()
                .map(|(k, v)| Ok((parse_vector_key(k)?, parse_field(v, &format!("{what}[{k}]"), dim)?)))
                .collect()
        };
        let coeffs = CoefficientSet::from_pairs(
            &stencil,
            &pairs(&self.coefficients.q, "q")?,
            &pairs(&self.coefficients.p, "p")?,
            parse_field(&self.coefficients.c, "c", dim)?,
            self.coefficients.reaction_floor,
        )
        .map_err(|e| scenario_err(e.to_string()))?;
        let (data, exact) = match (&self.data, &self.manufactured) {
            (Some(_), Some(_)) => return Err(scenario_err("give either 'data' or 'manufactured', not both")),
            (Some(d), None) => (
                DataSet::new(parse_field(&d.f, "f", dim)?, parse_field(&d.g, "g", dim)?)
                    .map_err(|e| scenario_err(e.to_string()))?,
                None,
            ),
            (None, Some(u0)) => {
                let u0 = parse_field(u0, "manufactured", dim)?;
                (manufacture_rhs(&coeffs, &stencil, &u0)?, Some(u0))
            }
            (None, None) => (DataSet::default(), None),
        };
        Ok(Built {
            stencil,
            coeffs,
            data,
            exact,
            max_spacing: self.study.max_spacing.unwrap_or(DEFAULT_MAX_SPACING),
        })
    }
}

impl Built {
    pub fn scheme(&self, dim: usize, n: usize) -> Result<Scheme> {
        Scheme::with_max_spacing(
            self.stencil.clone(),
            self.coeffs.clone(),
            Lattice::new(dim, n)?,
            self.max_spacing,
        )
    }

    pub fn problem(&self, scenario: &Scenario) -> Problem {
        Problem {
            name: scenario.name.clone(),
            dim: scenario.dim(),
            stencil: self.stencil.clone(),
            coeffs: self.coeffs.clone(),
            data: self.data.clone(),
            exact: self.exact.clone(),
            t_final: scenario.t_final,
            integrator: scenario.integrator,
            max_spacing: self.max_spacing,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAT: &str = r#"{
        "name": "heat",
        "lattice": {"dim": 1, "n": 32},
        "stencil": {"vectors": [[1], [-1]]},
        "coefficients": {"q": {"1": "0.5", "-1": "0.5"}, "c": "1", "reaction_floor": 1},
        "data": {"g": "sin(x)"},
        "t_final": 1
    }"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_json(HEAT).unwrap();
        assert_eq!(s.integrator, Integrator::Rk4);
        assert_eq!(s.checks, default_checks());
        let b = s.build().unwrap();
        assert_eq!(b.coeffs.q[1], FieldExpr::constant(0.5));
        assert!(b.coeffs.p.iter().all(FieldExpr::is_zero));
        assert!(b.data.f.is_zero());
    }

    #[test]
    fn round_trips_through_json() {
        let s = Scenario::from_json(HEAT).unwrap();
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Scenario::from_json("{").is_err());
        let unknown_vec = HEAT.replace("\"-1\": \"0.5\"", "\"2\": \"0.5\"");
        assert!(matches!(Scenario::from_json(&unknown_vec), Err(Error::Scenario(_))));
        let bad_expr = HEAT.replace("sin(x)", "sin(x");
        assert!(Scenario::from_json(&bad_expr).is_err());
        let wrong_dim = HEAT.replace("sin(x)", "sin(y)");
        assert!(Scenario::from_json(&wrong_dim).is_err());
        let extra = HEAT.replace("\"t_final\": 1", "\"t_final\": 1, \"bogus\": 2");
        assert!(Scenario::from_json(&extra).is_err());
    }
}
