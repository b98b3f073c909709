use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::localization::FixedPointStrategy;
use crate::scalar::{Binding, Number, ScalarExpr};

/// A scenario file: one or more localization patches of the same manifold, oracle
/// charts covering it, Stokes domains, and an optional ADHM block.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Lie parameters and other constants shared by every section.
    #[serde(default)]
    pub params: BTreeMap<String, Number>,
    #[serde(default)]
    pub patches: Vec<Patch>,
    #[serde(default)]
    pub oracle: Vec<OracleChartSpec>,
    #[serde(default)]
    pub stokes: Vec<StokesCase>,
    #[serde(default)]
    pub adhm: Option<AdhmSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Closed form of the integral; `pi` is bound.
    #[serde(default)]
    pub expected: Option<String>,
    /// Restricts the report to these checks. Absent means every applicable check.
    #[serde(default)]
    pub checks: Option<Vec<String>>,
}

/// Coordinates, group action, ξ, metric and Q on one chart.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Model {
    pub even: Vec<String>,
    /// Odd generator names; defaults to th1..thm.
    #[serde(default)]
    pub odd: Option<Vec<String>>,
    /// `action[α][i]` = T_α^i.
    pub action: Vec<Vec<String>>,
    /// `fiber[α][B][A]`; defaults to the tautological lift.
    #[serde(default)]
    pub fiber: Option<Vec<Vec<Vec<String>>>>,
    pub xi: Vec<String>,
    /// Body metric h_ij; defaults to the identity.
    #[serde(default)]
    pub metric: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub q: QSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QSpec {
    /// Q = d + i_{ξ*}.
    #[default]
    Tautological,
    /// Q = ∂ + i_{ξ*} with coordinates interleaved as (z1, zb1, z2, zb2, ...).
    Kahler,
    /// Components given as superfunction texts.
    Explicit { even: Vec<String>, odd: Vec<String> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Patch {
    pub name: String,
    #[serde(flatten)]
    pub model: Model,
    /// The Q-closed superfunction F. Patches without one only take part in brst-check.
    #[serde(default)]
    pub integrand: Option<String>,
    #[serde(default = "one")]
    pub orientation: i8,
    #[serde(default)]
    pub fixed_points: Option<FixedPointStrategy>,
    /// Points binding the even coordinates, used by the closedness and BRST checks.
    #[serde(default)]
    pub samples: Vec<BTreeMap<String, Number>>,
    /// Test functions for Q(Q f) = ξ̂*(f); defaults to the coordinates and generators.
    #[serde(default)]
    pub brst_functions: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleChartSpec {
    pub even: Vec<String>,
    pub lower: Vec<Real>,
    pub upper: Vec<Real>,
    #[serde(default)]
    pub metric: Option<Vec<Vec<String>>>,
    /// σ as an m×n matrix; defaults to the identity (tautological density).
    #[serde(default)]
    pub sigma: Option<Vec<Vec<String>>>,
    pub integrand: String,
    #[serde(default = "one")]
    pub orientation: i8,
    #[serde(default)]
    pub excluded: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StokesCase {
    pub name: String,
    #[serde(flatten)]
    pub model: Model,
    pub nu: String,
    pub lower: Vec<Real>,
    pub upper: Vec<Real>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdhmSpec {
    pub k: usize,
    pub n: usize,
    pub lie: AdhmParams,
    /// Random group elements for the constraint invariance check.
    #[serde(default = "default_group_elements")]
    pub group_elements: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Bindings of the Lie symbols used for the numeric checks when `lie` is symbolic.
    #[serde(default)]
    pub samples: Vec<BTreeMap<String, Number>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdhmParams {
    CartanSymbols,
    GenericSymbols,
    CartanValues { p: Vec<Number>, a: Vec<Number>, eps1: Number, eps2: Number },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// |localized − oracle| / max(1, |oracle|) and the analogous check against `expected`.
    pub compare: f64,
    /// Agreement between super and classical localization on one patch.
    pub classical: f64,
    pub quadrature: f64,
    pub stokes: f64,
    pub brst: f64,
    pub parallel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { compare: 1e-6, classical: 1e-9, quadrature: 1e-10, stokes: 1e-7, brst: 1e-8, parallel: 1e-8 }
    }
}

/// A bound: a number or an expression in `pi` and the scenario parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Num(f64),
    Expr(String),
}

fn one() -> i8 {
    1
}

fn default_group_elements() -> usize {
    50
}

fn default_seed() -> u64 {
    7
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| HarnessError::Schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Schema(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical JSON form (sorted keys, no whitespace).
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes");
        let text = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn param_binding(&self) -> Binding {
        binding_of(&self.params)
    }

    /// Parameters plus `pi`, for bounds and the expected value.
    pub fn constants(&self) -> Binding {
        self.param_binding().with_f64("pi", std::f64::consts::PI)
    }

    /// Structural checks that do not need the engine: every expression parses and the
    /// dimensions agree.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let schema = |m: String| Err(HarnessError::Schema(m));
        for p in &self.patches {
            p.model.validate(&format!("patch `{}`", p.name))?;
            if let Some(t) = &p.integrand {
                parse_check(t, &format!("patch `{}` integrand", p.name))?;
            }
            if p.orientation != 1 && p.orientation != -1 {
                return schema(format!("patch `{}`: orientation must be 1 or -1", p.name));
            }
            if p.integrand.is_some() && p.fixed_points.is_none() {
                return schema(format!("patch `{}` has an integrand but no fixed_points strategy", p.name));
            }
        }
        for (idx, c) in self.oracle.iter().enumerate() {
            let m = c.even.len();
            let what = format!("oracle chart {idx}");
            if c.lower.len() != m || c.upper.len() != m {
                return schema(format!("{what}: bounds need {m} entries"));
            }
            if let Some(h) = &c.metric {
                square_check(h, m, &what)?;
            }
            if let Some(s) = &c.sigma {
                if s.len() != m || s.iter().any(|r| r.len() != m) {
                    return schema(format!("{what}: sigma must be {m}x{m}"));
                }
                for e in s.iter().flatten() {
                    parse_check(e, &what)?;
                }
            }
            parse_check(&c.integrand, &what)?;
            if c.orientation != 1 && c.orientation != -1 {
                return schema(format!("{what}: orientation must be 1 or -1"));
            }
        }
        for s in &self.stokes {
            let what = format!("stokes `{}`", s.name);
            s.model.validate(&what)?;
            let m = s.model.even.len();
            if s.lower.len() != m || s.upper.len() != m {
                return schema(format!("{what}: bounds need {m} entries"));
            }
            parse_check(&s.nu, &what)?;
        }
        if let Some(a) = &self.adhm {
            if a.k == 0 || a.n == 0 {
                return schema("adhm: k and n must be positive".into());
            }
            if let AdhmParams::CartanValues { p, a: av, .. } = &a.lie {
                if p.len() != a.k || av.len() + 1 != a.n {
                    return schema(format!("adhm: cartan_values needs {} p entries and {} a entries", a.k, a.n - 1));
                }
                if p.iter().chain(av).any(|x| x.as_rational().is_none()) {
                    return schema("adhm: cartan_values must be exact rationals (strings)".into());
                }
            }
        }
        if let Some(e) = &self.expected {
            parse_check(e, "expected")?;
        }
        let bounds = self.oracle.iter().flat_map(|c| c.lower.iter().chain(&c.upper));
        for r in bounds.chain(self.stokes.iter().flat_map(|s| s.lower.iter().chain(&s.upper))) {
            if let Real::Expr(t) = r {
                parse_check(t, "bound")?;
            }
        }
        Ok(())
    }
}

impl Model {
    fn validate(&self, what: &str) -> Result<(), HarnessError> {
        let m = self.even.len();
        if self.action.iter().any(|t| t.len() != m) {
            return Err(HarnessError::Schema(format!("{what}: every action row needs {m} entries")));
        }
        if self.xi.len() != self.action.len() {
            return Err(HarnessError::Schema(format!("{what}: xi has {} entries for {} generators", self.xi.len(), self.action.len())));
        }
        for e in self.action.iter().flatten().chain(&self.xi) {
            parse_check(e, what)?;
        }
        if let Some(h) = &self.metric {
            square_check(h, m, what)?;
        }
        if let QSpec::Explicit { even, odd } = &self.q {
            if even.len() != m {
                return Err(HarnessError::Schema(format!("{what}: explicit Q needs {m} even components")));
            }
            if odd.len() != self.odd_names().len() {
                return Err(HarnessError::Schema(format!("{what}: explicit Q needs {} odd components", self.odd_names().len())));
            }
        }
        Ok(())
    }

    pub fn odd_names(&self) -> Vec<String> {
        match (&self.odd, &self.q) {
            (Some(o), _) => o.clone(),
            (None, QSpec::Kahler) => (1..=self.even.len() / 2).map(|a| format!("th{a}")).collect(),
            (None, _) => (1..=self.even.len()).map(|a| format!("th{a}")).collect(),
        }
    }
}

fn parse_check(text: &str, what: &str) -> Result<ScalarExpr, HarnessError> {
    ScalarExpr::parse(text).map_err(|e| HarnessError::Schema(format!("{what}: `{text}`: {e}")))
}

fn square_check(h: &[Vec<String>], m: usize, what: &str) -> Result<(), HarnessError> {
    if h.len() != m || h.iter().any(|r| r.len() != m) {
        return Err(HarnessError::Schema(format!("{what}: metric must be {m}x{m}")));
    }
    for e in h.iter().flatten() {
        parse_check(e, what)?;
    }
    Ok(())
}

pub(crate) fn binding_of(map: &BTreeMap<String, Number>) -> Binding {
    let mut b = Binding::new();
    for (k, v) in map {
        b.set(k, v.clone());
    }
    b
}
