use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bcq_core::numerics::{parse_rational, DEFAULT_PRECISION_BUDGET};
use bcq_core::rates::derive_divergence_rate;
use bcq_core::{ConvergenceRate, DivergenceRate, EventModel, GFunction, LiminfWitness, Rational, SpeckerPartialSums};
use serde::Deserialize;
use serde_json::Value;

pub const PRECISION_ENV: &str = "BCQ_PRECISION_BUDGET";

/// `ω` as written in a config: a closed form, or derived from the model.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OmegaConfig {
    Derived(DerivedOmega),
    Rate(DivergenceRate),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedOmega {
    #[serde(rename = "kind")]
    _kind: DerivedTag,
    #[serde(default = "default_derived_n_max")]
    n_max: u64,
    #[serde(default = "default_search_budget")]
    budget: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DerivedTag {
    Derived,
}

fn default_derived_n_max() -> u64 {
    256
}

fn default_search_budget() -> u64 {
    1 << 20
}

#[derive(Debug, Clone, Deserialize)]
pub struct OracleConfig {
    pub seed: u64,
    #[serde(default = "default_oracle_count")]
    pub count: usize,
}

fn default_oracle_count() -> usize {
    300
}

/// The JSON configuration shared by every command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Option<EventModel>,
    #[serde(default)]
    pub omega: Option<OmegaConfig>,
    /// A rate of convergence or a liminf witness, depending on the theorem.
    #[serde(default)]
    pub phi: Option<Value>,
    #[serde(default)]
    pub g: Option<GFunction>,
    #[serde(default)]
    pub specker: Option<SpeckerPartialSums>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub precision_budget: Option<u32>,
    /// Output path used when `--out` is not given.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// One parameter: an integer, a list, an inclusive range `"a..b"`, or a
/// rational `"p/q"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamValue {
    Ints(Vec<u64>),
    Rational(Rational),
}

impl<'de> Deserialize<'de> for ParamValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        ParamValue::from_json(&v).map_err(serde::de::Error::custom)
    }
}

impl ParamValue {
    fn from_json(v: &Value) -> Result<Self, String> {
        match v {
            Value::Number(n) => {
                n.as_u64().map(|x| Self::Ints(vec![x])).ok_or_else(|| format!("{n} is not a non-negative integer"))
            }
            Value::Array(items) => items
                .iter()
                .map(|x| x.as_u64().ok_or_else(|| format!("{x} is not a non-negative integer")))
                .collect::<Result<_, _>>()
                .map(Self::Ints),
            Value::String(s) => Self::parse(s),
            other => Err(format!("unsupported parameter {other}")),
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        if let Some((a, b)) = s.split_once("..") {
            return parse_range(a, b).map(Self::Ints);
        }
        if let Ok(x) = s.trim().parse::<u64>() {
            return Ok(Self::Ints(vec![x]));
        }
        parse_rational(s).map(Self::Rational).map_err(|e| e.to_string())
    }
}

/// Inclusive `a..b`; `a..=b` is accepted too.
pub fn parse_range(a: &str, b: &str) -> Result<Vec<u64>, String> {
    let lo: u64 = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
    let hi: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end {b:?}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}..{hi}"));
    }
    Ok((lo..=hi).collect())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Enclosure budget in bits, overridable through the environment.
    pub fn precision_budget(&self) -> Result<u32> {
        if let Ok(raw) = std::env::var(PRECISION_ENV) {
            let bits: u32 =
                raw.trim().parse().with_context(|| format!("{PRECISION_ENV}={raw:?} is not a bit count"))?;
            if bits == 0 {
                bail!("{PRECISION_ENV} must be positive");
            }
            return Ok(bits);
        }
        Ok(self.precision_budget.unwrap_or(DEFAULT_PRECISION_BUDGET))
    }

    pub fn model(&self) -> Result<&EventModel> {
        self.model.as_ref().context("config needs a \"model\"")
    }

    pub fn g(&self) -> Result<&GFunction> {
        self.g.as_ref().context("config needs \"g\"")
    }

    pub fn specker(&self) -> Result<&SpeckerPartialSums> {
        self.specker.as_ref().context("config needs \"specker\"")
    }

    /// `ω`, deriving the least table from the model when asked to.
    pub fn omega(&self) -> Result<DivergenceRate> {
        match self.omega.as_ref().context("config needs \"omega\"")? {
            OmegaConfig::Rate(r) => Ok(r.clone()),
            OmegaConfig::Derived(d) => derive_divergence_rate(self.model()?, d.n_max, d.budget).context("deriving ω"),
        }
    }

    pub fn convergence_rate(&self) -> Result<ConvergenceRate> {
        let v = self.phi.clone().context("config needs \"phi\"")?;
        serde_json::from_value(v).context("\"phi\" is not a rate of convergence")
    }

    pub fn liminf_witness(&self) -> Result<LiminfWitness> {
        match self.phi.clone() {
            None => Ok(LiminfWitness::Searched { budget: default_search_budget() }),
            Some(v) => serde_json::from_value(v).context("\"phi\" is not a liminf witness"),
        }
    }

    pub fn ints(&self, name: &str) -> Result<Option<Vec<u64>>> {
        match self.params.get(name) {
            None => Ok(None),
            Some(ParamValue::Ints(v)) => Ok(Some(v.clone())),
            Some(ParamValue::Rational(_)) => bail!("parameter {name:?} must be an integer, list or range"),
        }
    }

    pub fn rational(&self, name: &str) -> Result<Option<Rational>> {
        match self.params.get(name) {
            None => Ok(None),
            Some(ParamValue::Rational(r)) => Ok(Some(r.clone())),
            Some(ParamValue::Ints(v)) if v.len() == 1 => Ok(Some(Rational::from_integer(v[0].into()))),
            Some(ParamValue::Ints(_)) => bail!("parameter {name:?} must be a single rational"),
        }
    }

    pub fn required_rational(&self, name: &str) -> Result<Rational> {
        self.rational(name)?.with_context(|| format!("missing parameter {name:?}"))
    }
}

/// The integer grid: every combination of the named axes, in
/// lexicographic order of the axis list.
pub fn grid(config: &RunConfig, axes: &[(&str, Option<u64>)]) -> Result<Vec<BTreeMap<String, u64>>> {
    let mut points = vec![BTreeMap::new()];
    for (name, default) in axes {
        let values = match (config.ints(name)?, default) {
            (Some(v), _) => v,
            (None, Some(d)) => vec![*d],
            (None, None) => bail!("missing parameter {name:?}"),
        };
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.insert(name.to_string(), v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}
