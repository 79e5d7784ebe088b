//! Certificate-producing checkers. Each checker evaluates the hypotheses of
//! one quantitative statement exactly, then the concluded inequality, and
//! records both sides, the margin and every intermediate quantity.

use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::models::{EventModel, ModelError};
use crate::numerics::{format_rational, serde_rational, NumericsError, RatInterval, Rational};
use crate::rates::{check_divergence_rate, DivergenceRate, DivergenceVerdict, RateError};

mod borel_cantelli;
mod erdos_renyi;
mod kochen_stone;
mod specker;
mod yan;

pub use borel_cantelli::{first_bc, second_bc};
pub use erdos_renyi::{bk_tail_check, erdos_renyi, ratio_lower_bound};
pub use kochen_stone::{
    chung_erdos, kochen_stone_meta, ks_algebra_check, ks_tail_estimate, ks_tail_threshold, uniform_bound,
    MetastableWitness, MARGIN_TRACE_CAP,
};
pub use specker::{honest_specker_phi, specker_certificate, specker_reduction};
pub use yan::{wn_certificate, wn_stats, yan_certificate, yan_ratios, WnStats, YanRatios};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoremError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("ω fails at N = {n}: Σ_(i<={index}) P[A_i] = {sum} < {n}")]
    InvalidDivergenceRate { n: u64, index: u64, sum: String },
    #[error("liminf witness fails at (l, n) = ({l}, {n}): {reason}")]
    InvalidLiminfWitness { l: u32, n: u64, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("preconditions violated: {}", .0.join("; "))]
    Preconditions(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremTag {
    FirstBc,
    SecondBc,
    ErdosRenyi,
    ChungErdos,
    KsTailEstimate,
    KochenStoneMeta,
    YanRatios,
    WnLimit,
    SpeckerReduction,
    KsAlgebra,
    RatioLowerBound,
    BkTail,
}

impl TheoremTag {
    pub const ALL: [TheoremTag; 12] = [
        Self::FirstBc,
        Self::SecondBc,
        Self::ErdosRenyi,
        Self::ChungErdos,
        Self::KsTailEstimate,
        Self::KochenStoneMeta,
        Self::YanRatios,
        Self::WnLimit,
        Self::SpeckerReduction,
        Self::KsAlgebra,
        Self::RatioLowerBound,
        Self::BkTail,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::FirstBc => "first_bc",
            Self::SecondBc => "second_bc",
            Self::ErdosRenyi => "erdos_renyi",
            Self::ChungErdos => "chung_erdos",
            Self::KsTailEstimate => "ks_tail_estimate",
            Self::KochenStoneMeta => "kochen_stone_meta",
            Self::YanRatios => "yan_ratios",
            Self::WnLimit => "wn_limit",
            Self::SpeckerReduction => "specker_reduction",
            Self::KsAlgebra => "ks_algebra",
            Self::RatioLowerBound => "ratio_lower_bound",
            Self::BkTail => "bk_tail",
        }
    }
}

impl fmt::Display for TheoremTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremTag {
    type Err = String;

    /// Accepts the snake_case tag, its kebab-case form, and a few short aliases.
    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match key.as_str() {
            "kochen_stone" | "ks_meta" => Some(Self::KochenStoneMeta),
            "ks_tail" => Some(Self::KsTailEstimate),
            "yan" => Some(Self::YanRatios),
            "wn" | "wn_stats" => Some(Self::WnLimit),
            "specker" => Some(Self::SpeckerReduction),
            "ks_algebra_check" => Some(Self::KsAlgebra),
            "bk_tail_check" => Some(Self::BkTail),
            _ => None,
        };
        alias
            .or_else(|| Self::ALL.into_iter().find(|t| t.as_str() == key))
            .ok_or_else(|| format!("unknown theorem {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Undecided,
}

impl Verdict {
    /// Batch aggregate: any failure dominates, then any undecided.
    pub fn combine(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Self::Fail, _) | (_, Self::Fail) => Self::Fail,
            (Self::Undecided, _) | (_, Self::Undecided) => Self::Undecided,
            _ => Self::Pass,
        }
    }
}

/// Relation asserted between the two sides of a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    /// `|lhs - rhs| <= tolerance`, the tolerance recorded in the params.
    #[serde(rename = "within")]
    Within,
}

/// One side of a certified inequality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Side {
    Exact(#[serde(with = "serde_rational")] Rational),
    Enclosed(RatInterval),
}

impl Side {
    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Self::Exact(x) => Some(x),
            Self::Enclosed(_) => None,
        }
    }
}

impl From<Rational> for Side {
    fn from(x: Rational) -> Self {
        Self::Exact(x)
    }
}

/// A verdict binding a theorem instance to its exactly computed sides.
///
/// `margin` is oriented so that a passing certificate has `margin >= 0`:
/// `lhs - rhs` for `>=`, `rhs - lhs` for `<=`, `-|lhs - rhs|` for `=` and
/// `tolerance - |lhs - rhs|` for `within`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub theorem: TheoremTag,
    pub params: Value,
    pub lhs: Side,
    pub relation: Relation,
    pub rhs: Side,
    #[serde(with = "serde_rational")]
    pub margin: Rational,
    pub verdict: Verdict,
    pub trace: Value,
}

impl Certificate {
    /// Certificate for an exact comparison; `hypotheses` must all hold for a pass.
    pub(crate) fn exact(
        theorem: TheoremTag,
        params: Value,
        lhs: Rational,
        relation: Relation,
        rhs: Rational,
        hypotheses: bool,
        trace: Value,
    ) -> Self {
        let margin = match relation {
            Relation::Ge => &lhs - &rhs,
            Relation::Le => &rhs - &lhs,
            Relation::Eq => -(&lhs - &rhs).abs(),
            Relation::Within => {
                let tol = params
                    .get("tolerance")
                    .and_then(Value::as_str)
                    .and_then(|t| crate::numerics::parse_rational(t).ok())
                    .unwrap_or_else(Rational::zero);
                tol - (&lhs - &rhs).abs()
            }
        };
        let verdict = if hypotheses && !margin.is_negative() { Verdict::Pass } else { Verdict::Fail };
        Self { theorem, params, lhs: lhs.into(), relation, rhs: rhs.into(), margin, verdict, trace }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Canonical JSON text; identical inputs give byte-identical output.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates always serialize")
    }
}

/// Errors unless `ω` is a rate of divergence for `model` on `1..=upto`.
pub(crate) fn validate_divergence(model: &EventModel, omega: &DivergenceRate, upto: u64) -> Result<(), TheoremError> {
    match check_divergence_rate(model, omega, upto)? {
        DivergenceVerdict::Pass => Ok(()),
        DivergenceVerdict::Fail { n, index, sum } => {
            Err(TheoremError::InvalidDivergenceRate { n, index, sum: format_rational(&sum) })
        }
    }
}

/// Rational as its `"num/den"` JSON string.
pub(crate) fn rj(x: &Rational) -> Value {
    Value::String(format_rational(x))
}
