//! The functional inputs of the quantitative theorems: rates of divergence
//! `ω`, rates of convergence `φ`, liminf witnesses, and the interval builder
//! `g`, together with their validators and the generic metastability checker.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{EventModel, ModelError, StatsAccumulator, SumAccumulator};
use crate::numerics::{format_rational, pow2_neg, serde_rational, Index, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rates of divergence are defined on N >= 1")]
    ZeroArgument,
    #[error("{rate} is undefined at {arg}")]
    OutOfTable { rate: &'static str, arg: u64 },
    #[error("{0} overflows the index type")]
    Overflow(String),
    #[error("g({arg}) = {value} does not exceed its argument")]
    NotExpanding { arg: Index, value: Index },
    #[error("invalid rate parameters: {0}")]
    Invalid(String),
    #[error("partial sums did not reach {target} within {budget} terms")]
    BudgetExhausted { target: u64, budget: Index },
    #[error("no index in [{from}, {budget}] brings b/a down to 1 + 2^-{l}")]
    LiminfSearchFailed { l: u32, from: Index, budget: Index },
    #[error("no 2^-{l}-stable interval [k, f(k)] for k <= {kmax}")]
    NotMetastable { l: u32, kmax: Index, violations: Vec<(Index, Index, Index)> },
}

/// Rate of divergence: `Σ_{i=1}^{ω(N)} P[A_i] >= N` for all `N >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceRate {
    /// `ω(N) = k N`
    Linear { k: u64 },
    /// `ω(N) = ⌈N / q1⌉`
    #[serde(rename = "ceildiv")]
    CeilDiv {
        #[serde(with = "serde_rational")]
        q1: Rational,
    },
    /// `ω(N) = values[N - 1]`, continued by `ω(N) = tail_linear · N`.
    Table {
        values: Vec<Index>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_linear: Option<u64>,
    },
}

impl DivergenceRate {
    pub fn eval(&self, arg: u64) -> Result<Index, RateError> {
        if arg == 0 {
            return Err(RateError::ZeroArgument);
        }
        let overflow = || RateError::Overflow(format!("ω({arg})"));
        match self {
            Self::Linear { k } => k.checked_mul(arg).ok_or_else(overflow),
            Self::CeilDiv { q1 } => {
                if q1 <= &Rational::zero() {
                    return Err(RateError::Invalid(format!("ceildiv with q1 = {}", format_rational(q1))));
                }
                let v = Rational::from_integer(BigInt::from(arg)) / q1;
                v.ceil().to_integer().to_u64().ok_or_else(overflow)
            }
            Self::Table { values, tail_linear } => match values.get((arg - 1) as usize) {
                Some(&v) => Ok(v),
                None => match tail_linear {
                    Some(k) => k.checked_mul(arg).ok_or_else(overflow),
                    None => Err(RateError::OutOfTable { rate: "ω", arg }),
                },
            },
        }
    }
}

/// Rate of convergence `φ` for the partial sums:
/// `Σ_{i=φ(l)}^{m} P[A_i] <= 2^{-l}` for all `m > φ(l)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvergenceRate {
    /// `φ(l) = l + c`
    Affine { c: i64 },
    /// `φ(l) = values[l]`
    Table { values: Vec<Index> },
}

impl ConvergenceRate {
    pub fn eval(&self, l: u32) -> Result<Index, RateError> {
        let v = match self {
            Self::Affine { c } => i64::from(l).checked_add(*c).ok_or_else(|| RateError::Overflow(format!("φ({l})")))?,
            Self::Table { values } => {
                *values.get(l as usize).ok_or(RateError::OutOfTable { rate: "φ", arg: u64::from(l) })? as i64
            }
        };
        if v < 1 {
            return Err(RateError::Invalid(format!("φ({l}) = {v} is not a positive index")));
        }
        Ok(v as Index)
    }
}

/// `φ(l, n)` with `φ(l, n) >= n` and `b/a <= 1 + 2^{-l}` at `φ(l, n)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LiminfWitness {
    /// `φ(l, n) = max(n_scale · n + n_offset, pow_scale · 2^l)`
    Closed {
        #[serde(default = "one_u64")]
        n_scale: u64,
        #[serde(default)]
        n_offset: u64,
        #[serde(default = "one_u64")]
        pow_scale: u64,
    },
    /// Least witness found by exact search up to `budget`.
    Searched { budget: Index },
}

fn one_u64() -> u64 {
    1
}

impl LiminfWitness {
    /// `max(n, 2^l)`.
    pub fn max_n_pow2() -> Self {
        Self::Closed { n_scale: 1, n_offset: 0, pow_scale: 1 }
    }

    /// `φ(l, n) = n`.
    pub fn identity() -> Self {
        Self::Closed { n_scale: 1, n_offset: 0, pow_scale: 0 }
    }

    /// Closed-form value, `None` for `Searched`.
    pub fn eval_closed(&self, l: u32, n: Index) -> Result<Option<Index>, RateError> {
        match self {
            Self::Closed { n_scale, n_offset, pow_scale } => {
                let overflow = || RateError::Overflow(format!("φ({l}, {n})"));
                let lin = n_scale.checked_mul(n).and_then(|v| v.checked_add(*n_offset)).ok_or_else(overflow)?;
                let pow = if *pow_scale == 0 {
                    0
                } else {
                    1u64.checked_shl(l).and_then(|p| p.checked_mul(*pow_scale)).ok_or_else(overflow)?
                };
                Ok(Some(lin.max(pow)))
            }
            Self::Searched { .. } => Ok(None),
        }
    }
}

/// Interval builder `g` with `g(i) > i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GFunction {
    /// `g(n) = a n + c`
    Affine { a: u64, c: u64 },
    /// `g(n) = n^e`
    Power { e: u32 },
    /// `g(n) = values[n - 1]`
    Table { values: Vec<Index> },
}

impl fmt::Display for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Affine { a, c } => write!(f, "{a}n+{c}"),
            Self::Power { e } => write!(f, "n^{e}"),
            Self::Table { values } => write!(f, "table[{}]", values.len()),
        }
    }
}

impl GFunction {
    pub fn successor() -> Self {
        Self::Affine { a: 1, c: 1 }
    }

    pub fn doubling() -> Self {
        Self::Affine { a: 2, c: 0 }
    }

    pub fn square() -> Self {
        Self::Power { e: 2 }
    }

    /// `g(i)`, rejecting values that do not exceed `i`.
    pub fn eval(&self, i: Index) -> Result<Index, RateError> {
        let overflow = || RateError::Overflow(format!("g({i})"));
        let value = match self {
            Self::Affine { a, c } => a.checked_mul(i).and_then(|v| v.checked_add(*c)).ok_or_else(overflow)?,
            Self::Power { e } => i.checked_pow(*e).ok_or_else(overflow)?,
            Self::Table { values } => *i
                .checked_sub(1)
                .and_then(|k| values.get(k as usize))
                .ok_or(RateError::OutOfTable { rate: "g", arg: i })?,
        };
        if value <= i {
            return Err(RateError::NotExpanding { arg: i, value });
        }
        Ok(value)
    }
}

/// An index that may exceed the machine index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexBound {
    Exact(Index),
    /// Larger than `Index::MAX`.
    Beyond,
}

impl IndexBound {
    /// `bound >= n`.
    pub fn admits(&self, n: Index) -> bool {
        match self {
            Self::Exact(b) => n <= *b,
            Self::Beyond => true,
        }
    }
}

impl Serialize for IndexBound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Exact(v) => s.serialize_u64(*v),
            Self::Beyond => s.serialize_str("beyond_u64"),
        }
    }
}

impl<'de> Deserialize<'de> for IndexBound {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Exact(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Exact(v) => Ok(Self::Exact(v)),
            Raw::Text(t) if t == "beyond_u64" => Ok(Self::Beyond),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unknown bound {t:?}"))),
        }
    }
}

/// `g` applied `r` times to `start`.
pub fn iterate_g(g: &GFunction, r: u64, start: Index) -> Result<Index, RateError> {
    let mut x = start;
    for _ in 0..r {
        x = g.eval(x)?;
    }
    Ok(x)
}

/// As [`iterate_g`], reporting [`IndexBound::Beyond`] instead of overflowing.
/// Since `g(i) > i`, later iterates only grow, so an overflow certifies that
/// the true value exceeds every machine index.
pub fn iterate_g_saturating(g: &GFunction, r: u64, start: Index) -> Result<IndexBound, RateError> {
    let mut x = start;
    for _ in 0..r {
        match g.eval(x) {
            Ok(v) => x = v,
            Err(RateError::Overflow(_)) => return Ok(IndexBound::Beyond),
            Err(e) => return Err(e),
        }
    }
    Ok(IndexBound::Exact(x))
}

/// Outcome of a finite check of a universally quantified hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DivergenceVerdict {
    Pass,
    Fail { n: u64, index: Index, sum: Rational },
}

impl DivergenceVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, Self::Pass)
    }
}

/// Prefix sums `Σ_{i<=k} P[A_i]` for `k = 0..=upto`.
pub fn prefix_sums(model: &EventModel, upto: Index) -> Result<Vec<Rational>, RateError> {
    let mut acc = SumAccumulator::default();
    let mut out = Vec::with_capacity(upto as usize + 1);
    out.push(Rational::zero());
    for i in 1..=upto {
        acc.add(&model.prob(i)?);
        out.push(acc.value());
    }
    Ok(out)
}

/// Decides `Σ_{i=1}^{ω(N)} P[A_i] >= N` exactly for every `N <= n_max`.
pub fn check_divergence_rate(
    model: &EventModel,
    omega: &DivergenceRate,
    n_max: u64,
) -> Result<DivergenceVerdict, RateError> {
    let indices = (1..=n_max).map(|n| omega.eval(n)).collect::<Result<Vec<_>, _>>()?;
    let top = indices.iter().copied().max().unwrap_or(0);
    let sums = prefix_sums(model, top)?;
    for (n, &idx) in (1..=n_max).zip(&indices) {
        let sum = &sums[idx as usize];
        if sum < &Rational::from_integer(BigInt::from(n)) {
            return Ok(DivergenceVerdict::Fail { n, index: idx, sum: sum.clone() });
        }
    }
    Ok(DivergenceVerdict::Pass)
}

/// Least `ω(N)` reaching each `N <= n_max`, searching at most `budget` terms.
pub fn derive_divergence_rate(model: &EventModel, n_max: u64, budget: Index) -> Result<DivergenceRate, RateError> {
    let mut acc = SumAccumulator::default();
    let mut values = Vec::with_capacity(n_max as usize);
    let mut target = 1u64;
    let mut i: Index = 0;
    while target <= n_max {
        if acc.ge(&Rational::from_integer(BigInt::from(target))) {
            values.push(i);
            target += 1;
            continue;
        }
        if i >= budget {
            return Err(RateError::BudgetExhausted { target, budget });
        }
        i += 1;
        acc.add(&model.prob(i)?);
    }
    Ok(DivergenceRate::Table { values, tail_linear: None })
}

/// Window and exact sum of `Σ_{i=n}^{ω(n+N-1)} P[A_i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailVerdict {
    pub window_end: Index,
    pub tail_sum: Rational,
    pub passed: bool,
}

pub fn tail_divergence_bound(
    model: &EventModel,
    omega: &DivergenceRate,
    n: Index,
    big_n: u64,
) -> Result<TailVerdict, RateError> {
    if n == 0 || big_n == 0 {
        return Err(RateError::ZeroArgument);
    }
    let end = omega.eval(n + big_n - 1)?;
    let tail_sum = model.partial_sum(n, end)?;
    let passed = tail_sum >= Rational::from_integer(BigInt::from(big_n));
    Ok(TailVerdict { window_end: end, tail_sum, passed })
}

/// Searches forward for liminf witnesses, sharing one accumulator across
/// queries whose start indices do not decrease.
#[derive(Debug)]
pub struct LiminfSearcher<'a> {
    model: &'a EventModel,
    acc: StatsAccumulator<'a>,
    budget: Index,
}

impl<'a> LiminfSearcher<'a> {
    pub fn new(model: &'a EventModel, budget: Index) -> Self {
        Self { model, acc: model.accumulator(), budget }
    }

    /// Least `m` in `[start, budget]` with `b_m / a_m <= 1 + 2^{-l}`.
    pub fn find(&mut self, l: u32, start: Index) -> Result<Index, RateError> {
        let start = start.max(1);
        if self.acc.n() > start {
            self.acc = self.model.accumulator();
        }
        // b/a <= 1 + 2^-l  <=>  a/b >= 2^l / (2^l + 1)
        let scale = BigInt::one() << l as usize;
        let threshold = Rational::new(scale.clone(), scale + 1u32);
        if self.acc.n() < start {
            self.acc.advance_to(start - 1)?;
        }
        loop {
            if self.acc.n() >= start && self.acc.chung_erdos_ratio().ge(&threshold) {
                return Ok(self.acc.n());
            }
            if self.acc.n() >= self.budget {
                return Err(RateError::LiminfSearchFailed { l, from: start, budget: self.budget });
            }
            self.acc.advance()?;
        }
    }
}

/// Least `m` in `[n, budget]` with `b_m / a_m <= 1 + 2^{-l}`, decided exactly.
pub fn derive_liminf_witness(model: &EventModel, l: u32, n: Index, budget: Index) -> Result<Index, RateError> {
    LiminfSearcher::new(model, budget).find(l, n)
}

/// Least `k <= kmax` with `|x_m - x_n| < 2^{-l}` for all `m, n` in `[k, f(k)]`.
///
/// On failure, the error lists for every `k` a violating pair `(k, m, n)`.
pub fn check_metastability<X>(x: X, l: u32, f: &GFunction, kmax: Index) -> Result<Index, RateError>
where
    X: Fn(Index) -> Rational,
{
    let eps = pow2_neg(l);
    let mut values: Vec<Rational> = Vec::new();
    let mut violations = Vec::new();
    for k in 1..=kmax {
        let end = f.eval(k)?;
        while (values.len() as Index) < end {
            values.push(x(values.len() as Index + 1));
        }
        let window = &values[(k - 1) as usize..end as usize];
        let (mut lo, mut hi) = (0usize, 0usize);
        for (idx, v) in window.iter().enumerate() {
            if v < &window[lo] {
                lo = idx;
            }
            if v > &window[hi] {
                hi = idx;
            }
        }
        if &window[hi] - &window[lo] < eps {
            return Ok(k);
        }
        violations.push((k, k + hi as Index, k + lo as Index));
    }
    Err(RateError::NotMetastable { l, kmax, violations })
}

/// Checks `Σ_{i=φ(l)}^{m_max} P[A_i] <= 2^{-l}` for `l <= l_max`; the sums grow
/// with `m`, so the largest `m` decides every smaller one.
pub fn check_convergence_rate(
    model: &EventModel,
    phi: &ConvergenceRate,
    l_max: u32,
    m_max: Index,
) -> Result<Option<(u32, Rational)>, RateError> {
    for l in 0..=l_max {
        let start = phi.eval(l)?;
        if start >= m_max {
            continue;
        }
        let sum = model.partial_sum(start, m_max)?;
        if sum > pow2_neg(l) {
            return Ok(Some((l, sum)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SequenceSpec;
    use crate::numerics::{int, rat};

    fn die(k: i64) -> EventModel {
        EventModel::independent(SequenceSpec::constant(rat(1, k)))
    }

    #[test]
    fn divergence_rate_examples() {
        assert!(check_divergence_rate(&die(6), &DivergenceRate::Linear { k: 6 }, 10).unwrap().passed());
        let nested = EventModel::nested(SequenceSpec::table(vec![rat(1, 2)], SequenceSpec::Ratio));
        let ceil = DivergenceRate::CeilDiv { q1: rat(1, 2) };
        assert!(check_divergence_rate(&nested, &ceil, 10).unwrap().passed());
        let sure = EventModel::independent(SequenceSpec::constant(int(1)));
        assert!(check_divergence_rate(&sure, &DivergenceRate::Linear { k: 1 }, 10).unwrap().passed());
        assert_eq!(
            check_divergence_rate(&die(6), &DivergenceRate::Linear { k: 1 }, 3).unwrap(),
            DivergenceVerdict::Fail { n: 1, index: 1, sum: rat(1, 6) }
        );
    }

    #[test]
    fn derived_divergence_rates() {
        assert_eq!(
            derive_divergence_rate(&die(6), 3, 1000).unwrap(),
            DivergenceRate::Table { values: vec![6, 12, 18], tail_linear: None }
        );
        let sure = EventModel::independent(SequenceSpec::constant(int(1)));
        assert_eq!(
            derive_divergence_rate(&sure, 4, 100).unwrap(),
            DivergenceRate::Table { values: vec![1, 2, 3, 4], tail_linear: None }
        );
        let ratio = EventModel::nested(SequenceSpec::Ratio);
        let omega = derive_divergence_rate(&ratio, 2, 100).unwrap();
        assert_eq!((omega.eval(1).unwrap(), omega.eval(2).unwrap()), (2, 4));
        assert_eq!(omega.eval(3), Err(RateError::OutOfTable { rate: "ω", arg: 3 }));
        assert_eq!(derive_divergence_rate(&ratio, 50, 20), Err(RateError::BudgetExhausted { target: 18, budget: 20 }));
    }

    #[test]
    fn tail_bound_examples() {
        let sure = EventModel::independent(SequenceSpec::constant(int(1)));
        let v = tail_divergence_bound(&sure, &DivergenceRate::Linear { k: 1 }, 5, 3).unwrap();
        assert_eq!((v.window_end, v.tail_sum, v.passed), (7, int(3), true));
        let v = tail_divergence_bound(&die(6), &DivergenceRate::Linear { k: 6 }, 2, 2).unwrap();
        assert_eq!((v.window_end, v.tail_sum, v.passed), (18, rat(17, 6), true));
        let half = EventModel::nested(SequenceSpec::constant(rat(1, 2)));
        let v = tail_divergence_bound(&half, &DivergenceRate::CeilDiv { q1: rat(1, 2) }, 3, 1).unwrap();
        assert_eq!((v.window_end, v.tail_sum, v.passed), (6, int(2), true));
    }

    #[test]
    fn liminf_witness_examples() {
        let fair = die(2);
        assert_eq!(derive_liminf_witness(&fair, 3, 1, 64).unwrap(), 8);
        let sure = EventModel::independent(SequenceSpec::constant(int(1)));
        assert_eq!(derive_liminf_witness(&sure, 5, 7, 16).unwrap(), 7);
        let half = EventModel::nested(SequenceSpec::constant(rat(1, 2)));
        assert_eq!(
            derive_liminf_witness(&half, 1, 1, 10_000),
            Err(RateError::LiminfSearchFailed { l: 1, from: 1, budget: 10_000 })
        );
    }

    #[test]
    fn searcher_resumes_and_restarts() {
        let fair = die(2);
        let mut s = LiminfSearcher::new(&fair, 1 << 12);
        assert_eq!(s.find(2, 1).unwrap(), 4);
        assert_eq!(s.find(4, 4).unwrap(), 16);
        assert_eq!(s.find(1, 3).unwrap(), 3);
        assert_eq!(s.find(0, 20).unwrap(), 20);
    }

    #[test]
    fn iterate_g_examples() {
        assert_eq!(iterate_g(&GFunction::doubling(), 3, 1).unwrap(), 8);
        assert_eq!(iterate_g(&GFunction::successor(), 4, 4).unwrap(), 8);
        assert_eq!(iterate_g(&GFunction::square(), 2, 3).unwrap(), 81);
        assert!(matches!(iterate_g(&GFunction::square(), 10, 3), Err(RateError::Overflow(_))));
        assert_eq!(iterate_g_saturating(&GFunction::square(), 10, 3).unwrap(), IndexBound::Beyond);
        assert_eq!(GFunction::square().eval(1), Err(RateError::NotExpanding { arg: 1, value: 1 }));
    }

    #[test]
    fn metastability_examples() {
        let recip = |n: Index| rat(1, n as i64);
        assert_eq!(check_metastability(recip, 1, &GFunction::doubling(), 10).unwrap(), 2);
        assert_eq!(check_metastability(recip, 2, &GFunction::doubling(), 10).unwrap(), 3);
        assert_eq!(check_metastability(|_| rat(1, 3), 9, &GFunction::Affine { a: 1, c: 3 }, 5).unwrap(), 1);
        match check_metastability(recip, 2, &GFunction::doubling(), 2) {
            Err(RateError::NotMetastable { violations, .. }) => assert_eq!(violations, vec![(1, 1, 2), (2, 2, 4)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rate_json_schema() {
        let omega: DivergenceRate = serde_json::from_str(r#"{"kind":"linear","k":6}"#).unwrap();
        assert_eq!(omega, DivergenceRate::Linear { k: 6 });
        let omega: DivergenceRate = serde_json::from_str(r#"{"kind":"ceildiv","q1":"1/2"}"#).unwrap();
        assert_eq!(omega.eval(3).unwrap(), 6);
        let omega: DivergenceRate = serde_json::from_str(r#"{"kind":"table","values":[2,4]}"#).unwrap();
        assert_eq!(omega.eval(2).unwrap(), 4);
        let g: GFunction = serde_json::from_str(r#"{"kind":"power","e":2}"#).unwrap();
        assert_eq!(g, GFunction::square());
        let phi: LiminfWitness = serde_json::from_str(r#"{"kind":"closed"}"#).unwrap();
        assert_eq!(phi, LiminfWitness::max_n_pow2());
        assert_eq!(serde_json::to_string(&IndexBound::Beyond).unwrap(), r#""beyond_u64""#);
        assert_eq!(serde_json::from_str::<IndexBound>("17").unwrap(), IndexBound::Exact(17));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            /// A validated rate of divergence satisfies the tail bound on every window.
            #[test]
            fn valid_rates_give_tail_bounds(den in 1i64..8, num in 1i64..8, slack in 0u64..2) {
                let p = rat(num.min(den), den);
                let model = EventModel::independent(SequenceSpec::constant(p));
                let k = (den + num.min(den) - 1) / num.min(den);
                let omega = DivergenceRate::Linear { k: k as u64 + slack };
                let n_max = 8;
                prop_assert!(check_divergence_rate(&model, &omega, n_max).unwrap().passed());
                for n in 1..=n_max {
                    for big_n in 1..=(n_max + 1 - n) {
                        prop_assert!(tail_divergence_bound(&model, &omega, n, big_n).unwrap().passed);
                    }
                }
            }

            /// Derived rates pass and are minimal entrywise.
            #[test]
            fn derived_rates_are_minimal(prefix in prop::collection::vec((1i64..6, 1i64..6), 1..8)) {
                let terms: Vec<Rational> = prefix.iter().map(|&(a, b)| rat(a.min(b), b)).collect();
                let model = EventModel::independent(SequenceSpec::table(terms, SequenceSpec::constant(rat(1, 3))));
                let n_max = 6;
                let omega = derive_divergence_rate(&model, n_max, 10_000).unwrap();
                prop_assert!(check_divergence_rate(&model, &omega, n_max).unwrap().passed());
                if let DivergenceRate::Table { values, .. } = &omega {
                    for idx in 0..values.len() {
                        let mut lowered = values.clone();
                        lowered[idx] -= 1;
                        let lowered = DivergenceRate::Table { values: lowered, tail_linear: None };
                        prop_assert!(!check_divergence_rate(&model, &lowered, n_max).unwrap().passed());
                    }
                }
            }

            #[test]
            fn liminf_witness_satisfies_its_bound(l in 0u32..6, n in 1u64..40) {
                let model = EventModel::nested(SequenceSpec::Ratio);
                let m = derive_liminf_witness(&model, l, n, 1 << 14).unwrap();
                prop_assert!(m >= n);
                let st = model.sum_stats(m).unwrap();
                prop_assert!(st.erdos_renyi_ratio().unwrap() <= Rational::one() + pow2_neg(l));
            }

            #[test]
            fn iteration_strictly_increases(a in 1u64..4, c in 0u64..4, r in 0u64..12, s in 1u64..50) {
                prop_assume!(a > 1 || c > 0);
                let g = GFunction::Affine { a, c };
                prop_assert!(iterate_g(&g, r + 1, s).unwrap() > iterate_g(&g, r, s).unwrap());
            }

            /// Convergence implies metastability, with `k` bounded by the rate.
            #[test]
            fn convergence_rate_bounds_metastable_index(l in 0u32..8, e in 1u32..4) {
                let model = EventModel::exclusive(SequenceSpec::geometric(rat(1, 2)));
                let phi = ConvergenceRate::Affine { c: 1 };
                prop_assert_eq!(check_convergence_rate(&model, &phi, 8, 40).unwrap(), None);
                let sums = prefix_sums(&model, 64).unwrap();
                let x = |n: Index| sums.get(n as usize).cloned().unwrap_or_else(|| model.partial_sum(1, n).unwrap());
                let g = GFunction::Affine { a: e as u64 + 1, c: 1 };
                let k = check_metastability(x, l, &g, 64).unwrap();
                prop_assert!(k <= phi.eval(l).unwrap());
            }
        }
    }
}
