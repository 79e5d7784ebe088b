//! Event-sequence models with exact closed-form probabilities.
//!
//! A model describes events `A_1, A_2, ...` through a [`SequenceSpec`] giving
//! `P[A_i]`, plus a dependence structure (nested intervals of the uniform unit
//! interval, mutual independence, or pairwise disjointness) from which joint,
//! union and counting-variable probabilities follow exactly.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{
    format_rational, int, lcm_extend, pow, pow2_neg, serde_rational, serde_rational_vec, Index, Rational,
};

/// Largest `n` accepted by [`EventModel::count_distribution`] by default.
pub const DEFAULT_COUNT_CAP: Index = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("event indices start at 1")]
    ZeroIndex,
    #[error("term {index} = {value} lies outside [0, 1]")]
    OutOfUnitInterval { index: Index, value: String },
    #[error("nested sequence decreases at index {index}")]
    NonMonotone { index: Index },
    #[error("mutually exclusive probabilities sum to {total} > 1 by index {index}")]
    ExclusiveMassExceeded { index: Index, total: String },
    #[error("invalid index range [{n}, {m}]")]
    InvalidRange { n: Index, m: Index },
    #[error("count distribution for n = {n} exceeds the cap of {cap}")]
    CapExceeded { n: Index, cap: Index },
    #[error("invalid Specker enumeration: {0}")]
    InvalidSpecker(String),
}

/// Closed grammar of `[0, 1]`-valued sequences `term_1, term_2, ...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSpec {
    Constant {
        #[serde(with = "serde_rational")]
        c: Rational,
    },
    /// Explicit leading terms; from index `prefix.len() + 1` on, `tail` is
    /// evaluated at the same absolute index.
    Table {
        #[serde(with = "serde_rational_vec")]
        prefix: Vec<Rational>,
        #[serde(default = "SequenceSpec::boxed_zero")]
        tail: Box<SequenceSpec>,
    },
    /// `term_i = q - c / (i + d)`.
    AffineReciprocal {
        #[serde(with = "serde_rational")]
        q: Rational,
        #[serde(with = "serde_rational")]
        c: Rational,
        d: u64,
    },
    /// `term_i = i / (i + 1)`.
    Ratio,
    /// `term_i = r^i`.
    Geometric {
        #[serde(with = "serde_rational")]
        r: Rational,
    },
    Specker(SpeckerPartialSums),
}

impl SequenceSpec {
    pub fn constant(c: Rational) -> Self {
        Self::Constant { c }
    }

    pub fn table(prefix: Vec<Rational>, tail: SequenceSpec) -> Self {
        Self::Table { prefix, tail: Box::new(tail) }
    }

    /// A finite table padded with zeros.
    pub fn finite(prefix: Vec<Rational>) -> Self {
        Self::table(prefix, Self::constant(Rational::zero()))
    }

    pub fn affine_reciprocal(q: Rational, c: Rational, d: u64) -> Self {
        Self::AffineReciprocal { q, c, d }
    }

    pub fn geometric(r: Rational) -> Self {
        Self::Geometric { r }
    }

    fn boxed_zero() -> Box<SequenceSpec> {
        Box::new(Self::constant(Rational::zero()))
    }

    /// Exact `term_i`; indices start at 1.
    pub fn term(&self, i: Index) -> Result<Rational, ModelError> {
        if i == 0 {
            return Err(ModelError::ZeroIndex);
        }
        let value = self.raw_term(i);
        if value.is_negative() || value > Rational::one() {
            return Err(ModelError::OutOfUnitInterval { index: i, value: format_rational(&value) });
        }
        Ok(value)
    }

    fn raw_term(&self, i: Index) -> Rational {
        match self {
            Self::Constant { c } => c.clone(),
            Self::Table { prefix, tail } => match usize::try_from(i - 1).ok().and_then(|k| prefix.get(k)) {
                Some(v) => v.clone(),
                None => tail.raw_term(i),
            },
            Self::AffineReciprocal { q, c, d } => q - c / Rational::from_integer(BigInt::from(i) + BigInt::from(*d)),
            Self::Ratio => Rational::new(BigInt::from(i), BigInt::from(i) + 1),
            Self::Geometric { r } => pow(r, i),
            Self::Specker(s) => s.partial_sum(i),
        }
    }

    /// `term_from ..= term_to`.
    pub fn terms(&self, from: Index, to: Index) -> Result<Vec<Rational>, ModelError> {
        (from..=to).map(|i| self.term(i)).collect()
    }

    /// The limit of the sequence, when the grammar determines it.
    pub fn limit(&self) -> Option<Rational> {
        match self {
            Self::Constant { c } => Some(c.clone()),
            Self::Table { tail, .. } => tail.limit(),
            Self::AffineReciprocal { q, .. } => Some(q.clone()),
            Self::Ratio => Some(Rational::one()),
            Self::Geometric { r } if r < &Rational::one() => Some(Rational::zero()),
            Self::Geometric { .. } => Some(Rational::one()),
            Self::Specker(s) => Some(s.limit()),
        }
    }

    /// Checks that terms `1..=upto` are non-decreasing.
    pub fn check_monotone(&self, upto: Index) -> Result<(), ModelError> {
        let mut prev = Rational::zero();
        for i in 1..=upto {
            let t = self.term(i)?;
            if t < prev {
                return Err(ModelError::NonMonotone { index: i });
            }
            prev = t;
        }
        Ok(())
    }
}

/// Partial sums `Σ_{j revealed by step i} 2^{-(e_j + 1)}` of a finite
/// enumeration of distinct naturals, element `j` being revealed at
/// `reveal_steps[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpecker")]
pub struct SpeckerPartialSums {
    enumeration: Vec<u32>,
    reveal_steps: Vec<Index>,
}

#[derive(Deserialize)]
struct RawSpecker {
    enumeration: Vec<u32>,
    #[serde(default)]
    reveal_steps: Option<Vec<Index>>,
}

impl TryFrom<RawSpecker> for SpeckerPartialSums {
    type Error = ModelError;

    fn try_from(raw: RawSpecker) -> Result<Self, ModelError> {
        match raw.reveal_steps {
            Some(steps) => Self::new(raw.enumeration, steps),
            None => Self::in_order(raw.enumeration),
        }
    }
}

impl SpeckerPartialSums {
    pub fn new(enumeration: Vec<u32>, reveal_steps: Vec<Index>) -> Result<Self, ModelError> {
        if enumeration.len() != reveal_steps.len() {
            return Err(ModelError::InvalidSpecker(format!(
                "{} elements but {} reveal steps",
                enumeration.len(),
                reveal_steps.len()
            )));
        }
        let mut seen = enumeration.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(ModelError::InvalidSpecker(format!("element {} repeated", w[0])));
        }
        if reveal_steps.contains(&0) {
            return Err(ModelError::InvalidSpecker("reveal steps start at 1".into()));
        }
        Ok(Self { enumeration, reveal_steps })
    }

    /// Element `j` (zero-based) revealed at step `j + 1`.
    pub fn in_order(enumeration: Vec<u32>) -> Result<Self, ModelError> {
        let steps = (1..=enumeration.len() as Index).collect();
        Self::new(enumeration, steps)
    }

    pub fn enumeration(&self) -> &[u32] {
        &self.enumeration
    }

    pub fn reveal_steps(&self) -> &[Index] {
        &self.reveal_steps
    }

    /// Mass `2^{-(e+1)}` carried by element `e`.
    pub fn mass(element: u32) -> Rational {
        pow2_neg(element + 1)
    }

    pub fn partial_sum(&self, step: Index) -> Rational {
        self.enumeration.iter().zip(&self.reveal_steps).filter(|(_, &s)| s <= step).map(|(&e, _)| Self::mass(e)).sum()
    }

    pub fn limit(&self) -> Rational {
        self.enumeration.iter().map(|&e| Self::mass(e)).sum()
    }
}

/// `A_i = [0, q_i]` under the uniform measure on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NestedIntervals {
    pub q: SequenceSpec,
}

/// Mutually independent events with `P[A_i] = p_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndependentBernoulli {
    pub p: SequenceSpec,
}

/// Pairwise disjoint events with `P[A_i] = p_i`; requires `Σ p_i <= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MutuallyExclusive {
    pub p: SequenceSpec,
}

/// An event sequence with its dependence structure.
///
/// Serialized as `{"kind": "nested" | "independent" | "exclusive", "sequence": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "sequence")]
pub enum EventModel {
    #[serde(rename = "nested")]
    NestedIntervals(NestedIntervals),
    #[serde(rename = "independent")]
    IndependentBernoulli(IndependentBernoulli),
    #[serde(rename = "exclusive")]
    MutuallyExclusive(MutuallyExclusive),
}

impl From<NestedIntervals> for EventModel {
    fn from(m: NestedIntervals) -> Self {
        Self::NestedIntervals(m)
    }
}

impl From<IndependentBernoulli> for EventModel {
    fn from(m: IndependentBernoulli) -> Self {
        Self::IndependentBernoulli(m)
    }
}

impl From<MutuallyExclusive> for EventModel {
    fn from(m: MutuallyExclusive) -> Self {
        Self::MutuallyExclusive(m)
    }
}

impl EventModel {
    pub fn nested(q: SequenceSpec) -> Self {
        Self::NestedIntervals(NestedIntervals { q })
    }

    pub fn independent(p: SequenceSpec) -> Self {
        Self::IndependentBernoulli(IndependentBernoulli { p })
    }

    pub fn exclusive(p: SequenceSpec) -> Self {
        Self::MutuallyExclusive(MutuallyExclusive { p })
    }

    pub fn sequence(&self) -> &SequenceSpec {
        match self {
            Self::NestedIntervals(m) => &m.q,
            Self::IndependentBernoulli(m) => &m.p,
            Self::MutuallyExclusive(m) => &m.p,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::NestedIntervals(_) => "nested",
            Self::IndependentBernoulli(_) => "independent",
            Self::MutuallyExclusive(_) => "exclusive",
        }
    }

    /// `P[A_i]`.
    pub fn prob(&self, i: Index) -> Result<Rational, ModelError> {
        self.sequence().term(i)
    }

    /// `P[A_i A_k]`; symmetric, with `joint(i, i) = prob(i)`.
    pub fn joint(&self, i: Index, k: Index) -> Result<Rational, ModelError> {
        let pi = self.prob(i)?;
        if i == k {
            return Ok(pi);
        }
        let pk = self.prob(k)?;
        Ok(match self {
            Self::NestedIntervals(_) => pi.min(pk),
            Self::IndependentBernoulli(_) => pi * pk,
            Self::MutuallyExclusive(_) => Rational::zero(),
        })
    }

    /// `Σ_{i=n}^{m} P[A_i]`, zero for an empty range.
    pub fn partial_sum(&self, n: Index, m: Index) -> Result<Rational, ModelError> {
        let mut acc = SumAccumulator::default();
        for i in n.max(1)..=m {
            acc.add(&self.prob(i)?);
        }
        Ok(acc.value())
    }

    /// `P[A_n ∪ ... ∪ A_m]`.
    pub fn union_prob(&self, n: Index, m: Index) -> Result<Rational, ModelError> {
        if n == 0 || n > m {
            return Err(ModelError::InvalidRange { n, m });
        }
        match self {
            // union of [0, q_i] is [0, max q_i]
            Self::NestedIntervals(nested) => {
                let mut best = Rational::zero();
                for i in n..=m {
                    best = best.max(nested.q.term(i)?);
                }
                Ok(best)
            }
            Self::IndependentBernoulli(ind) => Ok(Rational::one() - ind.complement_product(n, m)?),
            Self::MutuallyExclusive(_) => {
                let total = self.partial_sum(1, m)?;
                if total > Rational::one() {
                    return Err(ModelError::ExclusiveMassExceeded { index: m, total: format_rational(&total) });
                }
                self.partial_sum(n, m)
            }
        }
    }

    /// The five sums of the Chung-Erdős ratio at `n`.
    pub fn sum_stats(&self, n: Index) -> Result<SumStats, ModelError> {
        if n == 0 {
            return Err(ModelError::ZeroIndex);
        }
        let mut acc = self.accumulator();
        acc.advance_to(n)?;
        Ok(acc.stats())
    }

    pub fn accumulator(&self) -> StatsAccumulator<'_> {
        StatsAccumulator::new(self)
    }

    /// Exact law of `η_n = Σ_{i<=n} 1_{A_i}` with the default size cap.
    pub fn count_distribution(&self, n: Index) -> Result<CountDistribution, ModelError> {
        self.count_distribution_capped(n, DEFAULT_COUNT_CAP)
    }

    pub fn count_distribution_capped(&self, n: Index, cap: Index) -> Result<CountDistribution, ModelError> {
        if n == 0 {
            return Err(ModelError::ZeroIndex);
        }
        let terms = self.sequence().terms(1, n)?;
        let pmf = match self {
            Self::IndependentBernoulli(_) => {
                if n > cap {
                    return Err(ModelError::CapExceeded { n, cap });
                }
                let (nums, den) = poisson_binomial(&terms);
                return Ok(CountDistribution::from_scaled(nums, den));
            }
            Self::NestedIntervals(_) => staircase(&terms),
            Self::MutuallyExclusive(_) => {
                let total: Rational = terms.iter().sum();
                if total > Rational::one() {
                    return Err(ModelError::ExclusiveMassExceeded { index: n, total: format_rational(&total) });
                }
                let mut pmf = vec![Rational::zero(); n as usize + 1];
                pmf[0] = Rational::one() - &total;
                pmf[1] = total;
                pmf
            }
        };
        Ok(CountDistribution::from_pmf(pmf))
    }
}

impl IndependentBernoulli {
    /// `Π_{i=n}^{m} (1 - p_i)`, accumulated over an unreduced common
    /// denominator and reduced once.
    pub fn complement_product(&self, n: Index, m: Index) -> Result<Rational, ModelError> {
        let mut num = BigInt::one();
        let mut den = BigInt::one();
        for i in n..=m {
            let p = self.p.term(i)?;
            num *= p.denom() - p.numer();
            den *= p.denom();
            if num.is_zero() {
                return Ok(Rational::zero());
            }
        }
        Ok(Rational::new(num, den))
    }
}

/// Poisson-binomial pmf over the product of the term denominators, built by
/// convolving one binomial block per run of equal terms.
fn poisson_binomial(terms: &[Rational]) -> (Vec<BigInt>, BigInt) {
    let mut nums = vec![BigInt::one()];
    let mut den = BigInt::one();
    for run in terms.chunk_by(|a, b| a == b) {
        let (block, block_den) = binomial_block(&run[0], run.len());
        nums = if nums.len() == 1 { block } else { convolve(&nums, &block) };
        den *= block_den;
    }
    (nums, den)
}

/// `C(r, c) a^c (b - a)^{r-c}` for `p = a/b`, over the denominator `b^r`.
fn binomial_block(p: &Rational, r: usize) -> (Vec<BigInt>, BigInt) {
    let hit = p.numer();
    let miss = p.denom() - p.numer();
    let mut miss_pows = Vec::with_capacity(r + 1);
    miss_pows.push(BigInt::one());
    for k in 0..r {
        let next = &miss_pows[k] * &miss;
        miss_pows.push(next);
    }
    let mut block = Vec::with_capacity(r + 1);
    let mut coef = BigInt::one();
    let mut hit_pow = BigInt::one();
    for c in 0..=r {
        block.push(&coef * &hit_pow * &miss_pows[r - c]);
        coef = coef * BigInt::from(r - c) / BigInt::from(c + 1);
        hit_pow *= hit;
    }
    (block, num_traits::pow(p.denom().clone(), r))
}

fn convolve(xs: &[BigInt], ys: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); xs.len() + ys.len() - 1];
    for (i, x) in xs.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in ys.iter().enumerate() {
            if !y.is_zero() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

/// `η_n(x) = #{i <= n : x <= q_i}`: with `t_1 <= ... <= t_n` the sorted terms,
/// `P[η_n >= c] = t_{n-c+1}`.
fn staircase(terms: &[Rational]) -> Vec<Rational> {
    let mut sorted = terms.to_vec();
    sorted.sort();
    let n = sorted.len();
    let at_least = |c: usize| -> Rational {
        match c {
            0 => Rational::one(),
            c if c > n => Rational::zero(),
            c => sorted[n - c].clone(),
        }
    };
    (0..=n).map(|c| at_least(c) - at_least(c + 1)).collect()
}

/// Sums of a model's probabilities up to `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumStats {
    pub n: Index,
    /// `Σ_{i<=n} P[A_i]`
    pub s: Rational,
    /// `s^2`
    pub a: Rational,
    /// `Σ_{i,k<=n} P[A_i A_k]`
    pub b: Rational,
    /// `Σ_{i<k<=n} P[A_i] P[A_k]`
    pub off_diag_prod: Rational,
    /// `Σ_{i<k<=n} P[A_i A_k]`
    pub off_diag_joint: Rational,
}

impl SumStats {
    /// `a / b`, the Chung-Erdős ratio; `None` when `b = 0`.
    pub fn chung_erdos_ratio(&self) -> Option<Rational> {
        (!self.b.is_zero()).then(|| &self.a / &self.b)
    }

    /// `b / a`; `None` when `a = 0`.
    pub fn erdos_renyi_ratio(&self) -> Option<Rational> {
        (!self.a.is_zero()).then(|| &self.b / &self.a)
    }
}

/// The value `num / den` of a ratio of non-negative sums, left unreduced so
/// that comparisons cost multiplications only. `den = 0` means undefined.
#[derive(Debug, Clone)]
pub struct RatioSnapshot {
    num: BigInt,
    den: BigInt,
}

impl RatioSnapshot {
    pub fn is_defined(&self) -> bool {
        self.den.is_positive()
    }

    /// `value <= bound`; false when undefined.
    pub fn le(&self, bound: &Rational) -> bool {
        self.is_defined() && &self.num * bound.denom() <= bound.numer() * &self.den
    }

    /// `value >= bound`; false when undefined.
    pub fn ge(&self, bound: &Rational) -> bool {
        self.is_defined() && &self.num * bound.denom() >= bound.numer() * &self.den
    }

    /// Compares two defined values.
    pub fn cmp_value(&self, other: &RatioSnapshot) -> Ordering {
        (&self.num * &other.den).cmp(&(&other.num * &self.den))
    }

    /// Reduced value; `None` when undefined.
    pub fn to_rational(&self) -> Option<Rational> {
        self.is_defined().then(|| Rational::new(self.num.clone(), self.den.clone()))
    }
}

const BRACKET_BITS: u64 = 128;

/// `[lo, hi] · 2^shift`: a cheap two-sided bound on a huge non-negative
/// integer, from its leading bits.
#[derive(Debug, Clone)]
struct Bracket {
    lo: BigInt,
    hi: BigInt,
    shift: u64,
}

impl Bracket {
    fn of(x: &BigInt) -> Self {
        let shift = x.bits().saturating_sub(BRACKET_BITS);
        let lo: BigInt = x >> shift;
        let hi = if shift == 0 { lo.clone() } else { &lo + 1u32 };
        Self { lo, hi, shift }
    }

    fn mul(&self, other: &Self) -> Self {
        Self { lo: &self.lo * &other.lo, hi: &self.hi * &other.hi, shift: self.shift + other.shift }
    }
}

/// `a · 2^sa <= b · 2^sb`, exactly.
fn shifted_le(a: &BigInt, sa: u64, b: &BigInt, sb: u64) -> bool {
    if a.is_zero() {
        return true;
    }
    if b.is_zero() {
        return false;
    }
    let (ea, eb) = (a.bits() + sa, b.bits() + sb);
    if ea + 1 < eb {
        return true;
    }
    if eb + 1 < ea {
        return false;
    }
    if sa >= sb {
        (a << (sa - sb)) <= *b
    } else {
        *a <= (b << (sb - sa))
    }
}

/// Exact bounds on a [`RatioSnapshot`] that settle most comparisons without
/// touching the full-size numerator and denominator.
#[derive(Debug, Clone)]
pub struct RatioBracket {
    num: Bracket,
    den: Bracket,
}

impl RatioBracket {
    /// True only if the value is certainly `<= bound`.
    pub fn surely_le(&self, bound: &Rational) -> bool {
        if self.den.lo.is_zero() {
            return false;
        }
        let lhs = &self.num.hi * bound.denom();
        let rhs = bound.numer() * &self.den.lo;
        !bound.is_negative() && shifted_le(&lhs, self.num.shift, &rhs, self.den.shift)
    }

    /// True only if `self <= other` certainly.
    pub fn surely_le_ratio(&self, other: &RatioBracket) -> bool {
        if self.den.lo.is_zero() || other.den.lo.is_zero() {
            return false;
        }
        let lhs = &self.num.hi * &other.den.hi;
        let rhs = &other.num.lo * &self.den.lo;
        shifted_le(&lhs, self.num.shift + other.den.shift, &rhs, other.num.shift + self.den.shift)
    }

    /// True only if `self > other` certainly.
    pub fn surely_gt_ratio(&self, other: &RatioBracket) -> bool {
        if self.den.lo.is_zero() || other.den.lo.is_zero() {
            return false;
        }
        let lhs = &other.num.hi * &self.den.hi;
        let rhs = &self.num.lo * &other.den.lo;
        let (sl, sr) = (other.num.shift + self.den.shift, self.num.shift + other.den.shift);
        // strict: lhs < rhs, i.e. not rhs <= lhs
        !shifted_le(&rhs, sr, &lhs, sl)
    }
}

/// Running `Σ x_i` over a common denominator extended by lcm, so adding terms
/// with small denominators never triggers a bignum gcd.
#[derive(Debug, Clone)]
pub(crate) struct SumAccumulator {
    num: BigInt,
    den: BigInt,
}

impl Default for SumAccumulator {
    fn default() -> Self {
        Self { num: BigInt::zero(), den: BigInt::one() }
    }
}

impl SumAccumulator {
    pub(crate) fn add(&mut self, x: &Rational) {
        let f = lcm_extend(&self.den, x.denom());
        if !f.is_one() {
            self.den *= &f;
            self.num *= &f;
        }
        self.num += x.numer() * (&self.den / x.denom());
    }

    /// `value >= bound`.
    pub(crate) fn ge(&self, bound: &Rational) -> bool {
        &self.num * bound.denom() >= bound.numer() * &self.den
    }

    pub(crate) fn value(&self) -> Rational {
        Rational::new(self.num.clone(), self.den.clone())
    }
}

/// Incremental [`SumStats`]: moving from `n - 1` to `n` costs a constant
/// number of bignum operations.
///
/// All numerators share one denominator `D` (the lcm of the term
/// denominators seen so far). Quantities bilinear in the probabilities are
/// kept over `D^2`; for nested and disjoint models `b` is linear and is kept
/// over `D`.
#[derive(Debug, Clone)]
pub struct StatsAccumulator<'a> {
    model: &'a EventModel,
    n: Index,
    den: BigInt,
    last: Rational,
    /// `s · D`
    s: BigInt,
    /// `Σ p_i^2`
    sum_sq: SumAccumulator,
    /// `b · D^deg`
    b: BigInt,
    /// `off_diag_joint · D^deg`
    off_joint: BigInt,
}

impl<'a> StatsAccumulator<'a> {
    pub fn new(model: &'a EventModel) -> Self {
        Self {
            model,
            n: 0,
            den: BigInt::one(),
            last: Rational::zero(),
            s: BigInt::zero(),
            sum_sq: SumAccumulator::default(),
            b: BigInt::zero(),
            off_joint: BigInt::zero(),
        }
    }

    pub fn n(&self) -> Index {
        self.n
    }

    fn bilinear_joint(&self) -> bool {
        matches!(self.model, EventModel::IndependentBernoulli(_))
    }

    /// Incorporates event `n + 1`. On error the accumulator is unchanged.
    pub fn advance(&mut self) -> Result<(), ModelError> {
        let i = self.n + 1;
        let p = self.model.prob(i)?;
        if let EventModel::NestedIntervals(_) = self.model {
            if p < self.last {
                return Err(ModelError::NonMonotone { index: i });
            }
        }
        let f = lcm_extend(&self.den, p.denom());
        let den = &self.den * &f;
        let f2 = &f * &f;
        let scaled = p.numer() * (&den / p.denom());
        let s_prev = &self.s * &f;
        if let EventModel::MutuallyExclusive(_) = self.model {
            if &s_prev + &scaled > den {
                let total = Rational::new(&s_prev + &scaled, den);
                return Err(ModelError::ExclusiveMassExceeded { index: i, total: format_rational(&total) });
            }
        }
        let linear_scale = if self.bilinear_joint() { &f2 } else { &f };
        // Σ_{k<i} P[A_k A_i]
        let (cross, diag) = match self.model {
            EventModel::NestedIntervals(_) => (s_prev.clone(), scaled.clone()),
            EventModel::IndependentBernoulli(_) => (&scaled * &s_prev, &scaled * &den),
            EventModel::MutuallyExclusive(_) => (BigInt::zero(), scaled.clone()),
        };
        self.b = &self.b * linear_scale + &cross * 2u32 + diag;
        self.off_joint = &self.off_joint * linear_scale + cross;
        self.sum_sq.add(&(&p * &p));
        self.s = s_prev + scaled;
        self.den = den;
        self.last = p;
        self.n = i;
        Ok(())
    }

    pub fn advance_to(&mut self, n: Index) -> Result<(), ModelError> {
        while self.n < n {
            self.advance()?;
        }
        Ok(())
    }

    fn den_pow(&self, e: u32) -> BigInt {
        num_traits::pow(self.den.clone(), e as usize)
    }

    /// `b` over `D^2`.
    fn b_over_den_sq(&self) -> BigInt {
        if self.bilinear_joint() {
            self.b.clone()
        } else {
            &self.b * &self.den
        }
    }

    /// `a / b` at the current `n`.
    pub fn chung_erdos_ratio(&self) -> RatioSnapshot {
        RatioSnapshot { num: &self.s * &self.s, den: self.b_over_den_sq() }
    }

    /// Cheap exact bounds on [`Self::chung_erdos_ratio`].
    pub fn chung_erdos_bracket(&self) -> RatioBracket {
        let s = Bracket::of(&self.s);
        let den = if self.bilinear_joint() {
            Bracket::of(&self.b)
        } else {
            Bracket::of(&self.b).mul(&Bracket::of(&self.den))
        };
        RatioBracket { num: s.mul(&s), den }
    }

    /// `Σ_{i<=n} P[A_i]`.
    pub fn partial_sum(&self) -> Rational {
        Rational::new(self.s.clone(), self.den.clone())
    }

    pub fn stats(&self) -> SumStats {
        let joint_den = if self.bilinear_joint() { self.den_pow(2) } else { self.den.clone() };
        let s = self.partial_sum();
        let a = &s * &s;
        let off_diag_prod = (&a - self.sum_sq.value()) / int(2);
        SumStats {
            n: self.n,
            s,
            a,
            b: Rational::new(self.b.clone(), joint_den.clone()),
            off_diag_prod,
            off_diag_joint: Rational::new(self.off_joint.clone(), joint_den),
        }
    }
}

/// Law of the counting variable `η_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountDistribution {
    pub n: Index,
    /// `pmf[c] = P[η_n = c]` for `c = 0..=n`.
    pub pmf: Vec<Rational>,
    pub mean: Rational,
    pub variance: Rational,
}

impl CountDistribution {
    pub fn from_pmf(pmf: Vec<Rational>) -> Self {
        let n = pmf.len() as Index - 1;
        let mut mean = Rational::zero();
        let mut second = Rational::zero();
        for (c, w) in pmf.iter().enumerate() {
            let c = int(c as i64);
            mean += &c * w;
            second += &c * &c * w;
        }
        let variance = second - &mean * &mean;
        Self { n, pmf, mean, variance }
    }

    /// The law with `pmf[c] = nums[c] / den`; moments are summed before reducing.
    fn from_scaled(nums: Vec<BigInt>, den: BigInt) -> Self {
        let n = nums.len() as Index - 1;
        let mut mean = BigInt::zero();
        let mut second = BigInt::zero();
        for (c, v) in nums.iter().enumerate() {
            let weighted = v * BigInt::from(c);
            second += &weighted * BigInt::from(c);
            mean += weighted;
        }
        let mean = Rational::new(mean, den.clone());
        let variance = Rational::new(second, den.clone()) - &mean * &mean;
        let pmf = nums.into_iter().map(|v| Rational::new(v, den.clone())).collect();
        Self { n, pmf, mean, variance }
    }

    /// `M(η_n^2)`.
    pub fn second_moment(&self) -> Rational {
        &self.variance + &self.mean * &self.mean
    }

    /// `P[η_n <= t]`.
    pub fn cdf(&self, t: &Rational) -> Rational {
        self.pmf.iter().enumerate().take_while(|(c, _)| &int(*c as i64) <= t).map(|(_, w)| w).sum()
    }

    pub fn total_mass(&self) -> Rational {
        self.pmf.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rat;

    #[test]
    fn brackets_decide_huge_ratios_without_full_products() {
        let model = EventModel::nested(SequenceSpec::Ratio);
        let mut acc = model.accumulator();
        acc.advance_to(3000).unwrap();
        let q = acc.chung_erdos_bracket();
        let exact = acc.chung_erdos_ratio().to_rational().unwrap();
        assert!(q.surely_le(&(&exact + rat(1, 1 << 40))));
        assert!(!q.surely_le(&(&exact - rat(1, 1 << 40))));
        assert!(!q.surely_gt_ratio(&q));
        assert!(!q.surely_le_ratio(&q) || exact.is_zero());
        assert!(shifted_le(&BigInt::from(3), 10, &BigInt::from(3), 10));
        assert!(!shifted_le(&BigInt::from(7), 200, &BigInt::from(1), 190));
        assert!(shifted_le(&BigInt::from(1), 0, &BigInt::from(1), 5000));
    }

    fn halves() -> Vec<Rational> {
        (1..=12).map(pow2_neg).collect()
    }

    #[test]
    fn prob_examples() {
        assert_eq!(EventModel::nested(SequenceSpec::Ratio).prob(3).unwrap(), rat(3, 4));
        assert_eq!(EventModel::independent(SequenceSpec::constant(rat(1, 6))).prob(10).unwrap(), rat(1, 6));
        assert_eq!(EventModel::exclusive(SequenceSpec::finite(halves())).prob(4).unwrap(), rat(1, 16));
        assert_eq!(EventModel::nested(SequenceSpec::Ratio).prob(0), Err(ModelError::ZeroIndex));
    }

    #[test]
    fn joint_examples() {
        assert_eq!(EventModel::nested(SequenceSpec::Ratio).joint(2, 5).unwrap(), rat(2, 3));
        assert_eq!(EventModel::independent(SequenceSpec::constant(rat(1, 2))).joint(3, 7).unwrap(), rat(1, 4));
        assert_eq!(EventModel::exclusive(SequenceSpec::geometric(rat(1, 2))).joint(1, 2).unwrap(), Rational::zero());
        assert_eq!(EventModel::exclusive(SequenceSpec::geometric(rat(1, 2))).joint(2, 2).unwrap(), rat(1, 4));
    }

    #[test]
    fn union_examples() {
        assert_eq!(EventModel::nested(SequenceSpec::Ratio).union_prob(2, 5).unwrap(), rat(5, 6));
        let three = SequenceSpec::finite(vec![rat(1, 2), rat(1, 3), rat(1, 4)]);
        assert_eq!(EventModel::independent(three).union_prob(1, 3).unwrap(), rat(3, 4));
        let geo = EventModel::exclusive(SequenceSpec::geometric(rat(1, 2)));
        assert_eq!(geo.union_prob(3, 10).unwrap(), rat(255, 1024));
        assert!(matches!(geo.union_prob(4, 3), Err(ModelError::InvalidRange { .. })));
    }

    #[test]
    fn exclusive_overflow_is_rejected() {
        let m = EventModel::exclusive(SequenceSpec::constant(rat(1, 3)));
        assert!(matches!(m.union_prob(1, 4), Err(ModelError::ExclusiveMassExceeded { index: 4, .. })));
        assert!(matches!(m.sum_stats(4), Err(ModelError::ExclusiveMassExceeded { index: 4, .. })));
        assert!(m.sum_stats(3).is_ok());
    }

    #[test]
    fn sum_stats_examples() {
        let fair = EventModel::independent(SequenceSpec::constant(rat(1, 2)));
        let s2 = fair.sum_stats(2).unwrap();
        assert_eq!((s2.s.clone(), s2.a.clone(), s2.b.clone()), (int(1), int(1), rat(3, 2)));
        let s4 = fair.sum_stats(4).unwrap();
        assert_eq!((s4.a.clone(), s4.b.clone()), (int(4), int(5)));
        assert_eq!(s4.erdos_renyi_ratio().unwrap(), rat(5, 4));
        let q = rat(2, 7);
        let nested = EventModel::nested(SequenceSpec::constant(q.clone()));
        for n in 1..=9u64 {
            let st = nested.sum_stats(n).unwrap();
            let n2 = int((n * n) as i64);
            assert_eq!(st.a, &n2 * &q * &q);
            assert_eq!(st.b, &n2 * &q);
        }
    }

    #[test]
    fn sum_stats_match_double_sums() {
        let models = [
            EventModel::nested(SequenceSpec::Ratio),
            EventModel::nested(SequenceSpec::affine_reciprocal(rat(1, 2), rat(1, 2), 1)),
            EventModel::independent(SequenceSpec::finite(vec![rat(1, 3), rat(2, 5), rat(1, 7), rat(5, 6)])),
            EventModel::exclusive(SequenceSpec::geometric(rat(1, 3))),
        ];
        for model in &models {
            for n in 1..=8 {
                let st = model.sum_stats(n).unwrap();
                let mut b = Rational::zero();
                let mut off_joint = Rational::zero();
                let mut off_prod = Rational::zero();
                for i in 1..=n {
                    for k in 1..=n {
                        b += model.joint(i, k).unwrap();
                        if i < k {
                            off_joint += model.joint(i, k).unwrap();
                            off_prod += model.prob(i).unwrap() * model.prob(k).unwrap();
                        }
                    }
                }
                let s = model.partial_sum(1, n).unwrap();
                assert_eq!(st.s, s);
                assert_eq!(st.a, &s * &s);
                assert_eq!(st.b, b);
                assert_eq!(st.off_diag_joint, off_joint);
                assert_eq!(st.off_diag_prod, off_prod);
            }
        }
    }

    #[test]
    fn nested_requires_monotone_terms() {
        let m = EventModel::nested(SequenceSpec::finite(vec![rat(1, 2), rat(1, 3)]));
        assert_eq!(m.sum_stats(2), Err(ModelError::NonMonotone { index: 2 }));
        assert_eq!(SequenceSpec::Ratio.check_monotone(50), Ok(()));
    }

    #[test]
    fn count_distribution_examples() {
        let fair = EventModel::independent(SequenceSpec::constant(rat(1, 2)));
        assert_eq!(fair.count_distribution(2).unwrap().pmf, vec![rat(1, 4), rat(1, 2), rat(1, 4)]);
        let nested = EventModel::nested(SequenceSpec::finite(vec![rat(1, 2), rat(2, 3)]));
        assert_eq!(nested.count_distribution(2).unwrap().pmf, vec![rat(1, 3), rat(1, 6), rat(1, 2)]);
        let sure = EventModel::independent(SequenceSpec::constant(int(1)));
        let d = sure.count_distribution(5).unwrap();
        assert_eq!(d.pmf[5], int(1));
        assert!(d.pmf[..5].iter().all(Zero::is_zero));
        let excl = EventModel::exclusive(SequenceSpec::geometric(rat(1, 2)));
        let d = excl.count_distribution(3).unwrap();
        assert_eq!(d.pmf, vec![rat(1, 8), rat(7, 8), int(0), int(0)]);
    }

    #[test]
    fn count_distribution_cap() {
        let fair = EventModel::independent(SequenceSpec::constant(rat(1, 2)));
        assert_eq!(fair.count_distribution_capped(9, 8), Err(ModelError::CapExceeded { n: 9, cap: 8 }));
    }

    #[test]
    fn specker_partial_sums() {
        let s = SpeckerPartialSums::in_order(vec![2, 5, 3]).unwrap();
        assert_eq!(s.partial_sum(1), rat(1, 8));
        assert_eq!(s.partial_sum(3), rat(13, 64));
        assert_eq!(s.limit(), rat(13, 64));
        assert!(SpeckerPartialSums::in_order(vec![1, 1]).is_err());
        assert!(SpeckerPartialSums::new(vec![1], vec![]).is_err());
        let late = SpeckerPartialSums::new(vec![1], vec![100]).unwrap();
        assert_eq!(late.partial_sum(99), Rational::zero());
        assert_eq!(late.partial_sum(100), rat(1, 4));
    }

    #[test]
    fn sequence_terms_checked() {
        let bad = SequenceSpec::affine_reciprocal(rat(1, 2), int(1), 0);
        assert!(matches!(bad.term(1), Err(ModelError::OutOfUnitInterval { index: 1, .. })));
        let table = SequenceSpec::table(vec![rat(1, 2)], SequenceSpec::Ratio);
        assert_eq!(table.term(1).unwrap(), rat(1, 2));
        assert_eq!(table.term(3).unwrap(), rat(3, 4));
    }

    #[test]
    fn model_json_schema() {
        let text = r#"{"kind":"independent","sequence":{"kind":"constant","c":"1/6"}}"#;
        let m: EventModel = serde_json::from_str(text).unwrap();
        assert_eq!(m, EventModel::independent(SequenceSpec::constant(rat(1, 6))));
        assert_eq!(serde_json::to_string(&m).unwrap(), text);
        let text = r#"{"kind":"nested","sequence":{"kind":"specker","enumeration":[2,5,3],"reveal_steps":[1,2,3]}}"#;
        let m: EventModel = serde_json::from_str(text).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), text);
        let dup = r#"{"kind":"nested","sequence":{"kind":"specker","enumeration":[2,2]}}"#;
        assert!(serde_json::from_str::<EventModel>(dup).is_err());
        let table = r#"{"kind":"exclusive","sequence":{"kind":"table","prefix":["1/2","1/4"]}}"#;
        let m: EventModel = serde_json::from_str(table).unwrap();
        assert_eq!(m.prob(3).unwrap(), Rational::zero());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_term() -> impl Strategy<Value = Rational> {
            (0i64..=12, 1i64..=12).prop_map(|(a, b)| rat(a.min(b), b))
        }

        fn arb_model() -> impl Strategy<Value = EventModel> {
            let table = || prop::collection::vec(arb_term(), 1..12);
            prop_oneof![
                table().prop_map(|t| EventModel::independent(SequenceSpec::finite(t))),
                table().prop_map(|mut t| {
                    t.sort();
                    EventModel::nested(SequenceSpec::table(
                        t.clone(),
                        SequenceSpec::constant(t.last().unwrap().clone()),
                    ))
                }),
                prop::collection::vec(1i64..=6, 1..12).prop_map(|es| {
                    let t = es.iter().map(|&e| rat(1, 1 << e) / int(es.len() as i64)).collect();
                    EventModel::exclusive(SequenceSpec::finite(t))
                }),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn joint_bounded_and_symmetric(model in arb_model(), i in 1u64..20, k in 1u64..20) {
                let j = model.joint(i, k).unwrap();
                prop_assert_eq!(&j, &model.joint(k, i).unwrap());
                prop_assert!(!j.is_negative());
                prop_assert!(j <= model.prob(i).unwrap().min(model.prob(k).unwrap()));
            }

            #[test]
            fn union_between_max_and_sum(model in arb_model(), n in 1u64..16, len in 0u64..16) {
                let m = n + len;
                let u = model.union_prob(n, m).unwrap();
                let mut biggest = Rational::zero();
                for i in n..=m { biggest = biggest.max(model.prob(i).unwrap()); }
                let sum = model.partial_sum(n, m).unwrap();
                prop_assert!(biggest <= u);
                prop_assert!(u <= sum.min(Rational::one()));
                prop_assert!(u <= model.union_prob(n, m + 1).unwrap());
            }

            #[test]
            fn count_distribution_moments(model in arb_model(), n in 1u64..16) {
                let d = model.count_distribution(n).unwrap();
                prop_assert_eq!(d.total_mass(), Rational::one());
                prop_assert!(d.pmf.iter().all(|x| !x.is_negative()));
                prop_assert_eq!(&d.mean, &model.partial_sum(1, n).unwrap());
                prop_assert!(!d.variance.is_negative());
                prop_assert_eq!(d.second_moment(), model.sum_stats(n).unwrap().b);
            }

            #[test]
            fn b_dominates_a(model in arb_model(), n in 1u64..24) {
                let st = model.sum_stats(n).unwrap();
                prop_assert!(st.b >= st.a);
            }

            #[test]
            fn brackets_never_contradict_exact_ratios(
                model in arb_model(),
                n in 1u64..40,
                k in 1u64..40,
                bn in 0i64..40,
                bd in 1i64..40,
            ) {
                let (mut x, mut y) = (model.accumulator(), model.accumulator());
                x.advance_to(n).unwrap();
                y.advance_to(k).unwrap();
                let (qx, qy) = (x.chung_erdos_bracket(), y.chung_erdos_bracket());
                let (sx, sy) = (x.chung_erdos_ratio(), y.chung_erdos_ratio());
                let bound = rat(bn, bd);
                if qx.surely_le(&bound) {
                    prop_assert!(sx.le(&bound));
                }
                if sx.is_defined() && sy.is_defined() {
                    if qx.surely_gt_ratio(&qy) {
                        prop_assert!(sx.cmp_value(&sy).is_gt());
                    }
                    if qx.surely_le_ratio(&qy) {
                        prop_assert!(!sx.cmp_value(&sy).is_gt());
                    }
                }
            }

            #[test]
            fn runs_match_term_by_term_convolution(picks in prop::collection::vec(0usize..4, 1..20)) {
                let pool = [rat(0, 1), rat(1, 3), rat(1, 2), rat(1, 1)];
                let terms: Vec<Rational> = picks.iter().map(|&i| pool[i].clone()).collect();
                let mut naive = vec![Rational::one()];
                for p in &terms {
                    let mut next = vec![Rational::zero(); naive.len() + 1];
                    for (c, v) in naive.iter().enumerate() {
                        next[c] += v * (Rational::one() - p);
                        next[c + 1] += v * p;
                    }
                    naive = next;
                }
                let (nums, den) = poisson_binomial(&terms);
                let got: Vec<Rational> = nums.into_iter().map(|v| Rational::new(v, den.clone())).collect();
                prop_assert_eq!(got, naive);
            }
        }
    }
}
