use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{rj, validate_divergence, Certificate, Relation, Side, TheoremError, TheoremTag, Verdict};
use crate::models::{EventModel, RatioBracket, RatioSnapshot};
use crate::numerics::{ceil_to_integer, int, pow2, pow2_neg, serde_rational, Index, Rational};
use crate::rates::{iterate_g_saturating, DivergenceRate, GFunction, IndexBound, RateError};

/// How many per-`j` margins a witness records; the minimum over the whole
/// interval is always recorded.
pub const MARGIN_TRACE_CAP: usize = 64;

/// Chung-Erdős: `P[⋃_{k<=n} A_k] >= a_n / b_n`.
pub fn chung_erdos(model: &EventModel, n: Index) -> Result<Certificate, TheoremError> {
    let stats = model.sum_stats(n)?;
    let ratio =
        stats.chung_erdos_ratio().ok_or_else(|| TheoremError::Precondition(format!("Σ_(i,k<={n}) P[A_i A_k] = 0")))?;
    let union = model.union_prob(1, n)?;
    let trace = json!({ "a": rj(&stats.a), "b": rj(&stats.b) });
    let params = json!({ "model": model, "n": n });
    Ok(Certificate::exact(TheoremTag::ChungErdos, params, union, Relation::Ge, ratio, true, trace))
}

/// `max(1, ⌈c⌉)` as an `ω` argument.
fn omega_arg(c: &Rational) -> Result<u64, TheoremError> {
    let v = ceil_to_integer(c).max(BigInt::from(1));
    v.to_u64().ok_or_else(|| RateError::Overflow(format!("ω({v})")).into())
}

/// Least admissible `j - 1` of the tail estimate with `ε = 2^{-(l+1)}`:
/// `max(ω(max(1, ⌈2 Σ_{i<=m} P[A_i] / ε⌉)), m)`.
pub fn ks_tail_threshold(model: &EventModel, omega: &DivergenceRate, m: Index, l: u32) -> Result<Index, TheoremError> {
    let s = model.partial_sum(1, m)?;
    let arg = omega_arg(&(s * int(2) * pow2(i64::from(l) + 1)))?;
    validate_divergence(model, omega, arg)?;
    Ok(omega.eval(arg)?.max(m))
}

/// Tail estimate: for `j` beyond [`ks_tail_threshold`],
/// `P[⋃_{i=m+1}^{j} A_i] + 2^{-(l+1)} >= a_j / b_j`.
pub fn ks_tail_estimate(
    model: &EventModel,
    omega: &DivergenceRate,
    m: Index,
    l: u32,
    j: Index,
) -> Result<Certificate, TheoremError> {
    let threshold = ks_tail_threshold(model, omega, m, l)?;
    if j <= threshold {
        return Err(TheoremError::Precondition(format!("j = {j} must exceed {threshold}")));
    }
    let stats = model.sum_stats(j)?;
    let ratio = stats.chung_erdos_ratio().ok_or_else(|| TheoremError::Precondition(format!("b_{j} = 0")))?;
    let union = model.union_prob(m + 1, j)?;
    let lhs = &union + pow2_neg(l + 1);
    let trace = json!({ "threshold": threshold, "union": rj(&union), "a_j": rj(&stats.a), "b_j": rj(&stats.b) });
    let params = json!({ "model": model, "omega": omega, "m": m, "l": l, "j": j });
    Ok(Certificate::exact(TheoremTag::KsTailEstimate, params, lhs, Relation::Ge, ratio, true, trace))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JMargin {
    pub j: Index,
    #[serde(with = "serde_rational")]
    pub margin: Rational,
}

/// The metastable witness `n` and its certificate data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetastableWitness {
    pub n: Index,
    /// `n = g^{(r)}(n_0)`
    pub r: u64,
    /// `g(n)`
    pub interval_end: Index,
    pub n0: Index,
    /// The first [`MARGIN_TRACE_CAP`] margins `U + 2^{-l} - a_j / b_j`.
    pub per_j_margins: Vec<JMargin>,
    pub min_margin: JMargin,
    /// `g^{(2^{l+1})}(n_0)`
    pub bound: IndexBound,
}

/// `g^{(2^{l+1})}(max(ω(2^{l+2} m), m + 1))`, the bound that holds for any
/// events once all probabilities are at most 1.
pub fn uniform_bound(omega: &DivergenceRate, g: &GFunction, m: Index, l: u32) -> Result<IndexBound, TheoremError> {
    let arg = omega_arg(&(pow2(i64::from(l) + 2) * Rational::from_integer(BigInt::from(m))))?;
    let start = omega.eval(arg)?.max(m + 1);
    Ok(iterate_g_saturating(g, rounds(l)?, start)?)
}

fn rounds(l: u32) -> Result<u64, TheoremError> {
    1u64.checked_shl(l + 1).filter(|_| l < 63).ok_or_else(|| RateError::Overflow(format!("2^{}", l + 1)).into())
}

/// Metastable Kochen-Stone: starting from
/// `n_0 = max(ω(max(1, ⌈2^{l+2} Σ_{i<=m} P[A_i]⌉)), m + 1)` and iterating
/// `n_{r+1} = g(n_r)`, finds the first `n_r` with
/// `P[⋃_{i=m+1}^{n_r} A_i] + 2^{-l} >= a_j / b_j` for every `j ∈ [n_r, g(n_r)]`.
///
/// A pass certifies `r <= 2^{l+1}` and `n_r <= g^{(2^{l+1})}(n_0)`; the
/// certificate sides are the union bound and the largest ratio on the interval.
pub fn kochen_stone_meta(
    model: &EventModel,
    omega: &DivergenceRate,
    m: Index,
    l: u32,
    g: &GFunction,
) -> Result<(Certificate, Option<MetastableWitness>), TheoremError> {
    if m == 0 {
        return Err(TheoremError::Precondition("m starts at 1".into()));
    }
    let rounds = rounds(l)?;
    let s = model.partial_sum(1, m)?;
    let arg = omega_arg(&(&s * pow2(i64::from(l) + 2)))?;
    validate_divergence(model, omega, arg)?;
    let n0 = omega.eval(arg)?.max(m + 1);
    let bound = iterate_g_saturating(g, rounds, n0)?;
    let uniform = uniform_bound(omega, g, m, l).ok();
    let eps = pow2_neg(l);

    let mut acc = model.accumulator();
    let mut iterates = Vec::new();
    let mut nr = n0;
    let mut last_failure = None;
    for r in 0..=rounds {
        iterates.push(nr);
        let end = g.eval(nr)?;
        let union = model.union_prob(m + 1, nr)?;
        let target = &union + &eps;
        let mut margins = Vec::new();
        let mut worst: Option<(Index, RatioBracket, RatioSnapshot)> = None;
        let mut violated = None;
        for j in nr..=end {
            acc.advance_to(j)?;
            // exact ratio only where the bracket is inconclusive
            let quick = acc.chung_erdos_bracket();
            let mut snap = None;
            if !quick.surely_le(&target) {
                let full = acc.chung_erdos_ratio();
                if !full.le(&target) {
                    violated = Some((j, full));
                    break;
                }
                snap = Some(full);
            }
            if margins.len() < MARGIN_TRACE_CAP {
                let full = snap.get_or_insert_with(|| acc.chung_erdos_ratio());
                margins.push(JMargin { j, margin: &target - full.to_rational().expect("defined") });
            }
            let replace = match &worst {
                None => true,
                Some((_, wq, _)) if quick.surely_gt_ratio(wq) => true,
                Some((_, wq, _)) if quick.surely_le_ratio(wq) => false,
                Some((_, _, ws)) => snap.get_or_insert_with(|| acc.chung_erdos_ratio()).cmp_value(ws).is_gt(),
            };
            if replace {
                let full = snap.unwrap_or_else(|| acc.chung_erdos_ratio());
                worst = Some((j, quick, full));
            }
        }
        match violated {
            None => {
                let (wj, _, wsnap) = worst.expect("non-empty interval");
                let worst_ratio = wsnap.to_rational().expect("defined");
                let min_margin = JMargin { j: wj, margin: &target - &worst_ratio };
                let witness =
                    MetastableWitness { n: nr, r, interval_end: end, n0, per_j_margins: margins, min_margin, bound };
                let within = r <= rounds && bound.admits(nr) && nr > m;
                let trace = json!({
                    "sum_m": rj(&s),
                    "omega_arg": arg,
                    "n0": n0,
                    "iterates": iterates,
                    "union": rj(&union),
                    "worst_j": wj,
                    "rounds_allowed": rounds,
                    "bound": bound,
                    "uniform_bound": uniform,
                    "witness": witness,
                });
                let params = json!({ "model": model, "omega": omega, "m": m, "l": l, "g": g });
                let cert = Certificate::exact(
                    TheoremTag::KochenStoneMeta,
                    params,
                    target,
                    Relation::Ge,
                    worst_ratio,
                    within,
                    trace,
                );
                return Ok((cert, Some(witness)));
            }
            Some((j, snap)) => last_failure = Some((target, j, snap)),
        }
        nr = end;
    }
    // unreachable if the theorem holds
    let (target, j, snap) = last_failure.expect("at least one round");
    let ratio = snap.to_rational().unwrap_or_else(Rational::zero);
    let margin = &target - &ratio;
    debug_assert!(margin.is_negative());
    let trace = json!({
        "sum_m": rj(&s),
        "omega_arg": arg,
        "n0": n0,
        "iterates": iterates,
        "violating_j": j,
        "rounds_allowed": rounds,
        "bound": bound,
        "uniform_bound": uniform,
    });
    let params = json!({ "model": model, "omega": omega, "m": m, "l": l, "g": g });
    let cert = Certificate {
        theorem: TheoremTag::KochenStoneMeta,
        params,
        lhs: Side::Exact(target),
        relation: Relation::Ge,
        rhs: Side::Exact(ratio),
        margin,
        verdict: Verdict::Fail,
        trace,
    };
    Ok((cert, None))
}

/// Square-root-free form of the algebraic step: given `b >= 4α/ε^2`,
/// certifies `(ε b)^2 >= 4 α a`, which yields
/// `(√a - √α)^2 / (b - β) + ε >= a / b`.
pub fn ks_algebra_check(
    a: &Rational,
    b: &Rational,
    alpha: &Rational,
    beta: &Rational,
    eps: &Rational,
) -> Result<Certificate, TheoremError> {
    let zero = Rational::zero();
    let mut violations = Vec::new();
    if !(a > &zero && a <= b) {
        violations.push("0 < a <= b".to_string());
    }
    if !(alpha >= &zero && alpha < a) {
        violations.push("0 <= α < a".to_string());
    }
    if !(beta >= &zero && beta < b) {
        violations.push("0 <= β < b".to_string());
    }
    if eps <= &zero {
        violations.push("ε > 0".to_string());
    } else if b < &(int(4) * alpha / (eps * eps)) {
        violations.push("b >= 4α/ε²".to_string());
    }
    if !violations.is_empty() {
        return Err(TheoremError::Preconditions(violations));
    }
    let lhs = (eps * b) * (eps * b);
    let rhs = int(4) * alpha * a;
    let params = json!({ "a": rj(a), "b": rj(b), "alpha": rj(alpha), "beta": rj(beta), "epsilon": rj(eps) });
    let trace = json!({ "precondition_bound": rj(&(int(4) * alpha / (eps * eps))) });
    Ok(Certificate::exact(TheoremTag::KsAlgebra, params, lhs, Relation::Ge, rhs, true, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SequenceSpec;
    use crate::numerics::rat;
    use crate::rates::derive_divergence_rate;
    use num_traits::One;

    fn fair() -> EventModel {
        EventModel::independent(SequenceSpec::constant(rat(1, 2)))
    }

    fn sure() -> EventModel {
        EventModel::independent(SequenceSpec::constant(int(1)))
    }

    #[test]
    fn chung_erdos_examples() {
        let die = EventModel::independent(SequenceSpec::constant(rat(1, 6)));
        let c = chung_erdos(&die, 1).unwrap();
        assert_eq!(c.margin, Rational::zero());
        let c = chung_erdos(&fair(), 2).unwrap();
        assert_eq!((c.lhs.as_exact().unwrap(), c.rhs.as_exact().unwrap()), (&rat(3, 4), &rat(2, 3)));
        let c = chung_erdos(&EventModel::nested(SequenceSpec::constant(rat(1, 3))), 5).unwrap();
        assert_eq!(c.margin, Rational::zero());
        assert!(c.passed());
        let zero = EventModel::nested(SequenceSpec::constant(Rational::zero()));
        assert!(matches!(chung_erdos(&zero, 4), Err(TheoremError::Precondition(_))));
    }

    #[test]
    fn ks_tail_examples() {
        let omega = DivergenceRate::Linear { k: 2 };
        assert_eq!(ks_tail_threshold(&fair(), &omega, 2, 1).unwrap(), 16);
        let c = ks_tail_estimate(&fair(), &omega, 2, 1, 17).unwrap();
        assert_eq!(c.lhs.as_exact().unwrap(), &(Rational::one() - pow2_neg(15) + rat(1, 4)));
        assert_eq!(c.rhs.as_exact().unwrap(), &rat(17, 18));
        assert!(c.passed());
        assert!(matches!(ks_tail_estimate(&fair(), &omega, 2, 1, 16), Err(TheoremError::Precondition(_))));

        let c = ks_tail_estimate(&sure(), &DivergenceRate::Linear { k: 1 }, 1, 0, 7).unwrap();
        assert_eq!((c.lhs.as_exact().unwrap(), c.rhs.as_exact().unwrap()), (&rat(3, 2), &int(1)));

        let ratio = EventModel::nested(SequenceSpec::Ratio);
        let omega = derive_divergence_rate(&ratio, 64, 1000).unwrap();
        let j = ks_tail_threshold(&ratio, &omega, 3, 2).unwrap() + 1;
        assert!(ks_tail_estimate(&ratio, &omega, 3, 2, j).unwrap().passed());
    }

    #[test]
    fn kochen_stone_examples() {
        let (c, w) =
            kochen_stone_meta(&sure(), &DivergenceRate::Linear { k: 1 }, 1, 0, &GFunction::successor()).unwrap();
        let w = w.unwrap();
        assert_eq!((w.n, w.r, w.n0), (4, 0, 4));
        assert!(c.passed());

        let (c, w) =
            kochen_stone_meta(&fair(), &DivergenceRate::Linear { k: 2 }, 1, 0, &GFunction::successor()).unwrap();
        let w = w.unwrap();
        assert_eq!((w.n, w.r, w.interval_end), (4, 0, 5));
        assert_eq!(c.lhs.as_exact().unwrap(), &rat(15, 8));
        assert_eq!(w.per_j_margins.len(), 2);
        assert!(c.passed());

        let aff = EventModel::nested(SequenceSpec::affine_reciprocal(rat(1, 2), rat(1, 2), 1));
        let omega = derive_divergence_rate(&aff, 64, 10_000).unwrap();
        let (c, w) = kochen_stone_meta(&aff, &omega, 1, 2, &GFunction::doubling()).unwrap();
        let w = w.unwrap();
        assert_eq!((w.n0, w.r, w.n), (11, 0, 11));
        assert!(w.r <= 8 && w.per_j_margins.iter().all(|jm| !jm.margin.is_negative()));
        assert!(c.passed());
        let uniform = uniform_bound(&omega, &GFunction::doubling(), 1, 2).unwrap();
        assert!(uniform.admits(w.n));
    }

    #[test]
    fn kochen_stone_rejects_invalid_rates_and_zero_m() {
        let die = EventModel::independent(SequenceSpec::constant(rat(1, 6)));
        let err = kochen_stone_meta(&die, &DivergenceRate::Linear { k: 1 }, 1, 0, &GFunction::successor()).unwrap_err();
        assert!(matches!(err, TheoremError::InvalidDivergenceRate { n: 1, .. }));
        assert!(matches!(
            kochen_stone_meta(&fair(), &DivergenceRate::Linear { k: 2 }, 0, 0, &GFunction::successor()),
            Err(TheoremError::Precondition(_))
        ));
    }

    #[test]
    fn ks_algebra_examples() {
        let c = ks_algebra_check(&int(1), &int(1), &int(0), &int(0), &int(1)).unwrap();
        assert!(c.passed());
        let c = ks_algebra_check(&int(1), &int(4), &rat(1, 4), &int(0), &rat(1, 2)).unwrap();
        assert_eq!((c.lhs.as_exact().unwrap(), c.rhs.as_exact().unwrap()), (&int(4), &int(1)));
        let c = ks_algebra_check(&int(1), &int(1), &rat(1, 16), &int(0), &rat(1, 2)).unwrap();
        assert_eq!(c.margin, Rational::zero());
        assert!(c.passed());
        match ks_algebra_check(&int(2), &int(1), &int(3), &int(1), &int(0)) {
            Err(TheoremError::Preconditions(v)) => assert_eq!(v.len(), 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
