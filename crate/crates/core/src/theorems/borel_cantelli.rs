use std::cmp::Ordering;

use num_traits::One;
use serde_json::json;

use super::{rj, validate_divergence, Certificate, Relation, Side, TheoremError, TheoremTag, Verdict};
use crate::models::{EventModel, IndependentBernoulli};
use crate::numerics::{compare_rational_vs_enclosed, exp_neg_enclosure, pow2_neg, NumericsError, Rational};
use crate::rates::{ConvergenceRate, DivergenceRate};

/// First Borel-Cantelli lemma with a rate: if `Σ_{i=φ(l)}^m P[A_i] <= 2^{-l}`
/// then `P[⋃_{i=φ(l)}^m A_i] <= 2^{-l}`.
pub fn first_bc(model: &EventModel, phi: &ConvergenceRate, l: u32, m: u64) -> Result<Certificate, TheoremError> {
    let start = phi.eval(l)?;
    if m <= start {
        return Err(TheoremError::Precondition(format!("m = {m} must exceed φ({l}) = {start}")));
    }
    let bound = pow2_neg(l);
    let sum = model.partial_sum(start, m)?;
    let union = model.union_prob(start, m)?;
    let hypothesis = sum <= bound;
    let trace = json!({
        "phi_l": start,
        "hypothesis_sum": rj(&sum),
        "hypothesis_holds": hypothesis,
        "hypothesis_margin": rj(&(&bound - &sum)),
        "sum_equals_union": sum == union,
    });
    let params = json!({ "model": model, "phi": phi, "l": l, "m": m });
    Ok(Certificate::exact(TheoremTag::FirstBc, params, union, Relation::Le, bound, hypothesis, trace))
}

/// Second Borel-Cantelli lemma with a rate:
/// `P[⋃_{i=n}^{ω(n+N-1)} A_i] >= 1 - e^{-N}` for independent events.
///
/// Decided on the complement: `Π (1 - p_i) <= e^{-N}`, comparing the exact
/// product against nested enclosures of `e^{-N}` up to `budget` bits.
pub fn second_bc(
    model: &IndependentBernoulli,
    omega: &DivergenceRate,
    n: u64,
    big_n: u32,
    budget: u32,
) -> Result<Certificate, TheoremError> {
    if n == 0 || big_n == 0 {
        return Err(TheoremError::Precondition("n and N start at 1".into()));
    }
    let wrapped = EventModel::IndependentBernoulli(model.clone());
    let top = n + u64::from(big_n) - 1;
    validate_divergence(&wrapped, omega, top)?;
    let end = omega.eval(top)?;
    if end < n {
        return Err(TheoremError::Precondition(format!("window [{n}, {end}] is empty")));
    }
    let complement = model.complement_product(n, end)?;
    let union = Rational::one() - &complement;
    let params = json!({ "model": wrapped, "omega": omega, "n": n, "N": big_n });
    let target = |prec: u32| exp_neg_enclosure(big_n, prec);
    let (verdict, enclosure, margin) = match compare_rational_vs_enclosed(&complement, target, budget) {
        Ok((ord, enc)) => {
            let rhs = enc.one_minus();
            match ord {
                Ordering::Less => (Verdict::Pass, enc, &union - rhs.hi()),
                _ => (Verdict::Fail, enc, &union - rhs.lo()),
            }
        }
        Err(NumericsError::Undecided { .. }) => {
            let enc = exp_neg_enclosure(big_n, budget);
            let margin = &union - enc.one_minus().hi();
            (Verdict::Undecided, enc, margin)
        }
        Err(e) => return Err(e.into()),
    };
    let trace = json!({
        "window_end": end,
        "complement_product": rj(&complement),
        "exp_neg_enclosure": enclosure,
        "enclosure_width": rj(&enclosure.width()),
    });
    Ok(Certificate {
        theorem: TheoremTag::SecondBc,
        params,
        lhs: Side::Exact(union),
        relation: Relation::Ge,
        rhs: Side::Enclosed(enclosure.one_minus()),
        margin,
        verdict,
        trace,
    })
}
