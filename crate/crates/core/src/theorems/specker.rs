use num_traits::Signed;
use serde_json::json;

use super::{rj, Certificate, Relation, TheoremError, TheoremTag};
use crate::models::SpeckerPartialSums;
use crate::numerics::{pow2_neg, Index, Rational};

/// Least step `n >= 1` with `q - q_n < 2^{-l}`.
///
/// The inequality is strict, so an element of mass exactly `2^{-l}` forces the
/// bound past its reveal step.
pub fn honest_specker_phi(q: &SpeckerPartialSums, l: u32) -> Index {
    let limit = q.limit();
    let eps = pow2_neg(l);
    let mut steps: Vec<Index> = q.reveal_steps().to_vec();
    steps.push(1);
    steps.sort_unstable();
    steps.dedup();
    // q_n only changes at reveal steps
    steps.into_iter().find(|&s| &limit - q.partial_sum(s) < eps).expect("the last reveal step reaches the limit")
}

/// Extracts `q_{φ(0, l)}` from a bounding function `φ`; for an honest `φ` the
/// result lies within `2^{-l}` of the limit.
pub fn specker_reduction<F>(q: &SpeckerPartialSums, phi_bound: F, l: u32) -> Result<Rational, TheoremError>
where
    F: Fn(Index, u32) -> Index,
{
    match phi_bound(0, l) {
        0 => Err(TheoremError::Precondition(format!("φ(0, {l}) = 0 is not an index"))),
        step => Ok(q.partial_sum(step)),
    }
}

/// `|q_{φ(0,l)} - q| <= 2^{-l}` for the honest bound, with the exact error.
pub fn specker_certificate(q: &SpeckerPartialSums, l: u32) -> Result<Certificate, TheoremError> {
    let phi = honest_specker_phi(q, l);
    let approx = specker_reduction(q, |_, l| honest_specker_phi(q, l), l)?;
    let limit = q.limit();
    let error = (&limit - &approx).abs();
    let params = json!({ "enumeration": q.enumeration(), "reveal_steps": q.reveal_steps(), "l": l });
    let trace = json!({ "phi_0_l": phi, "approximation": rj(&approx), "limit": rj(&limit) });
    Ok(Certificate::exact(TheoremTag::SpeckerReduction, params, error, Relation::Le, pow2_neg(l), true, trace))
}
