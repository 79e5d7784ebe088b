use num_traits::Zero;
use serde_json::json;

use super::{rj, Certificate, Relation, TheoremError, TheoremTag};
use crate::models::{EventModel, NestedIntervals};
use crate::numerics::{Index, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YanRatios {
    /// `a_n / b_n`
    pub full: Rational,
    /// `Σ_{i<k} P[A_i] P[A_k] / Σ_{i<k} P[A_i A_k]`
    pub off_diag: Rational,
}

/// The Chung-Erdős ratio with and without its diagonal terms.
pub fn yan_ratios(model: &EventModel, n: Index) -> Result<YanRatios, TheoremError> {
    if n < 2 {
        return Err(TheoremError::Precondition(format!("off-diagonal sums are empty for n = {n}")));
    }
    let stats = model.sum_stats(n)?;
    let full = stats.chung_erdos_ratio().ok_or_else(|| TheoremError::Precondition(format!("b_{n} = 0")))?;
    if stats.off_diag_joint.is_zero() {
        return Err(TheoremError::Precondition(format!("Σ_(i<k<={n}) P[A_i A_k] = 0")));
    }
    let off_diag = &stats.off_diag_prod / &stats.off_diag_joint;
    Ok(YanRatios { full, off_diag })
}

/// `|full - off_diag| <= tolerance`.
pub fn yan_certificate(model: &EventModel, n: Index, tolerance: &Rational) -> Result<Certificate, TheoremError> {
    let y = yan_ratios(model, n)?;
    let params = json!({ "model": model, "n": n, "tolerance": rj(tolerance) });
    let trace = json!({ "difference": rj(&(&y.full - &y.off_diag)) });
    Ok(Certificate::exact(TheoremTag::YanRatios, params, y.full, Relation::Within, y.off_diag, true, trace))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WnStats {
    /// `Σ_{i<k<=n} q_i q_k`
    pub u: Rational,
    /// `Σ_{i<n} (n - i) q_i`
    pub v: Rational,
    /// `u / v`
    pub w: Rational,
}

/// `u_n`, `v_n` and `w_n = u_n / v_n` by direct summation.
pub fn wn_stats(model: &NestedIntervals, n: Index) -> Result<WnStats, TheoremError> {
    if n < 2 {
        return Err(TheoremError::Precondition(format!("u_n, v_n need n >= 2, got {n}")));
    }
    let q = model.q.terms(1, n)?;
    let mut u = Rational::zero();
    let mut v = Rational::zero();
    let mut prefix = Rational::zero();
    for (idx, qk) in q.iter().enumerate() {
        u += &prefix * qk;
        prefix += qk;
        let weight = n - 1 - idx as Index;
        if weight > 0 {
            v += qk * Rational::from_integer(weight.into());
        }
    }
    if v.is_zero() {
        return Err(TheoremError::Precondition("v_n = 0".into()));
    }
    let w = &u / &v;
    Ok(WnStats { u, v, w })
}

/// `|w_n - q| <= tolerance` with `q` the limit of the nested sequence.
pub fn wn_certificate(model: &NestedIntervals, n: Index, tolerance: &Rational) -> Result<Certificate, TheoremError> {
    let limit =
        model.q.limit().ok_or_else(|| TheoremError::Precondition("sequence has no closed-form limit".into()))?;
    let st = wn_stats(model, n)?;
    let wrapped = EventModel::NestedIntervals(model.clone());
    let params = json!({ "model": wrapped, "n": n, "tolerance": rj(tolerance) });
    let trace = json!({ "u": rj(&st.u), "v": rj(&st.v) });
    Ok(Certificate::exact(TheoremTag::WnLimit, params, st.w, Relation::Within, limit, true, trace))
}
