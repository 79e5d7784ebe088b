use num_traits::{One, Zero};
use serde_json::{json, Value};

use super::{rj, validate_divergence, Certificate, Relation, TheoremError, TheoremTag};
use crate::models::{EventModel, ModelError};
use crate::numerics::{int, pow2, pow2_neg, Index, Rational};
use crate::rates::{DivergenceRate, LiminfSearcher, LiminfWitness, RateError};

/// `b_n >= a_n`, cross-checked against `b_n / a_n = M(η_n^2) / M(η_n)^2`.
pub fn ratio_lower_bound(model: &EventModel, n: Index) -> Result<Certificate, TheoremError> {
    let stats = model.sum_stats(n)?;
    if stats.s.is_zero() {
        return Err(TheoremError::Precondition(format!("Σ_(i<={n}) P[A_i] = 0")));
    }
    let moments = match model.count_distribution(n) {
        Ok(dist) => {
            let agrees = dist.mean == stats.s && dist.second_moment() == stats.b;
            json!({
                "mean": rj(&dist.mean),
                "second_moment": rj(&dist.second_moment()),
                "agrees": agrees,
            })
        }
        Err(ModelError::CapExceeded { .. }) => json!("skipped"),
        Err(e) => return Err(e.into()),
    };
    let agrees = moments.get("agrees").and_then(Value::as_bool).unwrap_or(true);
    let trace = json!({ "s": rj(&stats.s), "moment_check": moments });
    let params = json!({ "model": model, "n": n });
    Ok(Certificate::exact(TheoremTag::RatioLowerBound, params, stats.b, Relation::Ge, stats.a, agrees, trace))
}

/// Chebyshev step with `ε = 1/2`: `P[η_n <= M/2] <= 4 D^2 / M^2`, and
/// `P[η_n <= M/2] <= 2^{2-k}` whenever `D^2 / M^2 <= 2^{-k}`.
pub fn bk_tail_check(model: &EventModel, k: u32, n_k: Index) -> Result<Certificate, TheoremError> {
    let dist = model.count_distribution(n_k)?;
    let mean = &dist.mean;
    if mean.is_zero() {
        return Err(TheoremError::Precondition(format!("M(η_{n_k}) = 0")));
    }
    let tail = dist.cdf(&(mean / int(2)));
    let rel_var = &dist.variance / (mean * mean);
    let chebyshev = &rel_var * int(4);
    let sharpened_applies = rel_var <= pow2_neg(k);
    let sharpened_bound = pow2(2 - i64::from(k));
    let sharpened_holds = !sharpened_applies || tail <= sharpened_bound;
    let trace = json!({
        "mean": rj(mean),
        "variance": rj(&dist.variance),
        "relative_variance": rj(&rel_var),
        "sharpened_applies": sharpened_applies,
        "sharpened_bound": rj(&sharpened_bound),
        "sharpened_holds": sharpened_holds,
    });
    let params = json!({ "model": model, "k": k, "n_k": n_k });
    Ok(Certificate::exact(TheoremTag::BkTail, params, tail, Relation::Le, chebyshev, sharpened_holds, trace))
}

/// Erdős-Rényi with rates: with `m = max(ω(2n), l + 3)`, `n_1 = φ(1, 1)` and
/// `n_k = φ(k, max(n_{k-1}, k))`, certifies `P[⋃_{i=n}^{n_m} A_i] >= 1 - 2^{-l}`.
///
/// Every chain element is checked against the liminf property exactly.
pub fn erdos_renyi(
    model: &EventModel,
    omega: &DivergenceRate,
    phi: &LiminfWitness,
    n: Index,
    l: u32,
) -> Result<Certificate, TheoremError> {
    if n == 0 {
        return Err(TheoremError::Precondition("n starts at 1".into()));
    }
    validate_divergence(model, omega, 2 * n)?;
    let omega_2n = omega.eval(2 * n)?;
    let m = omega_2n.max(u64::from(l) + 3);
    let chain = liminf_chain(model, phi, m)?;
    let end = *chain.last().expect("m >= 3");
    let union = model.union_prob(n, end)?;
    let bound = Rational::one() - pow2_neg(l);
    let trace = json!({ "omega_2n": omega_2n, "m": m, "chain": chain });
    let params = json!({ "model": model, "omega": omega, "phi": phi, "n": n, "l": l });
    Ok(Certificate::exact(TheoremTag::ErdosRenyi, params, union, Relation::Ge, bound, true, trace))
}

/// `n_1, ..., n_m`, each verified to satisfy `n_k >= max(n_{k-1}, k)` and
/// `b/a <= 1 + 2^{-k}` at `n_k`.
fn liminf_chain(model: &EventModel, phi: &LiminfWitness, m: u64) -> Result<Vec<Index>, TheoremError> {
    let budget = match phi {
        LiminfWitness::Searched { budget } => *budget,
        LiminfWitness::Closed { .. } => Index::MAX,
    };
    let mut searcher = LiminfSearcher::new(model, budget);
    let mut acc = model.accumulator();
    let mut chain = Vec::with_capacity(m as usize);
    let mut prev = 1;
    for k in 1..=m {
        let l = u32::try_from(k).map_err(|_| RateError::Overflow(format!("chain length {m}")))?;
        let arg = if k == 1 { 1 } else { prev.max(k) };
        let nk = match phi.eval_closed(l, arg)? {
            Some(v) => {
                if v < arg {
                    return Err(TheoremError::InvalidLiminfWitness { l, n: arg, reason: format!("φ = {v} < n") });
                }
                acc.advance_to(v)?;
                let limit = Rational::one() + pow2_neg(l);
                let ratio = acc.stats().erdos_renyi_ratio();
                if !ratio.as_ref().is_some_and(|r| r <= &limit) {
                    let shown = ratio.map_or("undefined".to_string(), |r| crate::numerics::format_rational(&r));
                    return Err(TheoremError::InvalidLiminfWitness {
                        l,
                        n: arg,
                        reason: format!("b/a = {shown} at {v}"),
                    });
                }
                v
            }
            None => searcher.find(l, arg)?,
        };
        chain.push(nk);
        prev = nk;
    }
    Ok(chain)
}
