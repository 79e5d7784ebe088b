//! Brute-force computations on small instances, written independently of the
//! closed forms in [`crate::models`].
//!
//! Union and counting probabilities come from an explicit finite sample
//! space ([`AtomSpace`]); the Kochen-Stone minimality scan rebuilds every sum
//! from pairwise joints with a different summation order.

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{CountDistribution, EventModel, ModelError, SequenceSpec, SpeckerPartialSums};
use crate::numerics::{pow2_neg, rat, Index, Rational};
use crate::rates::{GFunction, RateError};

/// Largest number of independent events enumerated atom by atom.
pub const MAX_INDEPENDENT_EVENTS: Index = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("{events} independent events exceed the enumeration limit of {MAX_INDEPENDENT_EVENTS}")]
    TooLarge { events: Index },
    #[error("invalid range [{n}, {m}]")]
    InvalidRange { n: Index, m: Index },
    #[error("atom weights are invalid: {0}")]
    InvalidAtoms(String),
    #[error("no witness in ({m}, {limit}]")]
    NoWitness { m: Index, limit: Index },
}

/// A finite sample space over the events `first..first + width - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomSpace {
    pub first: Index,
    pub width: usize,
    /// `(weight, membership)`; `membership[k]` says whether the atom lies in `A_{first + k}`.
    pub atoms: Vec<(Rational, Vec<bool>)>,
}

impl AtomSpace {
    pub fn new(first: Index, width: usize, atoms: Vec<(Rational, Vec<bool>)>) -> Result<Self, OracleError> {
        if atoms.iter().any(|(w, bits)| w.is_negative() || bits.len() != width) {
            return Err(OracleError::InvalidAtoms("negative weight or wrong membership width".into()));
        }
        let total: Rational = atoms.iter().map(|(w, _)| w).sum();
        if !total.is_one() {
            return Err(OracleError::InvalidAtoms(format!("weights sum to {total}")));
        }
        Ok(Self { first, width, atoms })
    }

    /// Sample space of the events `n..=m` of `model`.
    pub fn for_model(model: &EventModel, n: Index, m: Index) -> Result<Self, OracleError> {
        if n == 0 || n > m {
            return Err(OracleError::InvalidRange { n, m });
        }
        let width = (m - n + 1) as usize;
        let p: Vec<Rational> = (n..=m).map(|i| model.prob(i)).collect::<Result<_, _>>()?;
        let atoms = match model {
            EventModel::IndependentBernoulli(_) => {
                if width as Index > MAX_INDEPENDENT_EVENTS {
                    return Err(OracleError::TooLarge { events: width as Index });
                }
                (0u32..1 << width)
                    .map(|mask| {
                        let bits: Vec<bool> = (0..width).map(|k| (mask >> k) & 1 == 1).collect();
                        let weight = bits
                            .iter()
                            .zip(&p)
                            .map(|(&b, pk)| if b { pk.clone() } else { Rational::one() - pk })
                            .product();
                        (weight, bits)
                    })
                    .collect()
            }
            EventModel::NestedIntervals(_) => {
                // segments (t_{j-1}, t_j] between consecutive breakpoints of [0, 1]
                let mut cuts = p.clone();
                cuts.push(Rational::zero());
                cuts.push(Rational::one());
                cuts.sort();
                cuts.dedup();
                cuts.windows(2)
                    .map(|w| {
                        let bits = p.iter().map(|q| &w[1] <= q).collect();
                        (&w[1] - &w[0], bits)
                    })
                    .collect()
            }
            EventModel::MutuallyExclusive(_) => {
                let mut atoms: Vec<(Rational, Vec<bool>)> = (0..width)
                    .map(|k| {
                        let mut bits = vec![false; width];
                        bits[k] = true;
                        (p[k].clone(), bits)
                    })
                    .collect();
                let before: Rational = (1..n).map(|i| model.prob(i)).sum::<Result<Rational, _>>()?;
                let rest = Rational::one() - p.iter().sum::<Rational>() - &before;
                if rest.is_negative() {
                    return Err(ModelError::ExclusiveMassExceeded {
                        index: m,
                        total: (Rational::one() - rest).to_string(),
                    }
                    .into());
                }
                // mass of the earlier events belongs to no event in range
                atoms.push((rest + before, vec![false; width]));
                atoms
            }
        };
        Self::new(n, width, atoms)
    }

    pub fn union(&self) -> Rational {
        self.atoms.iter().filter(|(_, bits)| bits.iter().any(|&b| b)).map(|(w, _)| w).sum()
    }

    pub fn count_pmf(&self) -> Vec<Rational> {
        let mut pmf = vec![Rational::zero(); self.width + 1];
        for (w, bits) in &self.atoms {
            pmf[bits.iter().filter(|&&b| b).count()] += w;
        }
        pmf
    }
}

/// `P[A_n ∪ ... ∪ A_m]` by enumeration.
pub fn brute_union(model: &EventModel, n: Index, m: Index) -> Result<Rational, OracleError> {
    Ok(AtomSpace::for_model(model, n, m)?.union())
}

/// Law of `η_n` by enumeration.
pub fn brute_count_dist(model: &EventModel, n: Index) -> Result<CountDistribution, OracleError> {
    Ok(CountDistribution::from_pmf(AtomSpace::for_model(model, 1, n)?.count_pmf()))
}

/// Least `n ∈ (m, scan_limit]` with `P[⋃_{i=m+1}^{n} A_i] + 2^{-l} >= a_j / b_j`
/// for all `j ∈ [n, g(n)]`, by a linear scan.
///
/// `a_j` and `b_j` are rebuilt from `joint` row by row, and the union follows
/// the one-step recurrence for the model kind.
pub fn min_witness_scan(
    model: &EventModel,
    m: Index,
    l: u32,
    g: &GFunction,
    scan_limit: Index,
) -> Result<Index, OracleError> {
    let eps = pow2_neg(l);
    let mut ratios: Vec<Rational> = vec![Rational::zero()];
    let mut s = Rational::zero();
    let mut b = Rational::zero();
    let mut ratio_at = |j: Index, ratios: &mut Vec<Rational>| -> Result<Rational, OracleError> {
        while (ratios.len() as Index) <= j {
            let k = ratios.len() as Index;
            let mut row = Rational::zero();
            for i in 1..k {
                row += model.joint(i, k)?;
            }
            b += row * rat(2, 1) + model.joint(k, k)?;
            s += model.prob(k)?;
            ratios.push(if b.is_zero() { Rational::zero() } else { &s * &s / &b });
        }
        Ok(ratios[j as usize].clone())
    };
    let mut union = Rational::zero();
    for n in m + 1..=scan_limit {
        let p = model.prob(n)?;
        union = match model {
            EventModel::IndependentBernoulli(_) => &union + &p * (Rational::one() - &union),
            EventModel::NestedIntervals(_) => union.max(p),
            EventModel::MutuallyExclusive(_) => &union + p,
        };
        let target = &union + &eps;
        let end = g.eval(n)?;
        let mut holds = true;
        for j in n..=end {
            if ratio_at(j, &mut ratios)? > target {
                holds = false;
                break;
            }
        }
        if holds {
            return Ok(n);
        }
    }
    Err(OracleError::NoWitness { m, limit: scan_limit })
}

/// One oracle comparison: union over `[n, m]` and the count law at `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub model: EventModel,
    pub n: Index,
    pub m: Index,
}

/// Seeded list of instances; the seed reproduces the list exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleManifest {
    pub seed: u64,
    pub instances: Vec<OracleInstance>,
}

/// Outcome of comparing one instance against the closed forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleDiff {
    pub instance: OracleInstance,
    pub union_closed: String,
    pub union_brute: String,
    pub count_matches: bool,
}

impl OracleDiff {
    pub fn agrees(&self) -> bool {
        self.union_closed == self.union_brute && self.count_matches
    }
}

impl OracleInstance {
    pub fn diff(&self) -> Result<OracleDiff, OracleError> {
        let closed = self.model.union_prob(self.n, self.m)?;
        let brute = brute_union(&self.model, self.n, self.m)?;
        let count_matches = self.model.count_distribution(self.m)? == brute_count_dist(&self.model, self.m)?;
        Ok(OracleDiff {
            instance: self.clone(),
            union_closed: closed.to_string(),
            union_brute: brute.to_string(),
            count_matches,
        })
    }
}

fn random_term<R: Rng>(rng: &mut R) -> Rational {
    let den = rng.random_range(1..=12i64);
    rat(rng.random_range(0..=den), den)
}

/// A random finite table model of length `len`; nested tables are sorted and
/// exclusive tables are scaled to total mass at most 1.
pub fn random_table_model<R: Rng>(rng: &mut R, kind: usize, len: usize) -> EventModel {
    let mut terms: Vec<Rational> = (0..len).map(|_| random_term(rng)).collect();
    match kind % 3 {
        0 => EventModel::independent(SequenceSpec::finite(terms)),
        1 => {
            terms.sort();
            let last = terms.last().cloned().unwrap_or_else(Rational::zero);
            EventModel::nested(SequenceSpec::table(terms, SequenceSpec::constant(last)))
        }
        _ => {
            let total: Rational = terms.iter().sum();
            if total > Rational::one() {
                terms.iter_mut().for_each(|t| *t = &*t / &total);
            }
            EventModel::exclusive(SequenceSpec::finite(terms))
        }
    }
}

impl OracleManifest {
    /// `count` instances cycling through the three model kinds, each with at
    /// most 12 events.
    pub fn generate(seed: u64, count: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let instances = (0..count)
            .map(|idx| {
                let len = rng.random_range(1..=12usize);
                let model = random_table_model(&mut rng, idx, len);
                let m = rng.random_range(1..=len as Index);
                let n = rng.random_range(1..=m);
                OracleInstance { model, n, m }
            })
            .collect();
        Self { seed, instances }
    }
}

/// A random enumeration of distinct elements below `universe` whose reveal
/// schedule is adversarial: heavy elements (small `e`) appear last, at
/// widely spaced steps.
pub fn random_specker<R: Rng>(rng: &mut R, universe: u32, max_len: usize) -> SpeckerPartialSums {
    let mut pool: Vec<u32> = (0..universe).collect();
    pool.shuffle(rng);
    let len = rng.random_range(0..=max_len.min(pool.len()));
    let mut elements: Vec<u32> = pool.into_iter().take(len).collect();
    // light mass first
    elements.sort_unstable_by(|a, b| b.cmp(a));
    let mut step: Index = 1;
    let steps = elements
        .iter()
        .map(|_| {
            step += rng.random_range(1..=step.min(1 << 12));
            step
        })
        .collect();
    if rng.random_bool(0.5) {
        elements.reverse();
    }
    SpeckerPartialSums::new(elements, steps).expect("distinct elements and positive steps")
}
