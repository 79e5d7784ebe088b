//! Exact-arithmetic checkers for the quantitative Borel-Cantelli lemmas, the
//! quantitative Erdős-Rényi theorem and the metastable Kochen-Stone bound.
//!
//! Every probability handled here is an exact rational computed in closed
//! form from an [`EventModel`]. The only transcendental quantity that ever
//! enters a verdict, `e^{-N}`, is decided through nested rational enclosures
//! ([`numerics::exp_neg_enclosure`]), so no floating point sits on any
//! decision path.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: rationals, interval enclosures, decimal rendering.
//! - [`models`]: event sequences with exact single, pairwise, union and
//!   counting-variable probabilities.
//! - [`rates`]: divergence/convergence rates, liminf witnesses, the
//!   interval-builder `g`, and the generic metastability checker.
//! - [`theorems`]: certificate-producing checkers for each quantitative
//!   statement.
//! - [`oracle`]: brute-force enumerations used to cross-check the closed forms.

pub mod models;
pub mod numerics;
pub mod oracle;
pub mod rates;
pub mod theorems;

pub use models::{
    CountDistribution, EventModel, IndependentBernoulli, ModelError, MutuallyExclusive, NestedIntervals, SequenceSpec,
    SpeckerPartialSums, StatsAccumulator, SumStats,
};
pub use numerics::{Index, NumericsError, RatInterval, Rational};
pub use rates::{ConvergenceRate, DivergenceRate, GFunction, IndexBound, LiminfWitness, RateError};
pub use theorems::{Certificate, MetastableWitness, TheoremError, TheoremTag, Verdict};
