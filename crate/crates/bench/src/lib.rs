//! Fixtures shared by the benchmarks.

use bcq_core::numerics::rat;
use bcq_core::{EventModel, SequenceSpec};

pub fn fair_coin() -> EventModel {
    EventModel::independent(SequenceSpec::constant(rat(1, 2)))
}

pub fn fair_die() -> EventModel {
    EventModel::independent(SequenceSpec::constant(rat(1, 6)))
}

/// Nested intervals of length `1/2 + 1/(2i)`.
pub fn shrinking_intervals() -> EventModel {
    EventModel::nested(SequenceSpec::affine_reciprocal(rat(1, 2), rat(1, 2), 1))
}

pub fn halving_exclusive() -> EventModel {
    EventModel::exclusive(SequenceSpec::geometric(rat(1, 2)))
}
