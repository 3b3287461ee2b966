//! ITU grid arithmetic, channel pairing, emission envelope and the
//! rate/capacity budget for multiplexed pair distribution.

mod budget;
mod grid;
mod spectrum;

pub use budget::{
    aggregate_capacity, coincidence_rate, max_pair_rate, singles_rate, BindingConstraint, CapacityReport,
    ChannelWeighting, DetectorSpec, LinkBudget, PairCapacity, RateLimit, MULTIPAIR_FRACTION,
};
pub use grid::{
    pair_for, standard_pairs, ChannelPair, ItuChannel, DEFAULT_PAIR_SUM, GRID_ORIGIN_GHZ, GRID_SPACING_GHZ,
    MAX_CHANNEL, MIN_CHANNEL, SPEED_OF_LIGHT_NM_THZ,
};
pub use spectrum::{spectrum_weight, EnvelopeShape, SpectralEnvelope};
