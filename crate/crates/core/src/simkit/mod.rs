//! Monte Carlo synthesis of photodetection timestamp streams.
//!
//! Every stochastic stage draws from its own ChaCha8 sub-stream derived from
//! `(seed, stage, channel, block)`, so a given `(scenario, duration, seed)`
//! reproduces bit-identical streams on any platform.

mod detector;
mod link;
mod pairs;
mod rng;
mod stream;

pub use detector::{apply_detector, delay_stream, thin};
pub use link::{simulate_link, ArmCounts, LinkRun, SimulationReport};
pub use pairs::{synthesize_pairs, PairStreams};
pub use rng::derive_seed;
pub use stream::{check_sorted, EventLabel, EventStream};

/// Channel id of the idler (locally detected) stream.
pub const IDLER_CHANNEL: u16 = 0;
/// Channel id of the signal (fiber-transmitted) stream.
pub const SIGNAL_CHANNEL: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Upper bound on events held in memory at once.
    pub event_budget: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            event_budget: 100_000_000,
        }
    }
}
