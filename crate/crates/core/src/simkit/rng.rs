use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random sub-stream per simulation stage.
#[derive(Debug, Clone, Copy)]
#[repr(u8)]
pub(crate) enum Stage {
    Emission = 1,
    PairOffset = 2,
    Analyzer = 3,
    Loss = 4,
    Chromatic = 6,
    Efficiency = 7,
    Jitter = 8,
    Darks = 9,
    Afterpulse = 10,
    Thin = 11,
}

/// ChaCha8 keyed by `seed`, with the 64-bit stream id packed from
/// (stage, channel, block). Streams never overlap, so adding or reordering
/// stages leaves every other stage's draws untouched.
pub(crate) fn stage_rng(seed: u64, stage: Stage, channel: u16, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = ((stage as u64) << 56) | ((channel as u64) << 40) | (block & ((1 << 40) - 1));
    rng.set_stream(stream);
    rng
}

/// SplitMix64 mix of a master seed and an index, for per-row/per-setting seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
