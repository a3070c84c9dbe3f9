//! Seeded random substreams.
//!
//! Every consumer of randomness (initial state, channel delays, codebook,
//! decode coin, wrong-path draws) gets its own ChaCha stream derived from the
//! experiment seed, a purpose tag and an index. Results are therefore
//! independent of scheduling and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. The tag occupies the top byte of the
/// ChaCha stream id so two purposes never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    InitialState = 1,
    Delays = 2,
    Codebook = 3,
    DecodeCoin = 4,
    WrongPath = 5,
    Receptions = 6,
    Trial = 7,
    Misc = 8,
}

/// Mixes a seed with an index; used to derive per-episode and per-grid-point
/// seeds from the experiment seed.
pub fn mix(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over seed ^ golden-ratio-scaled index
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Returns the substream for `(seed, purpose, index)`.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | (index & 0x00FF_FFFF_FFFF_FFFF));
    rng
}
