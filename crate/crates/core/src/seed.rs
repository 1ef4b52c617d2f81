//! Counter-based seed derivation.
//!
//! A single master seed fans out into independent ChaCha streams keyed by
//! `(purpose, round, client)`. Streams never share state, so adding a new
//! consumer (e.g. a diagnostic) leaves every other stream untouched.
//!
//! Derivation: `splitmix64` folded over `[master, purpose tag, round, client]`,
//! the result seeding `ChaCha8Rng::seed_from_u64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Init,
    Data,
    Partition,
    Sampling,
    LocalSolve,
    Heavy,
    Probe,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 0x01,
            Purpose::Data => 0x02,
            Purpose::Partition => 0x03,
            Purpose::Sampling => 0x04,
            Purpose::LocalSolve => 0x05,
            Purpose::Heavy => 0x06,
            Purpose::Probe => 0x07,
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for one `(purpose, round, client)` stream.
pub fn derive_seed(master: u64, purpose: Purpose, round: u64, client: u64) -> u64 {
    [purpose.tag(), round, client]
        .into_iter()
        .fold(splitmix64(master), |acc, word| splitmix64(acc ^ word))
}

pub fn stream(master: u64, purpose: Purpose, round: u64, client: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, round, client))
}
