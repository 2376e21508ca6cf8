//! Seed splitting into independent named random streams.
//!
//! Every run is driven by one 64-bit seed. Each subsystem draws from its own
//! ChaCha stream so that a change in the number of draws made by one
//! subsystem leaves the sequences seen by the others untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Subsystems that own a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Pairing = 1,
    Scores = 2,
    Detector = 3,
    Attack = 4,
    Pathogen = 5,
    Retrieval = 6,
    Roles = 7,
}

pub type RandomStream = ChaCha8Rng;

/// Returns the generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finaliser, used to derive per-replicate seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` of a run seeded with `base`.
pub fn replicate_seed(base: u64, index: usize) -> u64 {
    mix64(base ^ mix64(index as u64))
}

/// The full set of streams owned by one simulation instance.
#[derive(Debug, Clone)]
pub struct Streams {
    pub pairing: RandomStream,
    pub scores: RandomStream,
    pub detector: RandomStream,
    pub attack: RandomStream,
    pub pathogen: RandomStream,
    pub retrieval: RandomStream,
    pub roles: RandomStream,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            pairing: stream(seed, Stream::Pairing),
            scores: stream(seed, Stream::Scores),
            detector: stream(seed, Stream::Detector),
            attack: stream(seed, Stream::Attack),
            pathogen: stream(seed, Stream::Pathogen),
            retrieval: stream(seed, Stream::Retrieval),
            roles: stream(seed, Stream::Roles),
        }
    }
}
