//! Counter-based random streams: one master seed, independent ChaCha streams
//! addressed by `(label, member, purpose)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Keeping the flip clock apart from initial-state
/// sampling lets particle and moment runs with one seed share flip sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    InitialState = 0,
    FlipClock = 1,
    Mixture = 2,
    Auxiliary = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `label` separates experiments under one master seed (for instance the
/// chain size), `member` indexes the ensemble.
pub fn stream(master: u64, label: u64, member: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master ^ splitmix64(label)));
    rng.set_stream(member.wrapping_mul(4).wrapping_add(purpose as u64));
    rng
}
