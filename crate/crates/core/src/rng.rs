//! Deterministic random-stream derivation.
//!
//! Every random draw in a run flows from one root seed. A stream is
//! identified by `(root, labels...)`, typically `(seed, experiment, point,
//! shot, site)`, and derived by folding each label through SplitMix64. The
//! result seeds a ChaCha8 generator, so streams are independent of the
//! order in which they are created and parallel evaluation is bit-stable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a root seed with a list of stream labels into a 64-bit stream seed.
pub fn derive_seed(root: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(root), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

/// Generator for the stream `(root, labels...)`.
pub fn stream(root: u64, labels: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, labels))
}

/// Stable 64-bit label for a string tag, e.g. an experiment name.
pub fn label(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes()
        .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}
