//! Seed derivation for independent, reproducible random substreams.
//!
//! Every unit of parallel work (an A/A iteration, a synthetic event column)
//! gets its own generator, seeded by mixing the master seed with a domain tag
//! and the unit's index. Results then depend only on the unit, never on which
//! thread ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const DOMAIN_SPLIT: u64 = 0x5350_4c49_5453_0001; // "SPLITS"
pub(crate) const DOMAIN_EVENT: u64 = 0x4556_454e_5453_0002; // "EVENTS"

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for substream `index` of `domain` under `master`.
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    let keyed = mix64(master ^ mix64(domain));
    mix64(keyed ^ mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn substream(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, domain, index))
}

/// FNV-1a over the label bytes; stable across platforms and releases.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
