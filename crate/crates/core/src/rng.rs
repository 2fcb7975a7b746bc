//! Seed derivation.
//!
//! Every random stream in a run is derived from the root seed and a stage
//! label, so the order in which stages (or samples within a stage) are
//! processed can never change the numbers a stage sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type StageRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a stage label into a root seed.
pub fn derive_seed(root: u64, stage: &str) -> u64 {
    // FNV-1a over the label, then two rounds of splitmix.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(splitmix64(root) ^ h)
}

pub fn stage_rng(root: u64, stage: &str) -> StageRng {
    StageRng::seed_from_u64(derive_seed(root, stage))
}
