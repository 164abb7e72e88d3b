//! Seed derivation.
//!
//! All randomness flows from a single master seed. Each consumer derives its
//! own per-purpose, per-index seed so that results do not depend on the order
//! in which samples are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

/// Named substreams. The tag keeps e.g. CPT draws and plot subsampling
/// independent even when they share a master seed and an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Cpt,
    Scm,
    PlotSubset,
    DataSet,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Cpt => 0x6370_745f_6472_6177,
            Purpose::Scm => 0x7363_6d5f_6c61_7773,
            Purpose::PlotSubset => 0x706c_6f74_5f73_7562,
            Purpose::DataSet => 0x6461_7461_5f73_6574,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for sample `index` of the given purpose under `master`.
pub fn derive_seed(master: u64, purpose: Purpose, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ purpose.tag()) ^ index)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(master: u64, purpose: Purpose, index: u64) -> Rng {
    rng_from_seed(derive_seed(master, purpose, index))
}
