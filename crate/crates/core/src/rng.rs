//! Seeded, splittable random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] keyed by a
//! master seed and a path of indices (domain tag, cell index, trajectory
//! index, ...). The key is derived as follows:
//!
//! ```text
//! state = splitmix64(seed)
//! for each component c in path:
//!     state = splitmix64(state ^ splitmix64(c ^ 0xA076_1D64_78BD_642F))
//! chacha_seed[8k..8k+8] = splitmix64(state + k) as little-endian bytes, k = 0..4
//! ```
//!
//! A stream therefore depends only on `(seed, path)`, never on the order in
//! which streams are created, so parallel and serial runs agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stochastic computation.
pub type StreamRng = ChaCha8Rng;

/// Domain tags for the first path component.
pub mod domain {
    pub const SET_A: u64 = 1;
    pub const SET_B: u64 = 2;
    pub const SWEEP_REFERENCE: u64 = 3;
    pub const SWEEP_CELL: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const SIGMA_SUBSAMPLE: u64 = 6;
}

/// The SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 64-bit key of the substream at `path` under `seed`.
pub fn substream_key(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |state, &c| {
        splitmix64(state ^ splitmix64(c ^ 0xA076_1D64_78BD_642F))
    })
}

/// Opens the generator for the substream at `path`.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    let state = substream_key(seed, path);
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(state.wrapping_add(k as u64)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
