//! Seed derivation and content fingerprints.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a 64-bit
//! value. Child seeds are derived with a SplitMix64 finalizer so that item
//! `i` of a dataset can be regenerated without replaying items `0..i`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed for `stream` under `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ splitmix64(stream.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

/// Named stream tags, so call sites read as `derive_seed(seed, stream::TEST)`.
pub mod stream {
    pub const TRAIN: u64 = 0x0074_7261_696e;
    pub const TEST: u64 = 0x7465_7374;
    pub const MEDIUM: u64 = 0x6d65_6469_756d;
    pub const CANVAS_MEDIUM: u64 = 0x6361_6e76_6173;
    pub const SPLIT: u64 = 0x0073_706c_6974;
    pub const SHUFFLE: u64 = 0x7368_7566;
}

/// First eight bytes (little-endian) of the SHA-256 digest of `bytes`.
pub fn fingerprint(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Full SHA-256 digest as lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
