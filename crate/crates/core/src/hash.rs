//! Key hashing and seed derivation.
//!
//! Every PE must route a key to the same owner, so the hash is fixed: FNV-1a
//! over the key bytes followed by the splitmix64 output mixer.

const FNV_OFFSET_BASIS: u64 = 14_695_981_039_346_656_037;
const FNV_PRIME: u64 = 1_099_511_628_211;
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_continue(FNV_OFFSET_BASIS, bytes)
}

/// Extends an FNV-1a state, so `fnv1a_continue(fnv1a(a), b) == fnv1a(a ++ b)`.
pub fn fnv1a_continue(state: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(state, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// The splitmix64 output mixer (without the state increment).
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn hash_key(key: &[u8]) -> u64 {
    splitmix64_mix(fnv1a(key))
}

/// Derives an independent sub-seed, e.g. `mix_seed(seed, pe)`.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    splitmix64_mix(seed ^ splitmix64_mix(salt.wrapping_add(GOLDEN_GAMMA)))
}

pub fn mix_seeds(seed: u64, salts: &[u64]) -> u64 {
    salts.iter().fold(seed, |s, &salt| mix_seed(s, salt))
}
