//! Deterministic RNG stream derivation.
//!
//! Every stochastic choice in the toolkit draws from a ChaCha stream derived
//! from the global seed plus a structured path (stage name, graph id, node,
//! walk index, ...). Parallel workers therefore own independent streams and
//! the output is identical regardless of thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; good avalanche for seed mixing.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the raw bytes; stable across runs and platforms.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Fold a base seed with a path of integers into one stream seed.
pub fn stream_seed(base: u64, parts: &[u64]) -> u64 {
    let mut acc = mix64(base);
    for p in parts {
        acc = mix64(acc ^ mix64(*p));
    }
    acc
}

/// Deterministic ChaCha stream for `(base, parts)`.
pub fn stream_rng(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(base, parts))
}

/// Standard normal via Box-Muller; two uniform draws per sample keeps the
/// stream layout independent of library sampling internals.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
