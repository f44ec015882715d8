use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the bytes of `key`.
fn fnv1a(key: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in key {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// A reproducible RNG stream for `(seed, purpose, key)`, independent of the
/// order in which streams are created or the thread that consumes them.
pub(crate) fn stream(seed: u64, purpose: &str, key: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = Vec::with_capacity(purpose.len() + key.len() + 1);
    bytes.extend_from_slice(purpose.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(key.as_bytes());
    rng.set_stream(fnv1a(&bytes));
    rng
}
