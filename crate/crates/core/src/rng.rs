//! Order-independent random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Stream for `(purpose, class, index)` under `master`. Distinct tuples give
/// statistically independent streams, so frames can be generated in any
/// order or in parallel.
pub fn stream(master: u64, purpose: &str, class: u64, index: u64) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"fibercrypt-stream-v1");
    h.update(master.to_le_bytes());
    h.update((purpose.len() as u64).to_le_bytes());
    h.update(purpose.as_bytes());
    h.update(class.to_le_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha20Rng::from_seed(seed)
}
