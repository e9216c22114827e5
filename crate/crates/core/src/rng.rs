//! Deterministic random streams. Every consumer derives a ChaCha8 generator
//! from the top-level seed, a domain tag and a stream id (path or
//! environment index), so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PATHS: u64 = 0x5041_5448_0000_0001;
pub const ENVIRONMENT: u64 = 0x454e_5649_0000_0002;
pub const SURROGATE: u64 = 0x5355_5252_0000_0003;
pub const ENSEMBLE: u64 = 0x454e_5345_0000_0004;

pub fn stream(seed: u64, domain: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain);
    rng.set_stream(id);
    rng
}

/// A child seed for nested experiments (e.g. per-environment path seeds).
pub fn derive(seed: u64, domain: u64, id: u64) -> u64 {
    use rand::RngCore;
    stream(seed, domain, id).next_u64()
}
