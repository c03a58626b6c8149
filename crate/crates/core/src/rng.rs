use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every randomized routine draws from this generator so results are a pure
/// function of the seed on every platform.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
