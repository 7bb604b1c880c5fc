use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded, platform-independent generator used throughout the workspace.
pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`.
///
/// Draws from a substream depend only on `(seed, stream)`, so work split by
/// index produces the same numbers regardless of evaluation order.
pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
