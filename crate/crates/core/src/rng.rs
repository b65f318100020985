use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams. Each consumer of randomness gets its own stream so
/// that adding draws in one place never perturbs another.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    TestSplit = 1,
    Partition = 2,
    DpNoise = 3,
    Surrogate = 4,
}

pub(crate) fn seeded(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
