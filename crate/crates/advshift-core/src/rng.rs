//! Deterministic stream-split randomness.
//!
//! A single `u64` seed keys a whole experiment. Every consumer draws from
//! its own counter-based substream, identified by `(seed, stream id)`, so
//! per-particle work can run in any order -- or on any number of workers --
//! without changing a single drawn bit. Stream ids are laid out as:
//!
//! * stream 0: subspace construction,
//! * stream 2i+1: initial draw of particle i,
//! * stream 2i+2: response draw for particle i.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Generator for one `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator used to orthonormalize random subspaces.
pub fn subspace_rng(seed: u64) -> ChaCha12Rng {
    stream_rng(seed, 0)
}

/// Generator for particle `id`'s initial position.
pub fn particle_init_rng(seed: u64, id: usize) -> ChaCha12Rng {
    stream_rng(seed, 2 * id as u64 + 1)
}

/// Generator for particle `id`'s response draw.
pub fn response_rng(seed: u64, id: usize) -> ChaCha12Rng {
    stream_rng(seed, 2 * id as u64 + 2)
}
