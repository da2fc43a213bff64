//! Seed derivation. Every random quantity is drawn from a ChaCha stream
//! selected by `(seed, stream)`, so independent consumers never share state
//! and results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{Fe, Field};

/// Stream tags keep the randomness of different consumers apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Query = 1,
    Files = 2,
    Channel = 3,
    Locators = 4,
    Schedule = 5,
    Trial = 6,
}

/// Generator for `(seed, purpose, index)`.
pub fn stream_rng(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) ^ index);
    rng
}

/// Child seed for trial `index` of an experiment seeded with `seed`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, Purpose::Trial, index).random()
}

pub fn random_element<R: Rng + ?Sized>(field: &Field, rng: &mut R) -> Fe {
    Fe(rng.random_range(0..field.order()))
}

pub fn random_nonzero<R: Rng + ?Sized>(field: &Field, rng: &mut R) -> Fe {
    Fe(rng.random_range(1..field.order()))
}

pub fn random_vector<R: Rng + ?Sized>(field: &Field, len: usize, rng: &mut R) -> Vec<Fe> {
    (0..len).map(|_| random_element(field, rng)).collect()
}
