//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`SeedStream`], a thin wrapper
//! around xoshiro256++ seeded with SplitMix64 (`seed_from_u64`). The derived
//! quantities are fixed here so that datasets, splits and initial weights are
//! reproducible at the sequence level:
//!
//! * uniform `[0, 1)`: `(next_u64() >> 11) * 2^-53`
//! * uniform `[lo, hi)`: `lo + (hi - lo) * uniform01()`
//! * index below `n`: `(next_u64() as u128 * n as u128) >> 64`
//! * shuffle: Fisher-Yates from the last position down, `j = index_below(i + 1)`

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Sub-seed tags. A run seed is combined with a tag to give an independent
/// stream for each consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Split = 1,
    Init = 2,
    Shuffle = 3,
    Surrogate = 4,
}

/// Derives the seed of a sub-stream from a run seed.
///
/// `splitmix64(seed ^ (tag * 0x9E3779B97F4A7C15))`.
pub fn derive_seed(seed: u64, purpose: Purpose) -> u64 {
    let tag = purpose as u64;
    splitmix64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SeedStream {
    rng: Xoshiro256PlusPlus,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Stream for one consumer of a run seed.
    pub fn for_purpose(seed: u64, purpose: Purpose) -> Self {
        Self::new(derive_seed(seed, purpose))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    #[inline]
    pub fn index_below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index_below(i + 1);
            items.swap(i, j);
        }
    }
}
