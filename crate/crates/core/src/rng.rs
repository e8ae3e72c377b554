//! Named, splittable random streams.
//!
//! Every random draw in a run descends from one 64-bit master seed. A
//! [`Stream`] is a position in a tree of labels; children are derived by
//! hashing the parent seed with the label (SplitMix64 finalizer), so two
//! differently labelled children never share draws and the derivation does
//! not depend on evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

pub type SimRng = ChaCha8Rng;

/// Top-level stream labels.
pub mod label {
    pub const ENVIRONMENT: u64 = 0x454e_5649;
    pub const BELIEF: u64 = 0x4245_4c46;
    pub const PLANNER: u64 = 0x504c_414e;
    pub const INIT: u64 = 0x494e_4954;
    pub const RUN: u64 = 0x5255_4e00;
    pub const ANALYSIS: u64 = 0x414e_4c59;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream(u64);

impl Stream {
    pub fn new(master_seed: u64) -> Self {
        Stream(splitmix64(master_seed))
    }

    /// Child stream identified by `label`.
    pub fn child(self, label: u64) -> Self {
        Stream(splitmix64(self.0 ^ splitmix64(label.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    pub fn path(self, labels: &[u64]) -> Self {
        labels.iter().fold(self, |s, &l| s.child(l))
    }

    pub fn rng(self) -> SimRng {
        SimRng::seed_from_u64(self.0)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// Per-run master seed: run `r` of a batch seeded with `master`.
pub fn run_seed(master: u64, run: usize) -> u64 {
    Stream::new(master).child(label::RUN).child(run as u64).raw()
}

pub fn standard_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

pub fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R, mean: T, sd: T) -> T {
    mean + sd * standard_normal::<T, R>(rng)
}

/// Uniform draw on `[0, 1)`.
pub fn unit<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.random::<f64>())
}
