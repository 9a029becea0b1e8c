//! Seed derivation. Every random stream in the crate is seeded from the one
//! global seed through `derive_seed`, keyed by a stream label and an index,
//! so results never depend on scheduling or on how work is partitioned.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Labels of the independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Simulation = 1,
    GridPoint = 2,
    Bootstrap = 3,
    ReturnPeriod = 4,
    Qmc = 5,
}

/// Seed for item `index` of `stream` under `global`.
pub fn derive_seed(global: u64, stream: Stream, index: u64) -> u64 {
    mix(mix(global ^ mix(stream as u64)) ^ index)
}
