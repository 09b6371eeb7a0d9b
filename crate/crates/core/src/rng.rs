//! Seeded randomness used everywhere in the crate.
//!
//! The generator is SplitMix64: a 64-bit counter advanced by the golden-ratio
//! increment `0x9E3779B97F4A7C15` and passed through the murmur3-style
//! finalizer. It is tiny, has no hidden state beyond the counter, and is easy
//! to reimplement in any language, which keeps shuffles portable.
//!
//! Derived operations are fixed as well:
//!
//! * [`SplitMix64::below`] draws an unbiased integer in `0..n` by rejecting
//!   raw outputs smaller than `2^64 mod n` and returning `raw % n`.
//! * [`SplitMix64::next_f64`] takes the top 53 bits of a raw output.
//! * [`shuffle`] is Fisher–Yates running `i` from `len − 1` down to 1 and
//!   swapping `i` with `below(i + 1)`.
//!
//! For seed 42, shuffling `[0, 1, …, 9]` yields `[0, 9, 5, 8, 6, 4, 7, 2, 1, 3]`
//! (checked in `tests/fixtures/shuffle_seed42.txt`).

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % n;
            }
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        lo + self.below((hi - lo) as u64 + 1) as i64
    }

    /// Independent child stream, used to give sub-tasks their own sequence.
    pub fn fork(&mut self) -> Self {
        Self::new(self.next_u64())
    }
}

/// In-place Fisher–Yates shuffle.
pub fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
