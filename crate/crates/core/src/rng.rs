//! Seeded random streams.
//!
//! Every random decision in the toolkit is drawn from a [`Stream`], a
//! SplitMix64 generator whose starting state is derived from a 64-bit seed
//! and a record ordinal. The derivation is
//!
//! ```text
//! state0 = mix(seed ^ ordinal * GOLDEN_GAMMA)      (wrapping multiply)
//! next() : state += GOLDEN_GAMMA; return mix(state)
//! mix(z) : z = (z ^ z >> 30) * 0xBF58476D1CE4E5B9
//!          z = (z ^ z >> 27) * 0x94D049BB133111EB
//!          z ^ z >> 31
//! ```
//!
//! `GOLDEN_GAMMA` is odd, so `ordinal -> ordinal * GOLDEN_GAMMA` is a
//! bijection on `u64` and `mix` is a bijection too: two distinct ordinals
//! under the same seed never start from the same state.
//!
//! Derived quantities use fixed draw counts where callers depend on it:
//! [`Stream::next_f64`] and [`Stream::below`] consume exactly one word each.

/// Weyl increment of SplitMix64 (2^64 / golden ratio, rounded to odd).
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// A deterministic SplitMix64 stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stream {
    state: u64,
}

/// Derives the stream for record `ordinal` under `seed`.
pub fn derive_stream(seed: u64, ordinal: u64) -> Stream {
    Stream {
        state: mix64(seed ^ ordinal.wrapping_mul(GOLDEN_GAMMA)),
    }
}

impl Stream {
    /// Builds a stream from a raw starting state.
    pub fn from_state(state: u64) -> Self {
        Stream { state }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by multiply-high; `n` must be positive.
    ///
    /// The bias is at most `n / 2^64`, which is far below anything the
    /// toolkit can observe, and the draw count is always one.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// `true` with probability `p`.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Poisson-distributed count with mean `lambda`.
    ///
    /// Knuth's product-of-uniforms method; means above 30 are split into
    /// halves (a sum of independent Poissons is Poisson) to keep `exp(-lambda)`
    /// away from underflow.
    pub fn poisson(&mut self, lambda: f64) -> u64 {
        if lambda.is_nan() || lambda <= 0.0 {
            return 0;
        }
        if lambda > 30.0 {
            let half = lambda / 2.0;
            return self.poisson(half) + self.poisson(half);
        }
        let limit = (-lambda).exp();
        let mut product = self.next_f64();
        let mut k = 0;
        while product > limit {
            k += 1;
            product *= self.next_f64();
        }
        k
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_inputs_same_draws() {
        let mut a = derive_stream(42, 7);
        let mut b = derive_stream(42, 7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_ordinals_do_not_collide() {
        let mut seen = std::collections::HashSet::with_capacity(1_000_000);
        for d in 0..1_000_000u64 {
            assert!(seen.insert(derive_stream(0xDEAD_BEEF, d).next_u64()));
        }
    }

    #[test]
    fn below_stays_in_range() {
        let mut s = derive_stream(1, 2);
        for n in 1..200 {
            assert!(s.below(n) < n);
        }
    }

    #[test]
    fn f64_in_unit_interval() {
        let mut s = derive_stream(3, 4);
        for _ in 0..10_000 {
            let x = s.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn poisson_mean_matches() {
        for &lambda in &[0.5, 3.5, 12.0, 75.0] {
            let mut s = derive_stream(9, lambda as u64);
            let n = 200_000;
            let total: u64 = (0..n).map(|_| s.poisson(lambda)).sum();
            let mean = total as f64 / n as f64;
            // standard error is sqrt(lambda / n)
            let se = (lambda / n as f64).sqrt();
            assert!((mean - lambda).abs() < 5.0 * se, "lambda={lambda} mean={mean}");
        }
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut s = derive_stream(5, 5);
        let mut v: Vec<usize> = (0..50).collect();
        s.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }
}
