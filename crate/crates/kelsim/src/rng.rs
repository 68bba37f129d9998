//! Seeded generator used for every randomized placement (test-function banks,
//! sample scatter). All randomness flows from a single config seed so that any
//! implementation of the update equations reproduces the same placements.
//!
//! The generator is xorshift64*, defined by
//!
//! ```text
//! x ^= x >> 12
//! x ^= x << 25
//! x ^= x >> 27
//! output = x * 0x2545F4914F6CDD1D   (wrapping 64-bit multiply)
//! ```
//!
//! A zero seed (invalid xorshift state) is replaced by `0x9E3779B97F4A7C15`.
//! Uniform doubles are the top 53 bits of the output scaled by 2^-53.

#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let state = if seed == 0 { 0x9E3779B97F4A7C15 } else { seed };
        XorShift64Star { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
