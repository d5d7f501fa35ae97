//! Pinned pseudo-random number generation.
//!
//! Every random draw in the pipeline goes through [`Xorshift64Star`], seeded by
//! [`splitmix64`]. Both are fully specified here so that another implementation
//! can reproduce episode streams, initialisations and synthetic banks bit for
//! bit:
//!
//! * `splitmix64(x)`: `z = x + 0x9E3779B97F4A7C15`;
//!   `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`;
//!   `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`; return `z ^ (z >> 31)`
//!   (all arithmetic wrapping mod 2^64).
//! * generator state is `splitmix64(seed)`, replaced by `0x9E3779B97F4A7C15`
//!   if that is zero.
//! * `next_u64`: `x ^= x >> 12; x ^= x << 25; x ^= x >> 27;` return
//!   `x * 0x2545F4914F6CDD1D`.
//! * `next_f64` is `(next_u64 >> 11) * 2^-53`, uniform on `[0, 1)`.
//! * `below(n)` rejects draws `>= 2^64 - (2^64 mod n)` and returns `draw mod n`.
//! * `shuffle` is Fisher-Yates from the last element down: for `i` in
//!   `(1..len).rev()`, swap `i` with `below(i + 1)`.
//! * `gaussian` is Box-Muller: `u1 = 1 - next_f64`, `u2 = next_f64`,
//!   returns `sqrt(-2 ln u1) * cos(2 pi u2)`; one value per two draws.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One splitmix64 output step applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream position `index` under a base seed.
///
/// This is the `index`-th output of a splitmix64 sequence started at `seed`,
/// so distinct indices give decorrelated seeds.
pub fn mix(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone)]
pub struct Xorshift64Star {
    state: u64,
}

impl Xorshift64Star {
    pub fn new(seed: u64) -> Self {
        let state = match splitmix64(seed) {
            0 => GOLDEN_GAMMA,
            s => s,
        };
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Unbiased integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let draw = self.next_u64();
            if draw <= zone {
                return draw % n;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }
}
