//! Seeded generator shared by the bootstrap and the sampler.
//!
//! The stream is fully specified so that other implementations can
//! reproduce resamples bit for bit:
//!
//! * [`SplitMix64`] (Steele, Lea, Flood) expands a 64-bit seed.
//! * [`Xoshiro256StarStar`] state words are the first four SplitMix64
//!   outputs of the seed.
//! * Bounded draws use the multiply-high reduction
//!   `(x as u128 * n as u128) >> 64` without a rejection step, so every
//!   draw consumes exactly one 64-bit output.
//! * Unit reals use the top 53 bits: `(x >> 11) * 2^-53`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }
}

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// First output of a SplitMix64 stream seeded with `x`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    SplitMix64::new(x).next_u64()
}

/// 64-bit FNV-1a, used to turn identifiers into sampler keys.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        let s = [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()];
        Self { s }
    }

    /// Independent stream for bootstrap replicate `index`.
    ///
    /// The substream seed is `seed ^ (index * GOLDEN_GAMMA)`; the odd
    /// multiplier makes the map injective in `index`, so replicates can be
    /// computed in any order or in parallel with identical results.
    pub fn substream(seed: u64, index: u64) -> Self {
        Self::seed_from_u64(seed ^ index.wrapping_mul(GOLDEN_GAMMA))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform index in `0..n` by multiply-high reduction. `n` must be > 0.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Uniform real in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
