//! Deterministic random number generation.
//!
//! Every stochastic operation in the crate draws from [`Rng`], a
//! xoshiro256** generator seeded through SplitMix64. The implementation is
//! self-contained so that a given seed reproduces the same stream bit for bit
//! on every platform and build — dataset files, equation weights and epoch
//! losses are required to be byte-identical across reruns.

/// SplitMix64 step, used for seeding and for deriving child seeds.
#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed, a stream tag and an index.
///
/// Used to give every sample / pair / channel its own independent stream
/// while staying reproducible under the single master seed.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut s = master ^ 0x6a09_e667_f3bc_c908;
    let a = splitmix64(&mut s);
    let mut s2 = a ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let b = splitmix64(&mut s2);
    let mut s3 = b ^ index.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    splitmix64(&mut s3)
}

/// xoshiro256** pseudo-random generator.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { s }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        // Avoid u = 0 so the log is finite.
        let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let u = if u <= 0.0 { f64::MIN_POSITIVE } else { u };
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    /// Fisher-Yates shuffle of `indices`.
    pub fn shuffle(&mut self, indices: &mut [usize]) {
        for i in (1..indices.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            indices.swap(i, j);
        }
    }
}
