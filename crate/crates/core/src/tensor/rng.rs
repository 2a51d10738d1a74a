//! Deterministic, platform-independent random number generation.
//!
//! All randomness in the crate flows through xoshiro256++ generators seeded
//! via splitmix64. Independent streams are derived per (purpose, member)
//! pair as `seed = splitmix64(base ^ purpose_tag ^ member_index)`, so
//! parallel and serial execution orders cannot change what any consumer
//! draws.

/// Advance a splitmix64 state and return the next output word.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One-shot splitmix64: the first output of the sequence started at `x`.
pub fn splitmix64_mix(x: u64) -> u64 {
    let mut s = x;
    splitmix64(&mut s)
}

/// Stream purpose tags. Arbitrary fixed constants, mixed into stream seeds
/// so distinct uses of the same base seed stay decorrelated.
pub mod purpose {
    pub const DATA_TRAIN: u64 = 0x7261_6a5f_7472_6e00;
    pub const DATA_VAL: u64 = 0x7261_6a5f_7661_6c00;
    pub const DATA_TEST: u64 = 0x7261_6a5f_7473_7400;
    pub const DOMAIN_FIELDS: u64 = 0x646f_6d61_696e_0000;
    pub const PARAM_INIT: u64 = 0x696e_6974_5f70_0000;
    pub const TRAIN_NOISE: u64 = 0x7472_6e5f_6e6f_6900;
    pub const TRAIN_SHUFFLE: u64 = 0x7472_6e5f_7368_7500;
    pub const VAL_NOISE: u64 = 0x76616c5f6e6f6900;
    pub const FORECAST_NOISE: u64 = 0x6663_745f_6e6f_6900;
    pub const CLIMATOLOGY: u64 = 0x636c_696d_5f64_7200;
    pub const DIAGNOSTICS: u64 = 0x6469_6167_5f6d_6300;
}

/// xoshiro256++ generator.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
    cached_gaussian: Option<f64>,
}

impl Rng {
    /// Seed the four state words from a single u64 via splitmix64.
    pub fn seeded(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { s, cached_gaussian: None }
    }

    /// Derive the independent stream for a (purpose, member) pair.
    pub fn stream(base_seed: u64, purpose_tag: u64, member_index: u64) -> Self {
        Rng::seeded(splitmix64_mix(base_seed ^ purpose_tag ^ member_index))
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Uses rejection to stay unbiased.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Standard normal draw via Box-Muller. The second value of each pair is
    /// cached, so the draw sequence is a pure function of the stream state.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.cached_gaussian.take() {
            return z;
        }
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        // 1 - u1 lies in (0, 1]; log of it is finite.
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_gaussian = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Fisher-Yates shuffle in place.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix64_reference_sequence() {
        // Canonical outputs of splitmix64 starting from state 0.
        let mut s = 0u64;
        assert_eq!(splitmix64(&mut s), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(&mut s), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(splitmix64(&mut s), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn xoshiro_reference_sequence() {
        // Cross-checked against an independent implementation of
        // xoshiro256++ seeded through splitmix64(42).
        let mut rng = Rng::seeded(42);
        assert_eq!(rng.next_u64(), 0xD076_4D4F_4476_689F);
        assert_eq!(rng.next_u64(), 0x519E_4174_576F_3791);
        assert_eq!(rng.next_u64(), 0xFBE0_7CFB_0C24_ED8C);
        assert_eq!(rng.next_u64(), 0xB37D_9F60_0CD8_35B8);
    }

    #[test]
    fn uniform_and_gaussian_reference_values() {
        let mut rng = Rng::seeded(42);
        assert!((rng.next_f64() - 0.8143051451229099).abs() < 1e-15);
        assert!((rng.next_f64() - 0.3188210400616611).abs() < 1e-15);
        let mut rng = Rng::seeded(42);
        assert!((rng.next_gaussian() - (-0.7689930538210061)).abs() < 1e-12);
        assert!((rng.next_gaussian() - 1.6661184587142).abs() < 1e-12);
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let mut a1 = Rng::stream(7, purpose::TRAIN_NOISE, 0);
        let mut a2 = Rng::stream(7, purpose::TRAIN_NOISE, 0);
        let mut b = Rng::stream(7, purpose::TRAIN_NOISE, 1);
        let mut c = Rng::stream(7, purpose::FORECAST_NOISE, 0);
        let x1: Vec<u64> = (0..4).map(|_| a1.next_u64()).collect();
        let x2: Vec<u64> = (0..4).map(|_| a2.next_u64()).collect();
        let y: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        let z: Vec<u64> = (0..4).map(|_| c.next_u64()).collect();
        assert_eq!(x1, x2);
        assert_ne!(x1, y);
        assert_ne!(x1, z);
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::seeded(123);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let g = rng.next_gaussian();
            sum += g;
            sumsq += g * g;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = Rng::seeded(5);
        let mut v: Vec<usize> = (0..100).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, (0..100).collect::<Vec<_>>());
    }
}
