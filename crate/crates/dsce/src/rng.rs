//! Deterministic, splittable random streams.
//!
//! Every random draw in this crate flows from a single 64-bit seed. Substreams
//! are derived by mixing the seed with a list of integer labels, so independent
//! workers (per antenna, per tap, per trial) can pull their own streams without
//! sharing state and without any ordering dependence between them.

use num_complex::Complex64;

/// Stream labels. Each call site that derives a substream uses one of these
/// as its first label so that unrelated draws never collide.
pub mod stream {
    pub const SUPPORT: u64 = 0x5355_5050;
    pub const CHANNEL: u64 = 0x4348_414e;
    pub const PILOT_VALUES: u64 = 0x5049_4c56;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const DATA_BITS: u64 = 0x4441_5441;
    pub const BDSO: u64 = 0x4244_534f;
    pub const GA: u64 = 0x4741_5253;
    pub const TRIAL: u64 = 0x5452_4941;
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SplitMix64 generator with label-based stream derivation.
#[derive(Debug, Clone)]
pub struct DetRng {
    state: u64,
}

impl DetRng {
    pub fn new(seed: u64) -> Self {
        DetRng { state: seed }
    }

    /// Derive an independent stream from `seed` and a label path.
    pub fn derive(seed: u64, labels: &[u64]) -> Self {
        let mut s = mix(seed);
        for &l in labels {
            s = mix(s ^ mix(l));
        }
        DetRng { state: s }
    }

    /// Collapse the stream into a fresh 64-bit seed (for nesting derivations).
    pub fn reseed(&mut self) -> u64 {
        self.next_u64()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). `n` must be positive.
    pub fn next_range(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform in {+1, -1}.
    pub fn next_sign(&mut self) -> i8 {
        if self.next_u64() & 1 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn next_bool(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }

    /// Standard normal pair via Box-Muller.
    pub fn next_gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        (r * phi.cos(), r * phi.sin())
    }

    /// Circularly-symmetric complex Gaussian with E|x|^2 = variance.
    pub fn next_complex_gaussian(&mut self, variance: f64) -> Complex64 {
        let (a, b) = self.next_gaussian_pair();
        let s = (variance / 2.0).sqrt();
        Complex64::new(a * s, b * s)
    }

    /// Sample `k` distinct values from [0, n) and return them sorted.
    pub fn sample_distinct_sorted(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_range(n - i);
            pool.swap(i, j);
        }
        let mut out = pool[..k].to_vec();
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = DetRng::derive(42, &[stream::CHANNEL, 3, 7]);
        let mut b = DetRng::derive(42, &[stream::CHANNEL, 3, 7]);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_labels_diverge() {
        let mut a = DetRng::derive(42, &[stream::CHANNEL, 3, 7]);
        let mut b = DetRng::derive(42, &[stream::CHANNEL, 3, 8]);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniform_range_bounds() {
        let mut rng = DetRng::new(1);
        for _ in 0..10_000 {
            let v = rng.next_range(7);
            assert!(v < 7);
        }
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = DetRng::new(9);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let (a, b) = rng.next_gaussian_pair();
            sum += a + b;
            sq += a * a + b * b;
        }
        let mean = sum / (2.0 * n as f64);
        let var = sq / (2.0 * n as f64);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn complex_gaussian_power() {
        let mut rng = DetRng::new(5);
        let n = 100_000;
        let p: f64 = (0..n).map(|_| rng.next_complex_gaussian(2.5).norm_sqr()).sum();
        assert!((p / n as f64 - 2.5).abs() < 0.05);
    }

    #[test]
    fn distinct_sample_sorted_and_unique() {
        let mut rng = DetRng::new(3);
        for _ in 0..100 {
            let s = rng.sample_distinct_sorted(20, 6);
            assert_eq!(s.len(), 6);
            for w in s.windows(2) {
                assert!(w[0] < w[1]);
            }
            assert!(s.iter().all(|&x| x < 20));
        }
    }
}
