use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// FNV-1a, used to turn stream labels into seed material.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded, counter-based random stream.
///
/// Child streams are keyed by a label, so adding draws to one consumer
/// (say, batch sampling) never shifts the draws seen by another (say,
/// weight initialization).
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from this stream's seed and `label`.
    /// Does not advance `self`.
    pub fn child(&self, label: &str) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ fnv1a64(label.as_bytes())))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Standard normal draw by the Box-Muller transform; the second
    /// variate of each pair is discarded so that every call consumes
    /// exactly two uniforms.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Draw from `N(mean, std^2)`.
pub fn gaussian_draw(rng: &mut RngStream, mean: f64, std: f64) -> f64 {
    debug_assert!(std >= 0.0);
    mean + std * rng.standard_normal()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_returns_mean() {
        let mut rng = RngStream::new(3);
        for _ in 0..100 {
            assert_eq!(gaussian_draw(&mut rng, 1.25, 0.0), 1.25);
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..1000 {
            assert_eq!(
                gaussian_draw(&mut a, 0.0, 1.0).to_bits(),
                gaussian_draw(&mut b, 0.0, 1.0).to_bits()
            );
        }
    }

    #[test]
    fn children_are_reproducible_and_distinct() {
        let root = RngStream::new(9);
        let mut a1 = root.child("init");
        let mut a2 = root.child("init");
        let mut b = root.child("batching");
        let xs: Vec<u64> = (0..8).map(|_| a1.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| a2.next_u64()).collect();
        let zs: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    #[test]
    fn gaussian_moments_at_one_million_draws() {
        let mut rng = RngStream::new(2024);
        let n = 1_000_000;
        let std = 1.0 / 3.0;
        let draws: Vec<f64> = (0..n).map(|_| gaussian_draw(&mut rng, 0.0, std)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.002, "mean {mean}");
        assert!((var.sqrt() - std).abs() < 0.002, "std {}", var.sqrt());
    }
}
