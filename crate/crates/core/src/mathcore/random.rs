//! Seeded, splittable random streams.
//!
//! A stream is a ChaCha8 generator keyed by `seed` and positioned on its own
//! stream id, so `(seed, stream_id)` fully determines the sequence and
//! distinct ids never overlap.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent child stream with the same seed; children of different
    /// parents or with different labels get different ids.
    pub fn fork(&self, label: u64) -> Self {
        Self::new(self.seed, splitmix(self.stream_id ^ splitmix(label.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_gaussian(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Standard exponential.
    pub fn next_exponential(&mut self) -> f64 {
        -self.next_uniform().ln()
    }

    /// Gamma with the given shape and unit scale. Panics on a non-positive shape.
    pub fn next_gamma(&mut self, shape: f64) -> f64 {
        Gamma::new(shape, 1.0).expect("gamma shape must be positive").sample(&mut self.rng)
    }

    pub fn next_chi_squared(&mut self, dof: f64) -> f64 {
        2.0 * self.next_gamma(0.5 * dof)
    }

    /// Positive stable variable with Laplace transform `exp(-s^a)`, `a` in (0, 1].
    pub fn next_positive_stable(&mut self, a: f64) -> f64 {
        assert!(a > 0.0 && a <= 1.0, "stable index must lie in (0, 1]");
        if a == 1.0 {
            return 1.0;
        }
        let u = std::f64::consts::PI * self.next_uniform();
        let w = self.next_exponential();
        let ln = (a * u).sin().ln() - u.sin().ln() / a + (1.0 - a) / a * (((1.0 - a) * u).sin().ln() - w.ln());
        ln.exp()
    }

    /// Uniform index in `0..n`.
    pub fn next_index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
