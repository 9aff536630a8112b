//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream addressed by `(key, stream)`. Child
//! streams are derived from the parent's address, never from its position,
//! so fan-out over trials can happen in any order without changing results.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded random stream with Gaussian sampling.
///
/// A stream is single-owner. Parallel code derives one child per task with
/// [`Rng::child`] before fanning out.
#[derive(Clone, Debug)]
pub struct Rng {
    key: u64,
    stream: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::at(seed, 0)
    }

    fn at(key: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(key);
        inner.set_stream(stream);
        Self {
            key,
            stream,
            inner,
            spare_normal: None,
        }
    }

    /// Independent child stream addressed by `index`.
    ///
    /// The child depends only on this stream's seed address and `index`, not on
    /// how many values have already been drawn from `self`.
    pub fn child(&self, index: u64) -> Rng {
        let key = splitmix64(self.key ^ splitmix64(self.stream.wrapping_add(GOLDEN_GAMMA)));
        Rng::at(key, index)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. Panics when `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        // rejection keeps the distribution exactly uniform
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Standard normal draw (Box–Muller, both outputs used).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare_normal = Some(radius * sin);
        radius * cos
    }

    /// Fills `out` with i.i.d. `N(0, sd^2)` draws.
    pub fn fill_normal(&mut self, out: &mut [f64], sd: f64) {
        for x in out.iter_mut() {
            *x = sd * self.normal();
        }
    }

    /// Direction drawn uniformly from the unit sphere in `dim` dimensions.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        assert!(dim > 0, "unit_vector(0)");
        loop {
            let mut v = vec![0.0; dim];
            self.fill_normal(&mut v, 1.0);
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-300 {
                v.iter_mut().for_each(|x| *x /= n);
                return v;
            }
        }
    }
}
