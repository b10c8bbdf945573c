//! Reproducible random streams.
//!
//! A stream is a ChaCha8 generator keyed by `base_seed` and positioned on
//! the ChaCha stream `stream_id`, so the sequence depends only on the pair
//! and never on which thread consumes it. Experiments give replicate `r`
//! the stream `r`.
//!
//! Derived draws:
//! - `uniform01`: top 53 bits, shifted by half an ulp, so the value lies in
//!   the open interval (0, 1).
//! - `std_normal`: Box–Muller on two uniforms; the second variate of each
//!   pair is cached.
//! - `unit_exponential`: `-ln U`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    base_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(stream_id);
        Self { base_seed, stream_id, rng, spare_normal: None }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A stream for a sub-task, keyed off this stream's identity and a label.
    /// Does not consume draws from `self`.
    pub fn derive(&self, label: u64) -> RngStream {
        RngStream::new(mix(self.base_seed ^ mix(self.stream_id.wrapping_add(0x5851_f42d))), label)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn uniform01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    pub fn std_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform01();
        let u2 = self.uniform01();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * theta.sin());
        radius * theta.cos()
    }

    pub fn unit_exponential(&mut self) -> f64 {
        -self.uniform01().ln()
    }

    /// Weibull draw with survival `exp(-rate * t^shape)`.
    pub fn weibull(&mut self, rate: f64, shape: f64) -> f64 {
        (self.unit_exponential() / rate).powf(1.0 / shape)
    }

    /// Poisson draw by counting unit-rate arrivals before `mean`.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        let mut count = 0;
        let mut t = self.unit_exponential();
        while t <= mean {
            count += 1;
            t += self.unit_exponential();
        }
        count
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire's multiply-shift, bias below 2^-64 * n
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

/// splitmix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
