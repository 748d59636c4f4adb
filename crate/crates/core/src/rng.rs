//! Per-trajectory random streams.
//!
//! Every trajectory owns two ChaCha8 streams keyed by the run seed. The
//! replicate index selects the stream pair, so replicates never share
//! keystream. Gaussian and Poisson draws live on separate streams: switching
//! jumps on or off leaves the Brownian path untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

#[derive(Debug, Clone)]
pub struct RngStreams {
    gaussian: ChaCha8Rng,
    poisson: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(seed: u64, replicate: u64) -> Self {
        assert!(replicate < 1 << 63, "replicate index out of range");
        let mut gaussian = ChaCha8Rng::seed_from_u64(seed);
        let mut poisson = gaussian.clone();
        gaussian.set_stream(2 * replicate);
        poisson.set_stream(2 * replicate + 1);
        Self { gaussian, poisson }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.gaussian)
    }

    /// Number of arrivals of a rate-`lambda` Poisson clock during `dt`.
    pub fn poisson_count(&mut self, lambda: f64, dt: f64) -> u32 {
        sample_jumps(lambda, dt, &mut self.poisson)
    }
}

/// Draw from Poisson(`lambda * dt`). Zero mean short-circuits without
/// consuming the stream.
pub fn sample_jumps<R: rand::Rng + ?Sized>(lambda: f64, dt: f64, rng: &mut R) -> u32 {
    let mean = lambda * dt;
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    let k: f64 = dist.sample(rng);
    k as u32
}
