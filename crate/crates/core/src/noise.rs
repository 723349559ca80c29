//! Counter-based Gaussian noise streams.
//!
//! Each (seed, stream) pair is an independent Wiener-increment source.
//! One draw consumes exactly two 64-bit words of the underlying ChaCha
//! keystream, so the value at a given step index is a pure function of
//! (seed, stream, step) — trajectories are reproducible and ensembles can
//! be generated in any order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Deterministic Gaussian increment stream.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
    step: u64,
}

fn box_muller(u: u64, v: u64) -> f64 {
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((u >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0);
    let u2 = (v >> 11) as f64 * (1.0 / 9007199254740992.0);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NoiseStream { rng, seed, stream, step: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Standard normal draw for the next step.
    pub fn next_gaussian(&mut self) -> f64 {
        let u = self.rng.next_u64();
        let v = self.rng.next_u64();
        self.step += 1;
        box_muller(u, v)
    }

    /// Wiener increment dW ~ N(0, dt) for the next step.
    pub fn next_increment(&mut self, dt: f64) -> f64 {
        self.next_gaussian() * dt.sqrt()
    }

    /// Random-access draw: the standard normal at a given step index.
    pub fn gaussian_at(seed: u64, stream: u64, step: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(step as u128 * 4);
        let u = rng.next_u64();
        let v = rng.next_u64();
        box_muller(u, v)
    }
}
