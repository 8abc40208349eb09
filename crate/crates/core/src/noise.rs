//! Standard-normal noise sources and deterministic per-trajectory streams.
//!
//! Every trajectory draws from its own ChaCha stream selected by
//! `(master seed, trajectory index)`, so results never depend on how
//! trajectories are scheduled across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Source of independent `N(0, 1)` draws.
pub trait NoiseSource {
    fn standard_normal(&mut self) -> f64;
}

impl<T: NoiseSource + ?Sized> NoiseSource for &mut T {
    fn standard_normal(&mut self) -> f64 {
        (**self).standard_normal()
    }
}

/// Counter-based generator for one stream.
#[derive(Debug, Clone)]
pub struct StreamNoise {
    rng: ChaCha8Rng,
}

impl StreamNoise {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Stream feeding the physical noise of trajectory `index`.
    pub fn trajectory(seed: u64, index: u64) -> Self {
        Self::new(seed, 2 * index)
    }

    /// Separate stream for per-trajectory setup draws such as parameter jitter.
    ///
    /// Kept apart from [`StreamNoise::trajectory`] so that negating the physical
    /// noise leaves the setup untouched.
    pub fn setup(seed: u64, index: u64) -> Self {
        Self::new(seed, 2 * index + 1)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

impl NoiseSource for StreamNoise {
    #[inline]
    fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Flips the sign of every draw of the wrapped source.
#[derive(Debug, Clone)]
pub struct Negated<S>(pub S);

impl<S: NoiseSource> NoiseSource for Negated<S> {
    #[inline]
    fn standard_normal(&mut self) -> f64 {
        -self.0.standard_normal()
    }
}

/// Always returns zero: the noiseless limit.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl NoiseSource for Silent {
    #[inline]
    fn standard_normal(&mut self) -> f64 {
        0.0
    }
}

/// Replays a fixed sequence of draws; panics when exhausted.
#[derive(Debug, Clone)]
pub struct Replay {
    draws: Vec<f64>,
    pos: usize,
}

impl Replay {
    pub fn new(draws: Vec<f64>) -> Self {
        Self { draws, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.draws.len() - self.pos
    }
}

impl NoiseSource for Replay {
    fn standard_normal(&mut self) -> f64 {
        let v = self.draws[self.pos];
        self.pos += 1;
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |mut s: StreamNoise| (0..4).map(|_| s.standard_normal()).collect::<Vec<_>>();
        assert_eq!(draw(StreamNoise::trajectory(9, 3)), draw(StreamNoise::trajectory(9, 3)));
        assert_ne!(draw(StreamNoise::trajectory(9, 3)), draw(StreamNoise::trajectory(9, 4)));
        assert_ne!(draw(StreamNoise::trajectory(9, 3)), draw(StreamNoise::setup(9, 3)));
        assert_ne!(draw(StreamNoise::trajectory(9, 3)), draw(StreamNoise::trajectory(10, 3)));
    }

    #[test]
    fn negation_and_replay() {
        let mut a = StreamNoise::new(1, 0);
        let mut b = Negated(StreamNoise::new(1, 0));
        for _ in 0..10 {
            assert_eq!(a.standard_normal(), -b.standard_normal());
        }
        let mut r = Replay::new(vec![0.5, -1.0]);
        assert_eq!(r.standard_normal(), 0.5);
        assert_eq!(r.remaining(), 1);
        assert_eq!(Silent.standard_normal(), 0.0);
    }

    #[test]
    fn moments() {
        let mut s = StreamNoise::new(5, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 5.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.02);
    }
}
