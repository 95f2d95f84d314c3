//! Synthetic benchmark: `y ~ U[-1, 1]`, and each bag holds `x = y + R * eps`
//! with `eps ~ U[-1, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist_reg::Bag;

/// Name of the random generator, written into dataset file headers.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64), draws in bag order: y then x_1..x_N";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub bags: usize,
    pub bag_size: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Bag count and size of the full-scale figure, with `R = 0.5`.
    fn default() -> Self {
        SynthConfig {
            bags: 10_000,
            bag_size: 1_000,
            noise: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn new(bags: usize, bag_size: usize, noise: f64, seed: u64) -> Self {
        SynthConfig {
            bags,
            bag_size,
            noise,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.bags == 0 || self.bag_size == 0 {
            return Err("M and N must be at least 1".into());
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(format!("R must be finite and nonnegative, got {}", self.noise));
        }
        Ok(())
    }

    pub fn header(&self) -> String {
        format!(
            "synth M={} N={} R={} seed={} generator={}",
            self.bags, self.bag_size, self.noise, self.seed, GENERATOR
        )
    }
}

/// Generates the bags; deterministic in `cfg.seed`. With `R = 0` every bag is
/// a single repeated value, usable only with `dx = 1`.
pub fn generate(cfg: &SynthConfig) -> Vec<Bag> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.bags)
        .map(|l| {
            let y: f64 = rng.random_range(-1.0..=1.0);
            let xs = (0..cfg.bag_size)
                .map(|_| y + cfg.noise * rng.random_range(-1.0..=1.0))
                .collect();
            Bag::new(l.to_string(), xs, y)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_repeats_outcome() {
        for bag in generate(&SynthConfig::new(5, 3, 0.0, 1)) {
            assert!(bag.xs.iter().all(|&x| x == bag.y));
            assert_eq!(bag.len(), 3);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = SynthConfig::new(20, 7, 0.3, 42);
        assert_eq!(generate(&cfg), generate(&cfg));
        let other = SynthConfig { seed: 43, ..cfg };
        assert_ne!(generate(&cfg), generate(&other));
    }

    #[test]
    fn samples_stay_in_range() {
        let cfg = SynthConfig::new(200, 50, 0.25, 9);
        for bag in generate(&cfg) {
            assert!((-1.0..=1.0).contains(&bag.y));
            for &x in &bag.xs {
                assert!((x - bag.y).abs() <= cfg.noise + 1e-15);
            }
        }
    }

    #[test]
    fn bag_means_track_outcome() {
        let cfg = SynthConfig::new(500, 100, 0.5, 3);
        let n = cfg.bag_size as f64;
        let bound = 3.0 * cfg.noise / (3.0 * n).sqrt();
        let inside = generate(&cfg)
            .iter()
            .filter(|b| (b.xs.iter().sum::<f64>() / n - b.y).abs() < bound)
            .count();
        assert!(inside as f64 >= 0.99 * cfg.bags as f64, "{inside}");
    }

    #[test]
    fn default_is_full_scale() {
        let d = SynthConfig::default();
        assert_eq!((d.bags, d.bag_size), (10_000, 1_000));
        assert!(SynthConfig::new(0, 1, 0.1, 0).validate().is_err());
        assert!(SynthConfig::new(1, 1, -0.1, 0).validate().is_err());
    }
}
