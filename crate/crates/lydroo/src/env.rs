//! Stochastic exogenous processes: block-fading channel gains and task
//! data arrivals, with seeded reproducibility.
//!
//! One experiment seed fans out into independent named substreams (channel,
//! arrivals, network init, quantizer noise, replay sampling), so each
//! consumer sees the same draws regardless of what the others do.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::SystemConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Named RNG substreams derived from one experiment seed.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Channel = 0,
    Arrival = 1,
    NetInit = 2,
    QuantizerNoise = 3,
    ReplaySample = 4,
    /// Free stream for test-instance generation.
    Instance = 5,
}

/// Independent generator for `stream` under the given experiment seed.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Antenna gain of the path-loss model.
const PATH_LOSS_ANTENNA_GAIN: f64 = 3.0;
/// Carrier frequency, Hz.
const PATH_LOSS_CARRIER_HZ: f64 = 915e6;
/// Path-loss exponent.
const PATH_LOSS_EXPONENT: f64 = 3.0;
/// Fraction of the mean channel power carried by the line-of-sight
/// component of the Rician fading factor.
const LOS_POWER_FRACTION: f64 = 0.3;

/// Average channel gain at `distance` meters:
/// `A_d * (c / (4 pi f_c d))^{d_e}` with A_d = 3, f_c = 915 MHz, d_e = 3.
pub fn mean_gain<R: Real>(distance: R) -> Result<R> {
    if !(distance > R::zero()) {
        return Err(Error::InvalidInput(format!(
            "distance must be > 0, got {distance}"
        )));
    }
    let lambda_over_4pi = R::of(3e8 / (4.0 * std::f64::consts::PI * PATH_LOSS_CARRIER_HZ));
    Ok(R::of(PATH_LOSS_ANTENNA_GAIN) * (lambda_over_4pi / distance).powi(PATH_LOSS_EXPONENT as i32))
}

/// Largest mean gain in the network (the nearest WD), used as the channel
/// normalization reference for DNN features.
pub fn reference_gain<R: Real>(cfg: &SystemConfig<R>) -> Result<R> {
    let mut best = R::zero();
    for wd in &cfg.per_wd {
        let g = mean_gain(wd.distance)?;
        if g > best {
            best = g;
        }
    }
    Ok(best)
}

/// Owns the random state for one simulated network.
#[derive(Debug, Clone)]
pub struct EnvState<R> {
    mean_gain: Vec<R>,
    channel_rng: ChaCha8Rng,
    arrival_rng: ChaCha8Rng,
    arrival_means: Vec<R>,
}

impl<R: Real> EnvState<R> {
    pub fn new(cfg: &SystemConfig<R>, seed: u64) -> Result<Self> {
        let mean_gain = cfg
            .per_wd
            .iter()
            .map(|wd| mean_gain(wd.distance))
            .collect::<Result<Vec<_>>>()?;
        Ok(EnvState {
            mean_gain,
            channel_rng: substream(seed, Stream::Channel),
            arrival_rng: substream(seed, Stream::Arrival),
            arrival_means: cfg.per_wd.iter().map(|wd| wd.arrival_mean).collect(),
        })
    }

    pub fn mean_gains(&self) -> &[R] {
        &self.mean_gain
    }

    /// One block-fading realization: `h_i = hbar_i * g_i` with `g_i` a
    /// unit-mean Rician factor whose line-of-sight component carries 0.3 of
    /// the power: `g = |sqrt(0.3) + sqrt(0.7) z|^2`, z circularly-symmetric
    /// standard complex normal.
    pub fn sample_channels(&mut self) -> Vec<R> {
        let los = R::of(LOS_POWER_FRACTION.sqrt());
        // 0.7 split evenly over the real and imaginary parts
        let scatter = R::of(((1.0 - LOS_POWER_FRACTION) / 2.0).sqrt());
        self.mean_gain
            .iter()
            .map(|&hbar| {
                let zr: R = Real::std_normal(&mut self.channel_rng);
                let zi: R = Real::std_normal(&mut self.channel_rng);
                let re = los + scatter * zr;
                let im = scatter * zi;
                hbar * (re * re + im * im)
            })
            .collect()
    }

    /// One frame of task data arrivals, bits: `A_i ~ Exp(mean lambda_i)`.
    pub fn sample_arrivals(&mut self) -> Vec<R> {
        self.arrival_means
            .iter()
            .map(|&mean| mean * Real::exp1(&mut self.arrival_rng))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_gain_matches_direct_evaluation() {
        // 3 * (3e8 / (4 pi * 915e6 * 120))^3, evaluated independently.
        let g = mean_gain(120.0f64).unwrap();
        assert!((g - 3.0835e-11).abs() / 3.0835e-11 < 1e-3, "g = {g}");
    }

    #[test]
    fn mean_gain_follows_cubic_law() {
        let near = mean_gain(120.0f64).unwrap();
        let far = mean_gain(240.0f64).unwrap();
        assert!((near / far - 8.0).abs() < 1e-9);
    }

    #[test]
    fn farthest_reference_wd_sits_at_255_m() {
        // d_i = 120 + 15 (i - 1) for i = 10
        let cfg = SystemConfig::<f64>::reference(10);
        assert_eq!(cfg.per_wd[9].distance, 120.0 + 15.0 * 9.0);
        let g = mean_gain(cfg.per_wd[9].distance).unwrap();
        assert_eq!(g, mean_gain(255.0).unwrap());
    }

    #[test]
    fn non_positive_distance_is_rejected() {
        assert!(mean_gain(0.0f64).is_err());
        assert!(mean_gain(-1.0f64).is_err());
    }

    #[test]
    fn channel_stream_is_deterministic() {
        let cfg = SystemConfig::<f64>::reference(5);
        let mut a = EnvState::new(&cfg, 42).unwrap();
        let mut b = EnvState::new(&cfg, 42).unwrap();
        for _ in 0..10 {
            assert_eq!(a.sample_channels(), b.sample_channels());
            assert_eq!(a.sample_arrivals(), b.sample_arrivals());
        }
        let mut c = EnvState::new(&cfg, 43).unwrap();
        assert_ne!(a.sample_channels(), c.sample_channels());
    }

    #[test]
    fn fading_is_unit_mean_and_positive() {
        let cfg = SystemConfig::<f64>::reference(3);
        let mut env = EnvState::new(&cfg, 7).unwrap();
        let n = cfg.n_wd;
        let mut sums = vec![0.0f64; n];
        let frames = 100_000;
        for _ in 0..frames {
            let h = env.sample_channels();
            for i in 0..n {
                assert!(h[i] > 0.0);
                sums[i] += h[i];
            }
        }
        for i in 0..n {
            let empirical = sums[i] / frames as f64;
            let expected = env.mean_gains()[i];
            let rel = (empirical - expected).abs() / expected;
            assert!(rel < 0.02, "WD {i}: relative error {rel}");
        }
    }

    #[test]
    fn arrivals_match_exponential_moments() {
        let mut cfg = SystemConfig::<f64>::reference(1);
        cfg.per_wd[0].arrival_mean = 3e6;
        let mut env = EnvState::new(&cfg, 11).unwrap();
        let frames = 100_000;
        let samples: Vec<f64> = (0..frames).map(|_| env.sample_arrivals()[0]).collect();
        assert!(samples.iter().all(|&a| a >= 0.0));
        let mean = samples.iter().sum::<f64>() / frames as f64;
        assert!((mean - 3e6).abs() / 3e6 < 0.02, "mean = {mean}");
        let var = samples.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / frames as f64;
        let rel = (var - 3e6f64.powi(2)).abs() / 3e6f64.powi(2);
        assert!(rel < 0.05, "variance relative error {rel}");
    }
}
