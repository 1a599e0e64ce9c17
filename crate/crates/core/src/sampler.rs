//! Photon-limited probability estimation.
//!
//! A measurement setting with detection probability `p` and mean photon
//! budget `M` yields `k ~ Poisson(p·M)` detections and the estimate `k/M`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Multiplier used to spread trial indices over the seed space.
pub const TRIAL_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Below this mean, Poisson draws use sequential inversion.
const INVERSION_LIMIT: f64 = 30.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotMode {
    /// Probabilities are used as computed (infinite photon budget).
    #[default]
    Exact,
    /// Counts are Poisson with mean `p·M`.
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotConfig {
    /// Mean photon samples per measurement setting. Zero in exact mode.
    pub mean_samples: f64,
    pub mode: ShotMode,
}

impl ShotConfig {
    pub const fn exact() -> Self {
        Self {
            mean_samples: 0.0,
            mode: ShotMode::Exact,
        }
    }

    pub fn poisson(mean_samples: f64) -> Result<Self> {
        if !(mean_samples.is_finite() && mean_samples > 0.0) {
            return invalid(format!(
                "mean photon samples must be positive and finite, got {mean_samples}"
            ));
        }
        Ok(Self {
            mean_samples,
            mode: ShotMode::Poisson,
        })
    }

    pub fn is_exact(&self) -> bool {
        self.mode == ShotMode::Exact
    }

    /// Photon budget of one measurement setting; zero in exact mode.
    pub fn photons_per_setting(&self) -> f64 {
        match self.mode {
            ShotMode::Exact => 0.0,
            ShotMode::Poisson => self.mean_samples,
        }
    }
}

/// Seeded, counter-based random stream (ChaCha8).
///
/// Sources with the same `(seed, stream)` pair replay the same sequence on
/// every platform.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    /// Independent stream `stream` under key `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Source for trial `trial_index` of an experiment seeded with `seed`.
    pub fn for_trial(seed: u64, trial_index: u64) -> Self {
        Self::new(trial_seed(seed, trial_index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Draws a fresh key from this source; used to hand out per-lane substreams.
    pub fn fork_key(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn trial_seed(seed: u64, trial_index: u64) -> u64 {
    seed ^ trial_index.wrapping_add(1).wrapping_mul(TRIAL_SEED_STRIDE)
}

/// Draws `k` with `P(k) = e^{-λ} λ^k / k!`.
pub fn poisson_draw(lambda: f64, rng: &mut RandomSource) -> Result<u64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return invalid(format!(
            "Poisson mean must be finite and nonnegative, got {lambda}"
        ));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    if lambda < INVERSION_LIMIT {
        Ok(poisson_inversion(lambda, rng))
    } else {
        Ok(poisson_ptrs(lambda, rng))
    }
}

fn poisson_inversion(lambda: f64, rng: &mut RandomSource) -> u64 {
    let u = rng.uniform();
    let mut k = 0u64;
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    while u > cdf {
        k += 1;
        pmf *= lambda / k as f64;
        if pmf == 0.0 {
            // cdf has saturated below u through rounding
            break;
        }
        cdf += pmf;
    }
    k
}

/// Transformed rejection with squeeze (Hörmann's PTRS), valid for λ ≥ 10.
fn poisson_ptrs(lambda: f64, rng: &mut RandomSource) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);

    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - libm::lgamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// Noisy estimate `p̃` of a detection probability.
///
/// Exact mode returns `p`. Poisson mode returns `k/M` with
/// `k ~ Poisson(p·M)`; the result is not clamped and may exceed 1.
pub fn sample_probability_estimate(
    p: f64,
    cfg: &ShotConfig,
    rng: &mut RandomSource,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("probability must lie in [0, 1], got {p}"));
    }
    match cfg.mode {
        ShotMode::Exact => Ok(p),
        ShotMode::Poisson => {
            let k = poisson_draw(p * cfg.mean_samples, rng)?;
            Ok(k as f64 / cfg.mean_samples)
        }
    }
}
