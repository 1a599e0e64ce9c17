//! The data-reuploading classifier circuit.
//!
//! The circuit alternates beam splitters and phase shifters and ends on a
//! beam splitter:
//!
//! ```text
//! |0⟩ → BS → PS(φ₁) → BS → PS(φ₂) → … → BS → PS(φₛ) → BS → detect mode 0
//! ```
//!
//! With [`Encoding::Linear`] there is one shifter per layer and
//! `φₖ = θ₂ₖ₋₁·x1 + θ₂ₖ·x2`. With [`Encoding::AffineOffset`] each layer has two
//! shifters, `x1 + θ₂ₖ₋₁` followed by `x2 + θ₂ₖ`. Shifters are numbered
//! 1..=S from the source side, so the last layer sits next to the detectors.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, parse_error, Error, Result};
use crate::photonic::{shift, split, Mode, TwoModeState};
use crate::sampler::RandomSource;

pub const DEFAULT_LAYERS: usize = 3;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// How the input vector and the trainable phases combine into shifter phases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// One shifter per layer, phase `θa·x1 + θb·x2`.
    #[default]
    Linear,
    /// Two shifters per layer, phases `x1 + θa` and `x2 + θb`.
    #[serde(rename = "affine")]
    AffineOffset,
}

impl Encoding {
    pub fn shifters_per_layer(self) -> usize {
        match self {
            Encoding::Linear => 1,
            Encoding::AffineOffset => 2,
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Linear => "linear",
            Encoding::AffineOffset => "affine",
        })
    }
}

impl FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Encoding::Linear),
            "affine" | "affine_offset" => Ok(Encoding::AffineOffset),
            other => Err(parse_error(
                "encoding",
                format!("unknown encoding `{other}`"),
            )),
        }
    }
}

/// Binary class label. `Yes` is the target for high mode-0 probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Yes,
    No,
}

impl Label {
    /// Regression target used by the cost: yes → 1, no → 0.
    pub fn target(self) -> f64 {
        match self {
            Label::Yes => 1.0,
            Label::No => 0.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Yes => Label::No,
            Label::No => Label::Yes,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Yes => "yes",
            Label::No => "no",
        })
    }
}

/// A two-dimensional input point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputVector {
    pub x1: f64,
    pub x2: f64,
}

impl InputVector {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    fn coord(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.x1
        } else {
            self.x2
        }
    }
}

/// Phase(s) programmed into one layer for a given input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerPhase {
    Single(f64),
    Pair(f64, f64),
}

/// Trainable state of the classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    layers: usize,
    encoding: Encoding,
    threshold: f64,
    theta: Vec<f64>,
}

#[derive(Deserialize)]
struct RawParams {
    layers: usize,
    #[serde(default)]
    encoding: Encoding,
    #[serde(default = "default_threshold")]
    threshold: f64,
    theta: Vec<f64>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.theta, raw.layers, raw.encoding, raw.threshold)
    }
}

impl ModelParams {
    pub fn new(theta: Vec<f64>, layers: usize, encoding: Encoding, threshold: f64) -> Result<Self> {
        if layers == 0 {
            return invalid("layer count must be at least 1");
        }
        if theta.len() != 2 * layers {
            return invalid(format!(
                "theta has {} entries, expected 2·layers = {}",
                theta.len(),
                2 * layers
            ));
        }
        if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
            return invalid(format!("theta entries must be finite, got {bad}"));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return invalid(format!("threshold must lie in (0, 1), got {threshold}"));
        }
        Ok(Self {
            layers,
            encoding,
            threshold,
            theta,
        })
    }

    pub fn zeros(layers: usize, encoding: Encoding) -> Result<Self> {
        Self::new(vec![0.0; 2 * layers], layers, encoding, DEFAULT_THRESHOLD)
    }

    /// Parameters drawn uniformly from `[-π, π)`.
    pub fn random(layers: usize, encoding: Encoding, rng: &mut RandomSource) -> Result<Self> {
        use std::f64::consts::PI;
        let theta = (0..2 * layers).map(|_| rng.random_range(-PI..PI)).collect();
        Self::new(theta, layers, encoding, DEFAULT_THRESHOLD)
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return invalid(format!("threshold must lie in (0, 1), got {threshold}"));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Overwrites one parameter (0-based index).
    pub fn set_theta(&mut self, index: usize, value: f64) -> Result<()> {
        if index >= self.theta.len() {
            return invalid(format!("theta index {index} out of range"));
        }
        if !value.is_finite() {
            return invalid("theta entries must be finite");
        }
        self.theta[index] = value;
        Ok(())
    }

    /// Number of phase shifters in the circuit.
    pub fn shifter_count(&self) -> usize {
        self.layers * self.encoding.shifters_per_layer()
    }

    fn check_layer(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.layers {
            return invalid(format!("layer index {k} outside 1..={}", self.layers));
        }
        Ok(())
    }

    fn check_shifter(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.shifter_count() {
            return invalid(format!(
                "shifter index {j} outside 1..={}",
                self.shifter_count()
            ));
        }
        Ok(())
    }

    /// Phase of shifter `j` (0-based) for input `x`.
    #[inline]
    pub(crate) fn shifter_phase(&self, j: usize, x: &InputVector) -> f64 {
        match self.encoding {
            Encoding::Linear => self.theta[2 * j] * x.x1 + self.theta[2 * j + 1] * x.x2,
            Encoding::AffineOffset => x.coord(j % 2) + self.theta[j],
        }
    }

    /// Phase(s) of layer `k` (1-based) for input `x`.
    pub fn layer_phase(&self, k: usize, x: &InputVector) -> Result<LayerPhase> {
        self.check_layer(k)?;
        Ok(match self.encoding {
            Encoding::Linear => LayerPhase::Single(self.shifter_phase(k - 1, x)),
            Encoding::AffineOffset => LayerPhase::Pair(
                self.shifter_phase(2 * (k - 1), x),
                self.shifter_phase(2 * (k - 1) + 1, x),
            ),
        })
    }

    fn response(&self, x: &InputVector, overridden: Option<(usize, f64)>) -> f64 {
        let mut s = TwoModeState::zero();
        for j in 0..self.shifter_count() {
            let phi = match overridden {
                Some((o, phi)) if o == j => phi,
                _ => self.shifter_phase(j, x),
            };
            s = shift(split(s), phi);
        }
        s = split(s);
        crate::photonic::detection_probability(&s, Mode::Zero).clamp(0.0, 1.0)
    }

    /// Exact probability of detecting the photon in mode 0.
    pub fn forward(&self, x: &InputVector) -> f64 {
        self.response(x, None)
    }

    /// Same as [`forward`](Self::forward) but with shifter `k` (1-based,
    /// `1..=shifter_count()`) held at `phi_override` instead of its
    /// data-dependent phase. For the linear encoding shifter `k` is layer `k`.
    pub fn forward_with_override(
        &self,
        k: usize,
        phi_override: f64,
        x: &InputVector,
    ) -> Result<f64> {
        self.check_shifter(k)?;
        if !phi_override.is_finite() {
            return invalid("override phase must be finite");
        }
        Ok(self.response(x, Some((k - 1, phi_override))))
    }

    /// `Yes` iff `p_estimate` is strictly above the threshold.
    pub fn classify(&self, p_estimate: f64) -> Label {
        if p_estimate > self.threshold {
            Label::Yes
        } else {
            Label::No
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
