//! Simulation and training of a single-qubit photonic data-reuploading
//! classifier under photon-limited (shot-noise) measurement.
//!
//! The crate is layered bottom-up:
//!
//! - [`photonic`]: two-mode linear optics for one photon.
//! - [`model`]: the reuploading circuit, parameters, and label rule.
//! - [`sampler`]: seeded Poisson shot noise on detection probabilities.
//! - [`sinusoid`]: three-phase reconstruction of a shifter's response curve.
//! - [`trainer`]: layer-wise SMO training and cost-variance estimation.
//! - [`data`]: the circular-boundary task and accuracy scoring.
//! - [`harness`]: trial sweeps, heatmaps, variance scans, and result files.

pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod photonic;
pub mod sampler;
pub mod sinusoid;
pub mod trainer;

pub use data::{accuracy, generate_dataset, label_point, Boundary, LabeledSample};
pub use error::{Error, Result};
pub use harness::{CellResult, EvalMode, ExperimentConfig};
pub use model::{Encoding, InputVector, Label, ModelParams};
pub use sampler::{RandomSource, ShotConfig, ShotMode};
pub use sinusoid::SinusoidCoeffs;
pub use trainer::{train, TrainConfig, TrainReport};
