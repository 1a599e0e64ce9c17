//! Experiment sweeps: accuracy versus photon budget and training-set size,
//! accuracy versus boundary position, and cost-variance scaling.
//!
//! Every trial derives its randomness from `(seed, trial_index)` alone, so
//! results do not depend on execution order or worker count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{accuracy, generate_dataset, Boundary, LabeledSample};
use crate::error::{parse_error, validation, Error, Result};
use crate::model::{Encoding, ModelParams, DEFAULT_LAYERS};
use crate::sampler::{trial_seed, RandomSource, ShotConfig, ShotMode};
use crate::trainer::{estimate_cost, estimate_cost_variance, initial_params, train, TrainConfig};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

// substream ids within one trial
const STREAM_TRAIN_DATA: u64 = 0;
const STREAM_TEST_DATA: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_TRAINER: u64 = 3;
const STREAM_EVAL: u64 = 4;
const STREAM_VARIANCE: u64 = 16;

/// How test-set probabilities are obtained when scoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    #[default]
    Exact,
    /// Shot-sampled with the given mean photon count.
    Poisson(f64),
}

impl EvalMode {
    pub fn shot_config(&self) -> Result<ShotConfig> {
        match *self {
            EvalMode::Exact => Ok(ShotConfig::exact()),
            EvalMode::Poisson(m) => ShotConfig::poisson(m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub boundary: Boundary,
    pub train_sizes: Vec<usize>,
    pub shot_means: Vec<f64>,
    pub trials: usize,
    pub test_size: usize,
    pub train_cfg: TrainConfig,
    /// Shot model during training; `exact` ignores `shot_means`.
    pub train_mode: ShotMode,
    pub eval_mode: EvalMode,
    pub layers: usize,
    pub encoding: Encoding,
    /// Training-set size for the boundary-center heatmap.
    pub heatmap_train_size: usize,
    pub seed: u64,
    pub output_path: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            boundary: Boundary::default(),
            train_sizes: vec![20, 100, 200, 300, 1000],
            shot_means: vec![2.0, 5.0, 10.0, 20.0, 50.0, 200.0, 2000.0],
            trials: 100,
            test_size: 1000,
            train_cfg: TrainConfig::default(),
            train_mode: ShotMode::Poisson,
            eval_mode: EvalMode::Exact,
            layers: DEFAULT_LAYERS,
            encoding: Encoding::Linear,
            heatmap_train_size: 200,
            seed: 0,
            output_path: "results.csv".to_string(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_sizes.is_empty() {
            return Err(validation("train_sizes", "must not be empty"));
        }
        if self.train_sizes.contains(&0) {
            return Err(validation("train_sizes", "sizes must be at least 1"));
        }
        if self.shot_means.is_empty() {
            return Err(validation("shot_means", "must not be empty"));
        }
        if let Some(m) = self
            .shot_means
            .iter()
            .find(|m| !(m.is_finite() && **m > 0.0))
        {
            return Err(validation(
                "shot_means",
                format!("{m} is not a positive mean"),
            ));
        }
        if self.trials == 0 {
            return Err(validation("trials", "must be at least 1"));
        }
        if self.test_size == 0 {
            return Err(validation("test_size", "must be at least 1"));
        }
        if self.layers == 0 {
            return Err(validation("layers", "must be at least 1"));
        }
        if self.heatmap_train_size == 0 {
            return Err(validation("heatmap_train_size", "must be at least 1"));
        }
        self.train_cfg
            .validate()
            .map_err(|e| validation("train_cfg", e.to_string()))?;
        self.eval_mode
            .shot_config()
            .map_err(|e| validation("eval_mode", e.to_string()))?;
        Ok(())
    }

    /// Shot model used for training at mean photon count `m`.
    pub fn train_shots(&self, m: f64) -> Result<ShotConfig> {
        match self.train_mode {
            ShotMode::Exact => Ok(ShotConfig::exact()),
            ShotMode::Poisson => ShotConfig::poisson(m),
        }
    }

    /// Short SHA-256 digest of the canonical JSON form (output path excluded).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_path.clear();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path.is_empty() || path == "." {
                "<root>".to_string()
            } else {
                path
            };
            parse_error(field, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_config(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, cfg.to_json()? + "\n")?;
    Ok(())
}

/// Outcome of one train-and-evaluate run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub m: f64,
    pub trial: usize,
    pub accuracy: f64,
    /// Noise-free training-set cost of the final parameters.
    pub final_cost: f64,
}

/// Trains one model on a fresh dataset and scores it on a fresh test set.
pub fn run_trial(
    cfg: &ExperimentConfig,
    n: usize,
    m: f64,
    trial_index: usize,
) -> Result<TrialRecord> {
    run_trial_on(cfg, &cfg.boundary, n, cfg.train_shots(m)?, m, trial_index)
}

fn run_trial_on(
    cfg: &ExperimentConfig,
    boundary: &Boundary,
    n: usize,
    shots: ShotConfig,
    m: f64,
    trial_index: usize,
) -> Result<TrialRecord> {
    let key = trial_seed(cfg.seed, trial_index as u64);
    let train_set = generate_dataset(
        n,
        boundary,
        &mut RandomSource::substream(key, STREAM_TRAIN_DATA),
    )?;
    let test_set = generate_dataset(
        cfg.test_size,
        boundary,
        &mut RandomSource::substream(key, STREAM_TEST_DATA),
    )?;
    let params0 = initial_params(
        cfg.layers,
        cfg.encoding,
        cfg.train_cfg.init,
        &mut RandomSource::substream(key, STREAM_INIT),
    )?;
    let train_cfg = TrainConfig {
        seed: RandomSource::substream(key, STREAM_TRAINER).fork_key(),
        ..cfg.train_cfg.clone()
    };
    let (params, _) = train(&params0, &train_set, &shots, &train_cfg)?;
    let mut eval_rng = RandomSource::substream(key, STREAM_EVAL);
    let acc = accuracy(
        &params,
        &test_set,
        &cfg.eval_mode.shot_config()?,
        &mut eval_rng,
    )?;
    let final_cost = estimate_cost(&params, &train_set, &ShotConfig::exact(), &mut eval_rng)?;
    Ok(TrialRecord {
        n,
        m,
        trial: trial_index,
        accuracy: acc,
        final_cost,
    })
}

/// Aggregate over the trials of one `(n, m)` cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub m: f64,
    pub trials: usize,
    pub mean_accuracy: f64,
    pub accuracy_variance: f64,
    pub mean_final_cost: f64,
}

impl CellResult {
    pub fn from_trials(n: usize, m: f64, records: &[TrialRecord]) -> Self {
        let (mean_accuracy, accuracy_variance) =
            mean_and_variance(records.iter().map(|r| r.accuracy));
        let (mean_final_cost, _) = mean_and_variance(records.iter().map(|r| r.final_cost));
        Self {
            n,
            m,
            trials: records.len(),
            mean_accuracy,
            accuracy_variance,
            mean_final_cost,
        }
    }

    /// Standard error of the mean accuracy.
    pub fn standard_error(&self) -> f64 {
        (self.accuracy_variance / self.trials as f64).sqrt()
    }
}

/// Mean and unbiased variance, accumulated in input order. One value gives
/// variance 0.
pub fn mean_and_variance(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn run_cell(
    cfg: &ExperimentConfig,
    boundary: &Boundary,
    n: usize,
    shots: ShotConfig,
    m: f64,
) -> Result<Vec<TrialRecord>> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial_on(cfg, boundary, n, shots, m, t))
        .collect()
}

fn sorted_grid(cfg: &ExperimentConfig) -> Vec<(usize, f64)> {
    let mut ns = cfg.train_sizes.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut ms = cfg.shot_means.clone();
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    ns.iter()
        .flat_map(|&n| ms.iter().map(move |&m| (n, m)))
        .collect()
}

/// Runs every `(n, m)` cell, calling `on_cell` as each cell completes.
pub fn sweep_samples_with(
    cfg: &ExperimentConfig,
    mut on_cell: impl FnMut(&CellResult, &[TrialRecord]) -> Result<()>,
) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let mut table = Vec::new();
    for (n, m) in sorted_grid(cfg) {
        let records = run_cell(cfg, &cfg.boundary, n, cfg.train_shots(m)?, m)?;
        let cell = CellResult::from_trials(n, m, &records);
        on_cell(&cell, &records)?;
        table.push(cell);
    }
    Ok(table)
}

/// Accuracy table over `train_sizes × shot_means`, sorted by `(n, m)`.
pub fn sweep_samples(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    sweep_samples_with(cfg, |_, _| Ok(()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub x1: f64,
    pub x2: f64,
    pub trials: usize,
    pub mean_accuracy: f64,
    pub accuracy_variance: f64,
}

/// Grid `{0, s, 2s, …} ∩ [0, 1]`, including 1 when `1/s` is an integer.
pub fn center_grid(grid_step: f64) -> Result<Vec<f64>> {
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(validation(
            "grid_step",
            format!("must lie in (0, 0.5], got {grid_step}"),
        ));
    }
    let count = (1.0 / grid_step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| (i as f64 * grid_step).min(1.0))
        .collect())
}

/// Mean accuracy of noise-free training for each boundary center on the grid.
pub fn center_heatmap_with(
    cfg: &ExperimentConfig,
    grid_step: f64,
    mut on_cell: impl FnMut(&HeatmapCell) -> Result<()>,
) -> Result<Vec<HeatmapCell>> {
    cfg.validate()?;
    let axis = center_grid(grid_step)?;
    let mut out = Vec::with_capacity(axis.len() * axis.len());
    for &x1 in &axis {
        for &x2 in &axis {
            let boundary = Boundary::new((x1, x2), cfg.boundary.radius)?;
            let records = run_cell(
                cfg,
                &boundary,
                cfg.heatmap_train_size,
                ShotConfig::exact(),
                0.0,
            )?;
            let (mean_accuracy, accuracy_variance) =
                mean_and_variance(records.iter().map(|r| r.accuracy));
            let cell = HeatmapCell {
                x1,
                x2,
                trials: records.len(),
                mean_accuracy,
                accuracy_variance,
            };
            on_cell(&cell)?;
            out.push(cell);
        }
    }
    Ok(out)
}

pub fn center_heatmap(cfg: &ExperimentConfig, grid_step: f64) -> Result<Vec<HeatmapCell>> {
    center_heatmap_with(cfg, grid_step, |_| Ok(()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCell {
    pub n: usize,
    pub m: f64,
    pub repeats: usize,
    pub cost_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceScan {
    pub cells: Vec<VarianceCell>,
    /// Least-squares slope of `ln ΔC²` against `ln(N·M)`; `None` when any
    /// variance is zero.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// The parameter point the costs were evaluated at.
    pub params: ModelParams,
    /// Training set; cell `n` uses its first `n` samples.
    pub data: Vec<LabeledSample>,
}

/// Cost-estimate variance over `train_sizes × shot_means` at one fixed random
/// parameter point. Smaller datasets are prefixes of the largest one.
pub fn variance_scan(cfg: &ExperimentConfig, repeats: usize) -> Result<VarianceScan> {
    cfg.validate()?;
    if repeats < 100 {
        return Err(validation(
            "repeats",
            format!("must be at least 100, got {repeats}"),
        ));
    }
    let key = trial_seed(cfg.seed, 0);
    let params = initial_params(
        cfg.layers,
        cfg.encoding,
        crate::trainer::Init::UniformRandom,
        &mut RandomSource::substream(key, STREAM_INIT),
    )?;
    let grid = sorted_grid(cfg);
    let largest = grid.iter().map(|&(n, _)| n).max().unwrap_or(1);
    let data = generate_dataset(
        largest,
        &cfg.boundary,
        &mut RandomSource::substream(key, STREAM_TRAIN_DATA),
    )?;

    let cells = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(n, m))| {
            let shots = cfg.train_shots(m)?;
            let mut rng = RandomSource::substream(key, STREAM_VARIANCE + i as u64);
            let v = estimate_cost_variance(&params, &data[..n], &shots, repeats, &mut rng)?;
            Ok(VarianceCell {
                n,
                m,
                repeats,
                cost_variance: v,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let fit = if cells.iter().all(|c| c.cost_variance > 0.0) {
        let xs: Vec<f64> = cells.iter().map(|c| (c.n as f64 * c.m).ln()).collect();
        let ys: Vec<f64> = cells.iter().map(|c| c.cost_variance.ln()).collect();
        least_squares_line(&xs, &ys)
    } else {
        None
    };
    Ok(VarianceScan {
        cells,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        params,
        data,
    })
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// A row type that can be written to a result CSV.
pub trait ResultRow {
    fn header() -> &'static [&'static str];
    fn record(&self) -> Vec<String>;
}

impl ResultRow for CellResult {
    fn header() -> &'static [&'static str] {
        &[
            "n",
            "m",
            "trials",
            "mean_accuracy",
            "accuracy_variance",
            "mean_final_cost",
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.m.to_string(),
            self.trials.to_string(),
            self.mean_accuracy.to_string(),
            self.accuracy_variance.to_string(),
            self.mean_final_cost.to_string(),
        ]
    }
}

impl ResultRow for TrialRecord {
    fn header() -> &'static [&'static str] {
        &["n", "m", "trial", "accuracy", "final_cost"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.m.to_string(),
            self.trial.to_string(),
            self.accuracy.to_string(),
            self.final_cost.to_string(),
        ]
    }
}

impl ResultRow for HeatmapCell {
    fn header() -> &'static [&'static str] {
        &["x1", "x2", "trials", "mean_accuracy", "accuracy_variance"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.x1.to_string(),
            self.x2.to_string(),
            self.trials.to_string(),
            self.mean_accuracy.to_string(),
            self.accuracy_variance.to_string(),
        ]
    }
}

impl ResultRow for VarianceCell {
    fn header() -> &'static [&'static str] {
        &["n", "m", "n_times_m", "repeats", "cost_variance"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.m.to_string(),
            (self.n as f64 * self.m).to_string(),
            self.repeats.to_string(),
            self.cost_variance.to_string(),
        ]
    }
}

/// `#`-prefixed metadata written above the CSV header.
#[derive(Clone, Debug, PartialEq)]
pub struct Metadata {
    pub entries: Vec<(String, String)>,
    pub timestamp: bool,
}

impl Metadata {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self {
            entries: vec![
                ("tool".into(), TOOL_VERSION.into()),
                ("seed".into(), cfg.seed.to_string()),
                ("config_hash".into(), cfg.hash()),
                ("test_sets".into(), "fresh per trial".into()),
            ],
            timestamp: true,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }
}

/// Streams result rows to a CSV file, flushing after every row.
pub struct ResultWriter<W: Write> {
    out: W,
}

impl ResultWriter<BufWriter<File>> {
    pub fn create<R: ResultRow>(path: impl AsRef<Path>, meta: &Metadata) -> Result<Self> {
        let file = File::create(path)?;
        Self::new::<R>(BufWriter::new(file), meta)
    }
}

impl<W: Write> ResultWriter<W> {
    pub fn new<R: ResultRow>(mut out: W, meta: &Metadata) -> Result<Self> {
        for (k, v) in &meta.entries {
            writeln!(out, "# {k}: {v}")?;
        }
        if meta.timestamp {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            writeln!(out, "# generated_unix: {secs}")?;
        }
        writeln!(out, "{}", R::header().join(","))?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn write_row<R: ResultRow>(&mut self, row: &R) -> Result<()> {
        writeln!(self.out, "{}", row.record().join(","))?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Writes a complete table with its metadata block.
pub fn emit_results<R: ResultRow>(
    rows: &[R],
    meta: &Metadata,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = ResultWriter::create::<R>(path, meta)?;
    for r in rows {
        w.write_row(r)?;
    }
    Ok(())
}

/// Reads back the data rows of a result CSV, skipping metadata lines.
pub fn read_result_rows(path: impl AsRef<Path>) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    r.records()
        .map(|rec| {
            rec.map(|r| r.iter().map(str::to_string).collect())
                .map_err(Error::from)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            train_sizes: vec![20],
            shot_means: vec![5.0],
            trials: 2,
            test_size: 50,
            train_cfg: TrainConfig {
                max_sweeps: 2,
                grid_size: 21,
                refine_iters: 5,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn empty_json_gives_defaults() {
        assert_eq!(
            ExperimentConfig::from_json("{}").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn config_round_trip() {
        let cfg = ExperimentConfig {
            shot_means: vec![1.6, 0.1 + 0.2],
            eval_mode: EvalMode::Poisson(1000.0),
            encoding: Encoding::AffineOffset,
            seed: u64::MAX,
            ..tiny()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        save_config(&cfg, &path).unwrap();
        assert_eq!(load_config(&path).unwrap(), cfg);
    }

    #[test]
    fn zero_trials_is_rejected() {
        let err = ExperimentConfig::from_json(r#"{"trials": 0}"#).unwrap_err();
        assert!(
            matches!(err, Error::Validation { ref field, .. } if field == "trials"),
            "{err}"
        );
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err =
            ExperimentConfig::from_json(r#"{"train_cfg": {"grid_size": "many"}}"#).unwrap_err();
        assert!(
            matches!(err, Error::Parse { ref field, .. } if field == "train_cfg.grid_size"),
            "{err}"
        );
        let err =
            ExperimentConfig::from_json(r#"{"boundary": {"center": [0.2, 0.6], "radius": -1}}"#)
                .unwrap_err();
        assert!(
            matches!(err, Error::Parse { ref field, .. } if field.starts_with("boundary")),
            "{err}"
        );
        let err = ExperimentConfig::from_json(r#"{"trails": 3}"#).unwrap_err();
        assert!(err.to_string().contains("trails"), "{err}");
    }

    #[test]
    fn eval_mode_json_forms() {
        let cfg = ExperimentConfig::from_json(r#"{"eval_mode": {"poisson": 1000}}"#).unwrap();
        assert_eq!(cfg.eval_mode, EvalMode::Poisson(1000.0));
        let cfg = ExperimentConfig::from_json(r#"{"eval_mode": "exact", "train_mode": "exact"}"#)
            .unwrap();
        assert_eq!(cfg.eval_mode, EvalMode::Exact);
        assert_eq!(cfg.train_mode, ShotMode::Exact);
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = tiny();
        assert_eq!(
            run_trial(&cfg, 20, 5.0, 3).unwrap(),
            run_trial(&cfg, 20, 5.0, 3).unwrap()
        );
    }

    #[test]
    fn untrained_trial_is_scored() {
        let cfg = ExperimentConfig {
            train_cfg: TrainConfig {
                max_sweeps: 0,
                ..TrainConfig::default()
            },
            ..tiny()
        };
        let r = run_trial(&cfg, 20, 5.0, 0).unwrap();
        assert!((0.0..=1.0).contains(&r.accuracy));
    }

    #[test]
    fn single_trial_cell_has_zero_variance() {
        let cfg = ExperimentConfig {
            trials: 1,
            ..tiny()
        };
        let table = sweep_samples(&cfg).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].accuracy_variance, 0.0);
    }

    #[test]
    fn sweep_rows_are_sorted() {
        let cfg = ExperimentConfig {
            train_sizes: vec![30, 10],
            shot_means: vec![20.0, 2.0],
            trials: 1,
            ..tiny()
        };
        let table = sweep_samples(&cfg).unwrap();
        let keys: Vec<(usize, f64)> = table.iter().map(|c| (c.n, c.m)).collect();
        assert_eq!(keys, vec![(10, 2.0), (10, 20.0), (30, 2.0), (30, 20.0)]);
    }

    #[test]
    fn aggregates_match_per_trial_records() {
        let cfg = ExperimentConfig {
            trials: 3,
            ..tiny()
        };
        let mut seen = Vec::new();
        let table = sweep_samples_with(&cfg, |cell, records| {
            seen.push((*cell, records.to_vec()));
            Ok(())
        })
        .unwrap();
        for (cell, records) in &seen {
            assert_eq!(*cell, CellResult::from_trials(cell.n, cell.m, records));
            for r in records {
                assert_eq!(*r, run_trial(&cfg, r.n, r.m, r.trial).unwrap());
            }
        }
        assert_eq!(table.len(), seen.len());
    }

    #[test]
    fn heatmap_grid_sizes() {
        assert_eq!(center_grid(0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(center_grid(0.1).unwrap().len(), 11);
        assert_eq!(center_grid(0.3).unwrap().len(), 4);
        assert!(center_grid(0.0).is_err());
        assert!(center_grid(0.6).is_err());
    }

    #[test]
    fn heatmap_cells_are_valid() {
        let cfg = ExperimentConfig {
            trials: 1,
            heatmap_train_size: 20,
            ..tiny()
        };
        let cells = center_heatmap(&cfg, 0.5).unwrap();
        assert_eq!(cells.len(), 9);
        assert!(cells.iter().all(|c| (0.0..=1.0).contains(&c.mean_accuracy)));
    }

    #[test]
    fn exact_variance_scan_is_zero() {
        let cfg = ExperimentConfig {
            train_mode: ShotMode::Exact,
            ..tiny()
        };
        let scan = variance_scan(&cfg, 100).unwrap();
        assert!(scan.cells.iter().all(|c| c.cost_variance == 0.0));
        assert!(scan.slope.is_none());
        assert!(variance_scan(&cfg, 99).is_err());
    }

    #[test]
    fn variance_estimate_is_stable_in_repeats() {
        let cfg = ExperimentConfig {
            train_sizes: vec![50],
            shot_means: vec![4.0],
            ..tiny()
        };
        let a = variance_scan(&cfg, 4_000).unwrap().cells[0];
        let b = variance_scan(&cfg, 8_000).unwrap().cells[0];
        // standard error of a sample variance is about v·sqrt(2/(k−1)) for
        // near-Gaussian costs
        let se = a.cost_variance * (2.0 / 3_999.0f64).sqrt();
        assert!(
            (a.cost_variance - b.cost_variance).abs() < 3.0 * se,
            "{a:?} vs {b:?}"
        );
    }

    #[test]
    fn least_squares_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| -1.0 * x + 2.5).collect();
        let (s, c) = least_squares_line(&xs, &ys).unwrap();
        assert!((s + 1.0).abs() < 1e-12 && (c - 2.5).abs() < 1e-12);
    }

    #[test]
    fn result_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let cfg = tiny();
        let rows = vec![CellResult {
            n: 20,
            m: 2.0,
            trials: 3,
            mean_accuracy: 0.75,
            accuracy_variance: 0.01,
            mean_final_cost: 0.125,
        }];
        emit_results(&rows, &Metadata::for_config(&cfg), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("# seed: 0\n"));
        assert!(text.contains(&format!("# config_hash: {}\n", cfg.hash())));
        assert!(text.contains("\nn,m,trials,mean_accuracy,accuracy_variance,mean_final_cost\n20,2,3,0.75,0.01,0.125\n"));
        assert_eq!(
            read_result_rows(&path).unwrap(),
            vec![vec!["20", "2", "3", "0.75", "0.01", "0.125"]]
        );
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let err = emit_results::<CellResult>(
            &[],
            &Metadata::for_config(&tiny()),
            "/nonexistent-dir/x.csv",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
