//! `reupload`: data generation, training, evaluation and experiment sweeps for
//! the photonic reuploading classifier.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use reupload_core::data::{load_dataset, save_dataset};
use reupload_core::harness::{
    center_heatmap_with, load_config, sweep_samples_with, variance_scan, CellResult,
    ExperimentConfig, HeatmapCell, Metadata, ResultWriter, TrialRecord, VarianceCell,
};
use reupload_core::trainer::{initial_params, Init};
use reupload_core::{
    accuracy, generate_dataset, train, Boundary, Encoding, ModelParams, RandomSource, ShotConfig,
    TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "reupload",
    version,
    about = "Photonic data-reuploading classifier under shot noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labeled dataset for a circular boundary.
    GenData {
        #[arg(long)]
        n: usize,
        /// Boundary center as `X1,X2`.
        #[arg(long, default_value = "0.2,0.6")]
        center: Center,
        #[arg(long, default_value_t = 0.33)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model with layer-wise SMO.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Mean photon samples per setting, or `exact`.
        #[arg(long, default_value = "exact")]
        shots: Shots,
        #[arg(long, default_value_t = 3)]
        layers: usize,
        #[arg(long, default_value = "linear")]
        encoding: Encoding,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        max_sweeps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a saved model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Mean photon samples per test input; exact probabilities if omitted.
        #[arg(long)]
        shots: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Accuracy over training-set sizes × photon budgets.
    SweepM {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Also write one row per trial to this file.
        #[arg(long)]
        per_trial: Option<PathBuf>,
    },
    /// Accuracy of noise-free training versus boundary center.
    Heatmap {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Cost-estimate variance versus N·M.
    Variance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug)]
struct Center(f64, f64);

impl FromStr for Center {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or("expected X1,X2")?;
        let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
        let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
        Ok(Center(a, b))
    }
}

#[derive(Clone, Copy, Debug)]
struct Shots(ShotConfig);

impl FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Shots(ShotConfig::exact()));
        }
        let m = s.parse::<f64>().map_err(|e| e.to_string())?;
        ShotConfig::poisson(m).map(Shots).map_err(|e| e.to_string())
    }
}

fn config_with_overrides(path: &Path, trials: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg =
        load_config(path).with_context(|| format!("loading config {}", path.display()))?;
    if let Some(t) = trials {
        cfg.trials = t;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn output_path(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(&cfg.output_path))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            n,
            center,
            radius,
            seed,
            out,
        } => {
            let b = Boundary::new((center.0, center.1), radius)?;
            let data = generate_dataset(n, &b, &mut RandomSource::new(seed))?;
            save_dataset(&data, &out).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Train {
            data,
            shots,
            layers,
            encoding,
            seed,
            max_sweeps,
            out,
            report,
        } => {
            let samples =
                load_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            let mut init_rng = RandomSource::substream(seed, 1);
            let params0 = initial_params(layers, encoding, Init::UniformRandom, &mut init_rng)?;
            let cfg = TrainConfig {
                seed,
                max_sweeps,
                ..TrainConfig::default()
            };
            let (params, rep) = train(&params0, &samples, &shots.0, &cfg)?;
            params
                .save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = report {
                std::fs::write(&path, rep.to_json()? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let last = rep.sweep_costs.last().copied().unwrap_or(f64::NAN);
            println!(
                "layer updates: {}  final estimated cost: {last:.6}  converged: {}",
                rep.layer_updates, rep.converged
            );
        }
        Command::Eval {
            model,
            data,
            shots,
            seed,
        } => {
            let params = ModelParams::load(&model)
                .with_context(|| format!("reading {}", model.display()))?;
            let samples =
                load_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            let cfg = match shots {
                Some(m) => ShotConfig::poisson(m)?,
                None => ShotConfig::exact(),
            };
            let acc = accuracy(&params, &samples, &cfg, &mut RandomSource::new(seed))?;
            println!("{acc}");
        }
        Command::SweepM {
            config,
            out,
            trials,
            per_trial,
        } => {
            let cfg = config_with_overrides(&config, trials)?;
            let path = output_path(&cfg, out);
            let meta = Metadata::for_config(&cfg);
            let mut writer = ResultWriter::create::<CellResult>(&path, &meta)
                .with_context(|| format!("creating {}", path.display()))?;
            let mut trial_writer = match &per_trial {
                Some(p) => Some(
                    ResultWriter::create::<TrialRecord>(p, &meta)
                        .with_context(|| format!("creating {}", p.display()))?,
                ),
                None => None,
            };
            sweep_samples_with(&cfg, |cell, records| {
                writer.write_row(cell)?;
                if let Some(w) = trial_writer.as_mut() {
                    for r in records {
                        w.write_row(r)?;
                    }
                }
                eprintln!(
                    "n={} m={} accuracy={:.4} ± {:.4}",
                    cell.n,
                    cell.m,
                    cell.mean_accuracy,
                    cell.standard_error()
                );
                Ok(())
            })?;
        }
        Command::Heatmap {
            config,
            grid_step,
            out,
            trials,
        } => {
            let cfg = config_with_overrides(&config, trials)?;
            let path = output_path(&cfg, out);
            let meta = Metadata::for_config(&cfg).with("grid_step", grid_step);
            let mut writer = ResultWriter::create::<HeatmapCell>(&path, &meta)
                .with_context(|| format!("creating {}", path.display()))?;
            center_heatmap_with(&cfg, grid_step, |cell| writer.write_row(cell))?;
        }
        Command::Variance {
            config,
            repeats,
            out,
        } => {
            let cfg = config_with_overrides(&config, None)?;
            let path = output_path(&cfg, out);
            let scan = variance_scan(&cfg, repeats)?;
            let slope = scan.slope.map_or("none".to_string(), |s| s.to_string());
            let meta = Metadata::for_config(&cfg).with("fitted_slope", &slope);
            let mut writer = ResultWriter::create::<VarianceCell>(&path, &meta)
                .with_context(|| format!("creating {}", path.display()))?;
            for cell in &scan.cells {
                writer.write_row(cell)?;
            }
            println!("fitted slope of ln(variance) vs ln(N·M): {slope}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_center_and_shots() {
        let c: Center = "0.2, 0.6".parse().unwrap();
        assert_eq!((c.0, c.1), (0.2, 0.6));
        assert!("0.2".parse::<Center>().is_err());
        assert!("exact".parse::<Shots>().unwrap().0.is_exact());
        assert_eq!("1.6".parse::<Shots>().unwrap().0.mean_samples, 1.6);
        assert!("-3".parse::<Shots>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
