use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfga::bench::{
    self, default_sweep_sizes, load_raw_splits, write_json, write_plot_csv, ExperimentConfig,
    ModelDocument, PreparedData,
};
use mfga::data::load_csv;
use mfga::Error;

/// Greedy kernel feature selection and random-feature baselines.
#[derive(Debug, Parser)]
#[command(name = "mfga", version, about)]
struct Cli {
    /// Worker threads for feature evaluation.
    #[arg(long, global = true, env = "MFGA_THREADS")]
    threads: Option<usize>,

    /// Directory for result, model and plot files; overrides the config's `output`.
    #[arg(long, global = true, env = "MFGA_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the candidate design on the training split and report its statistics.
    Featurize(ConfigArg),
    /// Run the λ grid (and seeds) and save the best result and its model.
    Train(ConfigArg),
    /// Score a saved model on the configured test split or on another CSV.
    Evaluate {
        #[command(flatten)]
        config: ConfigArg,
        /// Model document written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// CSV to score instead of the configured test split.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// One result per feature count, plus a plot CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated feature counts; defaults to 8 log-spaced values up to `m`.
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
    },
    /// Render result files as one table.
    Compare {
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Experiment config (JSON).
    config: PathBuf,
}

fn output_dir(cli_dir: &Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf, Error> {
    let dir = cli_dir
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn stem(cfg: &ExperimentConfig) -> String {
    let method = cfg.method.label().to_ascii_lowercase();
    match cfg.m {
        Some(m) if !cfg.method.is_kernel_machine() => format!("{}_{method}_m{m}", cfg.dataset.display_name()),
        _ => format!("{}_{method}", cfg.dataset.display_name()),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        mfga::set_threads(n)?;
    }
    match cli.command {
        Command::Featurize(arg) => {
            let cfg = ExperimentConfig::load(&arg.config)?;
            let summary = bench::featurize(&cfg)?;
            let path = output_dir(&cli.output_dir, &cfg)?.join(format!("{}_features.json", cfg.dataset.display_name()));
            write_json(&path, &summary)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Train(arg) => {
            let cfg = ExperimentConfig::load(&arg.config)?;
            let dir = output_dir(&cli.output_dir, &cfg)?;
            let outcome = bench::run_experiment(&cfg)?;
            let stem = stem(&cfg);
            let result_path = dir.join(format!("{stem}.json"));
            let model_path = dir.join(format!("{stem}.model.json"));
            write_json(&result_path, &outcome.result)?;
            outcome.model.save(&model_path)?;
            print!("{}", bench::render_table(std::slice::from_ref(&outcome.result)));
            println!("result: {}", result_path.display());
            println!("model:  {}", model_path.display());
        }
        Command::Evaluate { config, model, data } => {
            let cfg = ExperimentConfig::load(&config.config)?;
            let doc = ModelDocument::load(&model)?;
            let raw = match data {
                Some(path) => load_csv(&path, &cfg.dataset.schema.resolve(Path::new(""))?)?,
                None => load_raw_splits(&cfg.dataset)?.1,
            };
            let error = doc.evaluate(&raw)?;
            let report = serde_json::json!({
                "method": doc.method,
                "rows": raw.len(),
                "test_error": error,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep { config, m } => {
            let cfg = ExperimentConfig::load(&config.config)?;
            let dir = output_dir(&cli.output_dir, &cfg)?;
            let sizes = if m.is_empty() {
                let max = cfg
                    .m
                    .ok_or_else(|| Error::Config("sweep needs --m or a config `m`".into()))?;
                default_sweep_sizes(max, 8)
            } else {
                m
            };
            let data = PreparedData::load(&cfg)?;
            let results = bench::sweep_prepared(&cfg, &data, &sizes)?;
            let stem = format!("{}_{}_sweep", cfg.dataset.display_name(), cfg.method.label().to_ascii_lowercase());
            let json_path = dir.join(format!("{stem}.json"));
            let csv_path = dir.join(format!("{stem}.csv"));
            write_json(&json_path, &results)?;
            let file = std::fs::File::create(&csv_path).map_err(|source| Error::Io {
                path: csv_path.clone(),
                source,
            })?;
            write_plot_csv(&results, file)?;
            print!("{}", bench::render_table(&results));
            println!("results: {}", json_path.display());
            println!("plot:    {}", csv_path.display());
        }
        Command::Compare { results } => {
            print!("{}", bench::compare(&results)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
