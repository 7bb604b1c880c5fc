//! `bee`: run batch exploration, evaluate datasets downstream, sweep
//! settings and summarize saved runs.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bee_core::{
    build_report, run_ablation, run_batch_exploration, run_downstream_eval, Dataset, DownstreamConfig,
    DownstreamTask, ExperimentConfig, Sweep,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bee", version, about = "Batch exploration with examples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect an exploration dataset and its metrics.
    Explore {
        /// JSON experiment config; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's episode count.
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a world model offline on a dataset and plan toward a task goal.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// open_drawer, push_block_right, push_door or noop.
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// JSON downstream config; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report as JSON here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a setting sweep across seeds and write a comparison report.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `reward_mode=max,mean_plus_variance,single` or `latent_dim=8,16,32,64`.
        #[arg(long)]
        sweep: String,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        seeds: Vec<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize saved runs: one setting per directory.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default experiment config as JSON.
    DefaultConfig,
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Explore {
            config,
            seed,
            episodes,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            eprintln!("config {} -> {}", cfg.hash_hex(), out.display());
            let every = (cfg.episodes / 20).max(1);
            let run = run_batch_exploration(&cfg, Some(&out), |row| {
                if (row.episode + 1) % every == 0 {
                    eprintln!(
                        "episode {:>5}  target_moved={}  vae={:.3}  dyn={:.4}",
                        row.episode + 1,
                        row.target_moved,
                        row.vae_loss,
                        row.dyn_loss
                    );
                }
            })?;
            let moved = run.metrics.rows.iter().filter(|r| r.target_moved).count();
            println!(
                "{} episodes, {} transitions, target moved in {moved}, {} planner calls",
                run.metrics.len(),
                run.dataset.transitions(),
                run.planner_calls
            );
        }
        Command::Eval {
            dataset,
            task,
            trials,
            config,
            seed,
            out,
        } => {
            let mut cfg: DownstreamConfig = match &config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                    .with_context(|| format!("reading downstream config {}", p.display()))?,
                None => DownstreamConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let data = Dataset::load(&dataset).with_context(|| format!("loading {}", dataset.display()))?;
            let task = DownstreamTask::by_name(&task)?;
            let report = run_downstream_eval(&data, &task, trials, &cfg)?;
            let json = serde_json::to_string_pretty(&report)?;
            println!("{json}");
            if let Some(p) = out {
                std::fs::write(p, json)?;
            }
        }
        Command::Ablate {
            config,
            sweep,
            seeds,
            episodes,
            window,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            if cfg.episodes < window {
                bail!("{} episodes is fewer than one report window of {window}", cfg.episodes);
            }
            let sweep: Sweep = sweep.parse()?;
            let report = run_ablation(&cfg, &sweep, &seeds, &out, window, |label, seed, ep| {
                if (ep + 1) % 50 == 0 {
                    eprintln!("{label} seed {seed}: episode {}", ep + 1);
                }
            })?;
            for s in &report.settings {
                println!(
                    "{:<32} final window {:.3} ± {:.3}  across-window variance {:.5}",
                    s.label,
                    s.mean.last().copied().unwrap_or(f64::NAN),
                    s.stderr.last().copied().unwrap_or(f64::NAN),
                    s.across_window_variance
                );
            }
        }
        Command::Report { runs, window, out } => {
            let report = build_report(&runs, window)?;
            report.save(&out)?;
            println!("wrote {} settings to {}", report.settings.len(), out.display());
        }
        Command::DefaultConfig => println!("{}", ExperimentConfig::default().to_json()),
    }
    Ok(())
}
