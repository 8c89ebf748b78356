use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vecgp::dataset::synthetic::{self, SyntheticSpec};
use vecgp_cli::commands;
use vecgp_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "vecgp", version, about = "Evolve next-word predictors over word embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Only use these embedding dimensions.
    #[arg(long, value_delimiter = ',')]
    dim: Vec<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::parse("", std::path::Path::new("."))?,
        };
        if !self.dim.is_empty() {
            cfg.dims = self.dim.clone();
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one embedding per dimension on the corpus.
    TrainEmbedding(Common),
    /// Run the evolutionary experiment and write results.csv.
    Evolve(Common),
    /// Test the best evolved tree of each dimension on held-out headlines.
    Test(Common),
    /// Predict the word following the given words.
    Predict {
        /// Expression over w0..w{k-1}.
        #[arg(long)]
        expression: String,
        #[arg(long)]
        embedding: PathBuf,
        /// Word expected to follow, reported against the prediction.
        #[arg(long)]
        original: Option<String>,
        #[arg(required = true)]
        words: Vec<String>,
    },
    /// Write a synthetic headline corpus.
    GenerateCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        sentences: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainEmbedding(c) => {
            for p in commands::train_embeddings(&c.config()?)? {
                println!("{}", p.display());
            }
        }
        Command::Evolve(c) => {
            let cfg = c.config()?;
            let report = commands::evolve_all(&cfg)?;
            println!("{} runs written to {}", report.rows.len(), cfg.results_csv().display());
            for (dim, run, e) in &report.failures {
                println!("failed d={dim} run={run}: {e}");
            }
            anyhow::ensure!(!report.rows.is_empty(), "every run failed");
        }
        Command::Test(c) => {
            let cfg = c.config()?;
            cfg.validate()?;
            for &dim in &cfg.dims {
                let r = commands::test_best(&cfg, dim).with_context(|| format!("testing d={dim}"))?;
                print!("{}", commands::format_summary(&r));
            }
        }
        Command::Predict { expression, embedding, original, words } => {
            let r = commands::predict(&expression, &words, &embedding, original.as_deref())?;
            println!("{} -> {} (similarity {:.4})", r.inputs.join(" "), r.predicted, r.similarity);
        }
        Command::GenerateCorpus { out, sentences, seed } => {
            let spec = SyntheticSpec { sentences, ..Default::default() };
            let hs = synthetic::headlines(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
            let text: String = hs.iter().map(|h| h.tokens.join(" ") + "\n").collect();
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
