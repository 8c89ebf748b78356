//! Flat `key = value` experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use vecgp::{EvolutionParams, TrainerParams};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub corpus_path: PathBuf,
    pub sentence_length: usize,
    pub k: usize,
    pub dims: Vec<usize>,
    pub runs: usize,
    /// Share of the filtered corpus used as each run's training set.
    pub training_fraction: f64,
    pub evolution: EvolutionParams,
    pub trainer: TrainerParams,
    /// Embedding file per dimension; `{dim}` is replaced by the dimension.
    pub embedding_path: String,
    pub test_count: usize,
    /// Keep test headlines disjoint from the tested tree's training set.
    pub exclude_training: bool,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    /// Worker threads for independent runs; 0 means one per available core.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus_path: PathBuf::from("corpus.txt"),
            sentence_length: 6,
            k: 5,
            dims: vec![10, 15, 20, 25, 50, 100],
            runs: 30,
            training_fraction: 0.01,
            evolution: EvolutionParams::default(),
            trainer: TrainerParams::default(),
            embedding_path: "embeddings/d{dim}.txt".into(),
            test_count: 10_000,
            exclude_training: false,
            output_dir: PathBuf::from("out"),
            master_seed: 1,
            threads: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| anyhow::anyhow!("{key}: cannot parse {value:?}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected a boolean, got {value:?}"),
    }
}

impl ExperimentConfig {
    /// Parses config text. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut embedding_path_set = false;
        let resolve = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected \"key = value\", got {raw:?}", i + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            let ctx = || format!("line {}", i + 1);
            match key {
                "corpus_path" => cfg.corpus_path = resolve(value),
                "sentence_length" => cfg.sentence_length = parse(key, value).with_context(ctx)?,
                "k" => cfg.k = parse(key, value).with_context(ctx)?,
                "dims" => {
                    cfg.dims = value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| parse(key, s))
                        .collect::<Result<_>>()
                        .with_context(ctx)?
                }
                "runs" => cfg.runs = parse(key, value).with_context(ctx)?,
                "training_fraction" => cfg.training_fraction = parse(key, value).with_context(ctx)?,
                "population_size" => cfg.evolution.population_size = parse(key, value).with_context(ctx)?,
                "tournament_size" => cfg.evolution.tournament_size = parse(key, value).with_context(ctx)?,
                "mutation_probability" => cfg.evolution.mutation_probability = parse(key, value).with_context(ctx)?,
                "max_evaluations" => cfg.evolution.max_evaluations = parse(key, value).with_context(ctx)?,
                "max_depth" => cfg.evolution.max_depth = parse(key, value).with_context(ctx)?,
                "epochs" => cfg.trainer.epochs = parse(key, value).with_context(ctx)?,
                "window" => cfg.trainer.window = parse(key, value).with_context(ctx)?,
                "negatives" => cfg.trainer.negatives = parse(key, value).with_context(ctx)?,
                "learning_rate" => cfg.trainer.learning_rate = parse(key, value).with_context(ctx)?,
                "min_count" => cfg.trainer.min_count = parse(key, value).with_context(ctx)?,
                "embedding_path" => {
                    cfg.embedding_path = resolve(value).to_string_lossy().into_owned();
                    embedding_path_set = true;
                }
                "test_count" => cfg.test_count = parse(key, value).with_context(ctx)?,
                "exclude_training" => cfg.exclude_training = parse_bool(key, value).with_context(ctx)?,
                "output_dir" => cfg.output_dir = resolve(value),
                "master_seed" => cfg.master_seed = parse(key, value).with_context(ctx)?,
                "threads" => cfg.threads = parse(key, value).with_context(ctx)?,
                _ => bail!("line {}: unknown key {key:?}", i + 1),
            }
        }
        if !embedding_path_set {
            cfg.embedding_path = resolve(&cfg.embedding_path).to_string_lossy().into_owned();
        }
        cfg.evolution.k = cfg.k;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.dims.is_empty(), "dims must list at least one embedding dimension");
        ensure!(self.dims.iter().all(|&d| d > 0), "embedding dimensions must be positive");
        ensure!(
            self.k + 1 == self.sentence_length,
            "k ({}) must equal sentence_length - 1 ({})",
            self.k,
            self.sentence_length.saturating_sub(1)
        );
        ensure!(self.runs > 0, "runs must be positive");
        ensure!(
            self.training_fraction > 0.0 && self.training_fraction <= 1.0,
            "training_fraction must be in (0, 1]"
        );
        let mut evo = self.evolution.clone();
        evo.k = self.k;
        evo.validate()?;
        Ok(())
    }

    pub fn embedding_file(&self, dim: usize) -> PathBuf {
        PathBuf::from(self.embedding_path.replace("{dim}", &dim.to_string()))
    }

    pub fn results_csv(&self) -> PathBuf {
        self.output_dir.join("results.csv")
    }

    pub fn expression_file(&self, dim: usize, run: usize) -> PathBuf {
        self.output_dir.join("expressions").join(format!("d{dim}_r{run}.txt"))
    }

    pub fn trace_file(&self, dim: usize, run: usize) -> PathBuf {
        self.output_dir.join("traces").join(format!("d{dim}_r{run}.csv"))
    }

    pub fn test_dir(&self, dim: usize) -> PathBuf {
        self.output_dir.join(format!("test_d{dim}"))
    }

    pub fn worker_threads(&self) -> usize {
        if self.threads > 0 {
            self.threads
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_experiment_setup() {
        let c = ExperimentConfig::default();
        assert_eq!(c.dims, [10, 15, 20, 25, 50, 100]);
        assert_eq!((c.runs, c.test_count, c.sentence_length, c.k), (30, 10_000, 6, 5));
        assert_eq!(c.evolution.population_size, 500);
        assert_eq!(c.evolution.tournament_size, 3);
        assert_eq!(c.evolution.mutation_probability, 0.3);
        assert_eq!(c.evolution.max_evaluations, 100_000);
        assert_eq!(c.evolution.max_depth, 5);
        assert_eq!((c.trainer.epochs, c.trainer.min_count), (20, 1));
        assert_eq!(c.training_fraction, 0.01);
        c.validate().unwrap();
    }

    #[test]
    fn parses_keys_comments_and_relative_paths() {
        let text = "# desk run\ncorpus_path = data/c.txt\ndims = 10, 50\nruns=2 # inline\npopulation_size = 50\nexclude_training = yes\n";
        let c = ExperimentConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(c.corpus_path, PathBuf::from("/base/data/c.txt"));
        assert_eq!(c.dims, [10, 50]);
        assert_eq!(c.runs, 2);
        assert_eq!(c.evolution.population_size, 50);
        assert!(c.exclude_training);
        assert_eq!(c.embedding_file(50), PathBuf::from("/base/embeddings/d50.txt"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::parse("colour = red", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("runs = many", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("just text", Path::new(".")).is_err());
    }

    #[test]
    fn validation() {
        let empty = ExperimentConfig::parse("dims =", Path::new(".")).unwrap();
        assert!(empty.validate().is_err());
        let mismatch = ExperimentConfig::parse("k = 4", Path::new(".")).unwrap();
        assert!(mismatch.validate().is_err());
        let shorter = ExperimentConfig::parse("k = 4\nsentence_length = 5", Path::new(".")).unwrap();
        shorter.validate().unwrap();
        assert_eq!(shorter.evolution.k, 4);
    }
}
