//! The experiment verbs: embedding training, evolution, testing, prediction.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, ensure, Context, Result};
use log::{error, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vecgp::baselines::{best_random_predictor, positional_predictor, Position};
use vecgp::dataset::{filter_by_length, load_corpus, sample_test_set, sample_training_set, FitnessCase, Headline};
use vecgp::embedding::{cosine_similarity, load_text_format, nearest_word, save_text_format, unit_normalize_all};
use vecgp::evolution::{evolve, EncodedCase, Problem, RunResult};
use vecgp::gp::{parse_expression, Evaluator};
use vecgp::sgns::train_embedding;
use vecgp::{EmbeddingTable, EvolutionParams, Vocabulary};

use crate::config::ExperimentConfig;

const STREAM_DATA: u64 = 1;
const STREAM_EVOLVE: u64 = 2;
const STREAM_RANDOM_BASELINE: u64 = 3;
const TAG_TRAINER: u64 = 0x7472_6169_6e00_0000;
const TAG_TEST: u64 = 0x7465_7374_0000_0000;

pub const RESULTS_HEADER: [&str; 7] = [
    "dim",
    "run",
    "best_initial_fitness",
    "best_final_fitness",
    "random_baseline",
    "first_word_baseline",
    "last_word_baseline",
];

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable, order-sensitive mix of seed components.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C908, |h, &p| splitmix64(h ^ splitmix64(p)))
}

fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

pub fn load_embedding(path: &Path) -> Result<(Vocabulary, EmbeddingTable)> {
    let (vocab, table) = load_text_format::<f64>(path).with_context(|| format!("loading embedding {}", path.display()))?;
    ensure!(!vocab.is_empty(), "embedding {} is empty", path.display());
    let table = unit_normalize_all(table, &vocab).with_context(|| format!("normalizing {}", path.display()))?;
    Ok((vocab, table))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Trains one embedding per configured dimension on the whole corpus.
pub fn train_embeddings(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    ensure!(!cfg.dims.is_empty(), "dims must list at least one embedding dimension");
    let corpus = load_corpus(&cfg.corpus_path).with_context(|| format!("reading corpus {}", cfg.corpus_path.display()))?;
    info!("corpus: {} headlines", corpus.len());
    let mut written = Vec::new();
    for &dim in &cfg.dims {
        let params = vecgp::TrainerParams {
            dim,
            seed: derive_seed(&[cfg.master_seed, dim as u64, TAG_TRAINER]),
            ..cfg.trainer.clone()
        };
        let (vocab, table) = train_embedding::<f64, _>(&corpus, &params)?;
        info!("d={dim}: vocabulary of {} words", vocab.len());
        let path = cfg.embedding_file(dim);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        save_text_format(&path, &vocab, &table)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub dim: usize,
    pub run: usize,
    pub best_initial_fitness: f64,
    pub best_final_fitness: f64,
    pub random_baseline: f64,
    pub first_word_baseline: f64,
    pub last_word_baseline: f64,
}

impl RunRow {
    fn record(&self) -> [String; 7] {
        [
            self.dim.to_string(),
            self.run.to_string(),
            self.best_initial_fitness.to_string(),
            self.best_final_fitness.to_string(),
            self.random_baseline.to_string(),
            self.first_word_baseline.to_string(),
            self.last_word_baseline.to_string(),
        ]
    }
}

#[derive(Debug, Default)]
pub struct EvolveReport {
    pub rows: Vec<RunRow>,
    pub failures: Vec<(usize, usize, String)>,
}

/// Training set used by run `run` at dimension `dim`.
pub fn training_set(cfg: &ExperimentConfig, headlines: &[Headline], dim: usize, run: usize) -> Result<Vec<FitnessCase>> {
    let mut rng = rng_for(&[cfg.master_seed, dim as u64, run as u64, STREAM_DATA]);
    Ok(sample_training_set(headlines, cfg.training_fraction, cfg.k, &mut rng)?)
}

/// One evolutionary run plus the three baselines on the same training set.
pub fn run_once(
    cfg: &ExperimentConfig,
    headlines: &[Headline],
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    dim: usize,
    run: usize,
) -> Result<(RunRow, RunResult)> {
    let cases = training_set(cfg, headlines, dim, run)?;
    let mut problem = Problem::new(&cases, vocab, table)?;
    let params = EvolutionParams {
        k: cfg.k,
        seed: derive_seed(&[cfg.master_seed, dim as u64, run as u64]),
        ..cfg.evolution.clone()
    };
    let mut evo_rng = rng_for(&[cfg.master_seed, dim as u64, run as u64, STREAM_EVOLVE]);
    let result = evolve(&params, &mut problem, &mut evo_rng)?;

    let mut rand_rng = rng_for(&[cfg.master_seed, dim as u64, run as u64, STREAM_RANDOM_BASELINE]);
    let random = best_random_predictor(&problem, params.population_size, &mut rand_rng);
    let first = positional_predictor(Position::First, &problem);
    let last = positional_predictor(Position::Last, &problem);

    let row = RunRow {
        dim,
        run,
        best_initial_fitness: result.best_initial_fitness,
        best_final_fitness: result.best_final_fitness,
        random_baseline: random.fitness,
        first_word_baseline: first.fitness,
        last_word_baseline: last.fitness,
    };
    Ok((row, result))
}

/// Runs every `(dim, run)` job and writes `results.csv`, one expression file
/// and one fitness trace per job. Failed jobs are logged and skipped.
pub fn evolve_all(cfg: &ExperimentConfig) -> Result<EvolveReport> {
    cfg.validate()?;
    let corpus = load_corpus(&cfg.corpus_path).with_context(|| format!("reading corpus {}", cfg.corpus_path.display()))?;
    let headlines = filter_by_length(&corpus, cfg.sentence_length);
    ensure!(!headlines.is_empty(), "no headlines of length {} in corpus", cfg.sentence_length);
    info!("{} headlines of length {}", headlines.len(), cfg.sentence_length);

    let mut report = EvolveReport::default();
    let mut embeddings = Vec::new();
    for &dim in &cfg.dims {
        match load_embedding(&cfg.embedding_file(dim)) {
            Ok(e) => embeddings.push((dim, e)),
            Err(e) => {
                error!("d={dim}: {e:#}");
                for run in 0..cfg.runs {
                    report.failures.push((dim, run, format!("{e:#}")));
                }
            }
        }
    }

    let jobs: Vec<(usize, usize)> = (0..embeddings.len()).flat_map(|e| (0..cfg.runs).map(move |r| (e, r))).collect();
    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..cfg.worker_threads().min(jobs.len()).max(1) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(e, run)) = jobs.get(j) else { break };
                let (dim, (vocab, table)) = &embeddings[e];
                let outcome = run_once(cfg, &headlines, vocab, table, *dim, run);
                match &outcome {
                    Ok((row, _)) => info!(
                        "d={dim} run={run}: best {:.4} (initial {:.4}, random {:.4})",
                        row.best_final_fitness, row.best_initial_fitness, row.random_baseline
                    ),
                    Err(err) => error!("d={dim} run={run}: {err:#}"),
                }
                done.lock().unwrap().push((*dim, run, outcome));
            });
        }
    });

    let mut done = done.into_inner().unwrap();
    done.sort_by_key(|(d, r, _)| (*d, *r));
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(RESULTS_HEADER)?;
    for (dim, run, outcome) in done {
        match outcome {
            Ok((row, result)) => {
                writer.write_record(row.record())?;
                write_file(&cfg.expression_file(dim, run), &format!("{}\n", result.best_tree_expression))?;
                let mut trace = String::from("evaluations,best_fitness\n");
                for (e, f) in &result.fitness_trace {
                    trace.push_str(&format!("{e},{f}\n"));
                }
                write_file(&cfg.trace_file(dim, run), &trace)?;
                report.rows.push(row);
            }
            Err(e) => report.failures.push((dim, run, format!("{e:#}"))),
        }
    }
    report.failures.sort_by_key(|(d, r, _)| (*d, *r));
    let bytes = writer.into_inner().map_err(|e| anyhow!("{e}"))?;
    write_file(&cfg.results_csv(), std::str::from_utf8(&bytes)?)?;
    Ok(report)
}

pub fn read_results(path: &Path) -> Result<Vec<RunRow>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = reader.headers()?.clone();
    ensure!(
        header.iter().eq(RESULTS_HEADER.iter().copied()),
        "{} has unexpected header {:?}",
        path.display(),
        header
    );
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> { Ok(rec[i].parse()?) };
        rows.push(RunRow {
            dim: rec[0].parse()?,
            run: rec[1].parse()?,
            best_initial_fitness: f(2)?,
            best_final_fitness: f(3)?,
            random_baseline: f(4)?,
            first_word_baseline: f(5)?,
            last_word_baseline: f(6)?,
        });
    }
    Ok(rows)
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self { count: v.len(), min: v[0], q1: q(0.25), median: q(0.5), q3: q(0.75), max: v[v.len() - 1] })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub inputs: Vec<String>,
    pub predicted: String,
    pub original: Option<String>,
    /// Predicted vs original word when the original is known, otherwise the
    /// output vector vs the predicted word.
    pub similarity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestReport {
    pub dim: usize,
    pub run: usize,
    pub expression: String,
    pub training_fitness: f64,
    pub summary: Summary,
    pub exact_matches: usize,
    pub degenerate_outputs: usize,
}

/// Tests the best tree of dimension `dim` (highest training fitness over all
/// runs) on a fresh sample of headlines.
pub fn test_best(cfg: &ExperimentConfig, dim: usize) -> Result<TestReport> {
    cfg.validate()?;
    let rows = read_results(&cfg.results_csv())?;
    let best = rows
        .iter()
        .filter(|r| r.dim == dim)
        .reduce(|a, b| if b.best_final_fitness > a.best_final_fitness { b } else { a })
        .ok_or_else(|| anyhow!("no results for d={dim} in {}", cfg.results_csv().display()))?;
    let expr_path = cfg.expression_file(dim, best.run);
    let expression = fs::read_to_string(&expr_path).with_context(|| format!("reading {}", expr_path.display()))?;
    let tree = parse_expression(expression.trim(), cfg.k)?;
    let (vocab, table) = load_embedding(&cfg.embedding_file(dim))?;

    let corpus = load_corpus(&cfg.corpus_path).with_context(|| format!("reading corpus {}", cfg.corpus_path.display()))?;
    let headlines = filter_by_length(&corpus, cfg.sentence_length);
    let exclude = if cfg.exclude_training { Some(training_set(cfg, &headlines, dim, best.run)?) } else { None };
    let mut rng = rng_for(&[cfg.master_seed, dim as u64, TAG_TEST]);
    let cases = sample_test_set(&headlines, cfg.test_count, cfg.k, &mut rng, exclude.as_deref())?;

    let mut evaluator = Evaluator::new();
    let mut records = Vec::with_capacity(cases.len());
    let mut degenerate = 0;
    for case in &cases {
        let enc = EncodedCase::encode(case, &vocab)?;
        let inputs: Vec<&[f64]> = enc.inputs.iter().map(|&i| table.vector(i)).collect();
        let out = evaluator.evaluate(&tree, &inputs);
        let decoded = nearest_word(out, &vocab, &table)?;
        degenerate += decoded.degenerate as usize;
        let similarity = cosine_similarity(table.vector(decoded.index), table.vector(enc.target))?;
        records.push(PredictionRecord {
            inputs: case.inputs.clone(),
            predicted: vocab.word(decoded.index).to_owned(),
            original: Some(case.target.clone()),
            similarity,
        });
    }
    if degenerate > 0 {
        warn!("d={dim}: {degenerate} test cases produced a zero output vector");
    }

    let dir = cfg.test_dir(dim);
    fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_path(dir.join("predictions.csv"))?;
    w.write_record(["inputs", "predicted", "original", "similarity"])?;
    for r in &records {
        w.write_record([
            r.inputs.join(" "),
            r.predicted.clone(),
            r.original.clone().unwrap_or_default(),
            r.similarity.to_string(),
        ])?;
    }
    w.flush()?;

    let sims: Vec<f64> = records.iter().map(|r| r.similarity).collect();
    let summary = Summary::of(&sims).ok_or_else(|| anyhow!("empty test sample"))?;
    let exact = records.iter().filter(|r| Some(&r.predicted) == r.original.as_ref()).count();
    let report = TestReport {
        dim,
        run: best.run,
        expression: expression.trim().to_owned(),
        training_fitness: best.best_final_fitness,
        summary,
        exact_matches: exact,
        degenerate_outputs: degenerate,
    };
    write_file(&dir.join("summary.txt"), &format_summary(&report))?;
    Ok(report)
}

pub fn format_summary(r: &TestReport) -> String {
    let s = &r.summary;
    format!(
        "dim = {}\nrun = {}\ntraining_fitness = {}\nexpression = {}\ncount = {}\nmin = {}\nq1 = {}\nmedian = {}\nq3 = {}\nmax = {}\nexact_matches = {}\ndegenerate_outputs = {}\n",
        r.dim, r.run, r.training_fitness, r.expression, s.count, s.min, s.q1, s.median, s.q3, s.max, r.exact_matches, r.degenerate_outputs
    )
}

/// Single-shot prediction of the word following `words`.
pub fn predict(expression: &str, words: &[String], embedding: &Path, original: Option<&str>) -> Result<PredictionRecord> {
    if words.is_empty() {
        bail!("at least one input word is required");
    }
    let tree = parse_expression(expression, words.len())?;
    let (vocab, table) = load_embedding(embedding)?;
    predict_with(&tree, words, &vocab, &table, original)
}

pub fn predict_with(
    tree: &vecgp::GpTree,
    words: &[String],
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    original: Option<&str>,
) -> Result<PredictionRecord> {
    let ids = words.iter().map(|w| vocab.require(w)).collect::<vecgp::Result<Vec<_>>>()?;
    let original_id = original.map(|w| vocab.require(w)).transpose()?;
    let inputs: Vec<&[f64]> = ids.iter().map(|&i| table.vector(i)).collect();
    let mut evaluator = Evaluator::new();
    let out = evaluator.evaluate(tree, &inputs);
    let decoded = nearest_word(out, vocab, table)?;
    let similarity = match original_id {
        Some(o) => cosine_similarity(table.vector(decoded.index), table.vector(o))?,
        None => decoded.similarity,
    };
    Ok(PredictionRecord {
        inputs: words.to_vec(),
        predicted: vocab.word(decoded.index).to_owned(),
        original: original.map(str::to_owned),
        similarity,
    })
}
