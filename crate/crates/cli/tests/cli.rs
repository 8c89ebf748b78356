use std::fs;
use std::path::Path;
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use vecgp::dataset::synthetic::{self, SyntheticSpec};
use vecgp_cli::commands::{self, Summary, RESULTS_HEADER};
use vecgp_cli::config::ExperimentConfig;

fn workspace(extra: &str) -> (TempDir, ExperimentConfig) {
    let dir = TempDir::new().unwrap();
    let spec = SyntheticSpec { sentences: 2_000, ..Default::default() };
    let hs = synthetic::headlines(&spec, &mut ChaCha8Rng::seed_from_u64(9));
    let text: String = hs.iter().map(|h| h.tokens.join(" ") + "\n").collect();
    fs::write(dir.path().join("corpus.txt"), text).unwrap();
    let cfg_text = format!(
        "corpus_path = corpus.txt\ndims = 10\nruns = 3\npopulation_size = 30\nmax_evaluations = 300\n\
         training_fraction = 0.05\nepochs = 2\ntest_count = 50\nthreads = 2\n{extra}"
    );
    let cfg_path = dir.path().join("exp.cfg");
    fs::write(&cfg_path, cfg_text).unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    (dir, cfg)
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn train_embedding_writes_deterministic_text_files() {
    let (_dir, cfg) = workspace("");
    let paths = commands::train_embeddings(&cfg).unwrap();
    assert_eq!(paths, vec![cfg.embedding_file(10)]);
    let first = read(&paths[0]);
    let header: Vec<usize> = first.lines().next().unwrap().split(' ').map(|x| x.parse().unwrap()).collect();
    assert_eq!(header[1], 10);
    assert_eq!(first.lines().count(), header[0] + 1);
    commands::train_embeddings(&cfg).unwrap();
    assert_eq!(read(&paths[0]), first);
}

#[test]
fn evolve_writes_results_and_is_reproducible() {
    let (_dir, cfg) = workspace("");
    commands::train_embeddings(&cfg).unwrap();
    let report = commands::evolve_all(&cfg).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    assert_eq!(report.rows.len(), 3);

    let csv = read(&cfg.results_csv());
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), RESULTS_HEADER.join(","));
    for line in lines {
        assert_eq!(line.split(',').count(), 7);
    }
    for r in &report.rows {
        assert!(r.best_final_fitness >= r.best_initial_fitness);
        assert!(cfg.expression_file(r.dim, r.run).exists());
        let trace = read(&cfg.trace_file(r.dim, r.run));
        assert!(trace.starts_with("evaluations,best_fitness\n"));
    }
    assert_eq!(commands::read_results(&cfg.results_csv()).unwrap(), report.rows);

    // different thread count, same bytes
    let mut again = cfg.clone();
    again.threads = 1;
    commands::evolve_all(&again).unwrap();
    assert_eq!(read(&cfg.results_csv()), csv);
}

#[test]
fn missing_embedding_fails_only_its_runs() {
    let (_dir, mut cfg) = workspace("");
    commands::train_embeddings(&cfg).unwrap();
    cfg.dims = vec![10, 15];
    cfg.runs = 1;
    let report = commands::evolve_all(&cfg).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.failures.len(), 1);
    assert_eq!((report.failures[0].0, report.failures[0].1), (15, 0));
}

#[test]
fn empty_dims_is_a_configuration_error() {
    let (_dir, mut cfg) = workspace("");
    cfg.dims.clear();
    assert!(commands::evolve_all(&cfg).is_err());
    assert!(commands::train_embeddings(&cfg).is_err());
}

#[test]
fn test_verb_summarizes_best_tree() {
    let (_dir, cfg) = workspace("exclude_training = true\n");
    commands::train_embeddings(&cfg).unwrap();
    let report = commands::evolve_all(&cfg).unwrap();
    let best = report.rows.iter().map(|r| r.best_final_fitness).fold(f64::MIN, f64::max);

    let t = commands::test_best(&cfg, 10).unwrap();
    assert_eq!(t.training_fitness, best);
    assert_eq!(t.summary.count, 50);

    let mut rd = csv::Reader::from_path(cfg.test_dir(10).join("predictions.csv")).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["inputs", "predicted", "original", "similarity"]);
    let sims: Vec<f64> = rd.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(sims.len(), 50);
    assert!(sims.iter().all(|s| (-1.0..=1.0).contains(s)));
    assert_eq!(Summary::of(&sims).unwrap(), t.summary);
    assert!(t.summary.min <= t.summary.q1 && t.summary.q1 <= t.summary.median);
    assert!(t.summary.median <= t.summary.q3 && t.summary.q3 <= t.summary.max);
    assert!(read(&cfg.test_dir(10).join("summary.txt")).contains("median = "));

    let mut too_many = cfg.clone();
    too_many.test_count = 5_000;
    assert!(commands::test_best(&too_many, 10).is_err());
}

#[test]
fn predict_decodes_and_reports_similarity() {
    let (_dir, cfg) = workspace("");
    let path = commands::train_embeddings(&cfg).unwrap().remove(0);
    let (vocab, _) = commands::load_embedding(&path).unwrap();
    let words: Vec<String> = (0..5).map(|i| vocab.word(i).to_owned()).collect();

    let r = commands::predict("w2", &words, &path, None).unwrap();
    assert_eq!(r.predicted, words[2]);
    assert!((r.similarity - 1.0).abs() < 1e-12);

    let r = commands::predict("w2", &words, &path, Some(&words[2])).unwrap();
    assert!((r.similarity - 1.0).abs() < 1e-12);
    assert_eq!(r.original.as_deref(), Some(words[2].as_str()));

    let r = commands::predict("(w0-w0)", &words, &path, None).unwrap();
    assert_eq!(r.predicted, vocab.word(0));

    let mut bad = words.clone();
    bad[1] = "no-such-word".into();
    let err = commands::predict("w0", &bad, &path, None).unwrap_err();
    assert!(format!("{err:#}").contains("no-such-word"));
    assert!(commands::predict("w7", &words, &path, None).is_err());
}

#[test]
fn binary_runs_end_to_end() {
    let (dir, cfg) = workspace("runs = 1\n");
    let bin = env!("CARGO_BIN_EXE_vecgp");
    let cfg_path = dir.path().join("exp.cfg");
    for verb in ["train-embedding", "evolve", "test"] {
        let out = Command::new(bin).arg(verb).arg("--config").arg(&cfg_path).output().unwrap();
        assert!(out.status.success(), "{verb}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let expr = read(&cfg.expression_file(10, 0));
    let (vocab, _) = commands::load_embedding(&cfg.embedding_file(10)).unwrap();
    let out = Command::new(bin)
        .args(["predict", "--expression", expr.trim(), "--embedding"])
        .arg(cfg.embedding_file(10))
        .args((0..5).map(|i| vocab.word(i)))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("->"));

    let out = Command::new(bin).args(["evolve", "--config"]).arg(&cfg_path).args(["--dim", ""]).output().unwrap();
    assert!(!out.status.success());
}
