//! Minimal skip-gram with negative sampling.
//!
//! Single-threaded and fully determined by `TrainerParams::seed`. The output
//! table is unit-normalized and aligned with a vocabulary ordered by
//! descending frequency (ties by first occurrence).

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{unit_normalize_all, EmbeddingTable, Vocabulary};
use crate::{Error, Result, Scalar};

/// Exponent applied to unigram counts for the noise distribution.
pub const NOISE_EXPONENT: f64 = 0.75;
/// Learning rate reached at the end of training.
pub const FINAL_LEARNING_RATE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerParams {
    pub dim: usize,
    pub epochs: usize,
    /// Maximum context distance; each position uses a random window in `1..=window`.
    pub window: usize,
    pub negatives: usize,
    /// Initial learning rate, decayed linearly to [`FINAL_LEARNING_RATE`].
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for TrainerParams {
    fn default() -> Self {
        Self { dim: 10, epochs: 20, window: 5, negatives: 5, learning_rate: 0.025, min_count: 1, seed: 1 }
    }
}

impl TrainerParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.dim >= 1, "dim must be at least 1"),
            (self.epochs >= 1, "epochs must be at least 1"),
            (self.window >= 1, "window must be at least 1"),
            (self.negatives >= 1, "negatives must be at least 1"),
            (self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning rate must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::InvalidParameter((*msg).into())),
            None => Ok(()),
        }
    }
}

/// Builds the frequency-ordered vocabulary of tokens seen at least `min_count` times.
pub fn build_vocabulary<S: AsRef<[String]>>(corpus: &[S], min_count: usize) -> (Vocabulary, Vec<u64>) {
    let mut counts: HashMap<&str, (u64, usize)> = HashMap::new();
    let mut order = 0usize;
    for sentence in corpus {
        for tok in sentence.as_ref() {
            let e = counts.entry(tok.as_str()).or_insert_with(|| {
                order += 1;
                (0, order)
            });
            e.0 += 1;
        }
    }
    let mut entries: Vec<(&str, u64, usize)> = counts
        .into_iter()
        .filter(|(_, (c, _))| *c >= min_count.max(1) as u64)
        .map(|(w, (c, o))| (w, c, o))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let mut vocab = Vocabulary::new();
    for (w, _, _) in &entries {
        vocab.insert(w);
    }
    (vocab, entries.into_iter().map(|(_, c, _)| c).collect())
}

pub fn train_embedding<T: Scalar, S: AsRef<[String]>>(corpus: &[S], params: &TrainerParams) -> Result<(Vocabulary, EmbeddingTable<T>)> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    if corpus.iter().any(|s| s.as_ref().is_empty()) {
        return Err(Error::EmptyInput("sentence"));
    }
    let (vocab, counts) = build_vocabulary(corpus, params.min_count);
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.as_ref().iter().filter_map(|w| vocab.get(w)).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let trainer = Trainer::new(&counts, params, &mut rng)?;
    let syn0 = trainer.run(&sentences, &mut rng);
    let table = EmbeddingTable::from_flat(params.dim, syn0)?;
    let table = unit_normalize_all(table, &vocab)?;
    Ok((vocab, table))
}

struct Trainer<'p, T> {
    params: &'p TrainerParams,
    syn0: Vec<T>,
    syn1: Vec<T>,
    noise: WeightedIndex<f64>,
}

impl<'p, T: Scalar> Trainer<'p, T> {
    fn new<R: Rng>(counts: &[u64], params: &'p TrainerParams, rng: &mut R) -> Result<Self> {
        let dim = params.dim;
        let n = counts.len();
        let syn0 = (0..n * dim).map(|_| T::of((rng.random::<f64>() - 0.5) / dim as f64)).collect();
        let syn1 = vec![T::zero(); n * dim];
        let noise = WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(NOISE_EXPONENT)))
            .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
        Ok(Self { params, syn0, syn1, noise })
    }

    fn run<R: Rng>(mut self, sentences: &[Vec<usize>], rng: &mut R) -> Vec<T> {
        let p = self.params;
        let dim = p.dim;
        let total = (sentences.iter().map(Vec::len).sum::<usize>() * p.epochs).max(1) as f64;
        let mut seen = 0usize;
        let mut grad = vec![T::zero(); dim];
        for _ in 0..p.epochs {
            for sentence in sentences {
                for (i, &center) in sentence.iter().enumerate() {
                    let progress = seen as f64 / total;
                    let lr = T::of(p.learning_rate - (p.learning_rate - FINAL_LEARNING_RATE) * progress);
                    seen += 1;
                    let reach = p.window - rng.random_range(0..p.window);
                    let lo = i.saturating_sub(reach);
                    let hi = (i + reach).min(sentence.len() - 1);
                    for (j, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                        if j != i {
                            self.update(context, center, lr, &mut grad, rng);
                        }
                    }
                }
            }
        }
        debug_assert_eq!(grad.len(), dim);
        self.syn0
    }

    /// One positive pair `(context -> center)` plus `negatives` noise words.
    fn update<R: Rng>(&mut self, context: usize, center: usize, lr: T, grad: &mut [T], rng: &mut R) {
        let dim = self.params.dim;
        grad.iter_mut().for_each(|g| *g = T::zero());
        let input = context * dim..(context + 1) * dim;
        for d in 0..=self.params.negatives {
            let (target, label) = if d == 0 {
                (center, T::one())
            } else {
                let t = self.noise.sample(rng);
                if t == center {
                    continue;
                }
                (t, T::zero())
            };
            let out = target * dim..(target + 1) * dim;
            let f = self.syn0[input.clone()]
                .iter()
                .zip(&self.syn1[out.clone()])
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
            let g = (label - sigmoid(f)) * lr;
            for (k, (g_k, w1)) in grad.iter_mut().zip(&mut self.syn1[out]).enumerate() {
                *g_k = *g_k + g * *w1;
                *w1 = *w1 + g * self.syn0[input.start + k];
            }
        }
        for (w0, &g) in self.syn0[input].iter_mut().zip(grad.iter()) {
            *w0 = *w0 + g;
        }
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}
