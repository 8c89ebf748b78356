//! Headline corpora, length filtering and training/test sampling.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Result};

/// Column name used by the Million News Headlines CSV distribution.
pub const HEADLINE_COLUMN: &str = "headline_text";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Headline {
    pub tokens: Vec<String>,
}

impl Headline {
    /// Lowercases and splits on runs of whitespace. Returns `None` for blank text.
    pub fn parse(text: &str) -> Option<Self> {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
        if tokens.is_empty() {
            None
        } else {
            Some(Self { tokens })
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// First `k` tokens as inputs, token `k` as the target.
    pub fn to_case(&self, k: usize) -> Result<FitnessCase> {
        if self.tokens.len() <= k {
            return Err(Error::InvalidParameter(format!(
                "headline {:?} has {} tokens, need at least {}",
                self.tokens.join(" "),
                self.tokens.len(),
                k + 1
            )));
        }
        Ok(FitnessCase { inputs: self.tokens[..k].to_vec(), target: self.tokens[k].clone() })
    }
}

impl AsRef<[String]> for Headline {
    fn as_ref(&self) -> &[String] {
        &self.tokens
    }
}

/// `k` input words and the word that follows them.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FitnessCase {
    pub inputs: Vec<String>,
    pub target: String,
}

/// Reads one headline per line. A first line naming the `headline_text`
/// column is treated as a CSV header; the named column is then extracted from
/// every row.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Headline>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_corpus(&text))
}

pub fn parse_corpus(text: &str) -> Vec<Headline> {
    let mut lines = text.lines().peekable();
    let mut column: Option<(usize, usize)> = None;
    if let Some(first) = lines.peek() {
        let fields: Vec<&str> = first.trim().split(',').map(str::trim).collect();
        if let Some(pos) = fields.iter().position(|f| *f == HEADLINE_COLUMN) {
            column = Some((pos, fields.len()));
            lines.next();
        }
    }
    lines
        .filter_map(|line| match column {
            Some((pos, width)) if width > 1 => {
                // headline text is the last column in the MNH layout and may itself contain commas
                let fields: Vec<&str> = line.splitn(width, ',').collect();
                fields.get(pos).and_then(|f| Headline::parse(f))
            }
            _ => Headline::parse(line),
        })
        .collect()
}

/// Keeps headlines with exactly `length` tokens, in their original order.
pub fn filter_by_length(headlines: &[Headline], length: usize) -> Vec<Headline> {
    headlines.iter().filter(|h| h.len() == length).cloned().collect()
}

/// Shuffles `headlines` and turns the first `floor(fraction * n)` into cases.
pub fn sample_training_set<R: Rng + ?Sized>(headlines: &[Headline], fraction: f64, k: usize, rng: &mut R) -> Result<Vec<FitnessCase>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("sampling fraction {fraction} not in (0, 1]")));
    }
    let take = (fraction * headlines.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..headlines.len()).collect();
    order.shuffle(rng);
    order[..take].iter().map(|&i| headlines[i].to_case(k)).collect()
}

/// Uniform sample of `count` headlines without replacement, optionally
/// skipping any headline that appears among `exclude`.
pub fn sample_test_set<R: Rng + ?Sized>(
    headlines: &[Headline],
    count: usize,
    k: usize,
    rng: &mut R,
    exclude: Option<&[FitnessCase]>,
) -> Result<Vec<FitnessCase>> {
    let excluded: HashSet<&FitnessCase> = exclude.unwrap_or_default().iter().collect();
    let pool: Vec<FitnessCase> = headlines
        .iter()
        .map(|h| h.to_case(k))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|c| !excluded.contains(c))
        .collect();
    if count > pool.len() {
        return Err(Error::InvalidParameter(format!(
            "requested {count} test headlines but only {} are available",
            pool.len()
        )));
    }
    let picked = rand::seq::index::sample(rng, pool.len(), count);
    Ok(picked.into_iter().map(|i| pool[i].clone()).collect())
}

/// Synthetic headline generator with topical structure, for demos and tests
/// that cannot ship a real corpus.
///
/// Each sentence draws a topic; every position then draws a word from that
/// topic's pool for the position (with some cross-topic noise), so the final
/// word is predictable from the topic signalled by the preceding words.
pub mod synthetic {
    use super::Headline;
    use rand::Rng;

    #[derive(Clone, Copy, Debug)]
    pub struct SyntheticSpec {
        pub sentences: usize,
        pub length: usize,
        pub topics: usize,
        /// Distinct words per (topic, position) pool.
        pub words_per_slot: usize,
        /// Probability that a position ignores the sentence topic.
        pub noise: f64,
    }

    impl Default for SyntheticSpec {
        fn default() -> Self {
            Self { sentences: 20_000, length: 6, topics: 12, words_per_slot: 6, noise: 0.15 }
        }
    }

    pub fn headlines<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Vec<Headline> {
        (0..spec.sentences)
            .map(|_| {
                let topic = rng.random_range(0..spec.topics);
                let tokens = (0..spec.length)
                    .map(|pos| {
                        let t = if rng.random_bool(spec.noise) { rng.random_range(0..spec.topics) } else { topic };
                        // a word is drawn more often the lower its rank in the pool
                        let r = rng.random_range(0..spec.words_per_slot);
                        let rank = rng.random_range(0..=r);
                        format!("t{t}p{pos}w{rank}")
                    })
                    .collect();
                Headline { tokens }
            })
            .collect()
    }
}
