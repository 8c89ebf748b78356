//! Word vocabulary, dense embedding tables and the text interchange format.
//!
//! The text format is the one produced by the classic word2vec tool: a header
//! line `"<count> <dim>"` followed by one `"<token> <v1> ... <vd>"` line per word.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::{Error, Result, Scalar};

/// Ordered set of distinct tokens with stable 0-based indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary, rejecting duplicates.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for (line, w) in words.into_iter().enumerate() {
            let w = w.into();
            if vocab.contains(&w) {
                return Err(Error::DuplicateToken { token: w, line: line + 1 });
            }
            vocab.push(w);
        }
        Ok(vocab)
    }

    /// Appends `word` if absent and returns its index.
    pub fn insert(&mut self, word: &str) -> usize {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        self.push(word.to_owned())
    }

    fn push(&mut self, word: String) -> usize {
        let i = self.words.len();
        self.index.insert(word.clone(), i);
        self.words.push(word);
        i
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Like [`get`](Self::get) but reports the missing word as an error.
    pub fn require(&self, word: &str) -> Result<usize> {
        self.get(word).ok_or_else(|| Error::OutOfVocabulary(word.to_owned()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// One `dim`-dimensional vector per vocabulary entry, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmbeddingTable<T> {
    /// Builds a table from a flat row-major buffer.
    pub fn from_flat(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: data.len() % dim });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored vectors.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }
}

/// Reads a word2vec text-format embedding from `path`.
///
/// Vectors are returned exactly as stored; apply [`unit_normalize_all`] before
/// using them as GP inputs.
pub fn load_text_format<T: Scalar>(path: impl AsRef<Path>) -> Result<(Vocabulary, EmbeddingTable<T>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_text_format(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_text_format<T: Scalar, R: BufRead>(reader: R) -> Result<(Vocabulary, EmbeddingTable<T>)> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io("<reader>", e))?,
        None => return Err(Error::Format { line: 1, message: "missing header".into() }),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| s.parse::<usize>().ok();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (parse_usize(c), parse_usize(d)) {
            (Some(c), Some(d)) if d > 0 => (c, d),
            _ => {
                return Err(Error::Format {
                    line: 1,
                    message: format!("malformed header {header:?}"),
                })
            }
        },
        _ => {
            return Err(Error::Format {
                line: 1,
                message: format!("header must be \"<count> <dim>\", got {header:?}"),
            })
        }
    };

    let mut vocab = Vocabulary::new();
    let mut data = Vec::with_capacity(count * dim);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else {
            // word2vec writes a trailing newline; tolerate blank lines
            continue;
        };
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(Error::Format {
                line: lineno,
                message: format!("row arity {} != {dim}", values.len()),
            });
        }
        if vocab.contains(token) {
            return Err(Error::DuplicateToken { token: token.to_owned(), line: lineno });
        }
        for v in values {
            let x = v.parse::<T>().map_err(|_| Error::Format {
                line: lineno,
                message: format!("invalid number {v:?}"),
            })?;
            data.push(x);
        }
        vocab.insert(token);
    }
    if vocab.len() != count {
        return Err(Error::Format {
            line: 1,
            message: format!("header declares {count} vectors, file has {}", vocab.len()),
        });
    }
    Ok((vocab, EmbeddingTable { dim, data }))
}

pub fn save_text_format<T: Scalar>(path: impl AsRef<Path>, vocab: &Vocabulary, table: &EmbeddingTable<T>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_text_format(&mut w, vocab, table)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes the text format. `Display` for floats is the shortest representation
/// that parses back to the same value, so a save/load cycle is lossless.
pub fn write_text_format<T: Scalar, W: Write>(w: &mut W, vocab: &Vocabulary, table: &EmbeddingTable<T>) -> std::io::Result<()> {
    assert_eq!(vocab.len(), table.len(), "vocabulary and table must be aligned");
    writeln!(w, "{} {}", vocab.len(), table.dim())?;
    for (word, row) in vocab.words().iter().zip(table.rows()) {
        write!(w, "{word}")?;
        for x in row {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

#[inline]
pub(crate) fn dot<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

/// Scales `v` to unit length in place. Returns `false` (leaving `v` untouched)
/// when its norm is zero.
pub fn normalize_in_place<T: Scalar>(v: &mut [T]) -> bool {
    let n = norm(v);
    if n == T::zero() || !n.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x = *x / n;
    }
    true
}

/// Normalizes every vector of `table` to unit length.
pub fn unit_normalize_all<T: Scalar>(mut table: EmbeddingTable<T>, vocab: &Vocabulary) -> Result<EmbeddingTable<T>> {
    let dim = table.dim;
    for (i, row) in table.data.chunks_exact_mut(dim).enumerate() {
        if !normalize_in_place(row) {
            let token = vocab.words.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
            return Err(Error::ZeroVector { token });
        }
    }
    Ok(table)
}

/// Cosine of the angle between `u` and `v`, clamped to `[-1, 1]`.
///
/// Zero-norm operands have similarity 0 with everything.
pub fn cosine_similarity<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), actual: v.len() });
    }
    Ok(cosine(u, v))
}

#[inline]
pub(crate) fn cosine<T: Scalar>(u: &[T], v: &[T]) -> T {
    debug_assert_eq!(u.len(), v.len());
    let (mut uv, mut uu, mut vv) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in u.iter().zip(v) {
        uv = uv + a * b;
        uu = uu + a * a;
        vv = vv + b * b;
    }
    let denom = uu.sqrt() * vv.sqrt();
    if denom == T::zero() {
        return T::zero();
    }
    (uv / denom).max(-T::one()).min(T::one())
}

/// Result of decoding a vector to its closest vocabulary word.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decoded<T> {
    pub index: usize,
    pub similarity: T,
    /// Set when the query was the zero vector; `index` is then 0.
    pub degenerate: bool,
}

/// Exhaustive argmax of cosine similarity over the whole table. Ties go to the
/// lowest index.
pub fn nearest_word<T: Scalar>(v: &[T], vocab: &Vocabulary, table: &EmbeddingTable<T>) -> Result<Decoded<T>> {
    if vocab.is_empty() || table.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    if v.len() != table.dim() {
        return Err(Error::DimensionMismatch { expected: table.dim(), actual: v.len() });
    }
    if v.iter().all(|x| *x == T::zero()) {
        return Ok(Decoded { index: 0, similarity: T::zero(), degenerate: true });
    }
    let mut best = Decoded { index: 0, similarity: cosine(v, table.vector(0)), degenerate: false };
    for (i, row) in table.rows().enumerate().skip(1) {
        let s = cosine(v, row);
        if s > best.similarity {
            best.index = i;
            best.similarity = s;
        }
    }
    Ok(best)
}
