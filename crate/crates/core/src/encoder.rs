//! Token sequences and the pluggable embedding provider.
//!
//! The provider contract stands in for a pretrained contextual encoder: a
//! deterministic map from token strings to D-dimensional vectors. The default
//! implementation hashes tokens into unit vectors; precomputed vectors can be
//! loaded from a text file with hash fallback for unknown tokens.

use crate::error::{Error, Result};
use crate::rng::{fnv1a64, SplitMix64};
use crate::tensor::Tensor;
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

pub const CLS: &str = "CLS";
pub const SEP: &str = "SEP";
pub const PAD: &str = "PAD";

/// A fixed-length token sequence: CLS, content, SEP, PAD padding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// True at positions holding real tokens (everything but PAD).
    pub fn mask(&self) -> Vec<bool> {
        self.tokens.iter().map(|t| t != PAD).collect()
    }
}

/// Whitespace tokenization into exactly `s` positions: CLS first, content
/// truncated to s-2 tokens, SEP after the content, PAD to fill.
pub fn tokenize(text: &str, s: usize) -> TokenSeq {
    assert!(s >= 3, "sequence length must be at least 3");
    let mut tokens = Vec::with_capacity(s);
    tokens.push(CLS.to_string());
    for tok in text.split_whitespace().take(s - 2) {
        tokens.push(tok.to_string());
    }
    tokens.push(SEP.to_string());
    while tokens.len() < s {
        tokens.push(PAD.to_string());
    }
    TokenSeq { tokens }
}

/// Deterministic map from a token string to a D-vector.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed(&self, token: &str) -> Vec<f64>;
}

/// Hash a token into a unit vector: FNV-1a of the UTF-8 bytes XOR the seed
/// feeds a splitmix64 stream; entries land in [-1, 1) and the vector is
/// scaled to unit norm. PAD maps to the zero vector.
pub fn hash_embed(token: &str, dim: usize, seed: u64) -> Vec<f64> {
    if token == PAD {
        return vec![0.0; dim];
    }
    let mut rng = SplitMix64::new(fnv1a64(token.as_bytes()) ^ seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.next_unit()).collect();
    let n = crate::tensor::norm(&v);
    assert!(n > 0.0, "degenerate zero embedding for token {token:?}");
    for x in &mut v {
        *x /= n;
    }
    v
}

/// The default provider: [`hash_embed`] under a fixed seed.
#[derive(Clone, Debug)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashEmbedder { dim, seed }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str) -> Vec<f64> {
        hash_embed(token, self.dim, self.seed)
    }
}

/// Provider backed by a vector file, with hash fallback for tokens the file
/// does not cover.
pub struct FileEmbedder {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
    fallback: HashEmbedder,
}

impl EmbeddingProvider for FileEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str) -> Vec<f64> {
        match self.table.get(token) {
            Some(v) => v.clone(),
            None => self.fallback.embed(token),
        }
    }
}

/// Load precomputed vectors. Format: first line `dim=<D>`, then one token
/// per line: `token v1 v2 ... vD` (whitespace separated).
pub fn load_precomputed(path: &Path, expected_dim: usize, seed: u64) -> Result<FileEmbedder> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(format!("cannot open embedding file {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::data("embedding file is empty"))??;
    let dim: usize = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::data(format!("bad embedding header {header:?}")))?;
    if dim != expected_dim {
        return Err(Error::config(format!(
            "embedding file dimension {dim} does not match configured dimension {expected_dim}"
        )));
    }

    let mut table = HashMap::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts
            .next()
            .ok_or_else(|| Error::data(format!("embedding line {}: empty", lineno + 2)))?;
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::data(format!("embedding line {}: bad float", lineno + 2)))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::data(format!(
                "embedding line {}: expected {dim} values, got {}",
                lineno + 2,
                values.len()
            )));
        }
        table.insert(token.to_string(), values);
    }

    Ok(FileEmbedder {
        dim,
        table,
        fallback: HashEmbedder::new(dim, seed),
    })
}

/// Embed every position of a token sequence into an S x D matrix.
pub fn encode_tokens(seq: &TokenSeq, provider: &dyn EmbeddingProvider) -> Tensor {
    let d = provider.dim();
    let mut out = Tensor::zeros(seq.len(), d);
    for (s, token) in seq.tokens().iter().enumerate() {
        let v = provider.embed(token);
        assert_eq!(v.len(), d, "provider returned wrong dimension");
        out.row_mut(s).copy_from_slice(&v);
    }
    out
}

/// Provider from config: file-backed when an embedding file is set, hash
/// otherwise.
pub fn make_provider(
    dim: usize,
    seed: u64,
    embed_file: Option<&str>,
) -> Result<Box<dyn EmbeddingProvider>> {
    match embed_file {
        Some(path) => Ok(Box::new(load_precomputed(Path::new(path), dim, seed)?)),
        None => Ok(Box::new(HashEmbedder::new(dim, seed))),
    }
}

/// Trainable embedding table initialized from the hash embedding of each
/// vocabulary string under the given seed.
pub fn embedding_table(strings: &[String], dim: usize, seed: u64) -> Tensor {
    let mut out = Tensor::zeros(strings.len(), dim);
    for (i, s) in strings.iter().enumerate() {
        out.row_mut(i).copy_from_slice(&hash_embed(s, dim, seed));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn tokenize_examples() {
        let seq = tokenize("a b", 5);
        assert_eq!(seq.tokens(), &["CLS", "a", "b", "SEP", "PAD"]);
        assert_eq!(seq.mask(), vec![true, true, true, true, false]);

        let long: Vec<String> = (0..100).map(|i| format!("t{i}")).collect();
        let seq = tokenize(&long.join(" "), 50);
        assert_eq!(seq.len(), 50);
        assert_eq!(seq.token(0), "CLS");
        assert_eq!(seq.token(48), "t47");
        assert_eq!(seq.token(49), "SEP");

        let empty = tokenize("", 4);
        assert_eq!(empty.tokens(), &["CLS", "SEP", "PAD", "PAD"]);
    }

    #[test]
    fn hash_embed_contract() {
        let a = hash_embed("token", 64, 7);
        let b = hash_embed("token", 64, 7);
        assert_eq!(a, b);
        assert!(hash_embed("token", 64, 8) != a);

        let n = crate::tensor::norm(&hash_embed("x", 64, 0));
        assert!((n - 1.0).abs() < 1e-12);

        assert_eq!(hash_embed(PAD, 16, 3), vec![0.0; 16]);
    }

    #[test]
    fn encode_tokens_zero_pads_and_repeats() {
        let provider = HashEmbedder::new(8, 1);
        let seq = tokenize("one two", 6);
        let tf = encode_tokens(&seq, &provider);
        assert_eq!(tf.shape(), (6, 8));
        assert!(tf.row(4).iter().all(|&v| v == 0.0));
        assert!(tf.row(5).iter().all(|&v| v == 0.0));

        let tf2 = encode_tokens(&tokenize("one two", 6), &provider);
        assert_eq!(tf.data(), tf2.data());
    }

    #[test]
    fn file_provider_lookup_and_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embed.txt");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "dim=4").unwrap();
        writeln!(f, "नमस्ते 0.1 0.2 0.3 0.4").unwrap();
        writeln!(f, "hello 1 0 0 0").unwrap();
        drop(f);

        let provider = load_precomputed(&path, 4, 9).unwrap();
        assert_eq!(provider.embed("नमस्ते"), vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(provider.embed("unknown"), hash_embed("unknown", 4, 9));

        assert!(matches!(
            load_precomputed(&path, 64, 9),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn embedding_table_rows_match_hash_embed() {
        let strings = vec!["bn".to_string(), "hi".to_string()];
        let table = embedding_table(&strings, 8, 42);
        assert_eq!(table.row(0), hash_embed("bn", 8, 42).as_slice());
        assert_eq!(table.row(1), hash_embed("hi", 8, 42).as_slice());
    }
}
