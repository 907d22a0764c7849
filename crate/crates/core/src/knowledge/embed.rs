use std::sync::LazyLock;

use rust_stemmers::{Algorithm, Stemmer};
use sha2::{Digest, Sha256};

/// Turns text into a unit-length vector of fixed dimension.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f32>;
}

/// Hashed bag of words: the terms from [`words`] are hashed into
/// `dimension` buckets, counted, and L2-normalized. Empty text maps to the
/// first basis vector so every output has unit norm.
#[derive(Clone, Debug)]
pub struct HashingEmbedder {
    dimension: usize,
}

pub const DEFAULT_DIMENSION: usize = 256;

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION)
    }
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    pub fn bucket(&self, word: &str) -> usize {
        let digest = Sha256::digest(word.as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        (u64::from_be_bytes(head) % self.dimension as u64) as usize
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "in", "into", "is", "it", "its", "of", "on",
    "or", "so", "that", "the", "then", "this", "to", "was", "when", "while", "with",
];

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

/// Index terms: lower-cased alphanumeric runs, stopwords dropped, stemmed.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .map(|w| STEMMER.stem(&w).into_owned())
}

pub fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (*x as f64 / norm) as f32;
        }
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0f32; self.dimension];
        let mut any = false;
        for w in words(text) {
            v[self.bucket(&w)] += 1.0;
            any = true;
        }
        if !any {
            v[0] = 1.0;
            return v;
        }
        normalize(&mut v);
        v
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_norm_and_deterministic() {
        let e = HashingEmbedder::default();
        for t in ["", "TON timer", "rising edge push ZPUSHP", "a a a a"] {
            let v = e.embed(t);
            assert_eq!(v.len(), 256);
            assert!((dot(&v, &v) - 1.0).abs() < 1e-6, "{t}");
            assert_eq!(v, e.embed(t));
        }
    }

    #[test]
    fn case_and_punctuation_insensitive() {
        let e = HashingEmbedder::default();
        assert_eq!(e.embed("Rising EDGE!"), e.embed("rising, edge"));
    }

    #[test]
    fn stopwords_dropped_and_inflections_merged() {
        assert_eq!(
            words("the counts of a counting").collect::<Vec<_>>(),
            vec!["count", "count"]
        );
        let e = HashingEmbedder::default();
        assert_eq!(e.embed("start the pumps"), e.embed("start pump"));
    }
}
