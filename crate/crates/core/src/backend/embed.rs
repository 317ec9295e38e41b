//! Deterministic hashed bag-of-words embedder.
//!
//! Text is lowercased and split on every non-alphanumeric character; each token
//! is hashed (FNV-1a, 64 bit) into one of [`DIM`] buckets and counted. The count
//! vector is L2-normalized, so two texts with identical token multisets embed to
//! the same vector regardless of case or punctuation.

use serde::{Deserialize, Serialize};

pub const DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    /// Set when the input had no tokens; the vector is then all zeros.
    zero: bool,
}

impl EmbeddingVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Dot product of two unit vectors; zero when either side is the zero vector.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        if self.zero || other.zero {
            return 0.0;
        }
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        dot.clamp(0.0, 1.0)
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn bucket(token: &str) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (h % DIM as u64) as usize
}

pub fn embed(text: &str) -> EmbeddingVector {
    let mut values = vec![0.0; DIM];
    for tok in tokenize(text) {
        values[bucket(&tok)] += 1.0;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return EmbeddingVector { values, zero: true };
    }
    values.iter_mut().for_each(|v| *v /= norm);
    EmbeddingVector { values, zero: false }
}
