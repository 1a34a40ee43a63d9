use std::marker::PhantomData;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Embedding, RetrievalError, Scalar};

pub const DEFAULT_DIM: usize = 256;

/// Turns skeleton text into a vector.
pub trait Embedder<T: Scalar> {
    /// Recorded in the store so that vectors from different providers are
    /// never mixed.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding<T>, RetrievalError>;
}

/// Offline embedding: token 3-grams hashed into `dim` buckets, counted and
/// L2-normalised. Tokens are identifier/number runs and single symbol
/// characters. Identical text always yields the identical vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedTrigramEmbedder {
    dim: usize,
}

impl HashedTrigramEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedTrigramEmbedder { dim }
    }
}

impl Default for HashedTrigramEmbedder {
    fn default() -> Self {
        HashedTrigramEmbedder::new(DEFAULT_DIM)
    }
}

pub(crate) fn tokenize(text: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        let word = c.is_alphanumeric() || c == '_';
        match (word, start) {
            (true, None) => start = Some(i),
            (true, Some(_)) => {}
            (false, s) => {
                if let Some(s) = s {
                    tokens.push(&text[s..i]);
                    start = None;
                }
                if !c.is_whitespace() {
                    tokens.push(&text[i..i + c.len_utf8()]);
                }
            }
        }
    }
    if let Some(s) = start {
        tokens.push(&text[s..]);
    }
    tokens
}

/// 64-bit FNV-1a.
fn fnv1a(parts: &[&str]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hash ^= 0x1f;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        for b in part.bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

impl<T: Scalar> Embedder<T> for HashedTrigramEmbedder {
    fn id(&self) -> String {
        format!("hashed-trigram-v1/{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding<T>, RetrievalError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        let mut counts = vec![0f64; self.dim];
        if tokens.len() < 3 {
            counts[(fnv1a(&tokens) % self.dim as u64) as usize] += 1.0;
        } else {
            for gram in tokens.windows(3) {
                counts[(fnv1a(gram) % self.dim as u64) as usize] += 1.0;
            }
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        Embedding::new(counts.into_iter().map(|c| T::from_f64(c / norm)).collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// Embedding service reached over HTTP: `POST {"text": ...}` answered by
/// `{"vector": [...]}`.
pub struct RemoteEmbedder<T> {
    endpoint: String,
    dim: usize,
    client: reqwest::blocking::Client,
    _scalar: PhantomData<T>,
}

impl<T: Scalar> RemoteEmbedder<T> {
    pub fn new(endpoint: impl Into<String>, dim: usize) -> Result<Self, RetrievalError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| RetrievalError::ProviderFailure(e.to_string()))?;
        Ok(RemoteEmbedder {
            endpoint: endpoint.into(),
            dim,
            client,
            _scalar: PhantomData,
        })
    }
}

impl<T: Scalar> Embedder<T> for RemoteEmbedder<T> {
    fn id(&self) -> String {
        format!("remote:{}/{}", self.endpoint, self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding<T>, RetrievalError> {
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        let response: EmbedResponse = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest { text })
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| RetrievalError::ProviderFailure(e.to_string()))?;
        if response.vector.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dim,
                found: response.vector.len(),
            });
        }
        Embedding::new(response.vector.into_iter().map(T::from_f64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{skeletonize, SkeletonRequest};

    #[test]
    fn tokens_split_on_symbols() {
        assert_eq!(
            tokenize("racyVar1 := v1.func2(v4)"),
            ["racyVar1", ":", "=", "v1", ".", "func2", "(", "v4", ")"]
        );
    }

    #[test]
    fn deterministic_and_normalised() {
        let e = HashedTrigramEmbedder::default();
        let a: Embedding<f64> = e.embed("v7.Go(func() type4 { return racyVar1 })").unwrap();
        let b: Embedding<f64> = e.embed("v7.Go(func() type4 { return racyVar1 })").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 256);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        let short: Embedding<f64> = e.embed("go").unwrap();
        assert!((short.norm() - 1.0).abs() < 1e-9);
        let f: Embedding<f32> = e.embed("go f()").unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_text_is_an_error() {
        let e = HashedTrigramEmbedder::default();
        assert!(matches!(Embedder::<f64>::embed(&e, ""), Err(RetrievalError::EmptyText)));
        assert!(matches!(
            Embedder::<f64>::embed(&e, " \n\t"),
            Err(RetrievalError::EmptyText)
        ));
    }

    #[test]
    fn comment_edits_do_not_move_the_vector() {
        let a = "func f(n int) {\n\t// first wording\n\tgo g(n)\n}\n";
        let b = "func f(n int) {\n\t// something else entirely\n\tgo g(n)\n}\n";
        let ska = skeletonize(&SkeletonRequest::new(a)).unwrap();
        let skb = skeletonize(&SkeletonRequest::new(b)).unwrap();
        assert_eq!(ska.text, skb.text);
        let e = HashedTrigramEmbedder::default();
        let va: Embedding<f64> = e.embed(&ska.text).unwrap();
        let vb: Embedding<f64> = e.embed(&skb.text).unwrap();
        assert_eq!(va, vb);
    }

    #[test]
    fn unreachable_remote_is_provider_failure() {
        let r = RemoteEmbedder::<f64>::new("http://127.0.0.1:9/embed", 8).unwrap();
        assert!(matches!(r.embed("go f()"), Err(RetrievalError::ProviderFailure(_))));
    }
}
