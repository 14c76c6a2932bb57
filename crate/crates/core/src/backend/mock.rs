use std::collections::{BTreeMap, BTreeSet};

use super::{Backend, EmbedRequest, EmbedResponse, ScoreRequest, ScoreResponse};
use crate::error::{Error, Result};

pub const DEFAULT_EMBED_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const UNIT_SEPARATOR: u8 = 0x1f;

/// 64-bit FNV-1a over the concatenation of `parts`.
pub fn fnv1a64(parts: &[&[u8]]) -> u64 {
    parts.iter().flat_map(|p| p.iter()).fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Lowercased alphanumeric runs; everything else separates tokens.
pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn lookup_key(continuation: &str) -> String {
    continuation
        .trim()
        .trim_end_matches(['.', '!', '?'])
        .trim()
        .to_lowercase()
}

/// Lexical-overlap scorer: `overlap + tiebreak`.
///
/// `overlap` counts distinct context tokens that also occur in the lexicon
/// terms of the continuation's label (or in the continuation itself when the
/// label is unknown). `tiebreak` lies in `[0, 0.001)` and is derived from a
/// hash of both strings.
pub fn mock_score(context: &str, continuation: &str, lexicon: &BTreeMap<String, BTreeSet<String>>) -> f64 {
    MockScorer { lexicon, salt: "" }.score(context, continuation)
}

struct MockScorer<'a> {
    lexicon: &'a BTreeMap<String, BTreeSet<String>>,
    salt: &'a str,
}

impl MockScorer<'_> {
    fn score(&self, context: &str, continuation: &str) -> f64 {
        let own;
        let terms = match self.lexicon.get(&lookup_key(continuation)) {
            Some(t) => t,
            None => {
                own = tokens(continuation).collect::<BTreeSet<_>>();
                &own
            }
        };
        let context_tokens: BTreeSet<String> = tokens(context).collect();
        let overlap = context_tokens.intersection(terms).count() as f64;
        let sep = [UNIT_SEPARATOR];
        let hash = if self.salt.is_empty() {
            fnv1a64(&[context.as_bytes(), &sep, continuation.as_bytes()])
        } else {
            fnv1a64(&[self.salt.as_bytes(), &sep, context.as_bytes(), &sep, continuation.as_bytes()])
        };
        overlap + (hash % 1000) as f64 / 1e6
    }
}

/// Hashed bag-of-words embedding, L2-normalized.
pub fn mock_embed(text: &str, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::Input("embedding dimension must be positive".into()));
    }
    let mut v = vec![0.0; dim];
    let mut any = false;
    for tok in tokens(text) {
        any = true;
        v[(fnv1a64(&[tok.as_bytes()]) % dim as u64) as usize] += 1.0;
    }
    if !any {
        return Err(Error::Input(format!("text `{text}` has no tokens")));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Deterministic in-process backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockBackend {
    /// Lowercased label → lexicon tokens.
    lexicon: BTreeMap<String, BTreeSet<String>>,
    dim: usize,
    salt: String,
}

impl MockBackend {
    /// `label_terms` maps surface labels (any case) to their lexicon terms.
    pub fn new<'a>(label_terms: impl IntoIterator<Item = (&'a str, &'a [String])>) -> Self {
        let mut lexicon: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (label, terms) in label_terms {
            let entry = lexicon.entry(lookup_key(label)).or_default();
            for term in terms {
                entry.extend(tokens(term));
            }
        }
        MockBackend {
            lexicon,
            dim: DEFAULT_EMBED_DIM,
            salt: String::new(),
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    /// A non-empty salt is mixed into the tiebreak hash, so that several mock
    /// aliases break ties differently. The default empty salt leaves the
    /// score formula unchanged.
    pub fn with_salt(mut self, salt: impl Into<String>) -> Self {
        self.salt = salt.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lexicon(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.lexicon
    }

    pub fn score_one(&self, context: &str, continuation: &str) -> f64 {
        MockScorer {
            lexicon: &self.lexicon,
            salt: &self.salt,
        }
        .score(context, continuation)
    }
}

impl Backend for MockBackend {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse> {
        req.validate()?;
        // Mock scores are not log-probabilities, so `normalize` has no effect.
        Ok(ScoreResponse {
            scores: req
                .continuations
                .iter()
                .map(|c| self.score_one(&req.context, c))
                .collect(),
        })
    }

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse> {
        EmbedRequest { texts: texts.to_vec() }.validate()?;
        let vectors = texts
            .iter()
            .map(|t| mock_embed(t, self.dim))
            .collect::<Result<_>>()?;
        Ok(EmbedResponse { vectors })
    }
}
