//! Scoring and embedding backends.
//!
//! Models sit behind two JSON endpoints, `POST /v1/score` and `POST /v1/embed`.
//! [`HttpBackend`] speaks that protocol; [`MockBackend`] is a deterministic,
//! stateless stand-in used for offline runs and served by `reqgrid mock-serve`.

mod http;
mod mock;
pub mod server;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use http::{embed_texts, score_candidates, HttpBackend, RetryPolicy};
pub use mock::{fnv1a64, mock_embed, mock_score, tokens, MockBackend, DEFAULT_EMBED_DIM};

/// How a backend aggregates per-token log-probabilities over a continuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalize {
    #[serde(rename = "mean")]
    MeanLogProb,
    #[serde(rename = "sum")]
    SumLogProb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub context: String,
    pub continuations: Vec<String>,
    pub normalize: Normalize,
}

impl ScoreRequest {
    pub fn validate(&self) -> Result<()> {
        if self.continuations.is_empty() {
            return Err(Error::Input("score request has no continuations".into()));
        }
        if self.context.is_empty() || self.continuations.iter().any(String::is_empty) {
            return Err(Error::Input("score request strings must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

impl ScoreResponse {
    /// Checks alignment with the request and finiteness of every score.
    pub fn check_against(&self, req: &ScoreRequest) -> Result<()> {
        if self.scores.len() != req.continuations.len() {
            return Err(Error::Protocol(format!(
                "expected {} scores, got {}",
                req.continuations.len(),
                self.scores.len()
            )));
        }
        if let Some(bad) = self.scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Protocol(format!("non-finite score {bad}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

impl EmbedRequest {
    pub fn validate(&self) -> Result<()> {
        if self.texts.is_empty() {
            return Err(Error::Input("embed request has no texts".into()));
        }
        if let Some(i) = self.texts.iter().position(|t| t.trim().is_empty()) {
            return Err(Error::Input(format!("embed text #{i} is empty")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

impl EmbedResponse {
    pub fn check_against(&self, texts: &[String]) -> Result<()> {
        if self.vectors.len() != texts.len() {
            return Err(Error::Protocol(format!(
                "expected {} vectors, got {}",
                texts.len(),
                self.vectors.len()
            )));
        }
        let dim = self.vectors.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::Protocol("embedding dimension must be at least 1".into()));
        }
        for v in &self.vectors {
            if v.len() != dim {
                return Err(Error::Protocol(format!(
                    "mixed embedding dimensions {dim} and {}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Protocol("non-finite embedding component".into()));
            }
        }
        Ok(())
    }
}

/// Body of an HTTP 400 response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// A scoring/embedding service. Implementations must be safe to call concurrently.
pub trait Backend: Send + Sync {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse>;

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse> {
        (**self).score(req)
    }

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse> {
        (**self).embed(texts)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse> {
        (**self).score(req)
    }

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse> {
        (**self).embed(texts)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse> {
        (**self).score(req)
    }

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse> {
        (**self).embed(texts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_shape() {
        let req = ScoreRequest {
            context: "c".into(),
            continuations: vec!["a.".into(), "b.".into()],
            normalize: Normalize::MeanLogProb,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"context":"c","continuations":["a.","b."],"normalize":"mean"}"#
        );
        let sum: Normalize = serde_json::from_str("\"sum\"").unwrap();
        assert_eq!(sum, Normalize::SumLogProb);
    }

    #[test]
    fn response_checks() {
        let req = ScoreRequest {
            context: "c".into(),
            continuations: vec!["a".into(), "b".into()],
            normalize: Normalize::SumLogProb,
        };
        assert!(ScoreResponse { scores: vec![-1.0, -2.0] }.check_against(&req).is_ok());
        assert!(matches!(
            ScoreResponse { scores: vec![-1.0] }.check_against(&req),
            Err(Error::Protocol(_))
        ));
        assert!(matches!(
            ScoreResponse { scores: vec![-1.0, f64::NAN] }.check_against(&req),
            Err(Error::Protocol(_))
        ));
        let texts = vec!["a".to_string(), "b".to_string()];
        assert!(EmbedResponse { vectors: vec![vec![1.0], vec![1.0, 0.0]] }
            .check_against(&texts)
            .is_err());
    }

    #[test]
    fn request_validation() {
        let mut req = ScoreRequest {
            context: "c".into(),
            continuations: vec![],
            normalize: Normalize::MeanLogProb,
        };
        assert!(req.validate().is_err());
        req.continuations.push(String::new());
        assert!(req.validate().is_err());
        assert!(EmbedRequest { texts: vec!["ok".into(), " ".into()] }.validate().is_err());
    }
}
