//! Surface-level dataset variations: two text transforms and three label casings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariationKind {
    PunctStrip,
    SentenceComplete,
    LabelLower,
    LabelUpper,
    LabelCapitalized,
}

impl VariationKind {
    pub const ALL: [VariationKind; 5] = [
        VariationKind::PunctStrip,
        VariationKind::SentenceComplete,
        VariationKind::LabelLower,
        VariationKind::LabelUpper,
        VariationKind::LabelCapitalized,
    ];

    pub fn id(self) -> &'static str {
        match self {
            VariationKind::PunctStrip => "punct-strip",
            VariationKind::SentenceComplete => "sentence-complete",
            VariationKind::LabelLower => "label-lower",
            VariationKind::LabelUpper => "label-upper",
            VariationKind::LabelCapitalized => "label-capitalized",
        }
    }

    pub fn is_text(self) -> bool {
        matches!(self, VariationKind::PunctStrip | VariationKind::SentenceComplete)
    }

    pub fn is_label(self) -> bool {
        !self.is_text()
    }
}

impl fmt::Display for VariationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for VariationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariationKind::ALL
            .into_iter()
            .find(|v| v.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown variation `{s}`")))
    }
}

pub const DEFAULT_PUNCT_CHARS: &str = ".,;:!?\"'()[]\u{2014}";

/// Text transforms with a configurable punctuation set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextVariations {
    punct: Vec<char>,
}

impl Default for TextVariations {
    fn default() -> Self {
        Self::with_punct_chars(DEFAULT_PUNCT_CHARS)
    }
}

impl TextVariations {
    pub fn with_punct_chars(chars: &str) -> Self {
        TextVariations {
            punct: chars.chars().collect(),
        }
    }

    pub fn punct_chars(&self) -> String {
        self.punct.iter().collect()
    }

    pub fn apply(&self, text: &str, kind: VariationKind) -> Result<String> {
        if text.trim().is_empty() {
            return Err(Error::Variation("requirement text is empty".into()));
        }
        match kind {
            VariationKind::PunctStrip => {
                let kept: String = text.chars().filter(|c| !self.punct.contains(c)).collect();
                let out = kept.split_whitespace().collect::<Vec<_>>().join(" ");
                if out.is_empty() {
                    return Err(Error::Variation(format!(
                        "text `{text}` is empty after removing punctuation"
                    )));
                }
                Ok(out)
            }
            VariationKind::SentenceComplete => {
                let trimmed = text.trim_end();
                if trimmed.ends_with(['.', '!', '?']) {
                    Ok(trimmed.to_string())
                } else {
                    Ok(format!("{trimmed}."))
                }
            }
            other => Err(Error::Variation(format!("`{other}` is not a text variation"))),
        }
    }
}

/// Applies a text variation with the default punctuation set.
pub fn apply_text_variation(text: &str, kind: VariationKind) -> Result<String> {
    TextVariations::default().apply(text, kind)
}

/// Re-cases a display label. ASCII letters only; everything else is untouched.
///
/// # Panics
///
/// Panics if `kind` is a text variation.
pub fn apply_label_variation(label: &str, kind: VariationKind) -> String {
    match kind {
        VariationKind::LabelLower => label.to_ascii_lowercase(),
        VariationKind::LabelUpper => label.to_ascii_uppercase(),
        VariationKind::LabelCapitalized => {
            let mut out = String::with_capacity(label.len());
            let mut word_start = true;
            for c in label.chars() {
                if c.is_whitespace() {
                    word_start = true;
                    out.push(c);
                } else if word_start {
                    word_start = false;
                    out.push(c.to_ascii_uppercase());
                } else {
                    out.push(c.to_ascii_lowercase());
                }
            }
            out
        }
        other => panic!("`{other}` is not a label variation"),
    }
}
