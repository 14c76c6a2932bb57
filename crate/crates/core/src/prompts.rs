//! Prompt patterns and their rendering into scoreable (context, continuation) pairs.
//!
//! A pattern is a relation ("is about" / "belongs to") crossed with a family
//! (assertion, definition-prefixed assertion, yes/no question). Assertion and
//! definition prompts are scored on the label span that closes the sentence;
//! question prompts are scored on a literal `Yes` after the question.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::TaskSpec;
use crate::error::{Error, Result};
use crate::variations::{apply_label_variation, VariationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    IsAbout,
    BelongsTo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Assertion,
    Definition,
    QA,
}

/// Identifies one of the six canonical patterns, e.g. `is-about-definition`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternId {
    pub relation: Relation,
    pub family: Family,
}

impl PatternId {
    pub const ALL: [PatternId; 6] = [
        PatternId::new(Relation::IsAbout, Family::Assertion),
        PatternId::new(Relation::BelongsTo, Family::Assertion),
        PatternId::new(Relation::IsAbout, Family::Definition),
        PatternId::new(Relation::BelongsTo, Family::Definition),
        PatternId::new(Relation::IsAbout, Family::QA),
        PatternId::new(Relation::BelongsTo, Family::QA),
    ];

    pub const fn new(relation: Relation, family: Family) -> Self {
        PatternId { relation, family }
    }

    fn default_template(self) -> &'static str {
        match (self.relation, self.family) {
            (Relation::IsAbout, Family::Assertion) => "This requirement: \"{text}\" is about {label}.",
            (Relation::BelongsTo, Family::Assertion) => {
                "This requirement: \"{text}\" belongs to {label}."
            }
            (Relation::IsAbout, Family::Definition) => {
                "{definition} Therefore, this requirement: \"{text}\" is about {label}."
            }
            (Relation::BelongsTo, Family::Definition) => {
                "{definition} Therefore, this requirement: \"{text}\" belongs to {label}."
            }
            (Relation::IsAbout, Family::QA) => "Is this requirement: \"{text}\" about {label}? Answer: ",
            (Relation::BelongsTo, Family::QA) => {
                "Does this requirement: \"{text}\" belong to {label}? Answer: "
            }
        }
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let relation = match self.relation {
            Relation::IsAbout => "is-about",
            Relation::BelongsTo => "belongs-to",
        };
        let family = match self.family {
            Family::Assertion => "assertion",
            Family::Definition => "definition",
            Family::QA => "qa",
        };
        write!(f, "{relation}-{family}")
    }
}

impl FromStr for PatternId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PatternId::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown prompt pattern `{s}`")))
    }
}

impl Serialize for PatternId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PatternId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerMode {
    /// Score the label span that completes the sentence.
    SpanLikelihood,
    /// Score the literal answer `Yes` after the question.
    YesToken,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Text,
    Label,
    Definition,
}

/// A parsed, validated prompt template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPattern {
    pub id: PatternId,
    template: String,
    segments: Vec<Segment>,
}

pub const YES_TOKEN: &str = "Yes";

impl PromptPattern {
    pub fn canonical(id: PatternId) -> Self {
        Self::new(id, id.default_template()).expect("built-in templates are valid")
    }

    pub fn new(id: PatternId, template: &str) -> Result<Self> {
        let segments = parse_template(template)?;
        let count = |seg: &Segment| segments.iter().filter(|s| *s == seg).count();
        for (seg, name) in [(Segment::Text, "{text}"), (Segment::Label, "{label}")] {
            if count(&seg) != 1 {
                return Err(Error::Template(format!(
                    "template `{template}` must contain {name} exactly once"
                )));
            }
        }
        let definitions = count(&Segment::Definition);
        match id.family {
            Family::Definition if definitions != 1 => {
                return Err(Error::Template(format!(
                    "definition template `{template}` must contain {{definition}} exactly once"
                )))
            }
            Family::Assertion | Family::QA if definitions != 0 => {
                return Err(Error::Template(format!(
                    "only definition templates may use {{definition}}: `{template}`"
                )))
            }
            _ => {}
        }
        if id.family != Family::QA {
            let label_at = segments.iter().position(|s| *s == Segment::Label).unwrap();
            if segments[label_at + 1..]
                .iter()
                .any(|s| !matches!(s, Segment::Literal(_)))
            {
                return Err(Error::Template(format!(
                    "placeholders after {{label}} would leak into the scored span: `{template}`"
                )));
            }
        }
        Ok(PromptPattern {
            id,
            template: template.to_string(),
            segments,
        })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn answer_mode(&self) -> AnswerMode {
        match self.id.family {
            Family::QA => AnswerMode::YesToken,
            _ => AnswerMode::SpanLikelihood,
        }
    }

    /// Renders one candidate. `definition` is required for the definition family.
    pub fn render(&self, text: &str, label: &str, definition: Option<&str>) -> Result<RenderedPrompt> {
        if text.trim().is_empty() || label.trim().is_empty() {
            return Err(Error::Input("prompt text and label must be non-empty".into()));
        }
        let definition = match (self.id.family, definition) {
            (Family::Definition, None) => return Err(Error::Lexicon(label.to_string())),
            (_, d) => d.unwrap_or(""),
        };
        let mut context = String::new();
        let mut continuation = String::new();
        let split = self.answer_mode() == AnswerMode::SpanLikelihood;
        let mut in_span = false;
        for seg in &self.segments {
            if split && *seg == Segment::Label {
                in_span = true;
            }
            let out = if in_span { &mut continuation } else { &mut context };
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Text => out.push_str(text),
                Segment::Label => out.push_str(label),
                Segment::Definition => out.push_str(definition),
            }
        }
        if !split {
            continuation.push_str(YES_TOKEN);
        }
        Ok(RenderedPrompt {
            context,
            continuation,
            answer_mode: self.answer_mode(),
        })
    }
}

fn parse_template(template: &str) -> Result<Vec<Segment>> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        literal.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else {
            return Err(Error::Template(format!("unterminated placeholder in `{template}`")));
        };
        let seg = match &after[..close] {
            "text" => Segment::Text,
            "label" => Segment::Label,
            "definition" => Segment::Definition,
            other => {
                return Err(Error::Template(format!(
                    "unknown placeholder `{{{other}}}` in `{template}`"
                )))
            }
        };
        if !literal.is_empty() {
            segments.push(Segment::Literal(std::mem::take(&mut literal)));
        }
        segments.push(seg);
        rest = &after[close + 1..];
    }
    literal.push_str(rest);
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

/// A prompt split into the conditioning context and the span to be scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub context: String,
    pub continuation: String,
    pub answer_mode: AnswerMode,
}

/// Class name → one-sentence definition, used by the definition family.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DefinitionLexicon {
    pub entries: BTreeMap<String, String>,
}

impl DefinitionLexicon {
    pub fn get(&self, class: &str) -> Option<&str> {
        self.entries.get(class).map(String::as_str)
    }

    /// Checks that every class of `spec` has a period-terminated definition.
    pub fn check_covers(&self, spec: &TaskSpec) -> Result<()> {
        for class in &spec.classes {
            match self.get(class) {
                None => return Err(Error::Lexicon(class.clone())),
                Some(d) if !d.trim_end().ends_with('.') => {
                    return Err(Error::Config(format!(
                        "definition of `{class}` must end with a period"
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Built-in definitions for every class of the canonical tasks.
    ///
    /// Only the usability sentence comes from the original study; the rest
    /// are written for this harness and can be overridden in the config file.
    pub fn builtin() -> Self {
        let entries = [
            ("Functional", "Functional requirements are requirements that describe the behavior a system must provide to its users."),
            ("NonFunctional", "Non-functional requirements are requirements that constrain how well a system performs its functions rather than what it does."),
            ("Quality", "Quality requirements are requirements that specify qualities of a system such as performance, efficiency, and reliability."),
            ("NonQuality", "Non-quality requirements are requirements that state a system's functions or constraints without specifying a system quality."),
            ("sec", "Security requirements are quality requirements that define how a system must protect its data and functions from unauthorized access."),
            ("nonsec", "Non-security requirements are requirements that do not concern the protection of a system against unauthorized access."),
            ("Usability", "Usability requirements are quality requirements that define what a system must do to support users' task performance."),
            ("Security", "Security requirements are quality requirements that define how a system must protect its data and functions from unauthorized access."),
            ("Operational", "Operational requirements are quality requirements that define the environment and conditions in which a system must operate."),
            ("Performance", "Performance requirements are quality requirements that define how fast and how efficiently a system must respond to its workload."),
            ("Look & Feel", "Look and feel requirements are quality requirements that define the appearance and style of a system's user interface."),
            ("Availability", "Availability requirements are quality requirements that define when and how reliably a system must be accessible to its users."),
            ("Scalability", "Scalability requirements are quality requirements that define how a system must grow to handle increasing users or data."),
            ("Maintainability", "Maintainability requirements are quality requirements that define how easily a system can be modified, updated, and supported."),
            ("Legal", "Legal requirements are quality requirements that define the laws, regulations, and standards a system must comply with."),
            ("Fault Tolerance", "Fault tolerance requirements are quality requirements that define how a system must continue to operate when failures occur."),
        ];
        DefinitionLexicon {
            entries: entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

/// One rendered candidate per class of `spec`, in roster order.
///
/// `text` is the (possibly varied) requirement text. The returned class name
/// is always the untransformed roster entry, whatever label casing is active.
pub fn candidate_prompts(
    spec: &TaskSpec,
    text: &str,
    pattern: &PromptPattern,
    label_variation: Option<VariationKind>,
    lexicon: Option<&DefinitionLexicon>,
) -> Result<Vec<(String, RenderedPrompt)>> {
    spec.classes
        .iter()
        .map(|class| {
            let shown = spec.display_label(class);
            let shown = match label_variation {
                Some(v) if v.is_label() => apply_label_variation(shown, v),
                _ => shown.to_string(),
            };
            let definition = match pattern.id.family {
                Family::Definition => Some(
                    lexicon
                        .and_then(|l| l.get(class))
                        .ok_or_else(|| Error::Lexicon(class.clone()))?,
                ),
                _ => None,
            };
            Ok((class.clone(), pattern.render(text, &shown, definition)?))
        })
        .collect()
}
