//! Language packs driving utterance rendering, relation extraction, noise
//! injection, and reasoning-trace formats.
//!
//! Two lexicons ship with the crate: `zh-TW` (primary) and `en`. Everything
//! language-specific lives here so the rest of the toolkit is uniform over
//! languages, including ones without word separators.

use crate::oracle::{CardinalDirection, Relation};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Line formats of the three-step reasoning trace and the stage-record
/// texts. Placeholders: `{i}` (1-based index), `{landmark}`, `{relation}`,
/// `{direction}`, `{facing}`, `{phrase}`, `{from}`, `{to}`, `{vector}`,
/// `{src}`, `{dst}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFormat {
    pub step1_header: String,
    pub step2_header: String,
    pub step3_header: String,
    pub step1_line: String,
    #[serde(default)]
    pub step1_line_alts: Vec<String>,
    pub step2_line: String,
    #[serde(default)]
    pub step2_line_alts: Vec<String>,
    pub step3_line: String,
    #[serde(default)]
    pub step3_line_alts: Vec<String>,
    pub final_line: String,
    #[serde(default)]
    pub final_line_alts: Vec<String>,
    pub s2_input: String,
    pub s2_target: String,
    pub s3_input: String,
    pub s3_target: String,
}

/// One language pack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Language tag, e.g. `zh-TW` or `en`.
    pub language: String,
    /// Surface phrases per relation; the first entry is canonical.
    pub relation_phrases: BTreeMap<Relation, Vec<String>>,
    /// Phrase used in clipped utterances ("Dormitory 6 should be behind").
    pub bare_phrases: BTreeMap<Relation, String>,
    /// Bare relation tokens used inside reasoning traces; first is canonical.
    pub relation_tokens: BTreeMap<Relation, Vec<String>>,
    /// Direction surfaces; first is canonical.
    pub directions: BTreeMap<CardinalDirection, Vec<String>>,
    /// Sentence templates with `{anchor}` and `{cue_clauses}` slots.
    pub anchor_templates: Vec<String>,
    /// Clause templates per relation with a `{landmark}` slot; first is canonical.
    pub cue_templates: BTreeMap<Relation, Vec<String>>,
    /// "I am at"-class verb phrases; first is canonical.
    pub position_verbs: Vec<String>,
    /// Separator between clauses when joining a sentence.
    pub clause_separator: String,
    /// Conjunction prefixed to the final cue clause ("and " in English).
    pub final_conjunction: String,
    /// Copula-like tokens stripped when isolating a landmark mention.
    pub copulas: Vec<String>,
    pub synonym_table: BTreeMap<String, Vec<String>>,
    /// ASR-style misrecognitions; multi-character keys replace whole
    /// mentions, single-character keys act as substitution variants.
    pub confusion_table: BTreeMap<String, Vec<String>>,
    pub filler_tokens: Vec<String>,
    pub vague_references: Vec<String>,
    pub demonstratives: Vec<String>,
    /// Category tag -> surface used for category-aware vague references.
    pub category_names: BTreeMap<String, String>,
    pub uncertainty_markers: Vec<String>,
    /// Characters the noise model may substitute or insert.
    pub noise_char_pool: String,
    pub trace: TraceFormat,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon parse failure: {0}")]
    Parse(String),
    #[error("lexicon {language}: relation {relation} has no {what}")]
    MissingRelationEntry {
        language: String,
        relation: Relation,
        what: String,
    },
    #[error("lexicon {language}: canonical phrases {a:?} and {b:?} overlap")]
    OverlappingCanonicalPhrases {
        language: String,
        a: String,
        b: String,
    },
    #[error("lexicon {language}: direction {direction} has no surface")]
    MissingDirection {
        language: String,
        direction: CardinalDirection,
    },
    #[error("lexicon {language}: {what}")]
    Invalid { language: String, what: String },
    #[error("unknown built-in lexicon {0}")]
    UnknownBuiltin(String),
}

impl Lexicon {
    pub fn from_json(source: &str) -> Result<Self, LexiconError> {
        let lex: Lexicon =
            serde_json::from_str(source).map_err(|e| LexiconError::Parse(e.to_string()))?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn validate(&self) -> Result<(), LexiconError> {
        let lang = || self.language.clone();
        for relation in Relation::ALL {
            let phrases = self.relation_phrases.get(&relation);
            if phrases.is_none_or(Vec::is_empty) {
                return Err(LexiconError::MissingRelationEntry {
                    language: lang(),
                    relation,
                    what: "surface phrase".into(),
                });
            }
            if self.cue_templates.get(&relation).is_none_or(Vec::is_empty) {
                return Err(LexiconError::MissingRelationEntry {
                    language: lang(),
                    relation,
                    what: "cue template".into(),
                });
            }
            if self
                .relation_tokens
                .get(&relation)
                .is_none_or(Vec::is_empty)
            {
                return Err(LexiconError::MissingRelationEntry {
                    language: lang(),
                    relation,
                    what: "trace token".into(),
                });
            }
            let bare = self.bare_phrases.get(&relation);
            let phrases = phrases.expect("checked above");
            match bare {
                None => {
                    return Err(LexiconError::MissingRelationEntry {
                        language: lang(),
                        relation,
                        what: "bare phrase".into(),
                    })
                }
                Some(b) if !phrases.contains(b) => {
                    return Err(LexiconError::Invalid {
                        language: lang(),
                        what: format!("bare phrase {b:?} is not listed under {relation}"),
                    })
                }
                _ => {}
            }
        }
        // Canonical phrases must extract unambiguously: no canonical phrase
        // may contain another.
        let canonical: Vec<&String> = Relation::ALL
            .iter()
            .map(|r| &self.relation_phrases[r][0])
            .collect();
        for a in &canonical {
            for b in &canonical {
                if a != b && a.to_lowercase().contains(&b.to_lowercase()) {
                    return Err(LexiconError::OverlappingCanonicalPhrases {
                        language: lang(),
                        a: (*a).clone(),
                        b: (*b).clone(),
                    });
                }
            }
        }
        // A synonym of a relation phrase must stay within that relation's
        // phrase list, so meaning-preserving substitutions stay extractable.
        for (key, subs) in &self.synonym_table {
            if let Some(relation) = self.relation_of_phrase(key) {
                let phrases = &self.relation_phrases[&relation];
                for sub in subs {
                    if !phrases.contains(sub) {
                        return Err(LexiconError::Invalid {
                            language: lang(),
                            what: format!(
                                "synonym {sub:?} of {key:?} is not listed under {relation}"
                            ),
                        });
                    }
                }
            }
        }
        for direction in CardinalDirection::ALL {
            if self.directions.get(&direction).is_none_or(Vec::is_empty) {
                return Err(LexiconError::MissingDirection {
                    language: lang(),
                    direction,
                });
            }
        }
        if self.anchor_templates.is_empty()
            || !self.anchor_templates[0].contains("{anchor}")
            || !self.anchor_templates[0].contains("{cue_clauses}")
        {
            return Err(LexiconError::Invalid {
                language: lang(),
                what: "anchor template must contain {anchor} and {cue_clauses}".into(),
            });
        }
        if self.position_verbs.is_empty() {
            return Err(LexiconError::Invalid {
                language: lang(),
                what: "at least one position verb required".into(),
            });
        }
        Ok(())
    }

    /// Canonical surface phrase for a relation.
    pub fn canonical_phrase(&self, relation: Relation) -> &str {
        &self.relation_phrases[&relation][0]
    }

    /// Canonical trace token for a relation.
    pub fn relation_token(&self, relation: Relation) -> &str {
        &self.relation_tokens[&relation][0]
    }

    /// Canonical direction surface.
    pub fn direction_name(&self, direction: CardinalDirection) -> &str {
        &self.directions[&direction][0]
    }

    /// Relation of a known surface phrase, if any (case-insensitive).
    pub fn relation_of_phrase(&self, phrase: &str) -> Option<Relation> {
        let needle = phrase.to_lowercase();
        Relation::ALL.into_iter().find(|relation| {
            self.relation_phrases[relation]
                .iter()
                .any(|p| p.to_lowercase() == needle)
        })
    }

    /// Relation of a trace token, if any (case-insensitive).
    pub fn relation_of_token(&self, token: &str) -> Option<Relation> {
        let needle = token.to_lowercase();
        Relation::ALL.into_iter().find(|relation| {
            self.relation_tokens[relation]
                .iter()
                .any(|t| t.to_lowercase() == needle)
        })
    }

    /// Direction of a surface token, if any (case-insensitive).
    pub fn direction_of_token(&self, token: &str) -> Option<CardinalDirection> {
        let needle = token.to_lowercase();
        CardinalDirection::ALL.into_iter().find(|direction| {
            self.directions[direction]
                .iter()
                .any(|t| t.to_lowercase() == needle)
        })
    }

    /// All relation phrases as (phrase, relation), longest first.
    pub fn phrases_by_length(&self) -> Vec<(&str, Relation)> {
        let mut all: Vec<(&str, Relation)> = Relation::ALL
            .iter()
            .flat_map(|&r| {
                self.relation_phrases[&r]
                    .iter()
                    .map(move |p| (p.as_str(), r))
            })
            .collect();
        all.sort_by(|a, b| {
            b.0.chars()
                .count()
                .cmp(&a.0.chars().count())
                .then_with(|| a.0.cmp(b.0))
        });
        all
    }

    /// Category surface for vague references, falling back to a generic one.
    pub fn vague_mention(&self, category: &str) -> String {
        match (self.demonstratives.first(), self.category_names.get(category)) {
            (Some(dem), Some(cat)) => format!("{dem}{cat}"),
            _ => self
                .vague_references
                .first()
                .cloned()
                .unwrap_or_else(|| "?".to_string()),
        }
    }
}

/// Tags of the lexicons shipped with the crate.
pub const BUILTIN_LEXICONS: [&str; 2] = ["zh-TW", "en"];

/// Load one of the shipped lexicons.
pub fn builtin_lexicon(tag: &str) -> Result<Lexicon, LexiconError> {
    let source = match tag {
        "zh-TW" => include_str!("../data/lexicons/zh_tw.json"),
        "en" => include_str!("../data/lexicons/en.json"),
        other => return Err(LexiconError::UnknownBuiltin(other.to_string())),
    };
    Lexicon::from_json(source)
}
