//! Lexicon-driven rendering of egocentric utterances, the robustness
//! transforms, and the inverse parser that extracts (relation, landmark)
//! pairs from text.
//!
//! Rendering is deterministic given the spec seed. Extraction is a greedy
//! longest-match scan over lexicon surface forms, which treats languages
//! with and without word separators uniformly.

use crate::grid::GridEnvironment;
use crate::lexicon::Lexicon;
use crate::oracle::Relation;
use crate::seed::substream;
use crate::textscan::{self, Needle};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Robustness transform applied to a rendered utterance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variation {
    None,
    WordOrder,
    Synonym,
    ReferentialAmbiguity,
    Incomplete,
    Underspecified,
}

/// What to render: an anchor, ordered cues, and the transform to apply.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceSpec {
    pub anchor_landmark_id: String,
    pub cues: Vec<(Relation, String)>,
    pub variation: Variation,
    pub language: String,
    /// Render cue landmark mentions with their English names inside a
    /// non-English sentence.
    #[serde(default)]
    pub code_switch: bool,
    pub seed: u64,
}

/// One cue as it ended up in the rendered text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedCue {
    pub relation: Relation,
    pub landmark_id: String,
    /// Surface actually present in the text (a vague reference for
    /// ambiguity variants).
    pub surface: String,
    /// The landmark's real display name in the language used for it.
    pub display_name: String,
    /// Char range of the surface within the text.
    pub span: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedUtterance {
    pub text: String,
    pub anchor_surface: String,
    /// Cues in surface order.
    pub cues: Vec<RenderedCue>,
    /// False when the requested variation had no substitution site.
    pub changed: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("utterance spec has no cues")]
    EmptyCues,
    #[error("relation {0} appears more than once in one utterance")]
    DuplicateRelation(Relation),
    #[error("unknown landmark id {0}")]
    UnknownLandmark(String),
    #[error("landmark {id} has no display name for language {language}")]
    MissingDisplayName { id: String, language: String },
    #[error("lexicon language {lexicon} does not cover spec language {spec}")]
    LanguageMismatch { lexicon: String, spec: String },
}

/// Whether the language joins words with spaces (English-like templates put
/// a space after the `{landmark}` slot).
fn spaced(lex: &Lexicon) -> bool {
    lex.cue_templates
        .values()
        .flatten()
        .next()
        .map(|t| t.contains("{landmark} "))
        .unwrap_or(false)
}

fn joiner(lex: &Lexicon) -> &'static str {
    if spaced(lex) {
        " "
    } else {
        ""
    }
}

struct Piece {
    before: String,
    mention: String,
    after: String,
    cue: Option<(Relation, String, String)>, // relation, landmark id, display name
}

fn display_for(
    env: &GridEnvironment,
    id: &str,
    language: &str,
) -> Result<String, RenderError> {
    let lm = env
        .landmark(id)
        .ok_or_else(|| RenderError::UnknownLandmark(id.to_string()))?;
    lm.display_name(language)
        .map(str::to_string)
        .ok_or_else(|| RenderError::MissingDisplayName {
            id: id.to_string(),
            language: language.to_string(),
        })
}

fn substitute_synonyms(text: &str, lex: &Lexicon, rng: &mut ChaCha8Rng, changed: &mut bool) -> String {
    let mut keys: Vec<(&String, &Vec<String>)> = lex
        .synonym_table
        .iter()
        .filter(|(_, subs)| !subs.is_empty())
        .collect();
    keys.sort_by(|a, b| {
        b.0.chars()
            .count()
            .cmp(&a.0.chars().count())
            .then_with(|| a.0.cmp(b.0))
    });
    let mut out = text.to_string();
    for (key, subs) in keys {
        if let Some(byte_pos) = out.find(key.as_str()) {
            let replacement = &subs[rng.random_range(0..subs.len())];
            out.replace_range(byte_pos..byte_pos + key.len(), replacement);
            *changed = true;
        }
    }
    out
}

/// Render an utterance from a spec. Deterministic given the seed; the
/// returned provenance keeps every cue recoverable regardless of variation.
pub fn render(
    spec: &UtteranceSpec,
    env: &GridEnvironment,
    lex: &Lexicon,
) -> Result<RenderedUtterance, RenderError> {
    if spec.cues.is_empty() {
        return Err(RenderError::EmptyCues);
    }
    for (i, (relation, _)) in spec.cues.iter().enumerate() {
        if spec.cues[..i].iter().any(|(r, _)| r == relation) {
            return Err(RenderError::DuplicateRelation(*relation));
        }
    }
    if lex.language != spec.language {
        return Err(RenderError::LanguageMismatch {
            lexicon: lex.language.clone(),
            spec: spec.language.clone(),
        });
    }
    let mut rng = substream(spec.seed, "utterance/render");
    // Code-switching swaps cue mentions to their English names per mention;
    // at least one mention switches so the sample counts as code-switched.
    let mut switch_rng = substream(spec.seed, "utterance/codeswitch");
    let mention_language = |rng: &mut ChaCha8Rng, index: usize| -> &str {
        if spec.code_switch && spec.language != "en" && (index == 0 || rng.random_bool(0.5)) {
            return "en";
        }
        spec.language.as_str()
    };

    let anchor_display = display_for(env, &spec.anchor_landmark_id, &spec.language)?;
    let template = &lex.anchor_templates[0];
    let slot = template
        .find("{cue_clauses}")
        .expect("validated anchor template");
    let prefix_template = &template[..slot];
    let suffix = template[slot + "{cue_clauses}".len()..].to_string();
    let anchor_slot = prefix_template
        .find("{anchor}")
        .expect("validated anchor template");
    let mut anchor_piece = Piece {
        before: prefix_template[..anchor_slot].to_string(),
        mention: anchor_display.clone(),
        after: prefix_template[anchor_slot + "{anchor}".len()..].to_string(),
        cue: None,
    };

    let mut cue_pieces = Vec::with_capacity(spec.cues.len());
    for (index, (relation, id)) in spec.cues.iter().enumerate() {
        let language = mention_language(&mut switch_rng, index);
        let display = display_for(env, id, language)?;
        let template = &lex.cue_templates[relation][0];
        let slot = template.find("{landmark}").expect("validated cue template");
        cue_pieces.push(Piece {
            before: template[..slot].to_string(),
            mention: display.clone(),
            after: template[slot + "{landmark}".len()..].to_string(),
            cue: Some((*relation, id.clone(), display)),
        });
    }

    let mut changed = false;
    match spec.variation {
        Variation::None => {}
        Variation::WordOrder => {
            if cue_pieces.len() >= 2 {
                let order: Vec<usize> = {
                    let mut idx: Vec<usize> = (0..cue_pieces.len()).collect();
                    for _ in 0..8 {
                        idx.shuffle(&mut rng);
                        if idx.iter().enumerate().any(|(i, &j)| i != j) {
                            break;
                        }
                    }
                    idx
                };
                if order.iter().enumerate().any(|(i, &j)| i != j) {
                    let mut reordered = Vec::with_capacity(cue_pieces.len());
                    for &j in &order {
                        reordered.push(std::mem::replace(
                            &mut cue_pieces[j],
                            Piece {
                                before: String::new(),
                                mention: String::new(),
                                after: String::new(),
                                cue: None,
                            },
                        ));
                    }
                    cue_pieces = reordered;
                    changed = true;
                }
            }
        }
        Variation::Synonym => {
            anchor_piece.before =
                substitute_synonyms(&anchor_piece.before, lex, &mut rng, &mut changed);
            for piece in &mut cue_pieces {
                piece.before = substitute_synonyms(&piece.before, lex, &mut rng, &mut changed);
                piece.after = substitute_synonyms(&piece.after, lex, &mut rng, &mut changed);
            }
        }
        Variation::ReferentialAmbiguity => {
            anchor_piece.mention = lex
                .vague_references
                .first()
                .cloned()
                .unwrap_or_else(|| anchor_display.clone());
            for piece in &mut cue_pieces {
                let category = piece
                    .cue
                    .as_ref()
                    .and_then(|(_, id, _)| env.landmark(id))
                    .map(|lm| lm.category.clone())
                    .unwrap_or_default();
                piece.mention = lex.vague_mention(&category);
            }
            changed = true;
        }
        Variation::Incomplete => {
            let filler = lex.filler_tokens.first().cloned().unwrap_or_default();
            if let Some(verb) = lex
                .position_verbs
                .iter()
                .find(|v| anchor_piece.before.contains(v.as_str()))
            {
                let at = anchor_piece.before.find(verb.as_str()).expect("just found");
                anchor_piece
                    .before
                    .insert_str(at + verb.len(), &filler);
                changed = true;
            }
            let marker = lex
                .uncertainty_markers
                .first()
                .cloned()
                .unwrap_or_default();
            let join = joiner(lex);
            for piece in &mut cue_pieces {
                if let Some((relation, _, _)) = &piece.cue {
                    let bare = lex.bare_phrases[relation].clone();
                    piece.before = String::new();
                    piece.after = format!("{join}{marker}{join}{bare}");
                    changed = true;
                }
            }
        }
        Variation::Underspecified => {
            anchor_piece.mention = lex
                .vague_references
                .get(2)
                .or_else(|| lex.vague_references.first())
                .cloned()
                .unwrap_or_else(|| anchor_display.clone());
            for piece in &mut cue_pieces {
                piece.mention = lex
                    .vague_references
                    .get(3)
                    .or_else(|| lex.vague_references.last())
                    .cloned()
                    .unwrap_or_else(|| piece.mention.clone());
            }
            changed = true;
        }
    }

    // The final conjunction goes on the last cue clause.
    if !lex.final_conjunction.is_empty() {
        if let Some(last) = cue_pieces.last_mut() {
            last.before = format!("{}{}", lex.final_conjunction, last.before);
        }
    }

    let mut text = String::new();
    let mut offset = 0usize;
    let push = |text: &mut String, offset: &mut usize, s: &str| {
        text.push_str(s);
        *offset += s.chars().count();
    };
    let mut cues = Vec::with_capacity(cue_pieces.len());
    push(&mut text, &mut offset, &anchor_piece.before);
    let anchor_surface = anchor_piece.mention.clone();
    push(&mut text, &mut offset, &anchor_piece.mention);
    push(&mut text, &mut offset, &anchor_piece.after);
    push(&mut text, &mut offset, &suffix);
    for (i, piece) in cue_pieces.iter().enumerate() {
        if i > 0 {
            push(&mut text, &mut offset, &lex.clause_separator);
        }
        push(&mut text, &mut offset, &piece.before);
        let start = offset;
        push(&mut text, &mut offset, &piece.mention);
        let end = offset;
        push(&mut text, &mut offset, &piece.after);
        let (relation, id, display) = piece.cue.clone().expect("cue piece");
        cues.push(RenderedCue {
            relation,
            landmark_id: id,
            surface: piece.mention.clone(),
            display_name: display,
            span: (start, end),
        });
    }

    Ok(RenderedUtterance {
        text,
        anchor_surface,
        cues,
        changed,
    })
}

// ---------------------------------------------------------------------------
// Text-level variation
// ---------------------------------------------------------------------------

fn split_clauses(chars: &[char]) -> Vec<(usize, usize)> {
    const SEPARATORS: [char; 10] = ['，', ',', '。', '.', ';', '；', '!', '！', '?', '？'];
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &c) in chars.iter().enumerate() {
        if SEPARATORS.contains(&c) {
            if i > start {
                out.push((start, i));
            }
            start = i + 1;
        }
    }
    if chars.len() > start {
        out.push((start, chars.len()));
    }
    out
}

fn slice(chars: &[char], range: (usize, usize)) -> String {
    chars[range.0..range.1].iter().collect()
}

fn contains_any(folded: &[char], needles: &[Needle<()>]) -> bool {
    !textscan::scan(folded, needles).is_empty()
}

fn strip_leading_tokens(mention: &str, tokens: &[&str]) -> String {
    let mut out = mention.trim().to_string();
    let mut again = true;
    while again {
        again = false;
        for tok in tokens {
            if tok.is_empty() {
                continue;
            }
            let folded_out = out.to_lowercase();
            let folded_tok = tok.to_lowercase();
            if folded_out.starts_with(&folded_tok) {
                out = out[tok.len()..].trim_start().to_string();
                again = true;
                break;
            }
        }
    }
    out
}

fn strip_trailing_tokens(mention: &str, tokens: &[String]) -> String {
    let mut out = mention.trim().to_string();
    let mut sorted: Vec<&String> = tokens.iter().collect();
    sorted.sort_by_key(|t| std::cmp::Reverse(t.chars().count()));
    let mut again = true;
    while again {
        again = false;
        for tok in &sorted {
            if tok.is_empty() {
                continue;
            }
            let folded_out = out.to_lowercase();
            let folded_tok = tok.to_lowercase();
            if folded_out.ends_with(&folded_tok) {
                out = out[..out.len() - tok.len()].trim_end().to_string();
                again = true;
                break;
            }
        }
    }
    out
}

fn remove_fillers(text: &str, lex: &Lexicon) -> String {
    let mut out = text.to_string();
    for filler in &lex.filler_tokens {
        out = out.replace(filler.as_str(), "");
    }
    out
}

struct ClauseParts {
    mention: String,
    relation: Relation,
}

fn parse_cue_clause(clause: &str, lex: &Lexicon) -> Option<ClauseParts> {
    let cleaned = remove_fillers(clause, lex);
    let chars: Vec<char> = cleaned.chars().collect();
    let folded: Vec<char> = chars.iter().map(|&c| textscan::fold_char(c)).collect();
    // Longest phrase present; ties go to the rightmost occurrence.
    let mut best: Option<(usize, usize, Relation)> = None;
    for (phrase, relation) in lex.phrases_by_length() {
        let needle = textscan::fold_chars(phrase);
        let mut at = None;
        let mut i = 0;
        while let Some((s, e)) = textscan::find(&folded[i..], &needle) {
            at = Some((i + s, i + e));
            i += s + 1;
        }
        if let Some((s, e)) = at {
            best = Some((s, e, relation));
            break;
        }
    }
    let (start, end, relation) = best?;
    let before: String = chars[..start].iter().collect();
    let after: String = chars[end..].iter().collect();
    let conjunction = lex.final_conjunction.trim();
    let mut strip: Vec<String> = lex.copulas.clone();
    strip.extend(lex.uncertainty_markers.iter().cloned());
    let mut mention = strip_trailing_tokens(&before, &strip);
    mention = strip_leading_tokens(&mention, &[conjunction, "the", "The"]);
    if mention.is_empty() {
        mention = strip_leading_tokens(after.trim(), &[conjunction, "the", "The"]);
        mention = strip_trailing_tokens(&mention, &strip);
    }
    if mention.is_empty() {
        return None;
    }
    Some(ClauseParts { mention, relation })
}

/// Apply a robustness transform at the text level, without an environment.
///
/// Word order permutes cue clauses; synonym substitutes via the synonym
/// table; incomplete injects a filler and rewrites cue clauses with an
/// uncertainty marker and bare phrase; the referential transforms replace
/// mentions with generic vague references. Returns the input unchanged when
/// no substitution site exists.
pub fn apply_variation(text: &str, kind: Variation, lex: &Lexicon, seed: u64) -> String {
    let mut rng = substream(seed, "utterance/variation");
    if kind == Variation::None {
        return text.to_string();
    }
    if kind == Variation::Synonym {
        let mut changed = false;
        return substitute_synonyms(text, lex, &mut rng, &mut changed);
    }

    let chars: Vec<char> = text.chars().collect();
    let folded: Vec<char> = chars.iter().map(|&c| textscan::fold_char(c)).collect();
    let clause_ranges = split_clauses(&chars);
    let verb_needles = textscan::make_needles(
        lex.position_verbs.iter().map(|v| (v.clone(), ())),
    );
    let conjunction = lex.final_conjunction.trim();
    let join = joiner(lex);

    let mut anchor_clauses: Vec<String> = Vec::new();
    let mut cue_clauses: Vec<String> = Vec::new();
    for range in &clause_ranges {
        let clause = slice(&chars, *range).trim().to_string();
        if clause.is_empty() {
            continue;
        }
        if contains_any(&folded[range.0..range.1], &verb_needles) {
            anchor_clauses.push(clause);
        } else {
            cue_clauses.push(clause);
        }
    }
    if anchor_clauses.is_empty() && cue_clauses.is_empty() {
        return text.to_string();
    }

    match kind {
        Variation::WordOrder => {
            if cue_clauses.len() < 2 {
                return text.to_string();
            }
            let mut stripped: Vec<String> = cue_clauses
                .iter()
                .map(|c| strip_leading_tokens(c, &[conjunction]))
                .collect();
            let original = stripped.clone();
            for _ in 0..8 {
                stripped.shuffle(&mut rng);
                if stripped != original {
                    break;
                }
            }
            if !lex.final_conjunction.is_empty() {
                if let Some(last) = stripped.last_mut() {
                    *last = format!("{}{}", lex.final_conjunction, last);
                }
            }
            let mut all = anchor_clauses;
            all.extend(stripped);
            all.join(&lex.clause_separator)
        }
        Variation::Incomplete => {
            let filler = lex.filler_tokens.first().cloned().unwrap_or_default();
            let marker = lex
                .uncertainty_markers
                .first()
                .cloned()
                .unwrap_or_default();
            let mut rebuilt: Vec<String> = anchor_clauses
                .into_iter()
                .map(|clause| {
                    if let Some(verb) = lex
                        .position_verbs
                        .iter()
                        .find(|v| clause.contains(v.as_str()))
                    {
                        let at = clause.find(verb.as_str()).expect("just found");
                        let mut out = clause.clone();
                        out.insert_str(at + verb.len(), &filler);
                        out
                    } else {
                        clause
                    }
                })
                .collect();
            for clause in &cue_clauses {
                match parse_cue_clause(clause, lex) {
                    Some(parts) => {
                        let bare = &lex.bare_phrases[&parts.relation];
                        rebuilt.push(format!(
                            "{}{join}{marker}{join}{bare}",
                            parts.mention
                        ));
                    }
                    None => rebuilt.push(clause.clone()),
                }
            }
            rebuilt.join(&lex.clause_separator)
        }
        Variation::ReferentialAmbiguity | Variation::Underspecified => {
            let (anchor_ref, cue_ref) = if kind == Variation::ReferentialAmbiguity {
                (0, 1)
            } else {
                (2, 3)
            };
            let anchor_vague = lex
                .vague_references
                .get(anchor_ref)
                .or_else(|| lex.vague_references.first());
            let cue_vague = lex
                .vague_references
                .get(cue_ref)
                .or_else(|| lex.vague_references.last());
            let mut rebuilt: Vec<String> = Vec::new();
            for clause in anchor_clauses {
                match (anchor_vague, lex.position_verbs.iter().find(|v| clause.contains(v.as_str()))) {
                    (Some(vague), Some(verb)) => {
                        let at = clause.find(verb.as_str()).expect("just found");
                        let prefix = &clause[..at + verb.len()];
                        rebuilt.push(format!("{prefix}{join}{vague}").replace("  ", " "));
                    }
                    _ => rebuilt.push(clause),
                }
            }
            for clause in &cue_clauses {
                match (cue_vague, parse_cue_clause(clause, lex)) {
                    (Some(vague), Some(parts)) => {
                        let chars: Vec<char> = clause.chars().collect();
                        let mention_chars = textscan::fold_chars(&parts.mention);
                        let folded: Vec<char> =
                            chars.iter().map(|&c| textscan::fold_char(c)).collect();
                        if let Some((s, e)) = textscan::find(&folded, &mention_chars) {
                            let mut out: String = chars[..s].iter().collect();
                            out.push_str(vague);
                            out.extend(&chars[e..]);
                            rebuilt.push(strip_leading_tokens(&out, &[conjunction]));
                        } else {
                            rebuilt.push(clause.clone());
                        }
                    }
                    _ => rebuilt.push(clause.clone()),
                }
            }
            rebuilt.join(&lex.clause_separator)
        }
        Variation::None | Variation::Synonym => unreachable!("handled above"),
    }
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

/// One extracted (relation, mention) pair; `landmark_id` is `None` when the
/// mention does not resolve against the environment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractedCue {
    pub relation: Relation,
    pub mention: String,
    pub landmark_id: Option<String>,
    /// Char range of the clause the cue came from.
    pub span: (usize, usize),
}

/// Resolve a mention against all display names of an environment
/// (case-insensitive; tolerates a leading article and trailing punctuation).
pub fn resolve_mention(mention: &str, env: &GridEnvironment) -> Option<String> {
    let cleaned = mention
        .trim()
        .trim_end_matches(['.', '。', ',', '，'])
        .trim();
    if cleaned.is_empty() {
        return None;
    }
    let folded = textscan::fold_chars(cleaned);
    let without_article = cleaned
        .strip_prefix("the ")
        .or_else(|| cleaned.strip_prefix("The "))
        .map(textscan::fold_chars);
    for lm in &env.landmarks {
        for name in lm.display_names.values() {
            let name_folded = textscan::fold_chars(name);
            if name_folded == folded
                || without_article
                    .as_ref()
                    .map(|w| *w == name_folded)
                    .unwrap_or(false)
            {
                return Some(lm.id.clone());
            }
        }
    }
    None
}

/// Scan text for relation phrases and landmark mentions, in surface order.
///
/// Unresolvable mentions are returned with `landmark_id = None` and the raw
/// mention text preserved. Text with no relation phrase yields an empty
/// list.
pub fn extract_relations(
    text: &str,
    lex: &Lexicon,
    env: &GridEnvironment,
) -> Vec<ExtractedCue> {
    let chars: Vec<char> = text.chars().collect();
    let folded: Vec<char> = chars.iter().map(|&c| textscan::fold_char(c)).collect();
    let verb_needles = textscan::make_needles(
        lex.position_verbs.iter().map(|v| (v.clone(), ())),
    );
    let mut out = Vec::new();
    for range in split_clauses(&chars) {
        if contains_any(&folded[range.0..range.1], &verb_needles) {
            continue;
        }
        let clause = slice(&chars, range);
        if let Some(parts) = parse_cue_clause(&clause, lex) {
            let landmark_id = resolve_mention(&parts.mention, env);
            out.push(ExtractedCue {
                relation: parts.relation,
                mention: parts.mention,
                landmark_id,
                span: range,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::builtin_environment;
    use crate::lexicon::builtin_lexicon;
    use Relation::*;

    fn spec(
        anchor: &str,
        cues: &[(Relation, &str)],
        variation: Variation,
        language: &str,
        seed: u64,
    ) -> UtteranceSpec {
        UtteranceSpec {
            anchor_landmark_id: anchor.to_string(),
            cues: cues
                .iter()
                .map(|(r, id)| (*r, id.to_string()))
                .collect(),
            variation,
            language: language.to_string(),
            code_switch: false,
            seed,
        }
    }

    #[test]
    fn renders_single_cue_sentence() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        let s = spec(
            "Gongguan_MRT_Exit_2",
            &[(Right, "restaurant_5")],
            Variation::None,
            "en",
            1,
        );
        let rendered = render(&s, &env, &lex).unwrap();
        assert_eq!(
            rendered.text,
            "I am at Gongguan MRT Exit 2, and restaurant 5 is on my right"
        );
        assert_eq!(rendered.cues[0].span, (33, 45));
        let surface: String = rendered.text.chars().skip(33).take(12).collect();
        assert_eq!(surface, "restaurant 5");
    }

    #[test]
    fn renders_four_cue_sentence_in_canonical_order() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        let s = spec(
            "Gongguan_MRT_Exit_1",
            &[
                (Front, "restaurant_4"),
                (Back, "Gongguan_MRT_Exit_2"),
                (Left, "bus_stop_1"),
                (Right, "bike_rental_station_3"),
            ],
            Variation::None,
            "en",
            1,
        );
        let rendered = render(&s, &env, &lex).unwrap();
        assert_eq!(
            rendered.text,
            "I am at Gongguan MRT Exit 1, Restaurant 4 is in front of me, Gongguan MRT Exit 2 is behind me, Bus Stop 1 is on my left, and Bike Rental Station 3 is on my right"
        );
    }

    #[test]
    fn renders_zh_sentence() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("zh-TW").unwrap();
        let s = spec(
            "Gongguan_MRT_Exit_2",
            &[(Right, "restaurant_5")],
            Variation::None,
            "zh-TW",
            1,
        );
        let rendered = render(&s, &env, &lex).unwrap();
        assert_eq!(rendered.text, "我在公館捷運站2號出口，餐廳5在我右邊");
    }

    #[test]
    fn render_is_deterministic() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        let s = spec(
            "security_office",
            &[(Back, "dormitory_6"), (Front, "Small_Plaza_2")],
            Variation::Synonym,
            "en",
            99,
        );
        assert_eq!(render(&s, &env, &lex).unwrap(), render(&s, &env, &lex).unwrap());
    }

    #[test]
    fn render_rejects_empty_and_duplicate_cues() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        let empty = spec("security_office", &[], Variation::None, "en", 1);
        assert_eq!(render(&empty, &env, &lex), Err(RenderError::EmptyCues));
        let dup = spec(
            "security_office",
            &[(Back, "dormitory_6"), (Back, "Small_Plaza_2")],
            Variation::None,
            "en",
            1,
        );
        assert_eq!(
            render(&dup, &env, &lex),
            Err(RenderError::DuplicateRelation(Back))
        );
    }

    #[test]
    fn render_reports_unknown_ids() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        let s = spec("no_such_place", &[(Back, "dormitory_6")], Variation::None, "en", 1);
        assert_eq!(
            render(&s, &env, &lex),
            Err(RenderError::UnknownLandmark("no_such_place".into()))
        );
    }

    #[test]
    fn referential_ambiguity_breaks_text_resolvability() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        let s = spec(
            "security_office",
            &[(Back, "dormitory_6")],
            Variation::ReferentialAmbiguity,
            "en",
            5,
        );
        let rendered = render(&s, &env, &lex).unwrap();
        assert_eq!(
            rendered.text,
            "I am at this building, and that dormitory is behind me"
        );
        let extracted = extract_relations(&rendered.text, &lex, &env);
        assert_eq!(extracted.len(), 1);
        assert_eq!(extracted[0].relation, Back);
        assert_eq!(extracted[0].landmark_id, None);
        assert_eq!(extracted[0].mention, "that dormitory");
    }

    #[test]
    fn incomplete_variant_matches_expected_pattern() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        let canonical = "I am at security office, and Dormitory 6 is behind me";
        let varied = apply_variation(canonical, Variation::Incomplete, &lex, 7);
        assert_eq!(
            varied,
            "I am at... um... security office, Dormitory 6 should be behind"
        );
        let extracted = extract_relations(&varied, &lex, &env);
        assert_eq!(extracted.len(), 1);
        assert_eq!(extracted[0].relation, Back);
        assert_eq!(extracted[0].landmark_id.as_deref(), Some("dormitory_6"));
    }

    #[test]
    fn synonym_with_empty_table_is_identity() {
        let mut lex = builtin_lexicon("en").unwrap();
        lex.synonym_table.clear();
        let text = "I am at security office, and Dormitory 6 is behind me";
        assert_eq!(apply_variation(text, Variation::Synonym, &lex, 3), text);
    }

    #[test]
    fn word_order_preserves_cue_multiset() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        let s = spec(
            "Gongguan_MRT_Exit_1",
            &[
                (Front, "restaurant_4"),
                (Back, "Gongguan_MRT_Exit_2"),
                (Left, "bus_stop_1"),
            ],
            Variation::None,
            "en",
            1,
        );
        let canonical = render(&s, &env, &lex).unwrap().text;
        let varied = apply_variation(&canonical, Variation::WordOrder, &lex, 21);
        let mut a: Vec<_> = extract_relations(&canonical, &lex, &env)
            .into_iter()
            .map(|c| (c.relation, c.landmark_id))
            .collect();
        let mut b: Vec<_> = extract_relations(&varied, &lex, &env)
            .into_iter()
            .map(|c| (c.relation, c.landmark_id))
            .collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn extracts_four_relations_in_surface_order() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        let text = "I am at Gongguan MRT Exit 1, Restaurant 4 is in front of me, Gongguan MRT Exit 2 is behind me, Bus Stop 1 is on my left, and Bike Rental Station 3 is on my right.";
        let cues = extract_relations(text, &lex, &env);
        let got: Vec<(Relation, Option<&str>)> = cues
            .iter()
            .map(|c| (c.relation, c.landmark_id.as_deref()))
            .collect();
        assert_eq!(
            got,
            vec![
                (Front, Some("restaurant_4")),
                (Back, Some("Gongguan_MRT_Exit_2")),
                (Left, Some("bus_stop_1")),
                (Right, Some("bike_rental_station_3")),
            ]
        );
    }

    #[test]
    fn extraction_returns_unresolved_for_corrupted_mentions() {
        let env = builtin_environment("taipei_station").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        let text = "I am at park 4, yin-liu-dian 4 is in front of me, 981 is behind me, nian-bao-dian 3 is on my left, and 982 is on my right";
        let cues = extract_relations(text, &lex, &env);
        assert_eq!(cues.len(), 4);
        assert_eq!(cues[0].relation, Front);
        assert_eq!(cues[0].landmark_id, None);
        assert_eq!(cues[0].mention, "yin-liu-dian 4");
        assert_eq!(cues[1].mention, "981");
    }

    #[test]
    fn extraction_without_relation_phrases_is_empty() {
        let env = builtin_environment("gongguan").unwrap();
        let lex = builtin_lexicon("en").unwrap();
        assert!(extract_relations("the weather is nice today", &lex, &env).is_empty());
    }

    #[test]
    fn extraction_handles_code_switched_mentions() {
        let env = builtin_environment("taipei_station").unwrap();
        let lex = builtin_lexicon("zh-TW").unwrap();
        let text = "我在台北車站S2出口，restaurant 5在我前面";
        let cues = extract_relations(text, &lex, &env);
        assert_eq!(cues.len(), 1);
        assert_eq!(cues[0].relation, Front);
        assert_eq!(cues[0].landmark_id.as_deref(), Some("restaurant_5"));
    }

    #[test]
    fn round_trip_canonical_renders_both_languages() {
        for env_name in ["gongguan", "taipei_station"] {
            let env = builtin_environment(env_name).unwrap();
            for lex_tag in ["en", "zh-TW"] {
                let lex = builtin_lexicon(lex_tag).unwrap();
                let anchors: Vec<&str> =
                    env.landmarks.iter().map(|lm| lm.id.as_str()).collect();
                for anchor in anchors {
                    let lm = env.landmark(anchor).unwrap();
                    let neighbors = env.neighbors(lm.position).unwrap();
                    if neighbors.is_empty() {
                        continue;
                    }
                    let cues: Vec<(Relation, String)> = neighbors
                        .values()
                        .zip(Relation::ALL)
                        .map(|(n, r)| (r, n.id.clone()))
                        .collect();
                    let s = UtteranceSpec {
                        anchor_landmark_id: anchor.to_string(),
                        cues: cues.clone(),
                        variation: Variation::None,
                        language: lex_tag.to_string(),
                        code_switch: false,
                        seed: 3,
                    };
                    let rendered = render(&s, &env, &lex).unwrap();
                    let extracted = extract_relations(&rendered.text, &lex, &env);
                    let mut want: Vec<(Relation, Option<String>)> = cues
                        .iter()
                        .map(|(r, id)| (*r, Some(id.clone())))
                        .collect();
                    let mut got: Vec<(Relation, Option<String>)> = extracted
                        .into_iter()
                        .map(|c| (c.relation, c.landmark_id))
                        .collect();
                    want.sort();
                    got.sort();
                    assert_eq!(got, want, "{env_name}/{lex_tag}/{anchor}");
                }
            }
        }
    }
}
