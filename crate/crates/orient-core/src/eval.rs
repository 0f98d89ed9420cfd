//! Trace evaluation: parse model output against the three-step schema,
//! score it against gold instances, classify residual errors, and aggregate
//! reports.
//!
//! Correctness (drives accuracy) compares the final answer to gold only. A
//! step-3 match additionally requires the trace to be internally consistent:
//! the final answer must follow from the trace's own stated directions under
//! the mapping rules, so a lucky final answer atop contradictory reasoning
//! does not count as a matched step.

use crate::dataset::Instance;
use crate::grid::GridEnvironment;
use crate::lexicon::Lexicon;
use crate::noise::Severity;
use crate::oracle::{infer_facing, Relation};
use crate::textscan;
use crate::trace::{parse_trace, FormatError, ReasoningTrace};
use crate::utterance::{extract_relations, ExtractedCue};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Residual error categories.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    DirectionUnderstanding,
    RelationExtraction,
    AsrMisrecognition,
}

impl std::fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let token = match self {
            ErrorCategory::DirectionUnderstanding => "direction_understanding",
            ErrorCategory::RelationExtraction => "relation_extraction",
            ErrorCategory::AsrMisrecognition => "asr_misrecognition",
        };
        f.write_str(token)
    }
}

/// Per-instance scoring result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance_id: String,
    pub parse_ok: bool,
    pub correct: bool,
    pub step_matches: [bool; 3],
    pub reasoning_quality: f64,
    pub taxonomy: BTreeSet<ErrorCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format_error: Option<String>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no scores to aggregate")]
    Empty,
    #[error("scores ({scores}) and instances ({instances}) differ in length")]
    LengthMismatch { scores: usize, instances: usize },
    #[error("score {0} does not align with instance {1}")]
    Misaligned(String, String),
    #[error("unknown environment {0}")]
    UnknownEnvironment(String),
    #[error("no lexicon available for language {0}")]
    UnknownLexicon(String),
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("output references unknown instance id {0}")]
    UnknownInstanceId(String),
}

/// A model output record as read from an outputs file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub instance_id: String,
    pub output_text: String,
}

/// Parse line-delimited output records; errors carry the 1-based line.
pub fn parse_outputs_jsonl(text: &str) -> Result<Vec<OutputRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: OutputRecord =
            serde_json::from_str(line).map_err(|e| EvalError::MalformedRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
        out.push(record);
    }
    Ok(out)
}

/// Scoring context: environments and lexicons the traces may reference.
pub struct Scorer<'a> {
    environments: BTreeMap<&'a str, &'a GridEnvironment>,
    /// Per environment: folded display name -> landmark id.
    name_maps: BTreeMap<&'a str, BTreeMap<String, String>>,
    lexicons: &'a [Lexicon],
}

impl<'a> Scorer<'a> {
    pub fn new(environments: &'a [GridEnvironment], lexicons: &'a [Lexicon]) -> Self {
        let mut name_maps = BTreeMap::new();
        for env in environments {
            let mut map = BTreeMap::new();
            for lm in &env.landmarks {
                for name in lm.display_names.values() {
                    map.insert(
                        textscan::fold_chars(name).into_iter().collect::<String>(),
                        lm.id.clone(),
                    );
                }
            }
            name_maps.insert(env.id.as_str(), map);
        }
        Scorer {
            environments: environments.iter().map(|e| (e.id.as_str(), e)).collect(),
            name_maps,
            lexicons,
        }
    }

    fn resolve_cached(&self, mention: &str, env_id: &str) -> Option<String> {
        let map = self.name_maps.get(env_id)?;
        let cleaned = mention
            .trim()
            .trim_end_matches(['.', '。', ',', '，'])
            .trim();
        if cleaned.is_empty() {
            return None;
        }
        let folded: String = textscan::fold_chars(cleaned).into_iter().collect();
        if let Some(id) = map.get(&folded) {
            return Some(id.clone());
        }
        cleaned
            .strip_prefix("the ")
            .or_else(|| cleaned.strip_prefix("The "))
            .and_then(|rest| {
                let folded: String = textscan::fold_chars(rest).into_iter().collect();
                map.get(&folded).cloned()
            })
    }

    fn lexicon_for(&self, language: &str) -> Result<&'a Lexicon, EvalError> {
        self.lexicons
            .iter()
            .find(|l| l.language == language)
            .or_else(|| self.lexicons.first())
            .ok_or_else(|| EvalError::UnknownLexicon(language.to_string()))
    }

    fn environment_for(&self, id: &str) -> Result<&'a GridEnvironment, EvalError> {
        self.environments
            .get(id)
            .copied()
            .ok_or_else(|| EvalError::UnknownEnvironment(id.to_string()))
    }

    /// Parse output text with the instance's lexicon, falling back to the
    /// other shipped lexicons.
    fn parse_any(
        &self,
        gold: &Instance,
        output_text: &str,
    ) -> Result<ReasoningTrace, FormatError> {
        let preferred = self
            .lexicons
            .iter()
            .position(|l| l.language == gold.language)
            .unwrap_or(0);
        let mut first_error = None;
        for (i, lex) in std::iter::once(&self.lexicons[preferred])
            .chain(
                self.lexicons
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != preferred)
                    .map(|(_, l)| l),
            )
            .enumerate()
        {
            match parse_trace(output_text, lex) {
                Ok(trace) => return Ok(trace),
                Err(e) if i == 0 => first_error = Some(e),
                Err(_) => {}
            }
        }
        Err(first_error.expect("at least one lexicon"))
    }

    /// Fill `landmark_id` on every trace mention resolvable in the
    /// instance's environment.
    pub fn resolve_trace(
        &self,
        trace: &ReasoningTrace,
        env: &GridEnvironment,
    ) -> ReasoningTrace {
        let mut resolved = trace.clone();
        for e in &mut resolved.step1 {
            e.landmark_id = self.resolve_cached(&e.mention, &env.id);
        }
        for e in &mut resolved.step2 {
            e.landmark_id = self.resolve_cached(&e.mention, &env.id);
        }
        for e in &mut resolved.step3 {
            e.landmark_id = self.resolve_cached(&e.mention, &env.id);
        }
        resolved
    }

    /// Score one model output against its gold instance. Parse failures fold
    /// into the score as a format error with zero reasoning quality.
    pub fn score_instance(
        &self,
        gold: &Instance,
        output_text: &str,
    ) -> Result<InstanceScore, EvalError> {
        let env = self.environment_for(&gold.env_id)?;
        let lex = self.lexicon_for(&gold.language)?;
        let trace = match self.parse_any(gold, output_text) {
            Ok(trace) => self.resolve_trace(&trace, env),
            Err(e) => {
                return Ok(InstanceScore {
                    instance_id: gold.id.clone(),
                    parse_ok: false,
                    correct: false,
                    step_matches: [false; 3],
                    reasoning_quality: 0.0,
                    taxonomy: BTreeSet::new(),
                    format_error: Some(e.to_string()),
                });
            }
        };

        let analysis = Analysis::new(gold, &trace, lex, env);
        let step_matches = [
            analysis.step1_match,
            analysis.step2_match,
            analysis.step3_match,
        ];
        let correct = trace.final_answer == gold.facing;
        let matched = step_matches.iter().filter(|&&m| m).count();
        let taxonomy = if correct {
            BTreeSet::new()
        } else {
            analysis.taxonomy()
        };
        Ok(InstanceScore {
            instance_id: gold.id.clone(),
            parse_ok: true,
            correct,
            step_matches,
            reasoning_quality: matched as f64 / 3.0,
            taxonomy,
            format_error: None,
        })
    }

    /// Classify residual error categories for an incorrect or unparsed
    /// output. Correct traces yield the empty set.
    pub fn classify_taxonomy(
        &self,
        gold: &Instance,
        trace: &ReasoningTrace,
    ) -> Result<BTreeSet<ErrorCategory>, EvalError> {
        let env = self.environment_for(&gold.env_id)?;
        let lex = self.lexicon_for(&gold.language)?;
        let resolved = self.resolve_trace(trace, env);
        if resolved.final_answer == gold.facing {
            return Ok(BTreeSet::new());
        }
        Ok(Analysis::new(gold, &resolved, lex, env).taxonomy())
    }
}

/// Shared per-instance analysis over a resolved trace.
struct Analysis<'a> {
    gold: &'a Instance,
    trace: &'a ReasoningTrace,
    step1_match: bool,
    step2_match: bool,
    step3_match: bool,
    /// Gold cue indices whose step-1 pairing is wrong.
    mismatched_step1: Vec<usize>,
    /// Gold cue indices without a correct step-2 direction.
    mismatched_step2: Vec<usize>,
    /// Gold cue indices whose step-3 entry breaks the mapping rules.
    mismatched_step3: Vec<usize>,
    /// Gold cue landmark ids whose transcript surface differs from the
    /// clean utterance.
    corrupted_ids: BTreeSet<String>,
    /// Relations as faithfully extractable from the transcript.
    faithful: Vec<ExtractedCue>,
}

fn fold(s: &str) -> Vec<char> {
    textscan::fold_chars(s.trim())
}

impl<'a> Analysis<'a> {
    fn new(
        gold: &'a Instance,
        trace: &'a ReasoningTrace,
        lex: &Lexicon,
        env: &GridEnvironment,
    ) -> Self {
        let faithful = extract_relations(&gold.transcript, lex, env);
        let transcript_folded = fold(&gold.transcript);

        // A landmark counts as ASR-corrupted when its clean surface is no
        // longer present in the transcript.
        let mut corrupted_ids = BTreeSet::new();
        for entry in &gold.gold_trace.step1 {
            if let Some(id) = &entry.landmark_id {
                let surface = fold(&entry.mention);
                if textscan::find(&transcript_folded, &surface).is_none() {
                    corrupted_ids.insert(id.clone());
                }
            }
        }

        let faithful_mention_for = |relation: Relation| -> Option<&str> {
            faithful
                .iter()
                .find(|c| c.relation == relation)
                .map(|c| c.mention.as_str())
        };

        // Step 1: pair trace entries to gold cues by relation (relations
        // are distinct within an instance). A mention matches when it
        // resolves to the gold id or repeats the transcript's surface for
        // that relation verbatim.
        let mut mismatched_step1 = Vec::new();
        for (idx, cue) in gold.cues.iter().enumerate() {
            let entries: Vec<_> = trace
                .step1
                .iter()
                .filter(|e| e.relation == cue.relation)
                .collect();
            let ok = entries.len() == 1 && {
                let entry = entries[0];
                entry.landmark_id.as_deref() == Some(cue.landmark_id.as_str())
                    || faithful_mention_for(cue.relation)
                        .map(|m| fold(m) == fold(&entry.mention))
                        .unwrap_or(false)
            };
            if !ok {
                mismatched_step1.push(idx);
            }
        }
        // Strict step-1 match: (relation, resolved id) multisets equal.
        let mut gold_pairs: Vec<(Relation, Option<&str>)> = gold
            .cues
            .iter()
            .map(|c| (c.relation, Some(c.landmark_id.as_str())))
            .collect();
        let mut trace_pairs: Vec<(Relation, Option<&str>)> = trace
            .step1
            .iter()
            .map(|e| (e.relation, e.landmark_id.as_deref()))
            .collect();
        gold_pairs.sort();
        trace_pairs.sort();
        let step1_match = gold_pairs == trace_pairs;

        // Step 2: every gold landmark's stated direction equals its gold
        // absolute direction.
        let join_step2 = |cue_idx: usize| -> Vec<&crate::trace::Step2Entry> {
            let cue = &gold.cues[cue_idx];
            let by_id: Vec<_> = trace
                .step2
                .iter()
                .filter(|e| e.landmark_id.as_deref() == Some(cue.landmark_id.as_str()))
                .collect();
            if !by_id.is_empty() {
                return by_id;
            }
            if let Some(m) = faithful_mention_for(cue.relation) {
                let by_surface: Vec<_> = trace
                    .step2
                    .iter()
                    .filter(|e| fold(&e.mention) == fold(m))
                    .collect();
                if !by_surface.is_empty() {
                    return by_surface;
                }
            }
            // Positional fallback when the trace has one entry per cue.
            if trace.step2.len() == gold.cues.len() {
                return vec![&trace.step2[cue_idx]];
            }
            Vec::new()
        };
        let mut mismatched_step2 = Vec::new();
        for idx in 0..gold.cues.len() {
            let entries = join_step2(idx);
            let ok = !entries.is_empty()
                && entries.iter().all(|e| e.direction == gold.cues[idx].abs_dir);
            if !ok {
                mismatched_step2.push(idx);
            }
        }
        let step2_match = mismatched_step2.is_empty();

        // Step 3: final answer matches gold and every inference line is
        // consistent with the mapping rules applied to the trace's own
        // stated directions.
        let step2_direction_for = |entry_mention: &str, landmark_id: &Option<String>| {
            trace
                .step2
                .iter()
                .find(|s2| {
                    (landmark_id.is_some() && s2.landmark_id == *landmark_id)
                        || fold(&s2.mention) == fold(entry_mention)
                })
                .map(|s2| s2.direction)
        };
        let mut mismatched_step3 = Vec::new();
        let mut all_consistent = true;
        for entry in &trace.step3 {
            let basis = step2_direction_for(&entry.mention, &entry.landmark_id)
                .unwrap_or(entry.direction);
            if infer_facing(basis, entry.relation) != trace.final_answer {
                all_consistent = false;
                if let Some(idx) = gold.cues.iter().position(|c| {
                    Some(c.landmark_id.as_str()) == entry.landmark_id.as_deref()
                }) {
                    mismatched_step3.push(idx);
                }
            }
        }
        let step3_match =
            trace.final_answer == gold.facing && all_consistent && !trace.step3.is_empty();

        Analysis {
            gold,
            trace,
            step1_match,
            step2_match,
            step3_match,
            mismatched_step1,
            mismatched_step2,
            mismatched_step3,
            corrupted_ids,
            faithful,
        }
    }

    fn taxonomy(&self) -> BTreeSet<ErrorCategory> {
        let mut labels = BTreeSet::new();

        let gold_rels = sorted_relations(self.gold.cues.iter().map(|c| c.relation));
        let trace_rels = sorted_relations(self.trace.step1.iter().map(|e| e.relation));
        let faithful_rels = sorted_relations(self.faithful.iter().map(|c| c.relation));

        // Relation-level errors: wrong relation multiset. Attributed to the
        // model when the transcript still carried the gold relations, and to
        // ASR when it did not.
        if trace_rels != gold_rels {
            if faithful_rels == gold_rels {
                labels.insert(ErrorCategory::RelationExtraction);
            } else {
                labels.insert(ErrorCategory::AsrMisrecognition);
            }
        }

        // Mention-level errors: attributed per gold cue by whether its
        // surface survived transcription.
        for &idx in &self.mismatched_step1 {
            let id = &self.gold.cues[idx].landmark_id;
            if self.corrupted_ids.contains(id) {
                labels.insert(ErrorCategory::AsrMisrecognition);
            } else {
                labels.insert(ErrorCategory::RelationExtraction);
            }
        }

        // Corrupted landmarks participating in later mismatched steps.
        for idx in 0..self.gold.cues.len() {
            let id = &self.gold.cues[idx].landmark_id;
            if self.corrupted_ids.contains(id)
                && (self.mismatched_step2.contains(&idx) || self.mismatched_step3.contains(&idx))
            {
                labels.insert(ErrorCategory::AsrMisrecognition);
            }
        }

        // Rule misapplication: extraction and coordinates were right but the
        // mapping step broke.
        if self.step1_match && self.step2_match && !self.step3_match {
            labels.insert(ErrorCategory::DirectionUnderstanding);
        }

        labels
    }
}

fn sorted_relations(rels: impl Iterator<Item = Relation>) -> Vec<Relation> {
    let mut v: Vec<Relation> = rels.collect();
    v.sort();
    v
}

/// Accuracy within one stratum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumStats {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Aggregate evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub format_errors: usize,
    pub format_error_rate: f64,
    pub mean_reasoning_quality: f64,
    /// Instances carrying each label (labels may co-occur).
    pub taxonomy_overlapping: BTreeMap<ErrorCategory, usize>,
    /// Instances carrying exactly one label.
    pub taxonomy_exclusive: BTreeMap<ErrorCategory, usize>,
    pub by_severity: BTreeMap<Severity, StratumStats>,
    pub by_subset: BTreeMap<String, StratumStats>,
    pub per_instance: Vec<InstanceScore>,
}

/// Aggregate per-instance scores; `scores[i]` must correspond to
/// `instances[i]`.
pub fn aggregate(
    scores: &[InstanceScore],
    instances: &[Instance],
) -> Result<EvaluationReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    if scores.len() != instances.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            instances: instances.len(),
        });
    }
    for (score, instance) in scores.iter().zip(instances) {
        if score.instance_id != instance.id {
            return Err(EvalError::Misaligned(
                score.instance_id.clone(),
                instance.id.clone(),
            ));
        }
    }
    let total = scores.len();
    let correct = scores.iter().filter(|s| s.correct).count();
    let format_errors = scores.iter().filter(|s| !s.parse_ok).count();
    let mean_reasoning_quality =
        scores.iter().map(|s| s.reasoning_quality).sum::<f64>() / total as f64;

    let mut taxonomy_overlapping = BTreeMap::new();
    let mut taxonomy_exclusive = BTreeMap::new();
    for score in scores {
        for &label in &score.taxonomy {
            *taxonomy_overlapping.entry(label).or_insert(0) += 1;
        }
        if score.taxonomy.len() == 1 {
            let label = *score.taxonomy.iter().next().expect("len 1");
            *taxonomy_exclusive.entry(label).or_insert(0) += 1;
        }
    }

    let mut by_severity: BTreeMap<Severity, (usize, usize)> = BTreeMap::new();
    let mut by_subset: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (score, instance) in scores.iter().zip(instances) {
        let sev = by_severity.entry(instance.severity).or_insert((0, 0));
        sev.0 += 1;
        sev.1 += usize::from(score.correct);
        let sub = by_subset
            .entry(instance.subset.to_string())
            .or_insert((0, 0));
        sub.0 += 1;
        sub.1 += usize::from(score.correct);
    }
    let stratify = |(total, correct): (usize, usize)| StratumStats {
        total,
        correct,
        accuracy: correct as f64 / total as f64,
    };

    Ok(EvaluationReport {
        total,
        correct,
        accuracy: correct as f64 / total as f64,
        format_errors,
        format_error_rate: format_errors as f64 / total as f64,
        mean_reasoning_quality,
        taxonomy_overlapping,
        taxonomy_exclusive,
        by_severity: by_severity.into_iter().map(|(k, v)| (k, stratify(v))).collect(),
        by_subset: by_subset.into_iter().map(|(k, v)| (k, stratify(v))).collect(),
        per_instance: scores.to_vec(),
    })
}

impl EvaluationReport {
    /// Human-readable summary table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("instances           {}\n", self.total));
        out.push_str(&format!(
            "accuracy            {:.1}%  ({}/{})\n",
            self.accuracy * 100.0,
            self.correct,
            self.total
        ));
        out.push_str(&format!(
            "format error rate   {:.1}%  ({}/{})\n",
            self.format_error_rate * 100.0,
            self.format_errors,
            self.total
        ));
        out.push_str(&format!(
            "reasoning quality   {:.3}\n",
            self.mean_reasoning_quality
        ));
        if !self.taxonomy_overlapping.is_empty() {
            out.push_str("taxonomy (overlapping):\n");
            for (label, count) in &self.taxonomy_overlapping {
                out.push_str(&format!("  {label:<24} {count}\n"));
            }
            out.push_str("taxonomy (exclusive):\n");
            for (label, count) in &self.taxonomy_exclusive {
                out.push_str(&format!("  {label:<24} {count}\n"));
            }
        }
        out.push_str("accuracy by severity:\n");
        for (severity, stats) in &self.by_severity {
            out.push_str(&format!(
                "  {severity:<10} {:>5}  {:.1}%\n",
                stats.total,
                stats.accuracy * 100.0
            ));
        }
        out.push_str("accuracy by subset:\n");
        for (subset, stats) in &self.by_subset {
            out.push_str(&format!(
                "  {subset:<24} {:>5}  {:.1}%\n",
                stats.total,
                stats.accuracy * 100.0
            ));
        }
        out
    }
}
