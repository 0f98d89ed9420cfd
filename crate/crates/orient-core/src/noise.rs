//! Text-level simulation of the TTS-to-ASR loop: character error rate,
//! CER-targeted corruption, and severity classification.
//!
//! Corruption is deterministic given the config seed. Whole-mention
//! confusions (e.g. a drink-shop name heard as a sound-alike) come from the
//! lexicon's confusion table; remaining edits are character-level
//! substitutions, insertions, and deletions placed outside relation phrases
//! when protection is on.

use crate::lexicon::Lexicon;
use crate::seed::substream;
use crate::textscan;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("reference text is empty")]
    EmptyReference,
    #[error("invalid corruption config: {0}")]
    InvalidConfig(String),
    #[error("invalid severity thresholds: {0}")]
    InvalidThresholds(String),
}

/// Unit-cost edit distance over chars.
pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j + 1] + 1).min(curr[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Character error rate: edit distance divided by reference length.
///
/// Normalization is by the reference, so swapping the arguments changes the
/// value unless the lengths are equal; the rate can exceed 1.0 for
/// hypotheses longer than the reference.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64, NoiseError> {
    let ref_chars: Vec<char> = reference.chars().collect();
    if ref_chars.is_empty() {
        return Err(NoiseError::EmptyReference);
    }
    let hyp_chars: Vec<char> = hypothesis.chars().collect();
    Ok(levenshtein(&ref_chars, &hyp_chars) as f64 / ref_chars.len() as f64)
}

/// Transcript severity bucket derived from CER.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Perfect,
    Minor,
    Moderate,
    Major,
    Severe,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Perfect,
        Severity::Minor,
        Severity::Moderate,
        Severity::Major,
        Severity::Severe,
    ];
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let token = match self {
            Severity::Perfect => "perfect",
            Severity::Minor => "minor",
            Severity::Moderate => "moderate",
            Severity::Major => "major",
            Severity::Severe => "severe",
        };
        f.write_str(token)
    }
}

/// CER cut points for the non-perfect buckets; the perfect bucket is exactly
/// CER = 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeverityThresholds {
    pub minor: f64,
    pub moderate: f64,
    pub major: f64,
}

impl Default for SeverityThresholds {
    fn default() -> Self {
        SeverityThresholds {
            minor: 0.05,
            moderate: 0.15,
            major: 0.30,
        }
    }
}

impl SeverityThresholds {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.minor > 0.0 && self.minor < self.moderate && self.moderate < self.major) {
            return Err(NoiseError::InvalidThresholds(format!(
                "cut points must be strictly increasing and positive, got {} / {} / {}",
                self.minor, self.moderate, self.major
            )));
        }
        if self.major > 1.0 {
            return Err(NoiseError::InvalidThresholds(format!(
                "major cut point {} exceeds 1.0",
                self.major
            )));
        }
        Ok(())
    }

    /// Bucket of a CER value; monotone in the value.
    pub fn bucket(&self, value: f64) -> Severity {
        if value == 0.0 {
            Severity::Perfect
        } else if value <= self.minor {
            Severity::Minor
        } else if value <= self.moderate {
            Severity::Moderate
        } else if value <= self.major {
            Severity::Major
        } else {
            Severity::Severe
        }
    }

    /// Inclusive edit-count range realizing `bucket` on a reference of `len`
    /// chars, or `None` when the bucket is unreachable at that length
    /// (e.g. CER ≤ 5% on a 13-char string).
    pub fn edit_range(&self, bucket: Severity, len: usize) -> Option<(usize, usize)> {
        if bucket == Severity::Perfect {
            return Some((0, 0));
        }
        let (lo, hi) = match bucket {
            Severity::Perfect => unreachable!(),
            Severity::Minor => (0.0, self.minor),
            Severity::Moderate => (self.minor, self.moderate),
            Severity::Major => (self.moderate, self.major),
            Severity::Severe => (self.major, (self.major + 0.15).min(0.9)),
        };
        let len_f = len as f64;
        let d_min = ((lo * len_f + 1e-9).floor() as usize + 1).max(1);
        let d_max = (((hi * len_f) + 1e-9).floor() as usize).min(len);
        if d_max < d_min {
            None
        } else {
            Some((d_min, d_max))
        }
    }
}

/// Bucket a transcript against a reference.
pub fn classify_severity(
    reference: &str,
    hypothesis: &str,
    thresholds: &SeverityThresholds,
) -> Result<Severity, NoiseError> {
    thresholds.validate()?;
    Ok(thresholds.bucket(cer(reference, hypothesis)?))
}

/// Relative weights of the three character edit kinds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditMix {
    pub substitute: f64,
    pub insert: f64,
    pub delete: f64,
}

impl Default for EditMix {
    fn default() -> Self {
        EditMix {
            substitute: 0.6,
            insert: 0.2,
            delete: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionConfig {
    pub target_cer: f64,
    pub edit_mix: EditMix,
    /// Probability that a corrupted mention uses its confusion-table entry
    /// (and that a substituted character uses its variant) instead of a
    /// random edit.
    pub confusion_bias: f64,
    pub protect_relation_phrases: bool,
    /// Probability that each landmark mention with a confusion entry gets
    /// considered for whole-mention replacement.
    pub landmark_corruption_rate: f64,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            target_cer: 0.10,
            edit_mix: EditMix::default(),
            confusion_bias: 0.7,
            protect_relation_phrases: true,
            landmark_corruption_rate: 0.35,
            seed: 0,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(0.0..1.0).contains(&self.target_cer) {
            return Err(NoiseError::InvalidConfig(format!(
                "target_cer {} outside [0, 1)",
                self.target_cer
            )));
        }
        let m = &self.edit_mix;
        if m.substitute < 0.0 || m.insert < 0.0 || m.delete < 0.0 {
            return Err(NoiseError::InvalidConfig("negative edit weight".into()));
        }
        if m.substitute + m.insert + m.delete <= 0.0 {
            return Err(NoiseError::InvalidConfig("all edit weights zero".into()));
        }
        if !(0.0..=1.0).contains(&self.confusion_bias)
            || !(0.0..=1.0).contains(&self.landmark_corruption_rate)
        {
            return Err(NoiseError::InvalidConfig(
                "confusion_bias and landmark_corruption_rate must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Per-sample tolerance on achieved CER for references of at least 20 chars.
pub const ACHIEVED_CER_TOLERANCE: f64 = 0.02;
/// Minimum reference length at which the tolerance is guaranteed.
pub const TOLERANCE_MIN_LEN: usize = 20;

fn protected_mask(chars: &[char], lex: &Lexicon, protect: bool) -> Vec<bool> {
    let mut mask = vec![false; chars.len()];
    if !protect {
        return mask;
    }
    let needles = textscan::make_needles(
        lex.phrases_by_length()
            .into_iter()
            .map(|(p, _)| (p.to_string(), ())),
    );
    let folded: Vec<char> = chars.iter().map(|&c| textscan::fold_char(c)).collect();
    for (start, end, _) in textscan::scan(&folded, &needles) {
        for flag in &mut mask[start..end] {
            *flag = true;
        }
    }
    mask
}

fn pool_chars(lex: &Lexicon) -> Vec<char> {
    let pool: Vec<char> = lex.noise_char_pool.chars().collect();
    if pool.is_empty() {
        "abcdefghijklmnopqrstuvwxyz".chars().collect()
    } else {
        pool
    }
}

fn substitution_char(
    original: char,
    lex: &Lexicon,
    config: &CorruptionConfig,
    pool: &[char],
    rng: &mut ChaCha8Rng,
) -> char {
    if config.confusion_bias > 0.0 && rng.random_bool(config.confusion_bias) {
        if let Some(variants) = lex.confusion_table.get(&original.to_string()) {
            if let Some(v) = variants
                .get(rng.random_range(0..variants.len()))
                .and_then(|s| s.chars().next())
            {
                if v != original {
                    return v;
                }
            }
        }
    }
    for _ in 0..8 {
        let c = pool[rng.random_range(0..pool.len())];
        if c != original {
            return c;
        }
    }
    if original == 'x' {
        'y'
    } else {
        'x'
    }
}

fn apply_char_edits(
    base: &[char],
    count: usize,
    lex: &Lexicon,
    config: &CorruptionConfig,
    extra_protected: &[(usize, usize)],
    rng: &mut ChaCha8Rng,
) -> Vec<char> {
    let mut mask = protected_mask(base, lex, config.protect_relation_phrases);
    for &(start, end) in extra_protected {
        for flag in &mut mask[start.min(base.len())..end.min(base.len())] {
            *flag = true;
        }
    }
    let mut editable: Vec<usize> = (0..base.len()).filter(|&i| !mask[i]).collect();
    if editable.len() < count {
        editable = (0..base.len()).collect();
    }
    let k = count.min(editable.len());
    let mut positions: Vec<usize> = index::sample(rng, editable.len(), k)
        .into_iter()
        .map(|i| editable[i])
        .collect();
    positions.sort_unstable_by(|a, b| b.cmp(a));
    let pool = pool_chars(lex);
    let total = config.edit_mix.substitute + config.edit_mix.insert + config.edit_mix.delete;
    let mut out = base.to_vec();
    for pos in positions {
        let roll = rng.random_range(0.0..total);
        if roll < config.edit_mix.substitute {
            out[pos] = substitution_char(out[pos], lex, config, &pool, rng);
        } else if roll < config.edit_mix.substitute + config.edit_mix.insert {
            let c = pool[rng.random_range(0..pool.len())];
            out.insert(pos, c);
        } else if out.len() > 1 {
            out.remove(pos);
        }
    }
    out
}

/// Corrupt `text` towards the configured CER. Returns the transcript and the
/// achieved CER (always the independently recomputed value).
///
/// For references of at least [`TOLERANCE_MIN_LEN`] chars the achieved CER
/// lands within [`ACHIEVED_CER_TOLERANCE`] of the target; shorter strings
/// are best effort.
pub fn corrupt(
    text: &str,
    config: &CorruptionConfig,
    lex: &Lexicon,
) -> Result<(String, f64), NoiseError> {
    config.validate()?;
    let orig: Vec<char> = text.chars().collect();
    let n = orig.len();
    if n == 0 || config.target_cer == 0.0 {
        return Ok((text.to_string(), 0.0));
    }
    let target_edits = (config.target_cer * n as f64).round() as usize;
    if target_edits == 0 {
        return Ok((text.to_string(), 0.0));
    }
    let mut rng = substream(config.seed, "noise/corrupt");

    // Phase 1: whole-mention confusions, kept within the edit budget. The
    // replaced spans are shielded from phase 2 so the confusion surfaces
    // survive into the transcript.
    let mut current = orig.clone();
    let mut replaced_spans: Vec<(usize, usize)> = Vec::new();
    if config.landmark_corruption_rate > 0.0 && config.confusion_bias > 0.0 {
        let keys: Vec<(String, usize)> = lex
            .confusion_table
            .iter()
            .enumerate()
            .filter(|(_, (k, v))| k.chars().count() >= 2 && !v.is_empty())
            .map(|(i, (k, _))| (k.clone(), i))
            .collect();
        if !keys.is_empty() {
            let table: Vec<(&String, &Vec<String>)> = lex.confusion_table.iter().collect();
            let needles = textscan::make_needles(keys);
            let folded: Vec<char> = orig.iter().map(|&c| textscan::fold_char(c)).collect();
            let hits = textscan::scan(&folded, &needles);
            let mut budget = target_edits;
            let mut planned: Vec<(usize, usize, Vec<char>)> = Vec::new();
            for (start, end, table_idx) in hits {
                if !rng.random_bool(config.landmark_corruption_rate) {
                    continue;
                }
                if !rng.random_bool(config.confusion_bias) {
                    continue;
                }
                let variants = table[table_idx].1;
                let replacement: Vec<char> = variants[rng.random_range(0..variants.len())]
                    .chars()
                    .collect();
                let cost = levenshtein(&orig[start..end], &replacement);
                if cost == 0 || cost > budget {
                    continue;
                }
                budget -= cost;
                planned.push((start, end, replacement));
            }
            if !planned.is_empty() {
                let mut rebuilt: Vec<char> = Vec::with_capacity(orig.len() + 8);
                let mut cursor = 0usize;
                for (start, end, replacement) in planned {
                    rebuilt.extend_from_slice(&orig[cursor..start]);
                    let rs = rebuilt.len();
                    rebuilt.extend_from_slice(&replacement);
                    replaced_spans.push((rs, rebuilt.len()));
                    cursor = end;
                }
                rebuilt.extend_from_slice(&orig[cursor..]);
                current = rebuilt;
            }
        }
    }
    let mut base_distance = levenshtein(&orig, &current);
    if base_distance > target_edits {
        current = orig.clone();
        replaced_spans.clear();
        base_distance = 0;
    }

    // Phase 2: character edits close the remaining gap; re-measure and
    // adjust until the achieved distance hits the target.
    let mut best = current.clone();
    let mut best_distance = base_distance;
    let mut planned = target_edits - base_distance;
    if planned > 0 {
        // Mixed edits can occasionally realize a cheaper alignment than
        // intended; later attempts switch to pure substitutions, whose
        // distance is reliably one per edited position.
        let substitute_only = CorruptionConfig {
            edit_mix: EditMix {
                substitute: 1.0,
                insert: 0.0,
                delete: 0.0,
            },
            ..*config
        };
        for attempt in 0..16 {
            let cfg = if attempt >= 6 { &substitute_only } else { config };
            let candidate =
                apply_char_edits(&current, planned, lex, cfg, &replaced_spans, &mut rng);
            let d = levenshtein(&orig, &candidate);
            if (d as i64 - target_edits as i64).abs()
                < (best_distance as i64 - target_edits as i64).abs()
            {
                best = candidate;
                best_distance = d;
            }
            if best_distance == target_edits {
                break;
            }
            let adjusted = planned as i64 + (target_edits as i64 - d as i64);
            if adjusted < 1 {
                break;
            }
            planned = adjusted as usize;
        }
    }
    let achieved = best_distance as f64 / n as f64;
    Ok((best.into_iter().collect(), achieved))
}

/// Mixture over severity buckets used to draw per-sample CER targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeverityMixture {
    /// Relative weights for perfect/minor/moderate/major/severe.
    pub weights: [f64; 5],
}

impl SeverityMixture {
    /// Severity mix observed on the main evaluation set
    /// (14.5/31.9/37.1/14.7/1.9%).
    pub fn main_default() -> Self {
        SeverityMixture {
            weights: [101.0, 222.0, 258.0, 102.0, 13.0],
        }
    }

    /// Severity mix observed on the cross-domain evaluation set
    /// (26.5/38.3/28.9/5.9/0.4%).
    pub fn cross_domain_default() -> Self {
        SeverityMixture {
            weights: [143.0, 207.0, 156.0, 32.0, 2.0],
        }
    }

    /// All-clean mixture.
    pub fn clean() -> Self {
        SeverityMixture {
            weights: [1.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn proportions(&self) -> [f64; 5] {
        let total: f64 = self.weights.iter().sum();
        let mut out = [0.0; 5];
        for (i, w) in self.weights.iter().enumerate() {
            out[i] = w / total;
        }
        out
    }

    /// Exact per-bucket quotas for a corpus of `n` samples, by largest
    /// remainder. With the default weights and the matching corpus sizes the
    /// quotas equal the documented per-bucket counts.
    pub fn quotas(&self, n: usize) -> [usize; 5] {
        let proportions = self.proportions();
        let mut out = [0usize; 5];
        let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(5);
        let mut allocated = 0;
        for (i, p) in proportions.into_iter().enumerate() {
            let exact = p * n as f64;
            let floor = exact.floor() as usize;
            out[i] = floor;
            allocated += floor;
            remainders.push((i, exact - floor as f64));
        }
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (i, _) in remainders.into_iter().take(n - allocated) {
            out[i] += 1;
        }
        out
    }

    pub fn draw_bucket(&self, rng: &mut ChaCha8Rng) -> Severity {
        let total: f64 = self.weights.iter().sum();
        let mut roll = rng.random_range(0.0..total);
        for (i, &w) in self.weights.iter().enumerate() {
            if roll < w {
                return Severity::ALL[i];
            }
            roll -= w;
        }
        Severity::Severe
    }

    /// Draw a CER target that lands inside the drawn bucket for a reference
    /// of `len` chars: the target is an achievable edit count divided by
    /// `len`, so corruption calibrated to it reproduces the bucket.
    pub fn draw_target(
        &self,
        len: usize,
        thresholds: &SeverityThresholds,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let bucket = self.draw_bucket(rng);
        target_for_bucket(bucket, len, thresholds, rng)
    }
}

/// A CER target realizing `bucket` on a reference of `len` chars, drawn
/// uniformly over the bucket's achievable edit counts. Unreachable buckets
/// fall back to their nearest edit count.
pub fn target_for_bucket(
    bucket: Severity,
    len: usize,
    thresholds: &SeverityThresholds,
    rng: &mut ChaCha8Rng,
) -> f64 {
    if bucket == Severity::Perfect || len == 0 {
        return 0.0;
    }
    let len_f = len as f64;
    match thresholds.edit_range(bucket, len) {
        Some((d_min, d_max)) => {
            let d = if d_max > d_min {
                rng.random_range(d_min..=d_max)
            } else {
                d_min
            };
            d as f64 / len_f
        }
        None => {
            let lo = match bucket {
                Severity::Perfect => 0.0,
                Severity::Minor => 0.0,
                Severity::Moderate => thresholds.minor,
                Severity::Major => thresholds.moderate,
                Severity::Severe => thresholds.major,
            };
            let d = ((lo * len_f + 1e-9).floor() as usize + 1).max(1).min(len);
            d as f64 / len_f
        }
    }
}
