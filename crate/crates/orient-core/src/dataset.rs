//! Benchmark generation: balanced relation combinations, splits, gold
//! three-step traces, multimodal serialization, stage-wise training records,
//! and baseline prompt emission.
//!
//! Generation is deterministic: every random decision draws from a named
//! sub-stream of the plan seed keyed by instance id, so instances can be
//! produced in any order and always come out identical.

use crate::grid::{Coord, GridEnvironment, GridError};
use crate::lexicon::Lexicon;
use crate::noise::{
    corrupt, target_for_bucket, CorruptionConfig, NoiseError, Severity, SeverityMixture,
    SeverityThresholds,
};
use crate::oracle::{
    infer_facing, landmark_dir, solve_detailed, CardinalDirection, Cue, OrientationProblem,
    Relation,
};
use crate::prompts::{render_prompt, BaselineProtocol};
use crate::seed::{substream, substream_seed};
use crate::trace::{
    point_text, render_template, render_trace, ReasoningTrace, Step1Entry, Step2Entry, Step3Entry,
};
use crate::utterance::{render, RenderError, UtteranceSpec, Variation};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let token = match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        };
        f.write_str(token)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Main,
    CrossDomain,
    LinguisticVariation,
    ReferentialAmbiguity,
}

impl std::fmt::Display for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let token = match self {
            Subset::Main => "main",
            Subset::CrossDomain => "cross_domain",
            Subset::LinguisticVariation => "linguistic_variation",
            Subset::ReferentialAmbiguity => "referential_ambiguity",
        };
        f.write_str(token)
    }
}

/// One cue of an instance with its precomputed absolute direction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceCue {
    pub relation: Relation,
    pub landmark_id: String,
    pub abs_dir: CardinalDirection,
}

/// One benchmark record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub env_id: String,
    pub anchor_landmark_id: String,
    pub user_pos: Coord,
    pub facing: CardinalDirection,
    /// Cues in utterance surface order.
    pub cues: Vec<InstanceCue>,
    pub utterance: String,
    pub transcript: String,
    pub coords_block: String,
    pub multimodal_input: String,
    pub gold_trace: ReasoningTrace,
    pub gold_trace_text: String,
    pub split: Split,
    pub subset: Subset,
    pub variation: Variation,
    pub severity: Severity,
    pub language: String,
    #[serde(default)]
    pub code_switched: bool,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationPlan {
    pub total: usize,
    pub singles_count: usize,
    pub split_sizes: SplitSizes,
    pub variation_total: usize,
    pub cross_domain_total: usize,
    pub ambiguity_total: usize,
    pub main_env: String,
    pub cross_env: String,
    pub language: String,
    pub code_switch_main: f64,
    pub code_switch_cross: f64,
    pub main_severity: SeverityMixture,
    pub cross_severity: SeverityMixture,
    pub thresholds: SeverityThresholds,
    pub corruption: CorruptionConfig,
    /// Optional per-combination overrides keyed like `front+left`.
    pub per_combination: Option<BTreeMap<String, usize>>,
    pub seed: u64,
}

impl Default for GenerationPlan {
    fn default() -> Self {
        GenerationPlan {
            total: 4600,
            singles_count: 320,
            split_sizes: SplitSizes {
                train: 3216,
                validation: 688,
                test: 696,
            },
            variation_total: 400,
            cross_domain_total: 540,
            ambiguity_total: 200,
            main_env: "gongguan".to_string(),
            cross_env: "taipei_station".to_string(),
            language: "zh-TW".to_string(),
            code_switch_main: 0.047,
            code_switch_cross: 0.465,
            main_severity: SeverityMixture::main_default(),
            cross_severity: SeverityMixture::cross_domain_default(),
            thresholds: SeverityThresholds::default(),
            corruption: CorruptionConfig::default(),
            per_combination: None,
            seed: 20240901,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("plan unsatisfiable: no site in environment {environment} supports combination {combination}")]
    UnsatisfiablePlan {
        combination: String,
        environment: String,
    },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// The 15 relation combinations in canonical order.
pub fn all_combinations() -> Vec<Vec<Relation>> {
    use Relation::*;
    vec![
        vec![Front],
        vec![Back],
        vec![Left],
        vec![Right],
        vec![Front, Back],
        vec![Front, Left],
        vec![Front, Right],
        vec![Back, Left],
        vec![Back, Right],
        vec![Left, Right],
        vec![Front, Back, Left],
        vec![Front, Back, Right],
        vec![Front, Left, Right],
        vec![Back, Left, Right],
        vec![Front, Back, Left, Right],
    ]
}

/// Stable key for a combination, e.g. `front+left`.
pub fn combination_key(combo: &[Relation]) -> String {
    combo
        .iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

/// Per-combination instance counts: singles get `singles_count` each, the
/// remainder spreads as evenly as possible over the 11 multi-relation
/// combinations in canonical order.
pub fn combination_counts(plan: &GenerationPlan) -> Result<Vec<(Vec<Relation>, usize)>, GenerateError> {
    let combos = all_combinations();
    if let Some(overrides) = &plan.per_combination {
        let mut out = Vec::new();
        for combo in combos {
            let key = combination_key(&combo);
            let count = *overrides.get(&key).unwrap_or(&0);
            out.push((combo, count));
        }
        return Ok(out);
    }
    let singles_total = plan.singles_count * 4;
    if plan.total < singles_total {
        return Err(GenerateError::InvalidPlan(format!(
            "total {} below the {} single-relation instances",
            plan.total, singles_total
        )));
    }
    let rest = plan.total - singles_total;
    let base = rest / 11;
    let extra = rest % 11;
    let mut out = Vec::new();
    for (i, combo) in combos.into_iter().enumerate() {
        let count = if combo.len() == 1 {
            plan.singles_count
        } else {
            let multi_index = i - 4;
            base + usize::from(multi_index < extra)
        };
        out.push((combo, count));
    }
    Ok(out)
}

/// A usable (anchor, facing) pose with the relations realizable from its
/// occupied neighbor cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Site {
    pub anchor_id: String,
    pub anchor_pos: Coord,
    pub facing: CardinalDirection,
    pub available: BTreeMap<Relation, String>,
}

/// Every (anchor, facing) pose of an environment in canonical order
/// (anchors by id, facings N/E/S/W), with its realizable relation map.
pub fn enumerate_sites(env: &GridEnvironment) -> Vec<Site> {
    let mut anchors: Vec<&crate::grid::Landmark> = env.landmarks.iter().collect();
    anchors.sort_by(|a, b| a.id.cmp(&b.id));
    let mut sites = Vec::new();
    for anchor in anchors {
        let neighbors = env
            .neighbors(anchor.position)
            .expect("landmark positions are in bounds");
        for facing in CardinalDirection::ALL {
            let mut available = BTreeMap::new();
            for relation in Relation::ALL {
                let dir = landmark_dir(facing, relation);
                if let Some(lm) = neighbors.get(&dir) {
                    available.insert(relation, lm.id.clone());
                }
            }
            sites.push(Site {
                anchor_id: anchor.id.clone(),
                anchor_pos: anchor.position,
                facing,
                available,
            });
        }
    }
    sites
}

/// Serialize coordinate entries as `id(x,y), id(x,y)`.
pub fn serialize_coords(entries: &[(String, Coord)]) -> String {
    entries
        .iter()
        .map(|(id, pos)| format!("{id}({},{})", pos.x, pos.y))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Parse a coordinate block back into (id, position) entries.
pub fn parse_coords_block(block: &str) -> Vec<(String, (i32, i32))> {
    let mut out = Vec::new();
    for chunk in block.split(')') {
        let chunk = chunk.trim().trim_start_matches(',').trim();
        if chunk.is_empty() {
            continue;
        }
        if let Some(open) = chunk.rfind('(') {
            let id = chunk[..open].trim();
            if id.is_empty() {
                continue;
            }
            let coords: Vec<i32> = chunk[open + 1..]
                .split(',')
                .filter_map(|p| p.trim().parse().ok())
                .collect();
            if coords.len() == 2 {
                out.push((id.to_string(), (coords[0], coords[1])));
            }
        }
    }
    out
}

const AUDIO_PREFIX: &str = "Audio: ";
const COORDS_SEPARATOR: &str = " | Coordinates: ";

/// Serialize transcript and coordinate block into the single textual
/// multimodal input.
pub fn serialize_multimodal(transcript: &str, coords_block: &str) -> String {
    format!("{AUDIO_PREFIX}{transcript}{COORDS_SEPARATOR}{coords_block}")
}

/// Split a multimodal input back into (transcript, coordinate block).
pub fn split_multimodal(input: &str) -> Option<(&str, &str)> {
    let rest = input.strip_prefix(AUDIO_PREFIX)?;
    let sep = rest.find(COORDS_SEPARATOR)?;
    Some((&rest[..sep], &rest[sep + COORDS_SEPARATOR.len()..]))
}

struct RowPlan {
    id: String,
    combo: Vec<Relation>,
    site_index: usize,
    split: Split,
    subset: Subset,
    variation: Variation,
    env_key: EnvKey,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum EnvKey {
    Main,
    Cross,
}

fn candidate_site_indices(
    sites: &[Site],
    combo: &[Relation],
) -> Vec<Vec<usize>> {
    // Grouped by facing so round-robin balances gold facings.
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); 4];
    for (idx, site) in sites.iter().enumerate() {
        if combo.iter().all(|r| site.available.contains_key(r)) {
            let g = CardinalDirection::ALL
                .iter()
                .position(|d| *d == site.facing)
                .expect("closed set");
            groups[g].push(idx);
        }
    }
    groups.retain(|g| !g.is_empty());
    groups
}

fn pick_site(groups: &[Vec<usize>], k: usize) -> usize {
    let g = k % groups.len();
    let group = &groups[g];
    group[(k / groups.len()) % group.len()]
}

/// Largest-remainder apportionment of `total` across weights.
fn largest_remainder(total: usize, weights: &[usize]) -> Vec<usize> {
    let weight_sum: usize = weights.iter().sum();
    if weight_sum == 0 {
        return vec![0; weights.len()];
    }
    let mut out: Vec<usize> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(usize, f64)> = Vec::new();
    let mut allocated = 0;
    for (i, &w) in weights.iter().enumerate() {
        let exact = total as f64 * w as f64 / weight_sum as f64;
        let floor = exact.floor() as usize;
        out.push(floor);
        allocated += floor;
        remainders.push((i, exact - floor as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for (i, _) in remainders.into_iter().take(total - allocated) {
        out[i] += 1;
    }
    out
}

/// Spread `count` over the canonical combinations as evenly as possible.
fn even_combination_counts(count: usize) -> Vec<usize> {
    let combos = all_combinations().len();
    let base = count / combos;
    let extra = count % combos;
    (0..combos).map(|i| base + usize::from(i < extra)).collect()
}

/// Allocate exactly `target` instances across bins proportionally to their
/// capacities, never exceeding any capacity. Cascade rounding keeps each bin
/// within one of its proportional share; any tail deficit fills bins with
/// spare capacity in order.
fn cascade_allocate(capacities: &[usize], target: usize) -> Vec<usize> {
    let total: usize = capacities.iter().sum();
    let mut out = vec![0usize; capacities.len()];
    if total == 0 || target == 0 {
        return out;
    }
    let ratio = target as f64 / total as f64;
    let mut cumulative = 0usize;
    let mut allocated = 0usize;
    for (i, &capacity) in capacities.iter().enumerate() {
        cumulative += capacity;
        let want = ((cumulative as f64 * ratio).round() as usize).min(target);
        let here = want.saturating_sub(allocated).min(capacity);
        out[i] = here;
        allocated += here;
    }
    let mut deficit = target - allocated;
    for (i, &capacity) in capacities.iter().enumerate() {
        if deficit == 0 {
            break;
        }
        let take = (capacity - out[i]).min(deficit);
        out[i] += take;
        deficit -= take;
    }
    debug_assert_eq!(deficit, 0);
    out
}

/// Generate the full benchmark: the balanced main set with splits, the
/// cross-domain set, and the referential-ambiguity set.
pub fn generate(
    plan: &GenerationPlan,
    envs: &[GridEnvironment],
    lexicons: &[Lexicon],
) -> Result<Vec<Instance>, GenerateError> {
    plan.corruption.validate()?;
    plan.thresholds
        .validate()
        .map_err(|e| GenerateError::InvalidPlan(e.to_string()))?;
    if plan.split_sizes.total() != plan.total {
        return Err(GenerateError::InvalidPlan(format!(
            "split sizes {}+{}+{} do not sum to total {}",
            plan.split_sizes.train,
            plan.split_sizes.validation,
            plan.split_sizes.test,
            plan.total
        )));
    }
    if plan.variation_total > plan.total {
        return Err(GenerateError::InvalidPlan(
            "variation quota exceeds total".to_string(),
        ));
    }
    let main_env = envs
        .iter()
        .find(|e| e.id == plan.main_env)
        .ok_or_else(|| GenerateError::InvalidPlan(format!("environment {} not provided", plan.main_env)))?;
    let cross_env = if plan.cross_domain_total > 0 {
        Some(envs.iter().find(|e| e.id == plan.cross_env).ok_or_else(
            || GenerateError::InvalidPlan(format!("environment {} not provided", plan.cross_env)),
        )?)
    } else {
        None
    };
    let lex = lexicons
        .iter()
        .find(|l| l.language == plan.language)
        .ok_or_else(|| GenerateError::InvalidPlan(format!("lexicon {} not provided", plan.language)))?;

    let main_sites = enumerate_sites(main_env);
    let cross_sites = cross_env.map(enumerate_sites).unwrap_or_default();

    let combo_counts = combination_counts(plan)?;
    let mut rows: Vec<RowPlan> = Vec::with_capacity(plan.total);

    // Main set: per-combination counts with exact split totals. Train is
    // apportioned across combinations first, validation over the remaining
    // capacity, and test takes the rest.
    let counts: Vec<usize> = combo_counts.iter().map(|(_, n)| *n).collect();
    let train_alloc = cascade_allocate(&counts, plan.split_sizes.train);
    let after_train: Vec<usize> = counts
        .iter()
        .zip(&train_alloc)
        .map(|(n, t)| n - t)
        .collect();
    let val_alloc = cascade_allocate(&after_train, plan.split_sizes.validation);
    let mut main_seq = 0usize;
    for (i, (combo, count)) in combo_counts.iter().enumerate() {
        let groups = candidate_site_indices(&main_sites, combo);
        if *count > 0 && groups.is_empty() {
            return Err(GenerateError::UnsatisfiablePlan {
                combination: combination_key(combo),
                environment: main_env.id.clone(),
            });
        }
        let train_here = train_alloc[i];
        let val_here = val_alloc[i];
        for k in 0..*count {
            main_seq += 1;
            let split = if k < train_here {
                Split::Train
            } else if k < train_here + val_here {
                Split::Validation
            } else {
                Split::Test
            };
            rows.push(RowPlan {
                id: format!("main-{main_seq:06}"),
                combo: combo.clone(),
                site_index: pick_site(&groups, k),
                split,
                subset: Subset::Main,
                variation: Variation::None,
                env_key: EnvKey::Main,
            });
        }
    }

    // Linguistic-variation subset: proportional to split size, word order on
    // multi-cue instances, synonym substitution elsewhere.
    let split_quotas = largest_remainder(
        plan.variation_total,
        &[
            plan.split_sizes.train,
            plan.split_sizes.validation,
            plan.split_sizes.test,
        ],
    );
    for (split, quota) in [Split::Train, Split::Validation, Split::Test]
        .into_iter()
        .zip(split_quotas)
    {
        if quota == 0 {
            continue;
        }
        let mut rng = substream(plan.seed, &format!("variation/{split}"));
        let mut candidates: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == split)
            .map(|(i, _)| i)
            .collect();
        candidates.shuffle(&mut rng);
        let word_order_quota = quota / 2;
        let mut assigned_wo = 0;
        let mut assigned_syn = 0;
        for idx in candidates {
            if assigned_wo + assigned_syn == quota {
                break;
            }
            if assigned_wo < word_order_quota && rows[idx].combo.len() >= 2 {
                rows[idx].variation = Variation::WordOrder;
                rows[idx].subset = Subset::LinguisticVariation;
                assigned_wo += 1;
            } else if assigned_syn < quota - word_order_quota {
                rows[idx].variation = Variation::Synonym;
                rows[idx].subset = Subset::LinguisticVariation;
                assigned_syn += 1;
            }
        }
        if assigned_wo + assigned_syn != quota {
            return Err(GenerateError::InvalidPlan(format!(
                "variation quota {quota} unsatisfiable for split {split}"
            )));
        }
    }

    // Cross-domain set: evenly over combinations in the unseen environment.
    if plan.cross_domain_total > 0 {
        let cross_env = cross_env.expect("checked above");
        let counts = even_combination_counts(plan.cross_domain_total);
        let combos = all_combinations();
        let mut seq = 0usize;
        for (combo, count) in combos.into_iter().zip(counts) {
            if count == 0 {
                continue;
            }
            let groups = candidate_site_indices(&cross_sites, &combo);
            if groups.is_empty() {
                return Err(GenerateError::UnsatisfiablePlan {
                    combination: combination_key(&combo),
                    environment: cross_env.id.clone(),
                });
            }
            for k in 0..count {
                seq += 1;
                rows.push(RowPlan {
                    id: format!("cross-{seq:06}"),
                    combo: combo.clone(),
                    site_index: pick_site(&groups, k),
                    split: Split::Test,
                    subset: Subset::CrossDomain,
                    variation: Variation::None,
                    env_key: EnvKey::Cross,
                });
            }
        }
    }

    // Referential-ambiguity set: the three transform kinds cycle.
    if plan.ambiguity_total > 0 {
        let counts = even_combination_counts(plan.ambiguity_total);
        let combos = all_combinations();
        let kinds = [
            Variation::ReferentialAmbiguity,
            Variation::Incomplete,
            Variation::Underspecified,
        ];
        let mut seq = 0usize;
        for (combo, count) in combos.into_iter().zip(counts) {
            if count == 0 {
                continue;
            }
            let groups = candidate_site_indices(&main_sites, &combo);
            if groups.is_empty() {
                return Err(GenerateError::UnsatisfiablePlan {
                    combination: combination_key(&combo),
                    environment: main_env.id.clone(),
                });
            }
            for k in 0..count {
                seq += 1;
                rows.push(RowPlan {
                    id: format!("ambig-{seq:06}"),
                    combo: combo.clone(),
                    site_index: pick_site(&groups, k),
                    split: Split::Test,
                    subset: Subset::ReferentialAmbiguity,
                    variation: kinds[(seq - 1) % kinds.len()],
                    env_key: EnvKey::Main,
                });
            }
        }
    }

    // Phase 1: render every scene (utterance, oracle check, gold trace).
    let mut scenes = Vec::with_capacity(rows.len());
    for row in &rows {
        let (env, sites) = match row.env_key {
            EnvKey::Main => (main_env, &main_sites),
            EnvKey::Cross => (cross_env.expect("cross rows only with cross env"), &cross_sites),
        };
        scenes.push(prepare_scene(plan, row, &sites[row.site_index], env, lex)?);
    }

    // Phase 2: per-group severity quotas. Largest-remainder quotas over the
    // configured mixture reproduce its bucket counts exactly; the minor
    // bucket goes to utterances long enough to realize a CER at or below
    // its cut point.
    let mut buckets: Vec<Option<Severity>> = vec![None; rows.len()];
    let is_main_eval = |r: &RowPlan, split: Split| {
        r.split == split && matches!(r.subset, Subset::Main | Subset::LinguisticVariation)
    };
    let groups: [(&str, Vec<usize>, &SeverityMixture); 4] = [
        (
            "validation",
            rows.iter()
                .enumerate()
                .filter(|(_, r)| is_main_eval(r, Split::Validation))
                .map(|(i, _)| i)
                .collect(),
            &plan.main_severity,
        ),
        (
            "test",
            rows.iter()
                .enumerate()
                .filter(|(_, r)| is_main_eval(r, Split::Test))
                .map(|(i, _)| i)
                .collect(),
            &plan.main_severity,
        ),
        (
            "cross_domain",
            rows.iter()
                .enumerate()
                .filter(|(_, r)| r.subset == Subset::CrossDomain)
                .map(|(i, _)| i)
                .collect(),
            &plan.cross_severity,
        ),
        (
            "ambiguity",
            rows.iter()
                .enumerate()
                .filter(|(_, r)| r.subset == Subset::ReferentialAmbiguity)
                .map(|(i, _)| i)
                .collect(),
            &plan.main_severity,
        ),
    ];
    for (label, members, mixture) in groups {
        if members.is_empty() {
            continue;
        }
        let mut order = members;
        order.shuffle(&mut substream(plan.seed, &format!("severity/{label}")));
        assign_severity_buckets(&order, mixture, &scenes, &plan.thresholds, &mut buckets);
    }

    // Phase 3: corrupt transcripts and assemble instances.
    rows.iter()
        .zip(scenes)
        .zip(buckets)
        .map(|((row, scene), bucket)| finalize_instance(plan, row, scene, bucket, lex))
        .collect()
}

struct PreparedScene {
    iseed: u64,
    env_id: String,
    anchor_id: String,
    anchor_pos: Coord,
    facing: CardinalDirection,
    code_switch: bool,
    utterance: String,
    utterance_len: usize,
    cues: Vec<InstanceCue>,
    coords_block: String,
    gold_trace: ReasoningTrace,
    gold_trace_text: String,
}

fn assign_severity_buckets(
    order: &[usize],
    mixture: &SeverityMixture,
    scenes: &[PreparedScene],
    thresholds: &SeverityThresholds,
    out: &mut [Option<Severity>],
) {
    let mut remaining = mixture.quotas(order.len());
    // Minor first: only length-capable members can realize it.
    for &idx in order {
        if remaining[Severity::Minor as usize] == 0 {
            break;
        }
        if out[idx].is_some() {
            continue;
        }
        if thresholds
            .edit_range(Severity::Minor, scenes[idx].utterance_len)
            .is_some()
        {
            out[idx] = Some(Severity::Minor);
            remaining[Severity::Minor as usize] -= 1;
        }
    }
    for bucket in [
        Severity::Perfect,
        Severity::Moderate,
        Severity::Major,
        Severity::Severe,
    ] {
        for &idx in order {
            if remaining[bucket as usize] == 0 {
                break;
            }
            if out[idx].is_some() {
                continue;
            }
            if bucket == Severity::Perfect
                || thresholds
                    .edit_range(bucket, scenes[idx].utterance_len)
                    .is_some()
            {
                out[idx] = Some(bucket);
                remaining[bucket as usize] -= 1;
            }
        }
    }
    // Capability shortfalls: park leftover members in the nearest bucket
    // they can realize.
    for &idx in order {
        if out[idx].is_none() {
            let len = scenes[idx].utterance_len;
            let fallback = [Severity::Moderate, Severity::Major, Severity::Severe]
                .into_iter()
                .find(|b| thresholds.edit_range(*b, len).is_some())
                .unwrap_or(Severity::Perfect);
            out[idx] = Some(fallback);
        }
    }
}

fn prepare_scene(
    plan: &GenerationPlan,
    row: &RowPlan,
    site: &Site,
    env: &GridEnvironment,
    lex: &Lexicon,
) -> Result<PreparedScene, GenerateError> {
    let iseed = substream_seed(plan.seed, &format!("instance/{}", row.id));
    // Training data stays clean; transcripts are corrupted for evaluation
    // splits only.
    let is_eval = row.split != Split::Train;

    let code_switch_rate = match row.subset {
        Subset::CrossDomain => plan.code_switch_cross,
        _ => plan.code_switch_main,
    };
    let code_switch = is_eval
        && code_switch_rate > 0.0
        && plan.language != "en"
        && substream(iseed, "codeswitch").random_bool(code_switch_rate.clamp(0.0, 1.0));

    let cue_ids: Vec<(Relation, String)> = row
        .combo
        .iter()
        .map(|r| (*r, site.available[r].clone()))
        .collect();
    let spec = UtteranceSpec {
        anchor_landmark_id: site.anchor_id.clone(),
        cues: cue_ids.clone(),
        variation: row.variation,
        language: plan.language.clone(),
        code_switch,
        seed: iseed,
    };
    let rendered = render(&spec, env, lex)?;

    // Oracle round-trip: the generated scene must imply exactly the facing
    // the site was built for.
    let problem = OrientationProblem {
        user_pos: site.anchor_pos,
        cues: cue_ids
            .iter()
            .map(|(relation, id)| {
                Ok(Cue {
                    relation: *relation,
                    landmark_id: id.clone(),
                    landmark_pos: env.require_landmark(id)?.position,
                })
            })
            .collect::<Result<Vec<_>, GridError>>()?,
    };
    let solution = solve_detailed(&problem)
        .map_err(|e| GenerateError::Internal(format!("{}: oracle rejected scene: {e}", row.id)))?;
    if solution.facing != site.facing {
        return Err(GenerateError::Internal(format!(
            "{}: solved facing {} differs from site facing {}",
            row.id, solution.facing, site.facing
        )));
    }
    let abs_by_relation: BTreeMap<Relation, CardinalDirection> = solution
        .derivations
        .iter()
        .map(|d| (d.cue.relation, d.abs_dir))
        .collect();

    // Surface order drives cue order, the coordinate block, and the trace.
    let cues: Vec<InstanceCue> = rendered
        .cues
        .iter()
        .map(|c| InstanceCue {
            relation: c.relation,
            landmark_id: c.landmark_id.clone(),
            abs_dir: abs_by_relation[&c.relation],
        })
        .collect();

    let mut coord_entries = vec![(site.anchor_id.clone(), site.anchor_pos)];
    for cue in &cues {
        coord_entries.push((
            cue.landmark_id.clone(),
            env.require_landmark(&cue.landmark_id)?.position,
        ));
    }
    let coords_block = serialize_coords(&coord_entries);

    let gold_trace = ReasoningTrace {
        step1: rendered
            .cues
            .iter()
            .map(|c| Step1Entry {
                relation: c.relation,
                mention: c.display_name.clone(),
                landmark_id: Some(c.landmark_id.clone()),
            })
            .collect(),
        step2: rendered
            .cues
            .iter()
            .map(|c| {
                let pos = env.require_landmark(&c.landmark_id)?.position;
                Ok(Step2Entry {
                    mention: c.display_name.clone(),
                    landmark_id: Some(c.landmark_id.clone()),
                    from: (site.anchor_pos.x, site.anchor_pos.y),
                    to: (pos.x, pos.y),
                    vector: (pos.x - site.anchor_pos.x, pos.y - site.anchor_pos.y),
                    direction: abs_by_relation[&c.relation],
                })
            })
            .collect::<Result<Vec<_>, GridError>>()?,
        step3: rendered
            .cues
            .iter()
            .map(|c| Step3Entry {
                mention: c.display_name.clone(),
                landmark_id: Some(c.landmark_id.clone()),
                direction: abs_by_relation[&c.relation],
                relation: c.relation,
                facing: solution.facing,
            })
            .collect(),
        final_answer: solution.facing,
    };
    let gold_trace_text = render_trace(&gold_trace, lex);
    let utterance_len = rendered.text.chars().count();

    Ok(PreparedScene {
        iseed,
        env_id: env.id.clone(),
        anchor_id: site.anchor_id.clone(),
        anchor_pos: site.anchor_pos,
        facing: solution.facing,
        code_switch,
        utterance: rendered.text,
        utterance_len,
        cues,
        coords_block,
        gold_trace,
        gold_trace_text,
    })
}

fn finalize_instance(
    plan: &GenerationPlan,
    row: &RowPlan,
    scene: PreparedScene,
    bucket: Option<Severity>,
    lex: &Lexicon,
) -> Result<Instance, GenerateError> {
    let (transcript, severity) = match bucket {
        None => (scene.utterance.clone(), Severity::Perfect),
        Some(bucket) => {
            let mut rng = substream(scene.iseed, "severity");
            let target =
                target_for_bucket(bucket, scene.utterance_len, &plan.thresholds, &mut rng);
            let config = CorruptionConfig {
                target_cer: target,
                seed: substream_seed(scene.iseed, "corrupt"),
                ..plan.corruption
            };
            let (transcript, achieved) = corrupt(&scene.utterance, &config, lex)?;
            (transcript, plan.thresholds.bucket(achieved))
        }
    };
    let multimodal_input = serialize_multimodal(&transcript, &scene.coords_block);

    Ok(Instance {
        id: row.id.clone(),
        env_id: scene.env_id,
        anchor_landmark_id: scene.anchor_id,
        user_pos: scene.anchor_pos,
        facing: scene.facing,
        cues: scene.cues,
        utterance: scene.utterance,
        transcript,
        coords_block: scene.coords_block,
        multimodal_input,
        gold_trace: scene.gold_trace,
        gold_trace_text: scene.gold_trace_text,
        split: row.split,
        subset: row.subset,
        variation: row.variation,
        severity,
        language: plan.language.clone(),
        code_switched: scene.code_switch,
        seed: scene.iseed,
    })
}

/// Render the gold trace of an instance in another lexicon (mentions switch
/// to that language's display names where available).
pub fn render_gold_trace(
    instance: &Instance,
    env: &GridEnvironment,
    lex: &Lexicon,
) -> (ReasoningTrace, String) {
    let rename = |mention: &str, id: &Option<String>| -> String {
        match id {
            Some(id) => env
                .landmark(id)
                .and_then(|lm| lm.display_name(&lex.language))
                .map(str::to_string)
                .unwrap_or_else(|| mention.to_string()),
            None => mention.to_string(),
        }
    };
    let mut trace = instance.gold_trace.clone();
    if lex.language != instance.language {
        for e in &mut trace.step1 {
            e.mention = rename(&e.mention, &e.landmark_id);
        }
        for e in &mut trace.step2 {
            e.mention = rename(&e.mention, &e.landmark_id);
        }
        for e in &mut trace.step3 {
            e.mention = rename(&e.mention, &e.landmark_id);
        }
    }
    let text = render_trace(&trace, lex);
    (trace, text)
}

/// Staged-training phase whose records to emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    S1,
    S2,
    S3,
    S4,
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "s1" | "1" => Ok(Stage::S1),
            "s2" | "2" => Ok(Stage::S2),
            "s3" | "3" => Ok(Stage::S3),
            "s4" | "4" => Ok(Stage::S4),
            other => Err(format!("unknown stage {other:?}")),
        }
    }
}

/// One (input, target) training record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub instance_id: String,
    pub input: String,
    pub target: String,
}

/// Emit stage-wise training records: relation extraction (S1), coordinate
/// mapping (S2, one record per cue), orientation inference (S3, one record
/// per cue), and the end-to-end trace (S4).
pub fn emit_stage_records(
    instances: &[Instance],
    stage: Stage,
    lexicons: &[Lexicon],
) -> Result<Vec<StageRecord>, GenerateError> {
    let mut out = Vec::new();
    for instance in instances {
        let lex = lexicons
            .iter()
            .find(|l| l.language == instance.language)
            .ok_or_else(|| {
                GenerateError::InvalidPlan(format!("lexicon {} not provided", instance.language))
            })?;
        match stage {
            Stage::S1 => {
                let lines: Vec<String> = instance
                    .gold_trace
                    .step1
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        render_template(
                            &lex.trace.step1_line,
                            &[
                                ("i", (i + 1).to_string().as_str()),
                                ("relation", lex.relation_token(e.relation)),
                                ("landmark", &e.mention),
                            ],
                        )
                    })
                    .collect();
                out.push(StageRecord {
                    instance_id: instance.id.clone(),
                    input: instance.utterance.clone(),
                    target: lines.join("\n"),
                });
            }
            Stage::S2 => {
                for e in &instance.gold_trace.step2 {
                    let from = point_text(e.from);
                    let to = point_text(e.to);
                    let vector = point_text(e.vector);
                    out.push(StageRecord {
                        instance_id: instance.id.clone(),
                        input: render_template(
                            &lex.trace.s2_input,
                            &[("from", from.as_str()), ("to", to.as_str())],
                        ),
                        target: render_template(
                            &lex.trace.s2_target,
                            &[
                                ("from", from.as_str()),
                                ("to", to.as_str()),
                                ("vector", vector.as_str()),
                                ("direction", lex.direction_name(e.direction)),
                            ],
                        ),
                    });
                }
            }
            Stage::S3 => {
                for e in &instance.gold_trace.step3 {
                    out.push(StageRecord {
                        instance_id: instance.id.clone(),
                        input: render_template(
                            &lex.trace.s3_input,
                            &[
                                ("direction", lex.direction_name(e.direction)),
                                ("relation", lex.relation_token(e.relation)),
                            ],
                        ),
                        target: render_template(
                            &lex.trace.s3_target,
                            &[
                                ("direction", lex.direction_name(e.direction)),
                                ("phrase", lex.canonical_phrase(e.relation)),
                                ("relation", lex.relation_token(e.relation)),
                                ("facing", lex.direction_name(infer_facing(e.direction, e.relation))),
                            ],
                        ),
                    });
                }
            }
            Stage::S4 => {
                out.push(StageRecord {
                    instance_id: instance.id.clone(),
                    input: instance.multimodal_input.clone(),
                    target: instance.gold_trace_text.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Instantiate a baseline protocol prompt for an instance.
pub fn emit_baseline_prompt(instance: &Instance, protocol: BaselineProtocol) -> String {
    render_prompt(protocol, &instance.language, &instance.multimodal_input)
}

/// Serialize instances as line-delimited JSON, one instance per line, in
/// canonical order. Byte-stable for a fixed input.
pub fn to_jsonl(instances: &[Instance]) -> String {
    let mut out = String::new();
    for instance in instances {
        out.push_str(&serde_json::to_string(instance).expect("instance serializes"));
        out.push('\n');
    }
    out
}

/// Parse a line-delimited instance file; errors carry the 1-based line.
pub fn from_jsonl(text: &str) -> Result<Vec<Instance>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let instance: Instance =
            serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?;
        out.push(instance);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::builtin_environment;
    use crate::lexicon::builtin_lexicon;
    use crate::oracle::solve;
    use CardinalDirection::*;
    use Relation::*;

    fn small_plan() -> GenerationPlan {
        GenerationPlan {
            total: 150,
            singles_count: 10,
            split_sizes: SplitSizes {
                train: 105,
                validation: 22,
                test: 23,
            },
            variation_total: 12,
            cross_domain_total: 30,
            ambiguity_total: 15,
            seed: 7,
            ..GenerationPlan::default()
        }
    }

    #[test]
    fn default_combination_counts_hit_totals() {
        let plan = GenerationPlan::default();
        let counts = combination_counts(&plan).unwrap();
        assert_eq!(counts.len(), 15);
        let total: usize = counts.iter().map(|(_, n)| n).sum();
        assert_eq!(total, 4600);
        for (combo, n) in &counts {
            if combo.len() == 1 {
                assert_eq!(*n, 320);
            } else {
                assert!(*n == 301 || *n == 302, "{}: {n}", combination_key(combo));
            }
        }
    }

    #[test]
    fn enumerate_sites_inverts_the_mapping_table() {
        // The bus-stop scene with only its four documented landmarks.
        let doc = r#"{"id": "scene", "width": 10, "height": 10, "landmarks": [
            {"id": "bus_stop_2", "position": [3, 3], "names": {"en": "bus stop 2", "zh-TW": "公車站2"}, "category": "stop"},
            {"id": "Taipei_Main_Station_Exit_S3", "position": [3, 4], "names": {"en": "Taipei Main Station Exit S3", "zh-TW": "台北車站S3出口"}, "category": "exit"},
            {"id": "Taipei_Main_Station_Exit_K7", "position": [2, 3], "names": {"en": "Taipei Main Station Exit K7", "zh-TW": "台北車站K7出口"}, "category": "exit"},
            {"id": "sports_store_1", "position": [4, 3], "names": {"en": "sports store 1", "zh-TW": "運動用品店1"}, "category": "shop"}
        ]}"#;
        let scene = GridEnvironment::from_json(doc).unwrap();
        let sites = enumerate_sites(&scene);
        let site = sites
            .iter()
            .find(|s| s.anchor_id == "bus_stop_2" && s.facing == North)
            .unwrap();
        assert_eq!(site.available[&Front], "Taipei_Main_Station_Exit_S3");
        assert_eq!(site.available[&Left], "Taipei_Main_Station_Exit_K7");
        assert_eq!(site.available[&Right], "sports_store_1");
        assert!(!site.available.contains_key(&Back));

        let env = builtin_environment("taipei_station").unwrap();
        let park = enumerate_sites(&env)
            .into_iter()
            .find(|s| s.anchor_id == "park_4" && s.facing == West)
            .unwrap();
        assert_eq!(park.available.len(), 4);
        assert_eq!(park.available[&Front], "drink_shop_4");
        assert_eq!(park.available[&Back], "bar_1");
        assert_eq!(park.available[&Left], "bakery_3");
        assert_eq!(park.available[&Right], "bar_2");
    }

    #[test]
    fn isolated_anchor_yields_empty_relation_map() {
        let doc = r#"{"id": "lonely", "width": 10, "height": 10, "landmarks": [
            {"id": "a", "position": [5, 5], "names": {"en": "a", "zh-TW": "甲"}, "category": "shop"}
        ]}"#;
        let env = GridEnvironment::from_json(doc).unwrap();
        let sites = enumerate_sites(&env);
        assert_eq!(sites.len(), 4);
        assert!(sites.iter().all(|s| s.available.is_empty()));
    }

    #[test]
    fn serialize_coords_matches_contract() {
        let entries = vec![
            ("Taipei_Main_Station_Exit_S2".to_string(), Coord::new(4, 4)),
            ("restaurant_5".to_string(), Coord::new(4, 5)),
            ("Taipei_Main_Station_Exit_S3".to_string(), Coord::new(3, 4)),
        ];
        let block = serialize_coords(&entries);
        assert_eq!(
            block,
            "Taipei_Main_Station_Exit_S2(4,4), restaurant_5(4,5), Taipei_Main_Station_Exit_S3(3,4)"
        );
        let parsed = parse_coords_block(&block);
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[0], ("Taipei_Main_Station_Exit_S2".to_string(), (4, 4)));
        assert_eq!(parsed[2], ("Taipei_Main_Station_Exit_S3".to_string(), (3, 4)));
    }

    #[test]
    fn multimodal_serialization_is_exact() {
        let m = serialize_multimodal("hello there", "a(1,2)");
        assert_eq!(m, "Audio: hello there | Coordinates: a(1,2)");
        assert_eq!(split_multimodal(&m), Some(("hello there", "a(1,2)")));
    }

    #[test]
    fn small_generation_respects_plan() {
        let plan = small_plan();
        let envs = [
            builtin_environment("gongguan").unwrap(),
            builtin_environment("taipei_station").unwrap(),
        ];
        let lexicons = [builtin_lexicon("zh-TW").unwrap()];
        let instances = generate(&plan, &envs, &lexicons).unwrap();
        assert_eq!(instances.len(), 150 + 30 + 15);

        let main: Vec<_> = instances
            .iter()
            .filter(|i| i.subset == Subset::Main || i.subset == Subset::LinguisticVariation)
            .collect();
        assert_eq!(main.len(), 150);
        assert_eq!(main.iter().filter(|i| i.split == Split::Train).count(), 105);
        assert_eq!(
            main.iter().filter(|i| i.split == Split::Validation).count(),
            22
        );
        assert_eq!(main.iter().filter(|i| i.split == Split::Test).count(), 23);
        assert_eq!(
            instances
                .iter()
                .filter(|i| i.subset == Subset::LinguisticVariation)
                .count(),
            12
        );
        assert_eq!(
            instances
                .iter()
                .filter(|i| i.subset == Subset::CrossDomain)
                .count(),
            30
        );
        assert_eq!(
            instances
                .iter()
                .filter(|i| i.subset == Subset::ReferentialAmbiguity)
                .count(),
            15
        );

        // Oracle round-trip and serialization invariants on every instance.
        let by_id: BTreeMap<&str, &GridEnvironment> =
            envs.iter().map(|e| (e.id.as_str(), e)).collect();
        for instance in &instances {
            let env = by_id[instance.env_id.as_str()];
            let problem = OrientationProblem {
                user_pos: instance.user_pos,
                cues: instance
                    .cues
                    .iter()
                    .map(|c| Cue {
                        relation: c.relation,
                        landmark_id: c.landmark_id.clone(),
                        landmark_pos: env.landmark(&c.landmark_id).unwrap().position,
                    })
                    .collect(),
            };
            assert_eq!(solve(&problem).unwrap(), instance.facing, "{}", instance.id);
            assert_eq!(
                instance.multimodal_input,
                serialize_multimodal(&instance.transcript, &instance.coords_block)
            );
            assert!(!instance.cues.is_empty() && instance.cues.len() <= 4);
            if instance.split == Split::Train {
                assert_eq!(instance.transcript, instance.utterance);
                assert_eq!(instance.severity, Severity::Perfect);
            }
        }

        // Ids unique.
        let mut ids: Vec<&str> = instances.iter().map(|i| i.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), instances.len());
    }

    #[test]
    fn generation_is_byte_deterministic() {
        let plan = small_plan();
        let envs = [
            builtin_environment("gongguan").unwrap(),
            builtin_environment("taipei_station").unwrap(),
        ];
        let lexicons = [builtin_lexicon("zh-TW").unwrap()];
        let a = to_jsonl(&generate(&plan, &envs, &lexicons).unwrap());
        let b = to_jsonl(&generate(&plan, &envs, &lexicons).unwrap());
        assert_eq!(a, b);
        let reparsed = from_jsonl(&a).unwrap();
        assert_eq!(reparsed, generate(&plan, &envs, &lexicons).unwrap());
    }

    /// Split totals stay exact even when combinations hold a single
    /// instance each and proportional shares round to fractions.
    #[test]
    fn tiny_plan_split_allocation_is_exact() {
        let envs = [
            builtin_environment("gongguan").unwrap(),
            builtin_environment("taipei_station").unwrap(),
        ];
        let lexicons = [builtin_lexicon("zh-TW").unwrap()];
        let plan = GenerationPlan {
            total: 15,
            singles_count: 1,
            split_sizes: SplitSizes {
                train: 11,
                validation: 2,
                test: 2,
            },
            variation_total: 0,
            cross_domain_total: 0,
            ambiguity_total: 0,
            seed: 3,
            ..GenerationPlan::default()
        };
        let instances = generate(&plan, &envs, &lexicons).unwrap();
        assert_eq!(instances.len(), 15);
        assert_eq!(
            instances.iter().filter(|i| i.split == Split::Train).count(),
            11
        );
        assert_eq!(
            instances
                .iter()
                .filter(|i| i.split == Split::Validation)
                .count(),
            2
        );
        assert_eq!(instances.iter().filter(|i| i.split == Split::Test).count(), 2);
    }

    #[test]
    fn unsatisfiable_pair_in_tiny_environment() {
        let doc = r#"{"id": "gongguan", "width": 10, "height": 10, "landmarks": [
            {"id": "a", "position": [5, 5], "names": {"en": "a", "zh-TW": "甲"}, "category": "shop"}
        ]}"#;
        let tiny = GridEnvironment::from_json(doc).unwrap();
        let plan = GenerationPlan {
            total: 10,
            singles_count: 1,
            split_sizes: SplitSizes {
                train: 8,
                validation: 1,
                test: 1,
            },
            variation_total: 0,
            cross_domain_total: 0,
            ambiguity_total: 0,
            seed: 1,
            ..GenerationPlan::default()
        };
        let lexicons = [builtin_lexicon("zh-TW").unwrap()];
        match generate(&plan, &[tiny], &lexicons) {
            Err(GenerateError::UnsatisfiablePlan { combination, .. }) => {
                assert_eq!(combination, "front");
            }
            other => panic!("expected unsatisfiable plan, got {other:?}"),
        }
    }

    #[test]
    fn stage_records_use_exemplar_formats() {
        let env = builtin_environment("gongguan").unwrap();
        let envs = [env];
        let lexicons = [builtin_lexicon("en").unwrap()];
        let plan = GenerationPlan {
            total: 15,
            singles_count: 1,
            split_sizes: SplitSizes {
                train: 15,
                validation: 0,
                test: 0,
            },
            variation_total: 0,
            cross_domain_total: 0,
            ambiguity_total: 0,
            language: "en".to_string(),
            seed: 3,
            ..GenerationPlan::default()
        };
        let instances = generate(&plan, &envs, &lexicons).unwrap();
        let s2 = emit_stage_records(&instances, Stage::S2, &lexicons).unwrap();
        assert!(s2[0].input.starts_with("From = ("));
        assert!(s2[0].target.starts_with("Direction vector: ("));
        let s3 = emit_stage_records(&instances, Stage::S3, &lexicons).unwrap();
        assert!(s3[0].input.starts_with("Landmark absolute direction = "));
        assert!(s3[0].target.starts_with("Analysis: The landmark is to the "));
        assert!(s3[0].target.contains("Therefore, the user is facing "));
        let s4 = emit_stage_records(&instances, Stage::S4, &lexicons).unwrap();
        assert_eq!(s4.len(), instances.len());
        assert!(s4[0].input.starts_with("Audio: "));
        let s1 = emit_stage_records(&instances, Stage::S1, &lexicons).unwrap();
        assert!(s1[0].target.starts_with("Spatial relation 1 = "));
    }

    #[test]
    fn single_cue_s1_has_one_line() {
        let envs = [builtin_environment("gongguan").unwrap()];
        let lexicons = [builtin_lexicon("en").unwrap()];
        let plan = GenerationPlan {
            total: 4,
            singles_count: 1,
            split_sizes: SplitSizes {
                train: 4,
                validation: 0,
                test: 0,
            },
            variation_total: 0,
            cross_domain_total: 0,
            ambiguity_total: 0,
            language: "en".to_string(),
            per_combination: Some(
                [("front".to_string(), 4usize)].into_iter().collect(),
            ),
            seed: 3,
            ..GenerationPlan::default()
        };
        let instances = generate(&plan, &envs, &lexicons).unwrap();
        assert_eq!(instances.len(), 4);
        let s1 = emit_stage_records(&instances, Stage::S1, &lexicons).unwrap();
        for record in s1 {
            assert_eq!(record.target.lines().count(), 1);
        }
    }
}
