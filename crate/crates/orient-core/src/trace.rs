//! Three-step reasoning traces: the structured form, canonical text
//! rendering, and a tolerant parser for model output.
//!
//! Rendering and parsing share the per-lexicon line formats, so
//! `parse(render(trace))` is the identity on canonical traces in every
//! shipped language. The parser additionally accepts numbered or bulleted
//! step headers, flexible whitespace and punctuation, and the known line
//! variants; anything else is a [`FormatError`].

use crate::lexicon::Lexicon;
use crate::oracle::{CardinalDirection, Relation};
use crate::seed::fnv1a64;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

/// Relation extraction line: one (relation, landmark mention) pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step1Entry {
    pub relation: Relation,
    pub mention: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmark_id: Option<String>,
}

/// Coordinate mapping line: the stated vector arithmetic and direction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step2Entry {
    pub mention: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmark_id: Option<String>,
    pub from: (i32, i32),
    pub to: (i32, i32),
    pub vector: (i32, i32),
    pub direction: CardinalDirection,
}

/// Orientation inference line: the stated rule application.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step3Entry {
    pub mention: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmark_id: Option<String>,
    pub direction: CardinalDirection,
    pub relation: Relation,
    pub facing: CardinalDirection,
}

/// A complete three-step trace with its final answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub step1: Vec<Step1Entry>,
    pub step2: Vec<Step2Entry>,
    pub step3: Vec<Step3Entry>,
    pub final_answer: CardinalDirection,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("missing or empty step {step} section")]
    MissingStep { step: u8 },
    #[error("line {line}: direction token {token:?} is outside the direction vocabulary")]
    InvalidDirectionToken { line: usize, token: String },
    #[error("line {line}: relation token {token:?} is outside the relation vocabulary")]
    InvalidRelationToken { line: usize, token: String },
    #[error("no parseable final answer")]
    MissingFinalAnswer,
}

/// Fill `{name}` placeholders in a template.
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

/// Format a grid point the way traces write them: `(x,y)`.
pub fn point_text(p: (i32, i32)) -> String {
    format!("({},{})", p.0, p.1)
}

/// Render the canonical trace text for a structured trace.
pub fn render_trace(trace: &ReasoningTrace, lex: &Lexicon) -> String {
    let t = &lex.trace;
    let mut lines = Vec::new();
    lines.push(t.step1_header.clone());
    for (i, e) in trace.step1.iter().enumerate() {
        lines.push(render_template(
            &t.step1_line,
            &[
                ("i", (i + 1).to_string().as_str()),
                ("relation", lex.relation_token(e.relation)),
                ("landmark", &e.mention),
            ],
        ));
    }
    lines.push(t.step2_header.clone());
    for (i, e) in trace.step2.iter().enumerate() {
        lines.push(render_template(
            &t.step2_line,
            &[
                ("i", (i + 1).to_string().as_str()),
                ("landmark", &e.mention),
                ("from", &point_text(e.from)),
                ("to", &point_text(e.to)),
                ("vector", &point_text(e.vector)),
                ("direction", lex.direction_name(e.direction)),
            ],
        ));
    }
    lines.push(t.step3_header.clone());
    for e in &trace.step3 {
        lines.push(render_template(
            &t.step3_line,
            &[
                ("landmark", e.mention.as_str()),
                ("direction", lex.direction_name(e.direction)),
                ("phrase", lex.canonical_phrase(e.relation)),
                ("relation", lex.relation_token(e.relation)),
                ("facing", lex.direction_name(e.facing)),
            ],
        ));
    }
    lines.push(render_template(
        &t.final_line,
        &[("facing", lex.direction_name(trace.final_answer))],
    ));
    lines.join("\n")
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

const TOKEN_CLASS: &str = "[^\\s.。，,、:：=＝\"“”「」]";

struct CompiledTrace {
    headers: [Regex; 3],
    step1: Vec<Regex>,
    step2: Vec<Regex>,
    step3: Vec<Regex>,
    finals: Vec<Regex>,
}

fn compile_line(template: &str) -> Regex {
    let mut pattern = String::from("^\\s*");
    let mut direction_count = 0;
    // The quoted-phrase segment tolerates the period inside or outside the
    // closing quote and either quoting convention.
    const PHRASE_SENTINEL: char = '\u{1}';
    let prepared = template
        .replace("\"{phrase}.\"", &PHRASE_SENTINEL.to_string())
        .replace("「{phrase}」", &PHRASE_SENTINEL.to_string())
        .replace("\"{phrase}\"", &PHRASE_SENTINEL.to_string());
    let chars: Vec<char> = prepared.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch == '{' {
            let end = chars[i..]
                .iter()
                .position(|&c| c == '}')
                .map(|p| i + p)
                .expect("unterminated placeholder");
            let name: String = chars[i + 1..end].iter().collect();
            match name.as_str() {
                "i" => pattern.push_str("\\d*"),
                "landmark" => pattern.push_str("(?P<landmark>.+?)"),
                "relation" => pattern.push_str(&format!("(?P<relation>{TOKEN_CLASS}+?)")),
                "direction" => {
                    direction_count += 1;
                    match direction_count {
                        1 => pattern.push_str(&format!("(?P<direction>{TOKEN_CLASS}+?)")),
                        2 => pattern.push_str(&format!("(?P<direction2>{TOKEN_CLASS}+?)")),
                        _ => pattern.push_str(&format!("{TOKEN_CLASS}+?")),
                    }
                }
                "facing" => pattern.push_str(&format!("(?P<facing>{TOKEN_CLASS}+?)")),
                "phrase" => pattern.push_str("(?P<phrase>.+?)"),
                "from" => pattern
                    .push_str("\\(\\s*(?P<from_x>-?\\d+)\\s*,\\s*(?P<from_y>-?\\d+)\\s*\\)"),
                "to" => {
                    pattern.push_str("\\(\\s*(?P<to_x>-?\\d+)\\s*,\\s*(?P<to_y>-?\\d+)\\s*\\)")
                }
                "vector" => pattern
                    .push_str("\\(\\s*(?P<vec_x>-?\\d+)\\s*,\\s*(?P<vec_y>-?\\d+)\\s*\\)"),
                "src" | "dst" => pattern.push_str(".+?"),
                other => panic!("unknown placeholder {{{other}}} in trace template"),
            }
            i = end + 1;
            continue;
        }
        match ch {
            PHRASE_SENTINEL => pattern.push_str(
                "\\s*[\"“「]\\s*(?P<phrase>.+?)\\s*[.。]?\\s*[\"”」]\\s*[.。]?\\s*",
            ),
            ' ' => pattern.push_str("\\s*"),
            ',' | '，' => pattern.push_str("\\s*[,，]?\\s*"),
            '.' | '。' => pattern.push_str("\\s*[.。]?"),
            ':' | '：' => pattern.push_str("\\s*[:：]\\s*"),
            '=' | '＝' => pattern.push_str("\\s*[=＝]\\s*"),
            '"' | '“' | '”' | '「' | '」' => pattern.push_str("\\s*[\"“”「」]\\s*"),
            other => pattern.push_str(&regex::escape(&other.to_string())),
        }
        i += 1;
    }
    pattern.push_str("\\s*[.。]?\\s*$");
    RegexBuilder::new(&pattern)
        .case_insensitive(true)
        .build()
        .expect("trace line template compiles")
}

fn compile_header(header: &str) -> Regex {
    let prefix = header
        .split([':', '：'])
        .next()
        .unwrap_or(header)
        .trim_end();
    let mut pattern = String::from("^\\s*");
    for ch in prefix.chars() {
        match ch {
            ' ' => pattern.push_str("\\s*"),
            '1' | '一' => pattern.push_str("[1一]"),
            '2' | '二' => pattern.push_str("[2二]"),
            '3' | '三' => pattern.push_str("[3三]"),
            other => pattern.push_str(&regex::escape(&other.to_string())),
        }
    }
    pattern.push_str("\\s*[:：]?");
    RegexBuilder::new(&pattern)
        .case_insensitive(true)
        .build()
        .expect("trace header compiles")
}

impl CompiledTrace {
    fn new(lex: &Lexicon) -> Self {
        let t = &lex.trace;
        let mut step1 = vec![compile_line(&t.step1_line)];
        step1.extend(t.step1_line_alts.iter().map(|a| compile_line(a)));
        // The "from src to dst" variant carries more anchors, so try it first.
        let mut step2: Vec<Regex> = t.step2_line_alts.iter().map(|a| compile_line(a)).collect();
        step2.push(compile_line(&t.step2_line));
        let mut step3 = vec![compile_line(&t.step3_line)];
        step3.extend(t.step3_line_alts.iter().map(|a| compile_line(a)));
        let mut finals = vec![compile_line(&t.final_line)];
        finals.extend(t.final_line_alts.iter().map(|a| compile_line(a)));
        CompiledTrace {
            headers: [
                compile_header(&t.step1_header),
                compile_header(&t.step2_header),
                compile_header(&t.step3_header),
            ],
            step1,
            step2,
            step3,
            finals,
        }
    }
}

fn compiled_for(lex: &Lexicon) -> Arc<CompiledTrace> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<CompiledTrace>>>> = OnceLock::new();
    let key = fnv1a64(
        format!(
            "{}\u{0}{}",
            lex.language,
            serde_json::to_string(&lex.trace).expect("trace format serializes")
        )
        .as_bytes(),
    );
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("trace cache lock");
    guard
        .entry(key)
        .or_insert_with(|| Arc::new(CompiledTrace::new(lex)))
        .clone()
}

fn enumeration_prefix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?:\d+\s*[.)、．]\s+|[-*•]\s*|\(\d+\)\s*|\*\*\s*)+").expect("compiles")
    })
}

fn normalize_line(line: &str) -> String {
    let trimmed = line.trim();
    let without_prefix = enumeration_prefix().replace(trimmed, "");
    without_prefix.trim_end_matches("**").trim().to_string()
}

fn clean_mention(raw: &str) -> String {
    raw.trim()
        .trim_end_matches(['.', '。', ',', '，'])
        .trim()
        .to_string()
}

fn lookup_direction(
    lex: &Lexicon,
    token: &str,
    line: usize,
) -> Result<CardinalDirection, FormatError> {
    lex.direction_of_token(token)
        .ok_or_else(|| FormatError::InvalidDirectionToken {
            line,
            token: token.to_string(),
        })
}

fn lookup_relation(lex: &Lexicon, token: &str, line: usize) -> Result<Relation, FormatError> {
    lex.relation_of_token(token)
        .ok_or_else(|| FormatError::InvalidRelationToken {
            line,
            token: token.to_string(),
        })
}

fn parse_point(caps: &regex::Captures<'_>, x: &str, y: &str) -> Option<(i32, i32)> {
    let px = caps.name(x)?.as_str().parse().ok()?;
    let py = caps.name(y)?.as_str().parse().ok()?;
    Some((px, py))
}

/// Parse a model-produced trace against the three-step schema.
///
/// Landmark mentions are returned verbatim (with `landmark_id` unset);
/// resolution against an environment happens at scoring time.
pub fn parse_trace(text: &str, lex: &Lexicon) -> Result<ReasoningTrace, FormatError> {
    let compiled = compiled_for(lex);
    let lines: Vec<String> = text.lines().map(normalize_line).collect();

    let mut header_at: [Option<usize>; 3] = [None; 3];
    for (idx, line) in lines.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        for (slot, header) in header_at.iter_mut().zip(&compiled.headers) {
            if slot.is_none() && header.is_match(line) {
                *slot = Some(idx);
                break;
            }
        }
    }
    for (step, found) in header_at.iter().enumerate() {
        if found.is_none() {
            return Err(FormatError::MissingStep {
                step: step as u8 + 1,
            });
        }
    }
    let section_end = |start: usize| -> usize {
        header_at
            .iter()
            .filter_map(|&h| h)
            .filter(|&h| h > start)
            .min()
            .unwrap_or(lines.len())
    };

    let mut step1 = Vec::new();
    let h1 = header_at[0].expect("checked");
    for (idx, line) in lines
        .iter()
        .enumerate()
        .take(section_end(h1))
        .skip(h1 + 1)
    {
        if line.is_empty() {
            continue;
        }
        if let Some(caps) = compiled.step1.iter().find_map(|re| re.captures(line)) {
            let relation = lookup_relation(lex, caps.name("relation").unwrap().as_str(), idx + 1)?;
            step1.push(Step1Entry {
                relation,
                mention: clean_mention(caps.name("landmark").unwrap().as_str()),
                landmark_id: None,
            });
        }
    }
    if step1.is_empty() {
        return Err(FormatError::MissingStep { step: 1 });
    }

    let mut step2 = Vec::new();
    let h2 = header_at[1].expect("checked");
    for (idx, line) in lines
        .iter()
        .enumerate()
        .take(section_end(h2))
        .skip(h2 + 1)
    {
        if line.is_empty() {
            continue;
        }
        if let Some(caps) = compiled.step2.iter().find_map(|re| re.captures(line)) {
            let direction =
                lookup_direction(lex, caps.name("direction").unwrap().as_str(), idx + 1)?;
            let (Some(from), Some(to), Some(vector)) = (
                parse_point(&caps, "from_x", "from_y"),
                parse_point(&caps, "to_x", "to_y"),
                parse_point(&caps, "vec_x", "vec_y"),
            ) else {
                continue;
            };
            step2.push(Step2Entry {
                mention: clean_mention(caps.name("landmark").unwrap().as_str()),
                landmark_id: None,
                from,
                to,
                vector,
                direction,
            });
        }
    }
    if step2.is_empty() {
        return Err(FormatError::MissingStep { step: 2 });
    }

    let mut step3 = Vec::new();
    let h3 = header_at[2].expect("checked");
    for (idx, line) in lines
        .iter()
        .enumerate()
        .take(section_end(h3))
        .skip(h3 + 1)
    {
        if line.is_empty() {
            continue;
        }
        if let Some(caps) = compiled.step3.iter().find_map(|re| re.captures(line)) {
            let stated = caps
                .name("direction2")
                .or_else(|| caps.name("direction"))
                .unwrap();
            let direction = lookup_direction(lex, stated.as_str(), idx + 1)?;
            let relation = lookup_relation(lex, caps.name("relation").unwrap().as_str(), idx + 1)?;
            let facing = lookup_direction(lex, caps.name("facing").unwrap().as_str(), idx + 1)?;
            step3.push(Step3Entry {
                mention: clean_mention(caps.name("landmark").unwrap().as_str()),
                landmark_id: None,
                direction,
                relation,
                facing,
            });
        }
    }
    if step3.is_empty() {
        return Err(FormatError::MissingStep { step: 3 });
    }

    let mut final_answer = None;
    for (idx, line) in lines.iter().enumerate().rev() {
        if line.is_empty() {
            continue;
        }
        if let Some(caps) = compiled.finals.iter().find_map(|re| re.captures(line)) {
            let token = caps.name("facing").unwrap().as_str();
            final_answer = Some(lookup_direction(lex, token, idx + 1)?);
            break;
        }
    }
    let final_answer = final_answer.ok_or(FormatError::MissingFinalAnswer)?;

    Ok(ReasoningTrace {
        step1,
        step2,
        step3,
        final_answer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::builtin_lexicon;
    use CardinalDirection::*;
    use Relation::*;

    fn sample_trace() -> ReasoningTrace {
        ReasoningTrace {
            step1: vec![
                Step1Entry {
                    relation: Front,
                    mention: "Student Activity Center 1".into(),
                    landmark_id: Some("Student_Activity_Center_1".into()),
                },
                Step1Entry {
                    relation: Back,
                    mention: "Academic Building B".into(),
                    landmark_id: Some("Academic_Building_B".into()),
                },
            ],
            step2: vec![
                Step2Entry {
                    mention: "Student Activity Center 1".into(),
                    landmark_id: Some("Student_Activity_Center_1".into()),
                    from: (7, 1),
                    to: (6, 1),
                    vector: (-1, 0),
                    direction: West,
                },
                Step2Entry {
                    mention: "Academic Building B".into(),
                    landmark_id: Some("Academic_Building_B".into()),
                    from: (7, 1),
                    to: (8, 1),
                    vector: (1, 0),
                    direction: East,
                },
            ],
            step3: vec![
                Step3Entry {
                    mention: "Student Activity Center 1".into(),
                    landmark_id: Some("Student_Activity_Center_1".into()),
                    direction: West,
                    relation: Front,
                    facing: West,
                },
                Step3Entry {
                    mention: "Academic Building B".into(),
                    landmark_id: Some("Academic_Building_B".into()),
                    direction: East,
                    relation: Back,
                    facing: West,
                },
            ],
            final_answer: West,
        }
    }

    fn strip_ids(trace: &ReasoningTrace) -> ReasoningTrace {
        let mut t = trace.clone();
        for e in &mut t.step1 {
            e.landmark_id = None;
        }
        for e in &mut t.step2 {
            e.landmark_id = None;
        }
        for e in &mut t.step3 {
            e.landmark_id = None;
        }
        t
    }

    #[test]
    fn render_parse_round_trip_en() {
        let lex = builtin_lexicon("en").unwrap();
        let trace = sample_trace();
        let text = render_trace(&trace, &lex);
        let parsed = parse_trace(&text, &lex).unwrap();
        assert_eq!(parsed, strip_ids(&trace));
    }

    #[test]
    fn render_parse_round_trip_zh() {
        let lex = builtin_lexicon("zh-TW").unwrap();
        let trace = sample_trace();
        let text = render_trace(&trace, &lex);
        let parsed = parse_trace(&text, &lex).unwrap();
        assert_eq!(parsed, strip_ids(&trace));
    }

    #[test]
    fn canonical_en_lines_match_expected_shapes() {
        let lex = builtin_lexicon("en").unwrap();
        let text = render_trace(&sample_trace(), &lex);
        assert!(text.contains(
            "Spatial relation 1 = front, Reference landmark 1 = Student Activity Center 1"
        ));
        assert!(text.contains(
            "Reference landmark 1 = Student Activity Center 1, Direction vector: (6,1) - (7,1) = (-1,0), Direction = West"
        ));
        assert!(text.contains(
            "Academic Building B is to the East, and the user describes it as \"behind me.\" Spatial mapping rules indicate behind = East when the user is facing West."
        ));
        assert!(text.ends_with("Therefore, the user is facing West."));
    }

    /// Output in the erroneous-model style: short step-1 form, "from X to Y"
    /// step-2 form, period outside the quotes, no comma before "and".
    #[test]
    fn parses_model_variant_output() {
        let lex = builtin_lexicon("en").unwrap();
        let text = "\
Step 1: Extract spatial relations
Spatial relation 1 = front, landmark = restaurant 5
Spatial relation 2 = left, landmark = Taipei Main Station Exit S3

Step 2: Calculate absolute directions
Reference landmark 1 = restaurant 5, Direction vector from Taipei Main Station Exit S2 to restaurant 5: (4,5)-(4,4) = (0,1), Direction = North
Reference landmark 2 = Taipei Main Station Exit S3, Direction vector from Taipei Main Station Exit S2 to Taipei Main Station Exit S3: (3,4)-(4,4) = (-1,0), Direction = West

Step 3: Infer user orientation
Restaurant 5 is to the North and the user describes it as \"on my left\". Spatial mapping rules indicate left = North when the user is facing South.
Taipei Main Station Exit S3 is to the West and the user describes it as \"on my left\". Spatial mapping rules indicate left = West when the user is facing South.

Final Answer: The user is facing South.";
        let trace = parse_trace(text, &lex).unwrap();
        assert_eq!(trace.final_answer, South);
        assert_eq!(trace.step1.len(), 2);
        assert_eq!(trace.step1[0].relation, Front);
        assert_eq!(trace.step1[0].mention, "restaurant 5");
        assert_eq!(trace.step2[0].vector, (0, 1));
        assert_eq!(trace.step2[0].direction, North);
        assert_eq!(trace.step2[1].direction, West);
        assert_eq!(trace.step3[0].relation, Left);
        assert_eq!(trace.step3[0].facing, South);
    }

    #[test]
    fn parses_numbered_and_bold_headers() {
        let lex = builtin_lexicon("en").unwrap();
        let canonical = render_trace(&sample_trace(), &lex);
        let numbered: String = canonical
            .lines()
            .map(|l| {
                if l.starts_with("Step 1") {
                    format!("1. {l}")
                } else if l.starts_with("Step 2") {
                    format!("2. {l}")
                } else if l.starts_with("Step 3") {
                    format!("3. **{l}**")
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        let parsed = parse_trace(&numbered, &lex).unwrap();
        assert_eq!(parsed, strip_ids(&sample_trace()));
    }

    #[test]
    fn bare_answer_is_a_format_error() {
        let lex = builtin_lexicon("en").unwrap();
        assert_eq!(
            parse_trace("North", &lex),
            Err(FormatError::MissingStep { step: 1 })
        );
    }

    #[test]
    fn missing_section_is_reported() {
        let lex = builtin_lexicon("en").unwrap();
        let full = render_trace(&sample_trace(), &lex);
        let without_step2: String = full
            .lines()
            .filter(|l| !l.starts_with("Step 2"))
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(
            parse_trace(&without_step2, &lex),
            Err(FormatError::MissingStep { step: 2 })
        );
    }

    #[test]
    fn bad_direction_token_is_reported() {
        let lex = builtin_lexicon("en").unwrap();
        let full = render_trace(&sample_trace(), &lex);
        let corrupted = full.replace("Direction = West", "Direction = Northwest");
        assert!(matches!(
            parse_trace(&corrupted, &lex),
            Err(FormatError::InvalidDirectionToken { token, .. }) if token == "Northwest"
        ));
    }

    #[test]
    fn missing_final_answer_is_reported() {
        let lex = builtin_lexicon("en").unwrap();
        let full = render_trace(&sample_trace(), &lex);
        let without_final: String = full
            .lines()
            .filter(|l| !l.starts_with("Therefore"))
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(
            parse_trace(&without_final, &lex),
            Err(FormatError::MissingFinalAnswer)
        );
    }

    #[test]
    fn stage_exemplar_formats_render_exactly() {
        let lex = builtin_lexicon("en").unwrap();
        let s2_input = render_template(
            &lex.trace.s2_input,
            &[("from", "(0,0)"), ("to", "(1,0)")],
        );
        assert_eq!(s2_input, "From = (0,0), To = (1,0)");
        let s2_target = render_template(
            &lex.trace.s2_target,
            &[
                ("from", "(0,0)"),
                ("to", "(1,0)"),
                ("vector", "(1,0)"),
                ("direction", "East"),
            ],
        );
        assert_eq!(
            s2_target,
            "Direction vector: (1,0) - (0,0) = (1,0), Direction = East"
        );
        let s3_target = render_template(
            &lex.trace.s3_target,
            &[
                ("direction", "East"),
                ("phrase", "behind me"),
                ("relation", "behind"),
                ("facing", "West"),
            ],
        );
        assert_eq!(
            s3_target,
            "Analysis: The landmark is to the East, and the user describes it as \"behind me.\" Spatial mapping rules indicate behind = East when the user is facing West. Therefore, the user is facing West."
        );
    }
}
