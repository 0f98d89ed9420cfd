//! Deterministic toolkit for egocentric-to-allocentric orientation reasoning.
//!
//! The crate models a discrete grid world with named landmarks, a symbolic
//! oracle that turns egocentric cues ("the bakery is on my left") into a
//! compass facing, a lexicon-driven utterance renderer with robustness
//! transforms, text-level ASR noise simulation calibrated by character error
//! rate, a balanced benchmark generator with gold three-step reasoning
//! traces, and an evaluator that parses model traces, scores them, and
//! classifies residual errors.

pub mod dataset;
pub mod eval;
pub mod grid;
pub mod lexicon;
pub mod noise;
pub mod oracle;
pub mod prompts;
pub mod seed;
mod textscan;
pub mod trace;
pub mod utterance;

pub use dataset::{GenerationPlan, Instance, Split, Subset};
pub use eval::{EvaluationReport, InstanceScore};
pub use grid::{Coord, GridEnvironment, Landmark};
pub use lexicon::Lexicon;
pub use noise::{CorruptionConfig, Severity, SeverityThresholds};
pub use oracle::{CardinalDirection, Cue, OrientationProblem, Relation};
pub use trace::ReasoningTrace;
