//! The deterministic egocentric-to-allocentric engine.
//!
//! Given a user cell, a reference landmark cell, and an egocentric relation
//! (front/back/left/right), the oracle computes the landmark's absolute
//! compass direction and inverts the relative-to-absolute mapping table to
//! recover the user's facing. Multiple cues must agree on a single facing.

use crate::grid::Coord;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Compass direction on the grid: x grows East, y grows North.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CardinalDirection {
    North,
    East,
    South,
    West,
}

impl CardinalDirection {
    pub const ALL: [CardinalDirection; 4] = [
        CardinalDirection::North,
        CardinalDirection::East,
        CardinalDirection::South,
        CardinalDirection::West,
    ];

    /// Clockwise quarter turn in compass terms: N -> E -> S -> W -> N.
    pub fn cw90(self) -> CardinalDirection {
        match self {
            CardinalDirection::North => CardinalDirection::East,
            CardinalDirection::East => CardinalDirection::South,
            CardinalDirection::South => CardinalDirection::West,
            CardinalDirection::West => CardinalDirection::North,
        }
    }

    /// Counter-clockwise quarter turn: N -> W -> S -> E -> N.
    pub fn ccw90(self) -> CardinalDirection {
        self.cw90().cw90().cw90()
    }

    pub fn opposite(self) -> CardinalDirection {
        self.cw90().cw90()
    }

    /// Unit grid step towards this direction.
    pub fn unit_step(self) -> (i32, i32) {
        match self {
            CardinalDirection::North => (0, 1),
            CardinalDirection::East => (1, 0),
            CardinalDirection::South => (0, -1),
            CardinalDirection::West => (-1, 0),
        }
    }
}

impl fmt::Display for CardinalDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let token = match self {
            CardinalDirection::North => "north",
            CardinalDirection::East => "east",
            CardinalDirection::South => "south",
            CardinalDirection::West => "west",
        };
        f.write_str(token)
    }
}

/// Egocentric relation between the speaker and a landmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Front,
    Back,
    Left,
    Right,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::Front,
        Relation::Back,
        Relation::Left,
        Relation::Right,
    ];
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let token = match self {
            Relation::Front => "front",
            Relation::Back => "back",
            Relation::Left => "left",
            Relation::Right => "right",
        };
        f.write_str(token)
    }
}

/// Relative offset between two cells, landmark minus user.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridVector {
    pub dx: i32,
    pub dy: i32,
}

impl GridVector {
    pub fn new(dx: i32, dy: i32) -> Self {
        GridVector { dx, dy }
    }
}

impl std::ops::Neg for GridVector {
    type Output = GridVector;

    fn neg(self) -> GridVector {
        GridVector::new(-self.dx, -self.dy)
    }
}

impl fmt::Display for GridVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.dx, self.dy)
    }
}

/// One egocentric observation: a relation and the landmark it references.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cue {
    pub relation: Relation,
    pub landmark_id: String,
    pub landmark_pos: Coord,
}

/// A user position plus one or more cues that must imply a single facing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientationProblem {
    pub user_pos: Coord,
    pub cues: Vec<Cue>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    /// |dx| == |dy|: the offset is the zero vector or an exact diagonal, so
    /// no axis dominates and no cardinal direction is defined.
    #[error("ambiguous direction for offset {delta}{}: neither axis dominates", cue_context(.landmark_id))]
    DiagonalAmbiguity {
        delta: GridVector,
        landmark_id: Option<String>,
    },
    /// Per-cue facings disagree; the problem is malformed.
    #[error("cues imply conflicting facings: {}", format_verdicts(.verdicts))]
    InconsistentCues {
        verdicts: Vec<(String, CardinalDirection)>,
    },
    #[error("orientation problem has no cues")]
    EmptyProblem,
}

fn cue_context(landmark_id: &Option<String>) -> String {
    match landmark_id {
        Some(id) => format!(" (landmark {id})"),
        None => String::new(),
    }
}

fn format_verdicts(verdicts: &[(String, CardinalDirection)]) -> String {
    verdicts
        .iter()
        .map(|(id, facing)| format!("{id} -> {facing}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Componentwise landmark minus user.
pub fn delta(user: Coord, landmark: Coord) -> GridVector {
    GridVector::new(landmark.x - user.x, landmark.y - user.y)
}

/// Absolute compass direction of an axis-dominant offset.
///
/// East/West when |dx| > |dy| by the sign of dx, North/South when
/// |dy| > |dx| by the sign of dy. Ties (including the zero vector) are
/// rejected rather than broken.
pub fn abs_dir(v: GridVector) -> Result<CardinalDirection, OracleError> {
    if v.dx.abs() > v.dy.abs() {
        if v.dx > 0 {
            Ok(CardinalDirection::East)
        } else {
            Ok(CardinalDirection::West)
        }
    } else if v.dy.abs() > v.dx.abs() {
        if v.dy > 0 {
            Ok(CardinalDirection::North)
        } else {
            Ok(CardinalDirection::South)
        }
    } else {
        Err(OracleError::DiagonalAmbiguity {
            delta: v,
            landmark_id: None,
        })
    }
}

/// Absolute direction in which a landmark lies, given the user's facing and
/// the egocentric relation. Reproduces the full relative-to-absolute mapping
/// table: Front is the facing itself, Back its opposite, Left a counter-
/// clockwise quarter turn, Right a clockwise one.
pub fn landmark_dir(facing: CardinalDirection, relation: Relation) -> CardinalDirection {
    match relation {
        Relation::Front => facing,
        Relation::Back => facing.opposite(),
        Relation::Left => facing.ccw90(),
        Relation::Right => facing.cw90(),
    }
}

/// Inverse of [`landmark_dir`] in its relation argument: recover the facing
/// from the landmark's absolute direction and the stated relation.
pub fn infer_facing(d_abs: CardinalDirection, relation: Relation) -> CardinalDirection {
    match relation {
        Relation::Front => d_abs,
        Relation::Back => d_abs.opposite(),
        Relation::Left => d_abs.cw90(),
        Relation::Right => d_abs.ccw90(),
    }
}

/// Per-cue derivation produced by [`solve_detailed`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CueDerivation {
    pub cue: Cue,
    pub delta: GridVector,
    pub abs_dir: CardinalDirection,
    pub implied_facing: CardinalDirection,
}

/// Solution with the per-cue evidence that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub facing: CardinalDirection,
    pub derivations: Vec<CueDerivation>,
}

/// Solve for the user's facing, returning the per-cue derivations.
pub fn solve_detailed(problem: &OrientationProblem) -> Result<Solution, OracleError> {
    if problem.cues.is_empty() {
        return Err(OracleError::EmptyProblem);
    }
    let mut derivations = Vec::with_capacity(problem.cues.len());
    for cue in &problem.cues {
        let d = delta(problem.user_pos, cue.landmark_pos);
        let dir = abs_dir(d).map_err(|_| OracleError::DiagonalAmbiguity {
            delta: d,
            landmark_id: Some(cue.landmark_id.clone()),
        })?;
        derivations.push(CueDerivation {
            cue: cue.clone(),
            delta: d,
            abs_dir: dir,
            implied_facing: infer_facing(dir, cue.relation),
        });
    }
    let facing = derivations[0].implied_facing;
    if derivations.iter().any(|d| d.implied_facing != facing) {
        return Err(OracleError::InconsistentCues {
            verdicts: derivations
                .iter()
                .map(|d| (d.cue.landmark_id.clone(), d.implied_facing))
                .collect(),
        });
    }
    Ok(Solution {
        facing,
        derivations,
    })
}

/// Solve for the user's facing.
pub fn solve(problem: &OrientationProblem) -> Result<CardinalDirection, OracleError> {
    solve_detailed(problem).map(|s| s.facing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use CardinalDirection::*;
    use Relation::*;

    fn cue(relation: Relation, id: &str, x: i32, y: i32) -> Cue {
        Cue {
            relation,
            landmark_id: id.to_string(),
            landmark_pos: Coord::new(x, y),
        }
    }

    #[test]
    fn delta_is_landmark_minus_user() {
        assert_eq!(
            delta(Coord::new(4, 4), Coord::new(4, 5)),
            GridVector::new(0, 1)
        );
        assert_eq!(
            delta(Coord::new(4, 4), Coord::new(3, 4)),
            GridVector::new(-1, 0)
        );
        assert_eq!(
            delta(Coord::new(7, 1), Coord::new(7, 0)),
            GridVector::new(0, -1)
        );
    }

    #[test]
    fn abs_dir_unit_steps() {
        assert_eq!(abs_dir(GridVector::new(0, 1)), Ok(North));
        assert_eq!(abs_dir(GridVector::new(1, 0)), Ok(East));
        assert_eq!(abs_dir(GridVector::new(0, -1)), Ok(South));
        assert_eq!(abs_dir(GridVector::new(-1, 0)), Ok(West));
    }

    #[test]
    fn abs_dir_accepts_any_axis_dominant_offset() {
        assert_eq!(abs_dir(GridVector::new(2, 1)), Ok(East));
        assert_eq!(abs_dir(GridVector::new(-3, 0)), Ok(West));
        assert_eq!(abs_dir(GridVector::new(1, -4)), Ok(South));
    }

    #[test]
    fn abs_dir_rejects_diagonals_and_zero() {
        assert!(matches!(
            abs_dir(GridVector::new(1, 1)),
            Err(OracleError::DiagonalAmbiguity { .. })
        ));
        assert!(matches!(
            abs_dir(GridVector::new(0, 0)),
            Err(OracleError::DiagonalAmbiguity { .. })
        ));
        assert!(matches!(
            abs_dir(GridVector::new(-2, 2)),
            Err(OracleError::DiagonalAmbiguity { .. })
        ));
    }

    /// The full 4x4 mapping table, row by row (facing: front back right left).
    #[test]
    fn mapping_table_all_sixteen_cells() {
        let expected = [
            (North, [North, South, East, West]),
            (East, [East, West, South, North]),
            (South, [South, North, West, East]),
            (West, [West, East, North, South]),
        ];
        for (facing, row) in expected {
            assert_eq!(landmark_dir(facing, Front), row[0], "{facing} front");
            assert_eq!(landmark_dir(facing, Back), row[1], "{facing} back");
            assert_eq!(landmark_dir(facing, Right), row[2], "{facing} right");
            assert_eq!(landmark_dir(facing, Left), row[3], "{facing} left");
        }
    }

    #[test]
    fn infer_facing_inverts_landmark_dir_on_all_pairs() {
        for facing in CardinalDirection::ALL {
            for relation in Relation::ALL {
                assert_eq!(
                    infer_facing(landmark_dir(facing, relation), relation),
                    facing
                );
            }
        }
    }

    #[test]
    fn infer_facing_examples() {
        assert_eq!(infer_facing(East, Back), West);
        assert_eq!(infer_facing(West, Left), North);
        assert_eq!(infer_facing(North, Front), North);
    }

    #[test]
    fn rotation_group_laws() {
        for d in CardinalDirection::ALL {
            assert_eq!(d.cw90().cw90().cw90().cw90(), d);
            assert_eq!(d.ccw90(), d.cw90().cw90().cw90());
            assert_eq!(d.opposite().opposite(), d);
        }
    }

    #[test]
    fn antipodal_symmetry_of_abs_dir() {
        for dx in -4..=4 {
            for dy in -4..=4 {
                let v = GridVector::new(dx, dy);
                if let Ok(dir) = abs_dir(v) {
                    assert_eq!(abs_dir(-v), Ok(dir.opposite()));
                }
            }
        }
    }

    #[test]
    fn solve_two_cue_scene() {
        // User between a landmark due north (front) and one due west (left).
        let problem = OrientationProblem {
            user_pos: Coord::new(4, 4),
            cues: vec![
                cue(Front, "restaurant_5", 4, 5),
                cue(Left, "Taipei_Main_Station_Exit_S3", 3, 4),
            ],
        };
        assert_eq!(solve(&problem), Ok(North));
    }

    #[test]
    fn solve_four_cue_scene() {
        let problem = OrientationProblem {
            user_pos: Coord::new(8, 5),
            cues: vec![
                cue(Front, "drink_shop_4", 7, 5),
                cue(Back, "bar_1", 9, 5),
                cue(Left, "bakery_3", 8, 4),
                cue(Right, "bar_2", 8, 6),
            ],
        };
        assert_eq!(solve(&problem), Ok(West));
    }

    #[test]
    fn solve_rejects_contradictory_cues() {
        let problem = OrientationProblem {
            user_pos: Coord::new(3, 3),
            cues: vec![
                cue(Front, "Taipei_Main_Station_Exit_S3", 3, 4),
                cue(Back, "Taipei_Main_Station_Exit_S3", 3, 4),
            ],
        };
        match solve(&problem) {
            Err(OracleError::InconsistentCues { verdicts }) => {
                assert_eq!(verdicts.len(), 2);
                assert_eq!(verdicts[0].1, North);
                assert_eq!(verdicts[1].1, South);
            }
            other => panic!("expected inconsistent cues, got {other:?}"),
        }
    }

    #[test]
    fn solve_propagates_diagonal_with_offending_cue() {
        let problem = OrientationProblem {
            user_pos: Coord::new(3, 3),
            cues: vec![cue(Front, "corner_shop", 4, 4)],
        };
        match solve(&problem) {
            Err(OracleError::DiagonalAmbiguity { landmark_id, .. }) => {
                assert_eq!(landmark_id.as_deref(), Some("corner_shop"));
            }
            other => panic!("expected diagonal ambiguity, got {other:?}"),
        }
    }

    #[test]
    fn solve_rejects_empty_problem() {
        let problem = OrientationProblem {
            user_pos: Coord::new(0, 0),
            cues: vec![],
        };
        assert_eq!(solve(&problem), Err(OracleError::EmptyProblem));
    }

    #[test]
    fn solve_is_permutation_invariant() {
        let cues = vec![
            cue(Front, "a", 7, 5),
            cue(Back, "b", 9, 5),
            cue(Left, "c", 8, 4),
            cue(Right, "d", 8, 6),
        ];
        // All 24 orderings of the four cues give the same facing.
        let mut orders = Vec::new();
        permute(&mut cues.clone(), 0, &mut orders);
        for order in orders {
            let problem = OrientationProblem {
                user_pos: Coord::new(8, 5),
                cues: order,
            };
            assert_eq!(solve(&problem), Ok(West));
        }
    }

    fn permute(items: &mut Vec<Cue>, k: usize, out: &mut Vec<Vec<Cue>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, out);
            items.swap(k, i);
        }
    }
}
