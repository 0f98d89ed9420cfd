//! Discrete grid environments: named landmarks on an integer grid.
//!
//! Environments are immutable after load and safe to share across threads.
//! The on-disk format is a single JSON document that round-trips byte-exact
//! through [`GridEnvironment::to_json`].

use crate::oracle::CardinalDirection;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Integer grid cell; x grows East, y grows North.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub x: i32,
    pub y: i32,
}

impl Coord {
    pub fn new(x: i32, y: i32) -> Self {
        Coord { x, y }
    }

    /// The neighboring cell one unit step towards `dir`.
    pub fn step(self, dir: CardinalDirection) -> Coord {
        let (dx, dy) = dir.unit_step();
        Coord::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

// Serialized as a two-element array `[x, y]`.
impl Serialize for Coord {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (self.x, self.y).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Coord {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (x, y) = <(i32, i32)>::deserialize(deserializer)?;
        Ok(Coord { x, y })
    }
}

/// A named point of interest on the grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: String,
    pub position: Coord,
    /// Display surface per language tag, e.g. `{"en": "drink shop 4", "zh-TW": "飲料店4"}`.
    #[serde(rename = "names")]
    pub display_names: BTreeMap<String, String>,
    pub category: String,
}

impl Landmark {
    pub fn display_name(&self, language: &str) -> Option<&str> {
        self.display_names.get(language).map(String::as_str)
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("environment parse failure: {0}")]
    Parse(String),
    #[error("environment {env}: invalid dimensions {width}x{height}")]
    InvalidDimensions {
        env: String,
        width: i32,
        height: i32,
    },
    #[error("environment {env}: duplicate landmark id {id}")]
    DuplicateId { env: String, id: String },
    #[error("environment {env}: landmarks {first} and {second} share position {at}")]
    DuplicatePosition {
        env: String,
        first: String,
        second: String,
        at: Coord,
    },
    #[error("environment {env}: landmark {id} at {at} is outside the {width}x{height} grid")]
    OutOfBounds {
        env: String,
        id: String,
        at: Coord,
        width: i32,
        height: i32,
    },
    #[error("position {at} is outside the grid")]
    PositionOutOfBounds { at: Coord },
    #[error("unknown landmark id {id}")]
    UnknownLandmark { id: String },
    #[error("landmark {id} has no display name for language {language}")]
    MissingDisplayName { id: String, language: String },
    #[error("unknown built-in environment {0}")]
    UnknownBuiltin(String),
}

fn default_dimension() -> i32 {
    10
}

#[derive(Serialize, Deserialize)]
struct EnvironmentFile {
    id: String,
    #[serde(default = "default_dimension")]
    width: i32,
    #[serde(default = "default_dimension")]
    height: i32,
    landmarks: Vec<Landmark>,
}

/// A validated environment: landmarks indexed by id and by position.
#[derive(Clone, Debug)]
pub struct GridEnvironment {
    pub id: String,
    pub width: i32,
    pub height: i32,
    pub landmarks: Vec<Landmark>,
    by_id: BTreeMap<String, usize>,
    by_pos: BTreeMap<(i32, i32), usize>,
}

impl PartialEq for GridEnvironment {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.width == other.width
            && self.height == other.height
            && self.landmarks == other.landmarks
    }
}

impl GridEnvironment {
    /// Build and validate an environment from parts.
    pub fn new(
        id: String,
        width: i32,
        height: i32,
        landmarks: Vec<Landmark>,
    ) -> Result<Self, GridError> {
        if width <= 0 || height <= 0 {
            return Err(GridError::InvalidDimensions {
                env: id,
                width,
                height,
            });
        }
        let mut by_id = BTreeMap::new();
        let mut by_pos = BTreeMap::new();
        for (idx, lm) in landmarks.iter().enumerate() {
            if lm.position.x < 0
                || lm.position.x >= width
                || lm.position.y < 0
                || lm.position.y >= height
            {
                return Err(GridError::OutOfBounds {
                    env: id,
                    id: lm.id.clone(),
                    at: lm.position,
                    width,
                    height,
                });
            }
            if let Some(prev) = by_id.insert(lm.id.clone(), idx) {
                let _ = prev;
                return Err(GridError::DuplicateId {
                    env: id,
                    id: lm.id.clone(),
                });
            }
            if let Some(prev) = by_pos.insert((lm.position.x, lm.position.y), idx) {
                return Err(GridError::DuplicatePosition {
                    env: id,
                    first: landmarks[prev].id.clone(),
                    second: lm.id.clone(),
                    at: lm.position,
                });
            }
        }
        Ok(GridEnvironment {
            id,
            width,
            height,
            landmarks,
            by_id,
            by_pos,
        })
    }

    /// Parse and validate an environment document.
    pub fn from_json(source: &str) -> Result<Self, GridError> {
        let file: EnvironmentFile =
            serde_json::from_str(source).map_err(|e| GridError::Parse(e.to_string()))?;
        GridEnvironment::new(file.id, file.width, file.height, file.landmarks)
    }

    /// Canonical serialization; `from_json(to_json(env))` round-trips to an
    /// equal environment and shipped files are stored in exactly this form:
    /// one landmark per line.
    pub fn to_json(&self) -> String {
        fn quote(s: &str) -> String {
            serde_json::to_string(s).expect("string serializes")
        }
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!("  \"id\": {},\n", quote(&self.id)));
        out.push_str(&format!("  \"width\": {},\n", self.width));
        out.push_str(&format!("  \"height\": {},\n", self.height));
        out.push_str("  \"landmarks\": [\n");
        for (i, lm) in self.landmarks.iter().enumerate() {
            let names = lm
                .display_names
                .iter()
                .map(|(k, v)| format!("{}: {}", quote(k), quote(v)))
                .collect::<Vec<_>>()
                .join(", ");
            out.push_str(&format!(
                "    {{\"id\": {}, \"position\": [{}, {}], \"names\": {{{}}}, \"category\": {}}}{}\n",
                quote(&lm.id),
                lm.position.x,
                lm.position.y,
                names,
                quote(&lm.category),
                if i + 1 == self.landmarks.len() { "" } else { "," }
            ));
        }
        out.push_str("  ]\n}\n");
        out
    }

    pub fn contains(&self, at: Coord) -> bool {
        at.x >= 0 && at.x < self.width && at.y >= 0 && at.y < self.height
    }

    pub fn landmark(&self, id: &str) -> Option<&Landmark> {
        self.by_id.get(id).map(|&idx| &self.landmarks[idx])
    }

    pub fn landmark_at(&self, at: Coord) -> Option<&Landmark> {
        self.by_pos.get(&(at.x, at.y)).map(|&idx| &self.landmarks[idx])
    }

    pub fn require_landmark(&self, id: &str) -> Result<&Landmark, GridError> {
        self.landmark(id).ok_or_else(|| GridError::UnknownLandmark {
            id: id.to_string(),
        })
    }

    pub fn display_name(&self, id: &str, language: &str) -> Result<&str, GridError> {
        let lm = self.require_landmark(id)?;
        lm.display_name(language)
            .ok_or_else(|| GridError::MissingDisplayName {
                id: id.to_string(),
                language: language.to_string(),
            })
    }

    /// Landmarks in the four cardinal neighbor cells of `at`; directions
    /// whose cell is empty are absent from the map.
    pub fn neighbors(
        &self,
        at: Coord,
    ) -> Result<BTreeMap<CardinalDirection, &Landmark>, GridError> {
        if !self.contains(at) {
            return Err(GridError::PositionOutOfBounds { at });
        }
        let mut out = BTreeMap::new();
        for dir in CardinalDirection::ALL {
            if let Some(lm) = self.landmark_at(at.step(dir)) {
                out.insert(dir, lm);
            }
        }
        Ok(out)
    }
}

/// Names of the environments shipped with the crate.
pub const BUILTIN_ENVIRONMENTS: [&str; 2] = ["gongguan", "taipei_station"];

/// Load one of the shipped environment files.
pub fn builtin_environment(name: &str) -> Result<GridEnvironment, GridError> {
    let source = match name {
        "gongguan" => include_str!("../data/environments/gongguan.json"),
        "taipei_station" => include_str!("../data/environments/taipei_station.json"),
        other => return Err(GridError::UnknownBuiltin(other.to_string())),
    };
    GridEnvironment::from_json(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::CardinalDirection::*;

    fn landmark(id: &str, x: i32, y: i32) -> Landmark {
        Landmark {
            id: id.to_string(),
            position: Coord::new(x, y),
            display_names: BTreeMap::from([
                ("en".to_string(), id.replace('_', " ")),
                ("zh-TW".to_string(), format!("{id}店")),
            ]),
            category: "shop".to_string(),
        }
    }

    #[test]
    fn load_two_landmark_document() {
        let doc = r#"{
            "id": "station",
            "width": 10,
            "height": 10,
            "landmarks": [
                {"id": "Taipei_Main_Station_Exit_S2", "position": [4, 4], "names": {"en": "Taipei Main Station Exit S2"}, "category": "exit"},
                {"id": "restaurant_5", "position": [4, 5], "names": {"en": "restaurant 5"}, "category": "restaurant"}
            ]
        }"#;
        let env = GridEnvironment::from_json(doc).unwrap();
        assert_eq!(env.landmarks.len(), 2);
        assert_eq!(
            env.landmark("restaurant_5").unwrap().position,
            Coord::new(4, 5)
        );
        assert_eq!(
            env.landmark_at(Coord::new(4, 4)).unwrap().id,
            "Taipei_Main_Station_Exit_S2"
        );
    }

    #[test]
    fn empty_environment_is_valid() {
        let env = GridEnvironment::new("empty".into(), 10, 10, vec![]).unwrap();
        assert!(env.neighbors(Coord::new(5, 5)).unwrap().is_empty());
    }

    #[test]
    fn duplicate_position_is_rejected() {
        let err = GridEnvironment::new(
            "dup".into(),
            10,
            10,
            vec![landmark("a", 3, 3), landmark("b", 3, 3)],
        )
        .unwrap_err();
        match err {
            GridError::DuplicatePosition { first, second, at, .. } => {
                assert_eq!(first, "a");
                assert_eq!(second, "b");
                assert_eq!(at, Coord::new(3, 3));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let err = GridEnvironment::new(
            "dup".into(),
            10,
            10,
            vec![landmark("a", 3, 3), landmark("a", 4, 3)],
        )
        .unwrap_err();
        assert!(matches!(err, GridError::DuplicateId { .. }));
    }

    #[test]
    fn out_of_bounds_landmark_is_rejected() {
        let err =
            GridEnvironment::new("oob".into(), 10, 10, vec![landmark("a", 10, 3)]).unwrap_err();
        assert!(matches!(err, GridError::OutOfBounds { .. }));
    }

    #[test]
    fn neighbors_partial_map() {
        let env = builtin_environment("taipei_station").unwrap();
        let n = env.neighbors(Coord::new(3, 3)).unwrap();
        assert_eq!(n[&North].id, "Taipei_Main_Station_Exit_S3");
        assert_eq!(n[&West].id, "Taipei_Main_Station_Exit_K7");
        assert_eq!(n[&East].id, "sports_store_1");
    }

    #[test]
    fn neighbors_full_map() {
        let env = builtin_environment("taipei_station").unwrap();
        let n = env.neighbors(Coord::new(8, 5)).unwrap();
        assert_eq!(n.len(), 4);
        assert_eq!(n[&West].id, "drink_shop_4");
        assert_eq!(n[&East].id, "bar_1");
        assert_eq!(n[&South].id, "bakery_3");
        assert_eq!(n[&North].id, "bar_2");
    }

    #[test]
    fn neighbors_rejects_out_of_bounds_query() {
        let env = builtin_environment("gongguan").unwrap();
        assert!(matches!(
            env.neighbors(Coord::new(10, 0)),
            Err(GridError::PositionOutOfBounds { .. })
        ));
    }

    #[test]
    fn neighbors_are_unit_steps() {
        for name in BUILTIN_ENVIRONMENTS {
            let env = builtin_environment(name).unwrap();
            for lm in &env.landmarks {
                let neighbors = env.neighbors(lm.position).unwrap();
                assert!(neighbors.len() <= 4);
                for (dir, other) in neighbors {
                    let d = crate::oracle::delta(lm.position, other.position);
                    assert_eq!((d.dx, d.dy), dir.unit_step());
                    assert_eq!(d.dx.abs() + d.dy.abs(), 1);
                }
            }
        }
    }

    #[test]
    fn builtin_files_round_trip_bit_exact() {
        for (name, source) in [
            (
                "gongguan",
                include_str!("../data/environments/gongguan.json"),
            ),
            (
                "taipei_station",
                include_str!("../data/environments/taipei_station.json"),
            ),
        ] {
            let env = builtin_environment(name).unwrap();
            assert_eq!(env.to_json(), source, "{name} not in canonical form");
            let reloaded = GridEnvironment::from_json(&env.to_json()).unwrap();
            assert_eq!(reloaded, env);
        }
    }

    #[test]
    fn lookups_by_id_and_position_are_inverse() {
        for name in BUILTIN_ENVIRONMENTS {
            let env = builtin_environment(name).unwrap();
            for lm in &env.landmarks {
                assert_eq!(env.landmark(&lm.id).unwrap(), lm);
                assert_eq!(env.landmark_at(lm.position).unwrap(), lm);
            }
        }
    }

    #[test]
    fn dimensions_default_to_ten() {
        let doc = r#"{"id": "bare", "landmarks": []}"#;
        let env = GridEnvironment::from_json(doc).unwrap();
        assert_eq!((env.width, env.height), (10, 10));
    }

    #[test]
    fn builtin_environments_have_both_languages_and_ten_by_ten() {
        for name in BUILTIN_ENVIRONMENTS {
            let env = builtin_environment(name).unwrap();
            assert_eq!((env.width, env.height), (10, 10));
            for lm in &env.landmarks {
                assert!(lm.display_name("en").is_some(), "{} missing en", lm.id);
                assert!(lm.display_name("zh-TW").is_some(), "{} missing zh-TW", lm.id);
            }
        }
    }
}
