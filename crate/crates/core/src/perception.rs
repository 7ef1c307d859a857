//! Simulated detector over world snapshots and the text feedback it renders.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Pose;
use crate::world::WorldState;

pub const NO_QUERY: &str = "no objects requested";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub object: String,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub name: String,
    pub matches: Vec<Match>,
}

impl QueryResult {
    pub fn seen(&self) -> bool {
        !self.matches.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub results: Vec<QueryResult>,
}

impl DetectionReport {
    pub fn is_seen(&self, name: &str) -> bool {
        self.results.iter().any(|r| r.name == name && r.seen())
    }

    pub fn matches(&self) -> impl Iterator<Item = &Match> {
        self.results.iter().flat_map(|r| r.matches.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOfView {
    pub origin: Pose,
    /// Radians either side of the origin's heading.
    pub half_angle: f64,
}

impl FieldOfView {
    fn covers(&self, p: &Pose) -> bool {
        let dx = p.x - self.origin.x;
        let dy = p.y - self.origin.y;
        if dx.hypot(dy) < 1e-9 {
            return true;
        }
        let mut diff = dy.atan2(dx) - self.origin.yaw;
        while diff >= PI {
            diff -= 2.0 * PI;
        }
        while diff < -PI {
            diff += 2.0 * PI;
        }
        diff.abs() <= self.half_angle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub probability: f64,
    pub seed: u64,
}

impl Dropout {
    fn drops(&self, object: &str) -> bool {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in object.bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ h);
        rng.random::<f64>() < self.probability
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisibilityPolicy {
    pub hide_inside_closed: bool,
    pub blocklist: BTreeSet<String>,
    pub fov: Option<FieldOfView>,
    pub dropout: Option<Dropout>,
}

impl Default for VisibilityPolicy {
    fn default() -> Self {
        Self {
            hide_inside_closed: true,
            blocklist: BTreeSet::new(),
            fov: None,
            dropout: None,
        }
    }
}

impl VisibilityPolicy {
    pub fn visible(&self, snapshot: &WorldState, object: &str) -> bool {
        let Some(obj) = snapshot.objects.get(object) else {
            return false;
        };
        if self.hide_inside_closed && snapshot.is_enclosed(object) {
            return false;
        }
        if self.blocklist.contains(object) {
            return false;
        }
        if self.fov.is_some_and(|f| !f.covers(&obj.pose)) {
            return false;
        }
        !self.dropout.is_some_and(|d| d.drops(object))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{0}` is neither an object nor a category")]
pub struct UnknownName(pub String);

/// Match each queried name against visible objects. A category or kind
/// matches every visible member, in world declaration order.
pub fn detect(
    snapshot: &WorldState,
    query: &[String],
    policy: &VisibilityPolicy,
) -> Result<DetectionReport, UnknownName> {
    let vocab = snapshot.vocabulary();
    let mut results = Vec::with_capacity(query.len());
    for name in query {
        let members = if vocab.is_object(name) {
            None
        } else {
            Some(vocab.categories.get(name).ok_or_else(|| UnknownName(name.clone()))?)
        };
        let matches = snapshot
            .objects
            .iter()
            .filter(|(n, _)| match members {
                None => *n == name,
                Some(m) => m.contains(*n),
            })
            .filter(|(n, _)| policy.visible(snapshot, n))
            .map(|(n, o)| Match {
                object: n.clone(),
                pose: o.pose,
            })
            .collect();
        results.push(QueryResult {
            name: name.clone(),
            matches,
        });
    }
    Ok(DetectionReport { results })
}

pub fn fmt_coord(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Canonical feedback sentences joined by `; `.
pub fn describe(report: &DetectionReport) -> String {
    if report.results.is_empty() {
        return NO_QUERY.to_string();
    }
    report
        .results
        .iter()
        .map(|r| match r.matches.as_slice() {
            [] => format!("cannot find {}", r.name),
            [m] => {
                let p = &m.pose;
                format!(
                    "found {} at ({}, {}, {})",
                    m.object,
                    fmt_coord(p.x),
                    fmt_coord(p.y),
                    fmt_coord(p.z)
                )
            }
            many => {
                let names: Vec<&str> = many.iter().map(|m| m.object.as_str()).collect();
                format!("found {} items matching {}: {}", many.len(), r.name, names.join(", "))
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// One clause of rendered feedback, recovered from text.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Found { object: String, position: [f64; 3] },
    Missing { name: String },
    Several { name: String, candidates: Vec<String> },
}

/// Inverse of [`describe`]; clauses that do not follow the canonical
/// sentences are skipped.
pub fn parse_observations(text: &str) -> Vec<Observation> {
    text.split("; ").filter_map(parse_clause).collect()
}

fn parse_clause(clause: &str) -> Option<Observation> {
    let clause = clause.trim();
    if let Some(name) = clause.strip_prefix("cannot find ") {
        return Some(Observation::Missing {
            name: name.trim().to_string(),
        });
    }
    let rest = clause.strip_prefix("found ")?;
    if let Some((head, list)) = rest.split_once(": ") {
        let (_, name) = head.split_once(" items matching ")?;
        return Some(Observation::Several {
            name: name.to_string(),
            candidates: list.split(", ").map(str::to_string).collect(),
        });
    }
    let (object, coords) = rest.split_once(" at (")?;
    let coords = coords.strip_suffix(')')?;
    let v: Vec<f64> = coords.split(", ").map(|c| c.parse().ok()).collect::<Option<_>>()?;
    let position: [f64; 3] = v.try_into().ok()?;
    Some(Observation::Found {
        object: object.to_string(),
        position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::bundled_world;

    fn q(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_match_on_table() {
        let w = bundled_world("apartment").unwrap();
        let r = detect(w.state(), &q(&["orange"]), &VisibilityPolicy::default()).unwrap();
        assert!(r.is_seen("orange"));
        assert_eq!(describe(&r), "found orange at (1.20, 0.40, 0.75)");
    }

    #[test]
    fn enclosed_object_is_missed() {
        let w = bundled_world("apartment").unwrap().relocate("coke", "cupboard", None).unwrap();
        let r = detect(w.state(), &q(&["coke"]), &VisibilityPolicy::default()).unwrap();
        assert!(!r.is_seen("coke"));
        assert_eq!(describe(&r), "cannot find coke");
    }

    #[test]
    fn category_lists_members() {
        let w = bundled_world("apartment").unwrap();
        let r = detect(w.state(), &q(&["drink"]), &VisibilityPolicy::default()).unwrap();
        assert_eq!(describe(&r), "found 2 items matching drink: coke, 7up");
    }

    #[test]
    fn unknown_name_rejected() {
        let w = bundled_world("apartment").unwrap();
        assert_eq!(
            detect(w.state(), &q(&["unicorn"]), &VisibilityPolicy::default()).unwrap_err(),
            UnknownName("unicorn".into())
        );
    }

    #[test]
    fn blocklist_and_fov() {
        let w = bundled_world("apartment").unwrap();
        let mut policy = VisibilityPolicy::default();
        policy.blocklist.insert("apple".into());
        let r = detect(w.state(), &q(&["fruit"]), &policy).unwrap();
        assert_eq!(describe(&r), "found 2 items matching fruit: orange, banana");

        let facing_away = VisibilityPolicy {
            fov: Some(FieldOfView {
                origin: Pose::new(1.2, -0.3, 0.0, -PI / 2.0),
                half_angle: 0.5,
            }),
            ..VisibilityPolicy::default()
        };
        let r = detect(w.state(), &q(&["orange"]), &facing_away).unwrap();
        assert!(!r.is_seen("orange"));
    }

    #[test]
    fn dropout_is_deterministic() {
        let w = bundled_world("apartment_xl").unwrap();
        let policy = VisibilityPolicy {
            dropout: Some(Dropout {
                probability: 0.5,
                seed: 3,
            }),
            ..VisibilityPolicy::default()
        };
        let names: Vec<String> = w.state().objects.keys().cloned().collect();
        let a = describe(&detect(w.state(), &names, &policy).unwrap());
        let b = describe(&detect(w.state(), &names, &policy).unwrap());
        assert_eq!(a, b);
        assert!(a.contains("cannot find"));
        assert!(a.contains("found"));
    }

    #[test]
    fn empty_query() {
        assert_eq!(describe(&DetectionReport::default()), NO_QUERY);
    }

    #[test]
    fn observations_invert_describe() {
        let w = bundled_world("apartment").unwrap();
        let r = detect(w.state(), &q(&["orange", "drink", "cup"]), &VisibilityPolicy::default()).unwrap();
        let obs = parse_observations(&describe(&r));
        assert_eq!(
            obs[0],
            Observation::Found {
                object: "orange".into(),
                position: [1.2, 0.4, 0.75]
            }
        );
        assert_eq!(
            obs[2],
            Observation::Several {
                name: "cup".into(),
                candidates: q(&["blue_cup", "red_cup"])
            }
        );
        assert!(parse_observations(NO_QUERY).is_empty());
    }
}
