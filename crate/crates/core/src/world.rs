//! Deterministic simulated household.
//!
//! A [`World`] owns a [`WorldState`] (what perception and feasibility see),
//! the registered faults and the transition parameters. Actions are
//! transactional: a failed step returns the state unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{is_symbol, wrap_angle, ActionStep, Pose, SkillVerb, Vocabulary, HOME};
use crate::geometry::{Aabb, Point3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    /// Top-centre of the footprint.
    pub pose: Pose,
    pub container: bool,
    pub open: bool,
    pub footprint: Aabb,
    /// Where `go` leaves the robot.
    pub approach: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub pose: Pose,
    pub category: String,
    /// Base name shared by interchangeable instances (`cup` for `blue_cup`).
    pub kind: String,
    /// Container the object is stored in.
    pub inside: Option<String>,
    /// Surface location the object rests on.
    pub at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Robot {
    pub base: Pose,
    pub holding: Option<String>,
    /// Location the robot last navigated to.
    pub at: Option<String>,
}

/// Immutable view of a world; what perception and feasibility query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub name: String,
    pub bounds: Aabb,
    pub locations: IndexMap<String, Location>,
    pub objects: IndexMap<String, Object>,
    pub robot: Robot,
}

impl WorldState {
    /// Symbols of this world. Instance kinds (`cup`) are listed among the
    /// categories so queries and extraction treat them as group names.
    pub fn vocabulary(&self) -> Vocabulary {
        let mut categories = self.kinds();
        for (name, obj) in &self.objects {
            categories
                .entry(obj.category.clone())
                .or_default()
                .insert(name.clone());
        }
        Vocabulary {
            objects: self.objects.keys().cloned().collect(),
            locations: self.locations.keys().cloned().collect(),
            containers: self
                .locations
                .iter()
                .filter(|(_, l)| l.container)
                .map(|(n, _)| n.clone())
                .collect(),
            categories,
        }
    }

    /// Instance groups keyed by kind, for kinds that differ from the instance name.
    pub fn kinds(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut kinds: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (name, obj) in &self.objects {
            if obj.kind != *name {
                kinds.entry(obj.kind.clone()).or_default().insert(name.clone());
            }
        }
        kinds
    }

    pub fn object(&self, name: &str) -> Option<&Object> {
        self.objects.get(name)
    }

    pub fn location(&self, name: &str) -> Option<&Location> {
        self.locations.get(name)
    }

    /// Whether the object sits inside a closed container.
    pub fn is_enclosed(&self, name: &str) -> bool {
        self.objects
            .get(name)
            .and_then(|o| o.inside.as_ref())
            .and_then(|c| self.locations.get(c))
            .is_some_and(|l| l.container && !l.open)
    }

    /// Checks containment, bounds and reference integrity.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.locations.contains_key(HOME) {
            return Err("missing home".into());
        }
        if let Some(h) = &self.robot.holding {
            let obj = self.objects.get(h).ok_or_else(|| format!("holding unknown {h}"))?;
            if obj.inside.is_some() || obj.at.is_some() {
                return Err(format!("{h} is held and placed at once"));
            }
        }
        for (name, obj) in &self.objects {
            if !self.bounds.contains(&obj.pose.position()) {
                return Err(format!("{name} is out of bounds"));
            }
            if obj.inside.is_some() && obj.at.is_some() {
                return Err(format!("{name} is both inside and on a location"));
            }
            if let Some(c) = &obj.inside {
                let loc = self.locations.get(c).ok_or_else(|| format!("{name} inside unknown {c}"))?;
                if !loc.container || !loc.footprint.contains(&obj.pose.position()) {
                    return Err(format!("{name} is not within {c}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    FailOnce,
    FailAlways,
}

/// Forces matching steps to fail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub verb: SkillVerb,
    /// Matches the step's first argument; `None` matches any.
    #[serde(default)]
    pub arg: Option<String>,
    pub mode: FaultMode,
}

impl FaultSpec {
    fn matches(&self, step: &ActionStep) -> bool {
        self.verb == step.verb
            && self
                .arg
                .as_deref()
                .is_none_or(|a| step.first_arg() == Some(a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionEvent {
    pub step: ActionStep,
    pub outcome: Outcome,
    pub detail: String,
}

impl ExecutionEvent {
    fn done(step: &ActionStep, detail: impl Into<String>) -> Self {
        Self {
            step: step.clone(),
            outcome: Outcome::Done,
            detail: detail.into(),
        }
    }

    fn failed(step: &ActionStep, detail: impl Into<String>) -> Self {
        let detail = detail.into();
        debug_assert!(!detail.is_empty());
        Self {
            step: step.clone(),
            outcome: Outcome::Failed,
            detail,
        }
    }

    pub fn is_done(&self) -> bool {
        self.outcome == Outcome::Done
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    /// Planar distance within which the robot can manipulate.
    pub reach_radius: f64,
    /// Gap between a footprint and its computed approach pose.
    pub approach_offset: f64,
    pub carry_height: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            reach_radius: 0.8,
            approach_offset: 0.5,
            carry_height: 0.9,
        }
    }
}

/// A simulated household owned by one session.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    state: WorldState,
    faults: Vec<FaultSpec>,
    params: WorldParams,
}

impl World {
    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn params(&self) -> &WorldParams {
        &self.params
    }

    pub fn faults(&self) -> &[FaultSpec] {
        &self.faults
    }

    /// Immutable copy for perception and feasibility queries.
    pub fn snapshot(&self) -> WorldState {
        self.state.clone()
    }

    pub fn vocabulary(&self) -> Vocabulary {
        self.state.vocabulary()
    }

    /// Register a fault; `fail_once` faults clear after their first trigger.
    pub fn inject_fault(&self, fault: FaultSpec) -> World {
        let mut next = self.clone();
        next.faults.push(fault);
        next
    }

    /// Execute one step. Failures are in-band and leave the state unchanged.
    pub fn apply_action(&self, step: &ActionStep) -> (World, ExecutionEvent) {
        if let Some(i) = self.faults.iter().position(|f| f.matches(step)) {
            let mut next = self.clone();
            if next.faults[i].mode == FaultMode::FailOnce {
                next.faults.remove(i);
            }
            return (next, ExecutionEvent::failed(step, format!("injected fault on {step}")));
        }
        let mut state = self.state.clone();
        match self.transition(&mut state, step) {
            Ok(detail) => {
                let next = World {
                    state,
                    faults: self.faults.clone(),
                    params: self.params,
                };
                (next, ExecutionEvent::done(step, detail))
            }
            Err(detail) => (self.clone(), ExecutionEvent::failed(step, detail)),
        }
    }

    fn transition(&self, s: &mut WorldState, step: &ActionStep) -> Result<String, String> {
        let arg = |i: usize| -> Result<&str, String> {
            step.args
                .get(i)
                .map(String::as_str)
                .ok_or_else(|| format!("{} is missing an argument", step.verb))
        };
        let rho = self.params.reach_radius;
        match step.verb {
            SkillVerb::Go => {
                let name = arg(0)?;
                let loc = s.locations.get(name).ok_or_else(|| format!("unknown location {name}"))?;
                s.robot.base = loc.approach;
                s.robot.at = Some(name.to_string());
                self.carry(s);
                Ok(format!("arrived at {name}"))
            }
            SkillVerb::Pick => {
                let name = arg(0)?;
                if let Some(h) = &s.robot.holding {
                    return Err(format!("already holding {h}"));
                }
                let obj = s.objects.get(name).ok_or_else(|| format!("unknown object {name}"))?;
                if s.is_enclosed(name) {
                    let c = obj.inside.as_deref().unwrap_or_default();
                    return Err(format!("{name} is inside closed {c}"));
                }
                let d = s.robot.base.position().planar_distance(&obj.pose.position());
                if d > rho {
                    return Err(format!("{name} is out of reach ({d:.2} m away)"));
                }
                let obj = s.objects.get_mut(name).expect("checked");
                obj.inside = None;
                obj.at = None;
                s.robot.holding = Some(name.to_string());
                self.carry(s);
                Ok(format!("holding {name}"))
            }
            SkillVerb::Place => {
                let name = arg(0)?;
                if s.robot.holding.as_deref() != Some(name) {
                    return Err(format!("not holding {name}"));
                }
                let loc_name = step
                    .args
                    .get(1)
                    .cloned()
                    .or_else(|| s.robot.at.clone())
                    .ok_or_else(|| format!("nowhere to place {name}; go to a location first"))?;
                let loc = s
                    .locations
                    .get(&loc_name)
                    .ok_or_else(|| format!("unknown location {loc_name}"))?;
                if loc.container && !loc.open {
                    return Err(format!("{loc_name} is closed"));
                }
                let pose = placement_pose(loc, &s.robot.base);
                let d = s.robot.base.position().planar_distance(&pose.position());
                if d > rho {
                    return Err(format!("{loc_name} is out of reach ({d:.2} m away)"));
                }
                let (inside, at, where_) = if loc.container {
                    (Some(loc_name.clone()), None, format!("in {loc_name}"))
                } else {
                    (None, Some(loc_name.clone()), format!("on {loc_name}"))
                };
                let obj = s.objects.get_mut(name).ok_or_else(|| format!("unknown object {name}"))?;
                obj.pose = pose;
                obj.inside = inside;
                obj.at = at;
                s.robot.holding = None;
                Ok(format!("placed {name} {where_}"))
            }
            SkillVerb::Open | SkillVerb::Close => {
                let name = arg(0)?;
                let loc = s.locations.get(name).ok_or_else(|| format!("unknown location {name}"))?;
                if !loc.container {
                    return Err(format!("{name} cannot be opened or closed"));
                }
                let d = loc.footprint.planar_distance(&s.robot.base.position());
                if d > rho {
                    return Err(format!("{name} is out of reach ({d:.2} m away)"));
                }
                let open = step.verb == SkillVerb::Open;
                let was = loc.open;
                s.locations.get_mut(name).expect("checked").open = open;
                let state = if open { "open" } else { "closed" };
                Ok(if was == open {
                    format!("{name} already {state}")
                } else {
                    format!("{name} {state}")
                })
            }
            SkillVerb::Search => {
                let name = arg(0)?;
                let obj = s.objects.get(name).ok_or_else(|| format!("unknown object {name}"))?;
                let yaw = face(&s.robot.base, &obj.pose.position());
                s.robot.base = Pose::new(s.robot.base.x, s.robot.base.y, 0.0, yaw);
                Ok(format!("looked towards {name}"))
            }
            SkillVerb::Turn => {
                let dir = arg(0)?;
                let b = s.robot.base;
                let yaw = match dir {
                    "left" => b.yaw + std::f64::consts::FRAC_PI_2,
                    "right" => b.yaw - std::f64::consts::FRAC_PI_2,
                    loc => {
                        let l = s.locations.get(loc).ok_or_else(|| format!("unknown direction {loc}"))?;
                        face(&b, &l.pose.position())
                    }
                };
                s.robot.base = Pose::new(b.x, b.y, 0.0, yaw);
                Ok(format!("turned {dir}"))
            }
        }
    }

    fn carry(&self, s: &mut WorldState) {
        if let Some(h) = s.robot.holding.clone() {
            let b = s.robot.base;
            if let Some(obj) = s.objects.get_mut(&h) {
                obj.pose = Pose::new(b.x, b.y, self.params.carry_height, 0.0);
            }
        }
    }

    /// Scenario scripting: the human moves an object to a location.
    pub fn relocate(&self, object: &str, location: &str, pose: Option<[f64; 3]>) -> Result<World, String> {
        let mut next = self.clone();
        let s = &mut next.state;
        let loc = s.locations.get(location).ok_or_else(|| format!("unknown location {location}"))?.clone();
        if !s.objects.contains_key(object) {
            return Err(format!("unknown object {object}"));
        }
        if s.robot.holding.as_deref() == Some(object) {
            s.robot.holding = None;
        }
        let pose = match pose {
            Some([x, y, z]) => Pose::new(x, y, z, 0.0),
            None => placement_pose(&loc, &loc.approach),
        };
        let obj = s.objects.get_mut(object).expect("checked");
        obj.pose = pose;
        if loc.container {
            obj.inside = Some(location.to_string());
            obj.at = None;
        } else {
            obj.inside = None;
            obj.at = Some(location.to_string());
        }
        next.state.check_invariants()?;
        Ok(next)
    }

    /// Scenario scripting: open or close a container without the robot.
    pub fn set_open(&self, location: &str, open: bool) -> Result<World, String> {
        let mut next = self.clone();
        let loc = next
            .state
            .locations
            .get_mut(location)
            .filter(|l| l.container)
            .ok_or_else(|| format!("{location} is not a container"))?;
        loc.open = open;
        Ok(next)
    }
}

fn face(from: &Pose, to: &Point3) -> f64 {
    (to.y - from.y).atan2(to.x - from.x)
}

/// Where an object ends up when placed at `loc` by a robot at `robot`:
/// the footprint point nearest the robot, inset towards the centre; on top
/// of surfaces, at mid-height inside containers.
pub fn placement_pose(loc: &Location, robot: &Pose) -> Pose {
    let fp = &loc.footprint;
    let c = fp.center();
    let near = fp.clamp(&Point3::new(robot.x, robot.y, c.z));
    let inset_x = (0.5 * (fp.max.x - fp.min.x)).min(0.1);
    let inset_y = (0.5 * (fp.max.y - fp.min.y)).min(0.1);
    let x = near.x.clamp(fp.min.x + inset_x, fp.max.x - inset_x);
    let y = near.y.clamp(fp.min.y + inset_y, fp.max.y - inset_y);
    let z = if loc.container { c.z } else { fp.max.z + 0.05 };
    Pose::new(round_cm(x), round_cm(y), round_cm(z), 0.0)
}

fn round_cm(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Conditions a finished task should leave true.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Goal {
    /// Object rests on or in the location.
    ObjectAt { object: String, location: String },
    /// Object inside the container, optionally with the container closed.
    ObjectInside {
        object: String,
        container: String,
        #[serde(default)]
        closed: bool,
    },
    RobotAt { location: String },
    Holding { object: String },
}

impl Goal {
    pub fn holds(&self, s: &WorldState) -> bool {
        match self {
            Goal::ObjectAt { object, location } => s.objects.get(object).is_some_and(|o| {
                o.at.as_deref() == Some(location) || o.inside.as_deref() == Some(location)
            }),
            Goal::ObjectInside {
                object,
                container,
                closed,
            } => {
                s.objects
                    .get(object)
                    .is_some_and(|o| o.inside.as_deref() == Some(container))
                    && (!closed || s.locations.get(container).is_some_and(|l| !l.open))
            }
            Goal::RobotAt { location } => s.robot.at.as_deref() == Some(location),
            Goal::Holding { object } => s.robot.holding.as_deref() == Some(object),
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::ObjectAt { object, location } => write!(f, "{object} at {location}"),
            Goal::ObjectInside {
                object,
                container,
                closed,
            } => {
                write!(f, "{object} in {container}")?;
                if *closed {
                    write!(f, " (closed)")?;
                }
                Ok(())
            }
            Goal::RobotAt { location } => write!(f, "robot at {location}"),
            Goal::Holding { object } => write!(f, "holding {object}"),
        }
    }
}

// ---------------------------------------------------------------------------
// World files

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    name: String,
    bounds: BoxFile,
    robot: RobotFile,
    #[serde(default)]
    params: WorldParams,
    locations: Vec<LocationFile>,
    objects: Vec<ObjectFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxFile {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotFile {
    /// x, y, yaw
    base: [f64; 3],
    holding: Option<String>,
    at: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocationFile {
    name: String,
    footprint: BoxFile,
    #[serde(default)]
    container: bool,
    #[serde(default)]
    open: bool,
    /// x, y, yaw
    approach: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectFile {
    name: String,
    category: String,
    kind: Option<String>,
    /// x, y, z
    pose: [f64; 3],
    inside: Option<String>,
    at: Option<String>,
}

/// Parse and validate a world document.
pub fn load_world(document: &str) -> Result<World, SchemaError> {
    let de = toml::Deserializer::parse(document).map_err(|e| SchemaError::new("$", e.to_string()))?;
    let file: WorldFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SchemaError::new(path, e.into_inner().to_string())
    })?;
    build_world(file)
}

fn to_box(b: &BoxFile, path: &str) -> Result<Aabb, SchemaError> {
    let bx = Aabb::new(b.min.into(), b.max.into());
    if !bx.is_well_formed() {
        return Err(SchemaError::new(path, "box min must not exceed max"));
    }
    Ok(bx)
}

fn check_name(name: &str, path: &str) -> Result<(), SchemaError> {
    if is_symbol(name) {
        Ok(())
    } else {
        Err(SchemaError::new(path, format!("`{name}` is not a lowercase whitespace-free name")))
    }
}

fn build_world(file: WorldFile) -> Result<World, SchemaError> {
    let bounds = to_box(&file.bounds, "bounds")?;
    let params = file.params;
    let mut locations = IndexMap::new();
    for (i, l) in file.locations.iter().enumerate() {
        let path = format!("locations[{i}]");
        check_name(&l.name, &format!("{path}.name"))?;
        let footprint = to_box(&l.footprint, &format!("{path}.footprint"))?;
        if !bounds.contains_box(&footprint) {
            return Err(SchemaError::new(format!("{path}.footprint"), "footprint leaves the world bounds"));
        }
        if l.open && !l.container {
            return Err(SchemaError::new(format!("{path}.open"), "only containers can be open"));
        }
        let c = footprint.center();
        let pose = Pose::new(c.x, c.y, footprint.max.z, 0.0);
        let approach = match l.approach {
            Some([x, y, yaw]) => Pose::new(x, y, 0.0, yaw),
            None => default_approach(&footprint, &bounds, params.approach_offset),
        };
        if !bounds.contains_planar(&approach.position()) {
            return Err(SchemaError::new(format!("{path}.approach"), "approach pose leaves the world bounds"));
        }
        let loc = Location {
            pose,
            container: l.container,
            open: l.open,
            footprint,
            approach,
        };
        if locations.insert(l.name.clone(), loc).is_some() {
            return Err(SchemaError::new(format!("{path}.name"), format!("duplicate location `{}`", l.name)));
        }
    }
    if !locations.contains_key(HOME) {
        return Err(SchemaError::new("locations", format!("missing required location `{HOME}`")));
    }

    let mut objects: IndexMap<String, Object> = IndexMap::new();
    for (i, o) in file.objects.iter().enumerate() {
        let path = format!("objects[{i}]");
        check_name(&o.name, &format!("{path}.name"))?;
        check_name(&o.category, &format!("{path}.category"))?;
        let kind = o.kind.clone().unwrap_or_else(|| o.name.clone());
        check_name(&kind, &format!("{path}.kind"))?;
        if locations.contains_key(&o.name) {
            return Err(SchemaError::new(format!("{path}.name"), "object name clashes with a location"));
        }
        let pose = Pose::new(o.pose[0], o.pose[1], o.pose[2], 0.0);
        if !bounds.contains(&pose.position()) {
            return Err(SchemaError::new(format!("{path}.pose"), "object placed outside the world bounds"));
        }
        if o.inside.is_some() && o.at.is_some() {
            return Err(SchemaError::new(path, "object cannot be both `inside` and `at`"));
        }
        if let Some(c) = &o.inside {
            let loc = locations
                .get(c)
                .filter(|l| l.container)
                .ok_or_else(|| SchemaError::new(format!("{path}.inside"), format!("`{c}` is not a container")))?;
            if !loc.footprint.contains(&pose.position()) {
                return Err(SchemaError::new(format!("{path}.pose"), format!("object is not within `{c}`")));
            }
        }
        if let Some(l) = &o.at {
            if !locations.contains_key(l) {
                return Err(SchemaError::new(format!("{path}.at"), format!("unknown location `{l}`")));
            }
        }
        let obj = Object {
            pose,
            category: o.category.clone(),
            kind,
            inside: o.inside.clone(),
            at: o.at.clone(),
        };
        if objects.insert(o.name.clone(), obj).is_some() {
            return Err(SchemaError::new(format!("{path}.name"), format!("duplicate object `{}`", o.name)));
        }
    }
    let object_names: BTreeSet<&String> = objects.keys().collect();
    for (i, o) in file.objects.iter().enumerate() {
        if object_names.contains(&o.category) || locations.contains_key(&o.category) {
            return Err(SchemaError::new(
                format!("objects[{i}].category"),
                format!("category `{}` clashes with an object or location name", o.category),
            ));
        }
        let kind = o.kind.as_ref().unwrap_or(&o.name);
        if kind != &o.name && (object_names.contains(kind) || locations.contains_key(kind)) {
            return Err(SchemaError::new(format!("objects[{i}].kind"), format!("kind `{kind}` clashes with a name")));
        }
    }

    let [x, y, yaw] = file.robot.base;
    let base = Pose::new(x, y, 0.0, yaw);
    if !bounds.contains_planar(&base.position()) {
        return Err(SchemaError::new("robot.base", "robot outside the world bounds"));
    }
    if let Some(at) = &file.robot.at {
        if !locations.contains_key(at) {
            return Err(SchemaError::new("robot.at", format!("unknown location `{at}`")));
        }
    }
    if let Some(h) = &file.robot.holding {
        let obj = objects
            .get_mut(h)
            .ok_or_else(|| SchemaError::new("robot.holding", format!("unknown object `{h}`")))?;
        obj.inside = None;
        obj.at = None;
        obj.pose = Pose::new(base.x, base.y, params.carry_height, 0.0);
    }
    let state = WorldState {
        name: file.name,
        bounds,
        locations,
        objects,
        robot: Robot {
            base,
            holding: file.robot.holding,
            at: file.robot.at,
        },
    };
    state
        .check_invariants()
        .map_err(|m| SchemaError::new("$", m))?;
    Ok(World {
        state,
        faults: Vec::new(),
        params,
    })
}

/// Approach pose on the side of the footprint facing the middle of the world.
fn default_approach(footprint: &Aabb, bounds: &Aabb, offset: f64) -> Pose {
    let c = footprint.center();
    let m = bounds.center();
    let (mut dx, mut dy) = (m.x - c.x, m.y - c.y);
    let norm = dx.hypot(dy);
    if norm < 1e-9 {
        (dx, dy) = (0.0, -1.0);
    } else {
        dx /= norm;
        dy /= norm;
    }
    let hx = 0.5 * (footprint.max.x - footprint.min.x);
    let hy = 0.5 * (footprint.max.y - footprint.min.y);
    let tx = if dx.abs() > 1e-9 { hx / dx.abs() } else { f64::INFINITY };
    let ty = if dy.abs() > 1e-9 { hy / dy.abs() } else { f64::INFINITY };
    let t = tx.min(ty) + offset;
    let x = (c.x + dx * t).clamp(bounds.min.x, bounds.max.x);
    let y = (c.y + dy * t).clamp(bounds.min.y, bounds.max.y);
    Pose::new(round_cm(x), round_cm(y), 0.0, wrap_angle((-dy).atan2(-dx)))
}

pub const APARTMENT: &str = include_str!("../data/worlds/apartment.world");
pub const APARTMENT_XL: &str = include_str!("../data/worlds/apartment_xl.world");

/// Bundled world by name (`apartment`, `apartment.world`, `apartment_xl`, ...).
pub fn bundled_world(name: &str) -> Option<World> {
    let stem = name.strip_suffix(".world").unwrap_or(name);
    let text = match stem {
        "apartment" => APARTMENT,
        "apartment_xl" => APARTMENT_XL,
        _ => return None,
    };
    Some(load_world(text).expect("bundled world is valid"))
}

/// Bundled world by name, or a world file on disk.
pub fn resolve_world(name_or_path: &str) -> Result<World, SchemaError> {
    if let Some(w) = bundled_world(name_or_path) {
        return Ok(w);
    }
    let text = std::fs::read_to_string(name_or_path)
        .map_err(|e| SchemaError::new("$", format!("cannot read world `{name_or_path}`: {e}")))?;
    load_world(&text)
}
