//! Binary reachability oracle backed by a sampled roadmap.
//!
//! The robot body is a sphere of radius `margin`; obstacles are inflated by
//! that margin and every roadmap edge is checked with an exact
//! segment-vs-box slab test. A score of 1 therefore always comes with a
//! collision-free polyline; a 0 may be a miss of the sampler.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Pose;
use crate::geometry::{Aabb, Point3};
use crate::world::WorldState;

/// Binary feasibility signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum FeasibilityScore {
    Infeasible,
    Feasible,
}

impl FeasibilityScore {
    pub fn value(self) -> u8 {
        match self {
            FeasibilityScore::Infeasible => 0,
            FeasibilityScore::Feasible => 1,
        }
    }

    pub fn is_feasible(self) -> bool {
        self == FeasibilityScore::Feasible
    }
}

impl From<bool> for FeasibilityScore {
    fn from(b: bool) -> Self {
        if b {
            FeasibilityScore::Feasible
        } else {
            FeasibilityScore::Infeasible
        }
    }
}

impl From<FeasibilityScore> for u8 {
    fn from(s: FeasibilityScore) -> u8 {
        s.value()
    }
}

impl TryFrom<u8> for FeasibilityScore {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(FeasibilityScore::Infeasible),
            1 => Ok(FeasibilityScore::Feasible),
            _ => Err(format!("feasibility must be 0 or 1, got {v}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachParams {
    pub n_samples: usize,
    pub connect_radius: f64,
    pub seed: u64,
    /// Radius of the swept robot sphere; obstacles are inflated by it.
    pub margin: f64,
    /// Effector height used for the start point above the robot base.
    pub effector_height: f64,
    /// Upper limit of the sampled workspace.
    pub max_effector_height: f64,
    /// Pre-grasp offset above an object's pose.
    pub grasp_clearance: f64,
}

impl Default for ReachParams {
    fn default() -> Self {
        Self {
            n_samples: 500,
            connect_radius: 1.0,
            seed: 7,
            margin: 0.25,
            effector_height: 1.0,
            max_effector_height: 1.5,
            grasp_clearance: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeasibilityError {
    #[error("n_samples must be at least 1")]
    NoSamples,
    #[error("connect_radius must be positive")]
    BadRadius,
    #[error("rejection sampling exhausted after {attempts} attempts ({accepted} of {wanted} samples)")]
    SamplingExhausted {
        attempts: usize,
        accepted: usize,
        wanted: usize,
    },
}

/// Free-space description the roadmap is built over.
#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub region: Aabb,
    /// Raw obstacle boxes, not yet inflated.
    pub obstacles: Vec<Aabb>,
}

impl Workspace {
    /// Furniture footprints as obstacles; the region is the world bounds
    /// capped at the reachable height.
    pub fn from_snapshot(snapshot: &WorldState, params: &ReachParams) -> Workspace {
        let mut region = snapshot.bounds;
        region.max.z = region.max.z.min(params.max_effector_height);
        Workspace {
            region,
            obstacles: snapshot.locations.values().map(|l| l.footprint).collect(),
        }
    }
}

/// Immutable roadmap answering reachability queries.
#[derive(Debug, Clone)]
pub struct ReachGraph {
    nodes: Vec<Point3>,
    adjacency: Vec<Vec<(usize, f64)>>,
    component: Vec<usize>,
    inflated: Vec<Aabb>,
    region: Aabb,
    params: ReachParams,
}

pub fn build_graph(snapshot: &WorldState, params: &ReachParams) -> Result<ReachGraph, FeasibilityError> {
    build_graph_in(&Workspace::from_snapshot(snapshot, params), params)
}

pub fn build_graph_in(workspace: &Workspace, params: &ReachParams) -> Result<ReachGraph, FeasibilityError> {
    if params.n_samples == 0 {
        return Err(FeasibilityError::NoSamples);
    }
    if params.connect_radius.is_nan() || params.connect_radius <= 0.0 {
        return Err(FeasibilityError::BadRadius);
    }
    let inflated: Vec<Aabb> = workspace
        .obstacles
        .iter()
        .map(|b| b.inflate(params.margin))
        .collect();
    let region = workspace.region;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let max_attempts = 100 * params.n_samples;
    let mut nodes = Vec::with_capacity(params.n_samples);
    let mut attempts = 0;
    while nodes.len() < params.n_samples {
        if attempts >= max_attempts {
            return Err(FeasibilityError::SamplingExhausted {
                attempts,
                accepted: nodes.len(),
                wanted: params.n_samples,
            });
        }
        attempts += 1;
        let p = Point3::new(
            sample_axis(&mut rng, region.min.x, region.max.x),
            sample_axis(&mut rng, region.min.y, region.max.y),
            sample_axis(&mut rng, region.min.z, region.max.z),
        );
        if point_free(&inflated, &p) {
            nodes.push(p);
        }
    }

    let r2 = params.connect_radius * params.connect_radius;
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let d2 = nodes[i].distance_sq(&nodes[j]);
            if d2 <= r2 && segment_free(&inflated, &nodes[i], &nodes[j]) {
                let d = d2.sqrt();
                adjacency[i].push((j, d));
                adjacency[j].push((i, d));
            }
        }
    }
    let component = label_components(&adjacency);
    Ok(ReachGraph {
        nodes,
        adjacency,
        component,
        inflated,
        region,
        params: *params,
    })
}

fn sample_axis(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn point_free(inflated: &[Aabb], p: &Point3) -> bool {
    !inflated.iter().any(|b| b.contains(p))
}

fn segment_free(inflated: &[Aabb], a: &Point3, b: &Point3) -> bool {
    !inflated.iter().any(|bx| bx.intersects_segment(a, b))
}

fn label_components(adjacency: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let mut label = vec![usize::MAX; adjacency.len()];
    let mut next = 0;
    let mut stack = Vec::new();
    for root in 0..adjacency.len() {
        if label[root] != usize::MAX {
            continue;
        }
        label[root] = next;
        stack.push(root);
        while let Some(u) = stack.pop() {
            for &(v, _) in &adjacency[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    label
}

impl ReachGraph {
    pub fn nodes(&self) -> &[Point3] {
        &self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().map(|&(j, _)| j)
    }

    pub fn params(&self) -> &ReachParams {
        &self.params
    }

    /// Obstacles after inflation by the safety margin.
    pub fn inflated_obstacles(&self) -> &[Aabb] {
        &self.inflated
    }

    pub fn region(&self) -> &Aabb {
        &self.region
    }

    fn query_point_ok(&self, p: &Point3) -> bool {
        self.region.contains(p) && point_free(&self.inflated, p)
    }

    fn attach(&self, p: &Point3) -> Vec<(usize, f64)> {
        let r2 = self.params.connect_radius * self.params.connect_radius;
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| {
                let d2 = n.distance_sq(p);
                (d2 <= r2 && segment_free(&self.inflated, p, n)).then(|| (i, d2.sqrt()))
            })
            .collect()
    }

    fn direct(&self, a: &Point3, b: &Point3) -> bool {
        a.distance(b) <= self.params.connect_radius && segment_free(&self.inflated, a, b)
    }

    /// 1 iff a collision-free polyline through the roadmap joins the points.
    pub fn get_score(&self, start: &Point3, target: &Point3) -> FeasibilityScore {
        if !self.query_point_ok(start) || !self.query_point_ok(target) {
            return FeasibilityScore::Infeasible;
        }
        if self.direct(start, target) {
            return FeasibilityScore::Feasible;
        }
        let from = self.attach(start);
        if from.is_empty() {
            return FeasibilityScore::Infeasible;
        }
        let to = self.attach(target);
        let reachable = from.iter().any(|&(a, _)| {
            to.iter()
                .any(|&(b, _)| self.component[a] == self.component[b])
        });
        reachable.into()
    }

    /// Shortest roadmap path including both query points; `None` iff the score is 0.
    pub fn shortest_path(&self, start: &Point3, target: &Point3) -> Option<Vec<Point3>> {
        if !self.query_point_ok(start) || !self.query_point_ok(target) {
            return None;
        }
        let n = self.nodes.len();
        let (src, dst) = (n, n + 1);
        let from = self.attach(start);
        let to = self.attach(target);
        let direct = self.direct(start, target).then(|| start.distance(target));

        let mut dist = vec![f64::INFINITY; n + 2];
        let mut prev = vec![usize::MAX; n + 2];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(QueueItem { cost: 0.0, node: src });
        while let Some(QueueItem { cost, node }) = heap.pop() {
            if cost > dist[node] || node == dst {
                continue;
            }
            let edges: Vec<(usize, f64)> = if node == src {
                from.iter()
                    .copied()
                    .chain(direct.map(|d| (dst, d)))
                    .collect()
            } else {
                let mut e = self.adjacency[node].clone();
                if let Some(&(_, d)) = to.iter().find(|&&(i, _)| i == node) {
                    e.push((dst, d));
                }
                e
            };
            for (next, w) in edges {
                let c = cost + w;
                if c < dist[next] {
                    dist[next] = c;
                    prev[next] = node;
                    heap.push(QueueItem { cost: c, node: next });
                }
            }
        }
        if !dist[dst].is_finite() {
            return None;
        }
        let mut path = vec![*target];
        let mut at = prev[dst];
        while at != src {
            path.push(self.nodes[at]);
            at = prev[at];
        }
        path.push(*start);
        path.reverse();
        Some(path)
    }
}

#[derive(Debug, PartialEq)]
struct QueueItem {
    cost: f64,
    node: usize,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Effector position the query starts from: the robot base lifted to
/// effector height.
pub fn effector_start(base: &Pose, params: &ReachParams) -> Point3 {
    Point3::new(base.x, base.y, params.effector_height)
}

/// Pre-grasp point above an object.
pub fn grasp_target(object: &Pose, params: &ReachParams) -> Point3 {
    Point3::new(object.x, object.y, object.z + params.grasp_clearance)
}
