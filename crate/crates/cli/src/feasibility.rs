//! Query-time statistics for the reachability roadmap.

use std::time::Instant;

use planner_core::feasibility::effector_start;
use planner_core::geometry::Point3;
use planner_core::{build_graph, ReachParams, World};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchStats {
    pub world: String,
    pub n_samples: usize,
    pub nodes: usize,
    pub edges: usize,
    pub build_seconds: f64,
    pub queries: usize,
    pub feasible: usize,
    pub query_mean_seconds: f64,
    pub query_p95_seconds: f64,
    pub query_max_seconds: f64,
}

fn halton(mut i: usize, base: usize) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Targets spread over the world bounds by a Halton sequence, so runs are
/// repeatable without a random source.
pub fn query_targets(world: &World, params: &ReachParams, count: usize) -> Vec<Point3> {
    let b = world.state().bounds;
    let top = b.max.z.min(params.max_effector_height);
    (1..=count)
        .map(|i| {
            Point3::new(
                b.min.x + halton(i, 2) * (b.max.x - b.min.x),
                b.min.y + halton(i, 3) * (b.max.y - b.min.y),
                b.min.z + halton(i, 5) * (top - b.min.z),
            )
        })
        .collect()
}

pub fn bench_feasibility(world: &World, params: &ReachParams, queries: usize) -> Result<BenchStats, String> {
    let t = Instant::now();
    let graph = build_graph(world.state(), params).map_err(|e| e.to_string())?;
    let build_seconds = t.elapsed().as_secs_f64();
    let start = effector_start(&world.state().robot.base, params);
    let mut times = Vec::with_capacity(queries);
    let mut feasible = 0;
    for target in query_targets(world, params, queries) {
        let t = Instant::now();
        let score = graph.get_score(&start, &target);
        times.push(t.elapsed().as_secs_f64());
        feasible += usize::from(score.is_feasible());
    }
    times.sort_by(f64::total_cmp);
    let mean = if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 };
    let p95 = times
        .get(((0.95 * times.len() as f64).ceil() as usize).saturating_sub(1))
        .copied()
        .unwrap_or(0.0);
    Ok(BenchStats {
        world: world.state().name.clone(),
        n_samples: params.n_samples,
        nodes: graph.nodes().len(),
        edges: graph.edge_count(),
        build_seconds,
        queries,
        feasible,
        query_mean_seconds: mean,
        query_p95_seconds: p95,
        query_max_seconds: times.last().copied().unwrap_or(0.0),
    })
}
