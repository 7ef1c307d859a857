//! Shared helpers for integration tests. Nothing here calls into the
//! reachability code under test.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Box3 = [[f64; 3]; 2];

/// Reachability by breadth-first search over a uniform grid.
///
/// A cell counts as blocked only when the whole closed cube lies inside one
/// obstacle, so every point outside the obstacles sits in a free cell and any
/// continuous free path maps onto a chain of face-adjacent free cells. The
/// oracle therefore never reports 0 for a pair a real free path joins.
pub struct GridOracle {
    origin: [f64; 3],
    region_max: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    /// Component id per cell; 0 for blocked cells.
    label: Vec<u32>,
}

fn inside(b: &Box3, lo: [f64; 3], hi: [f64; 3]) -> bool {
    (0..3).all(|i| lo[i] >= b[0][i] && hi[i] <= b[1][i])
}

impl GridOracle {
    pub fn new(region: Box3, obstacles: &[Box3], cell: f64) -> Self {
        let mut dims = [0usize; 3];
        for i in 0..3 {
            dims[i] = (((region[1][i] - region[0][i]) / cell).ceil() as usize).max(1);
        }
        let n = dims[0] * dims[1] * dims[2];
        let mut blocked = vec![false; n];
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let lo = [
                        region[0][0] + x as f64 * cell,
                        region[0][1] + y as f64 * cell,
                        region[0][2] + z as f64 * cell,
                    ];
                    let hi = [lo[0] + cell, lo[1] + cell, lo[2] + cell];
                    blocked[(z * dims[1] + y) * dims[0] + x] = obstacles.iter().any(|b| inside(b, lo, hi));
                }
            }
        }
        let mut label = vec![0u32; n];
        let mut next = 0u32;
        let mut queue = std::collections::VecDeque::new();
        for start in 0..n {
            if blocked[start] || label[start] != 0 {
                continue;
            }
            next += 1;
            label[start] = next;
            queue.push_back(start);
            while let Some(c) = queue.pop_front() {
                let x = c % dims[0];
                let y = (c / dims[0]) % dims[1];
                let z = c / (dims[0] * dims[1]);
                let mut visit = |nx: usize, ny: usize, nz: usize| {
                    let j = (nz * dims[1] + ny) * dims[0] + nx;
                    if !blocked[j] && label[j] == 0 {
                        label[j] = next;
                        queue.push_back(j);
                    }
                };
                if x > 0 {
                    visit(x - 1, y, z);
                }
                if x + 1 < dims[0] {
                    visit(x + 1, y, z);
                }
                if y > 0 {
                    visit(x, y - 1, z);
                }
                if y + 1 < dims[1] {
                    visit(x, y + 1, z);
                }
                if z > 0 {
                    visit(x, y, z - 1);
                }
                if z + 1 < dims[2] {
                    visit(x, y, z + 1);
                }
            }
        }
        GridOracle {
            origin: region[0],
            region_max: region[1],
            cell,
            dims,
            label,
        }
    }

    fn cell_of(&self, p: [f64; 3]) -> Option<usize> {
        let mut idx = [0usize; 3];
        for i in 0..3 {
            if p[i] < self.origin[i] || p[i] > self.region_max[i] {
                return None;
            }
            idx[i] = (((p[i] - self.origin[i]) / self.cell).floor() as usize).min(self.dims[i] - 1);
        }
        Some((idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0])
    }

    pub fn reachable(&self, a: [f64; 3], b: [f64; 3]) -> bool {
        match (self.cell_of(a), self.cell_of(b)) {
            (Some(i), Some(j)) => self.label[i] != 0 && self.label[i] == self.label[j],
            _ => false,
        }
    }
}

pub fn inflate(b: &Box3, m: f64) -> Box3 {
    [
        [b[0][0] - m, b[0][1] - m, b[0][2] - m],
        [b[1][0] + m, b[1][1] + m, b[1][2] + m],
    ]
}

pub fn point_in(b: &Box3, p: [f64; 3]) -> bool {
    (0..3).all(|i| p[i] >= b[0][i] && p[i] <= b[1][i])
}

/// Seeded workspace: a 4 x 4 x 1.5 m region with 5 to 15 boxes.
pub struct RandomWorkspace {
    pub region: Box3,
    pub obstacles: Vec<Box3>,
}

pub fn random_workspace(seed: u64) -> RandomWorkspace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = [[0.0, 0.0, 0.0], [4.0, 4.0, 1.5]];
    let n = rng.random_range(5..=15);
    let obstacles = (0..n)
        .map(|_| {
            let size = [
                rng.random_range(0.1..1.2),
                rng.random_range(0.1..1.2),
                rng.random_range(0.1..1.0),
            ];
            let lo = [
                rng.random_range(0.0..4.0 - size[0]),
                rng.random_range(0.0..4.0 - size[1]),
                rng.random_range(0.0..1.5 - size[2]),
            ];
            [lo, [lo[0] + size[0], lo[1] + size[1], lo[2] + size[2]]]
        })
        .collect();
    RandomWorkspace { region, obstacles }
}

/// Query points outside every inflated obstacle.
pub fn free_points(ws: &RandomWorkspace, margin: f64, count: usize, seed: u64) -> Vec<[f64; 3]> {
    let inflated: Vec<Box3> = ws.obstacles.iter().map(|b| inflate(b, margin)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = [
            rng.random_range(ws.region[0][0]..ws.region[1][0]),
            rng.random_range(ws.region[0][1]..ws.region[1][1]),
            rng.random_range(ws.region[0][2]..ws.region[1][2]),
        ];
        if !inflated.iter().any(|b| point_in(b, p)) {
            out.push(p);
        }
    }
    out
}

/// Six thin slabs forming a closed hollow cube around `c`.
pub fn sealed_shell(c: [f64; 3], inner: f64, t: f64) -> Vec<Box3> {
    let mut out = Vec::new();
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut lo = [c[0] - inner - t, c[1] - inner - t, c[2] - inner - t];
            let mut hi = [c[0] + inner + t, c[1] + inner + t, c[2] + inner + t];
            let face = c[axis] + sign * (inner + t / 2.0);
            lo[axis] = face - t / 2.0;
            hi[axis] = face + t / 2.0;
            out.push([lo, hi]);
        }
    }
    out
}

pub mod gen;
