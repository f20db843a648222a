//! Reference implementations and random inputs shared by the integration
//! tests. Nothing here calls into the code under test except to build
//! inputs.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use sharp_core::scene::{Aabb, Cell, ObjectId, ObjectInstance, OccupancyGrid, SceneModel};

pub const CATEGORIES: &[&str] = &[
    "chair", "table", "sofa", "lamp", "sink", "stove", "kettle", "cup", "shelf", "bed", "desk", "cabinet",
];

pub fn cube(id: ObjectId, category: &str, c: [f64; 3], half: f64) -> ObjectInstance {
    ObjectInstance {
        id,
        category: category.to_string(),
        centroid: c,
        aabb: Aabb::new(
            [c[0] - half, c[1] - half, c[2] - half],
            [c[0] + half, c[1] + half, c[2] + half],
        ),
        mask_ref: None,
    }
}

/// `n` objects with scattered ids. Centroids sit on a 0.5 m lattice so
/// that equal distances, and hence id tie-breaks, are common.
pub fn random_scene(rng: &mut impl Rng, n: usize) -> SceneModel {
    let mut ids: Vec<ObjectId> = (0..(3 * n as ObjectId)).collect();
    ids.shuffle(rng);
    let objects = ids[..n]
        .iter()
        .map(|&id| {
            let c = [
                rng.gen_range(0..6) as f64 * 0.5,
                rng.gen_range(0..6) as f64 * 0.5,
                rng.gen_range(0..3) as f64 * 0.5,
            ];
            cube(id, CATEGORIES[rng.gen_range(0..CATEGORIES.len())], c, 0.1)
        })
        .collect();
    SceneModel::new("random", objects, None).expect("valid random scene")
}

/// O(n^2) k nearest neighbours: sort everything by (distance, id).
pub fn brute_knn(scene: &SceneModel, id: ObjectId, k: usize) -> Vec<ObjectId> {
    let me = scene.objects.iter().find(|o| o.id == id).expect("id in scene");
    let mut all: Vec<(f64, ObjectId)> = scene
        .objects
        .iter()
        .filter(|o| o.id != id)
        .map(|o| {
            let d: f64 = (0..3).map(|a| (o.centroid[a] - me.centroid[a]).powi(2)).sum();
            (d, o.id)
        })
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Elements a modulation must touch: each mention, its neighbours and the
/// edges to them, unioned over all mentions.
pub fn dgm_oracle(
    scene: &SceneModel,
    k: usize,
    mentions: &[ObjectId],
) -> (BTreeSet<ObjectId>, BTreeSet<(ObjectId, ObjectId)>) {
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for &i in mentions {
        nodes.insert(i);
        for j in brute_knn(scene, i, k) {
            nodes.insert(j);
            edges.insert((i, j));
        }
    }
    (nodes, edges)
}

/// A grid scene with one target box and random clutter.
pub struct RouteCase {
    pub scene: SceneModel,
    pub target: ObjectId,
    pub footprint: BTreeSet<Cell>,
}

pub const ROUTE_CELL: f64 = 0.5;

pub fn random_route_case(rng: &mut impl Rng) -> RouteCase {
    let rows = rng.gen_range(10..=40);
    let cols = rng.gen_range(10..=40);
    let density = rng.gen_range(0.0..=0.25);
    let h = rng.gen_range(1..=3usize);
    let w = rng.gen_range(1..=3usize);
    let r0 = rng.gen_range(0..=rows - h);
    let c0 = rng.gen_range(0..=cols - w);
    let footprint: BTreeSet<Cell> = (r0..r0 + h).flat_map(|r| (c0..c0 + w).map(move |c| (r, c))).collect();
    let blocked: Vec<bool> = (0..rows * cols)
        .map(|i| footprint.contains(&(i / cols, i % cols)) || rng.gen_bool(density))
        .collect();
    let grid = OccupancyGrid::new(ROUTE_CELL, [0.0, 0.0], rows, cols, blocked).unwrap();
    let inset = 0.05;
    let min = [c0 as f64 * ROUTE_CELL + inset, r0 as f64 * ROUTE_CELL + inset, 0.0];
    let max = [
        (c0 + w) as f64 * ROUTE_CELL - inset,
        (r0 + h) as f64 * ROUTE_CELL - inset,
        0.8,
    ];
    let target = ObjectInstance {
        id: 7,
        category: "cabinet".into(),
        centroid: [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0, 0.4],
        aabb: Aabb::new(min, max),
        mask_ref: None,
    };
    let scene = SceneModel::new("grid", vec![target], Some(grid)).unwrap();
    RouteCase {
        scene,
        target: 7,
        footprint,
    }
}

impl RouteCase {
    pub fn grid(&self) -> &OccupancyGrid {
        self.scene.occupancy.as_ref().unwrap()
    }

    /// Free cells touching the footprint, diagonals included.
    pub fn goal_cells(&self) -> BTreeSet<Cell> {
        let g = self.grid();
        let mut out = BTreeSet::new();
        for &(r, c) in &self.footprint {
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= g.rows as i64 || nc >= g.cols as i64 {
                        continue;
                    }
                    let cell = (nr as usize, nc as usize);
                    if !self.footprint.contains(&cell) && !g.is_blocked(cell) {
                        out.insert(cell);
                    }
                }
            }
        }
        out
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        let g = self.grid();
        (0..g.rows)
            .flat_map(|r| (0..g.cols).map(move |c| (r, c)))
            .filter(|c| !g.is_blocked(*c))
            .collect()
    }
}

/// 4-connected breadth-first distance from `start` to the nearest goal.
pub fn bfs_len(grid: &OccupancyGrid, start: Cell, goals: &BTreeSet<Cell>) -> Option<usize> {
    let mut dist = vec![usize::MAX; grid.rows * grid.cols];
    let mut queue = VecDeque::new();
    dist[start.0 * grid.cols + start.1] = 0;
    queue.push_back(start);
    while let Some((r, c)) = queue.pop_front() {
        let d = dist[r * grid.cols + c];
        if goals.contains(&(r, c)) {
            return Some(d);
        }
        let mut next = Vec::new();
        if r > 0 {
            next.push((r - 1, c));
        }
        if c > 0 {
            next.push((r, c - 1));
        }
        if r + 1 < grid.rows {
            next.push((r + 1, c));
        }
        if c + 1 < grid.cols {
            next.push((r, c + 1));
        }
        for n in next {
            let i = n.0 * grid.cols + n.1;
            if !grid.is_blocked(n) && dist[i] == usize::MAX {
                dist[i] = d + 1;
                queue.push_back(n);
            }
        }
    }
    None
}
