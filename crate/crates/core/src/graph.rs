//! KNN spatial scene graph and dynamic graph modulation.
//!
//! Nodes are scene objects. Each node has directed edges to its `k` nearest
//! neighbours by centroid distance (ties broken by lower id). When a plan
//! step mentions an object, that node, its neighbours and the connecting
//! edges are scaled by a modulation weight so later prompts rank them first.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{ObjectId, ObjectInstance, SceneModel};

/// Default neighbourhood size.
pub const DEFAULT_K: usize = 2;
/// Default modulation weight.
pub const DEFAULT_W_L: f64 = 2.0;
/// Centroid distance below which two objects are related as `near`.
pub const NEAR_THRESHOLD: f64 = 0.15;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("k must be positive")]
    ZeroK,
    #[error("scene has no objects")]
    EmptyScene,
    #[error("unknown object id {0}")]
    UnknownId(ObjectId),
    #[error("modulation weight must be positive and finite, got {0}")]
    BadWeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationKind {
    LeftOf,
    RightOf,
    Above,
    Below,
    InFrontOf,
    Behind,
    Near,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::LeftOf => "left-of",
            RelationKind::RightOf => "right-of",
            RelationKind::Above => "above",
            RelationKind::Below => "below",
            RelationKind::InFrontOf => "in-front-of",
            RelationKind::Behind => "behind",
            RelationKind::Near => "near",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialRelation {
    pub kind: RelationKind,
    pub distance: f64,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Where `b` sits relative to `a`, by the dominant axis of `b - a`.
/// Axis ties resolve in x, y, z order.
pub fn classify_relation(a: &ObjectInstance, b: &ObjectInstance) -> SpatialRelation {
    let d = sub(b.centroid, a.centroid);
    let distance = dist2(b.centroid, a.centroid).sqrt();
    if distance < NEAR_THRESHOLD {
        return SpatialRelation {
            kind: RelationKind::Near,
            distance,
        };
    }
    let abs = [d[0].abs(), d[1].abs(), d[2].abs()];
    let axis = if abs[0] >= abs[1] && abs[0] >= abs[2] {
        0
    } else if abs[1] >= abs[2] {
        1
    } else {
        2
    };
    let positive = d[axis] > 0.0;
    let kind = match (axis, positive) {
        (0, true) => RelationKind::RightOf,
        (0, false) => RelationKind::LeftOf,
        (1, true) => RelationKind::InFrontOf,
        (1, false) => RelationKind::Behind,
        (_, true) => RelationKind::Above,
        (_, false) => RelationKind::Below,
    };
    SpatialRelation { kind, distance }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub object: ObjectInstance,
    pub weight: f64,
    /// Unscaled feature vector; see [`GraphNode::scaled_feature`].
    pub feature: Option<Vec<f64>>,
}

impl GraphNode {
    /// The feature vector scaled by the node's current weight.
    pub fn scaled_feature(&self) -> Option<Vec<f64>> {
        self.feature
            .as_ref()
            .map(|f| f.iter().map(|v| v * self.weight).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    /// Relation of the source object to the destination object, so that
    /// edge `(i, j)` reads as "i <kind> j".
    pub relation: SpatialRelation,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    k: usize,
    nodes: BTreeMap<ObjectId, GraphNode>,
    edges: BTreeMap<(ObjectId, ObjectId), GraphEdge>,
    /// Neighbour lists ordered by (distance, id).
    neighbors: BTreeMap<ObjectId, Vec<ObjectId>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    id: ObjectId,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// k smallest (distance, id) candidates via a bounded max-heap.
fn k_nearest(scene: &SceneModel, from: &ObjectInstance, k: usize) -> Vec<ObjectId> {
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    for other in &scene.objects {
        if other.id == from.id {
            continue;
        }
        let cand = Candidate {
            d2: dist2(from.centroid, other.centroid),
            id: other.id,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if heap.peek().is_some_and(|worst| cand < *worst) {
            heap.pop();
            heap.push(cand);
        }
    }
    heap.into_sorted_vec().into_iter().map(|c| c.id).collect()
}

impl SceneGraph {
    pub fn build(scene: &SceneModel, k: usize) -> Result<Self, GraphError> {
        if k == 0 {
            return Err(GraphError::ZeroK);
        }
        if scene.objects.is_empty() {
            return Err(GraphError::EmptyScene);
        }
        let nodes: BTreeMap<_, _> = scene
            .objects
            .iter()
            .map(|o| {
                (
                    o.id,
                    GraphNode {
                        object: o.clone(),
                        weight: 1.0,
                        feature: None,
                    },
                )
            })
            .collect();
        let mut neighbors = BTreeMap::new();
        let mut edges = BTreeMap::new();
        for obj in &scene.objects {
            let near = k_nearest(scene, obj, k);
            for &j in &near {
                let other = &nodes[&j].object;
                edges.insert(
                    (obj.id, j),
                    GraphEdge {
                        relation: classify_relation(other, obj),
                        weight: 1.0,
                    },
                );
            }
            neighbors.insert(obj.id, near);
        }
        Ok(SceneGraph {
            k,
            nodes,
            edges,
            neighbors,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nodes(&self) -> &BTreeMap<ObjectId, GraphNode> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<(ObjectId, ObjectId), GraphEdge> {
        &self.edges
    }

    pub fn node(&self, id: ObjectId) -> Option<&GraphNode> {
        self.nodes.get(&id)
    }

    pub fn node_weight(&self, id: ObjectId) -> Option<f64> {
        self.nodes.get(&id).map(|n| n.weight)
    }

    pub fn edge_weight(&self, src: ObjectId, dst: ObjectId) -> Option<f64> {
        self.edges.get(&(src, dst)).map(|e| e.weight)
    }

    /// Neighbours of `id`, nearest first.
    pub fn neighbors(&self, id: ObjectId) -> &[ObjectId] {
        self.neighbors.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Attaches a feature vector that is scaled together with the node weight.
    pub fn set_feature(&mut self, id: ObjectId, feature: Vec<f64>) -> Result<(), GraphError> {
        let node = self.nodes.get_mut(&id).ok_or(GraphError::UnknownId(id))?;
        node.feature = Some(feature);
        Ok(())
    }

    /// Scales every mentioned node, its neighbours and the connecting edges
    /// by `w_l`. Each element is scaled at most once per call even when it
    /// is reachable from several mentions.
    pub fn modulate(
        &mut self,
        mentioned_ids: &[ObjectId],
        w_l: f64,
        step_index: usize,
    ) -> Result<ModulationRecord, GraphError> {
        if !(w_l.is_finite() && w_l > 0.0) {
            return Err(GraphError::BadWeight(w_l));
        }
        if let Some(id) = mentioned_ids.iter().find(|id| !self.nodes.contains_key(id)) {
            return Err(GraphError::UnknownId(*id));
        }
        let mentioned: BTreeSet<ObjectId> = mentioned_ids.iter().copied().collect();
        let mut touched_nodes = BTreeSet::new();
        let mut touched_edges = BTreeSet::new();
        for &i in &mentioned {
            touched_nodes.insert(i);
            for &j in self.neighbors(i) {
                touched_nodes.insert(j);
                touched_edges.insert((i, j));
            }
        }
        for id in &touched_nodes {
            if let Some(node) = self.nodes.get_mut(id) {
                node.weight *= w_l;
            }
        }
        for key in &touched_edges {
            if let Some(edge) = self.edges.get_mut(key) {
                edge.weight *= w_l;
            }
        }
        Ok(ModulationRecord {
            step_index,
            mentioned_ids: mentioned.into_iter().collect(),
            w_l,
            touched_nodes,
            touched_edges,
        })
    }

    pub fn reset_weights(&mut self) {
        self.nodes.values_mut().for_each(|n| n.weight = 1.0);
        self.edges.values_mut().for_each(|e| e.weight = 1.0);
    }

    /// Node ids ordered by descending weight, ties by ascending id.
    pub fn ranked_ids(&self) -> Vec<ObjectId> {
        let mut ids: Vec<(f64, ObjectId)> = self.nodes.iter().map(|(id, n)| (n.weight, *id)).collect();
        ids.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        ids.into_iter().map(|(_, id)| id).collect()
    }

    /// Text rendering for a prompt: at most `budget` node lines ranked by
    /// weight, then the edges among the retained nodes.
    pub fn serialize_for_prompt(&self, budget: usize) -> String {
        let kept: Vec<ObjectId> = self.ranked_ids().into_iter().take(budget).collect();
        let kept_set: BTreeSet<ObjectId> = kept.iter().copied().collect();
        let label = |id: ObjectId| format!("{}#{}", self.nodes[&id].object.category, id);
        let mut out = String::new();
        for &id in &kept {
            let _ = writeln!(out, "{} (w={})", label(id), self.nodes[&id].weight);
        }
        for &i in &kept {
            let mut dsts: Vec<ObjectId> = self
                .neighbors(i)
                .iter()
                .copied()
                .filter(|j| kept_set.contains(j))
                .collect();
            dsts.sort_unstable();
            for j in dsts {
                let edge = &self.edges[&(i, j)];
                let _ = writeln!(out, "{} {} {}", label(i), edge.relation.kind.as_str(), label(j));
            }
        }
        out
    }

    pub fn dump(&self) -> GraphDump {
        GraphDump {
            nodes: self
                .nodes
                .iter()
                .map(|(id, n)| DumpNode {
                    id: *id,
                    category: n.object.category.clone(),
                    weight: n.weight,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|((src, dst), e)| DumpEdge {
                    src: *src,
                    dst: *dst,
                    kind: e.relation.kind,
                    weight: e.weight,
                    distance: e.relation.distance,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationRecord {
    pub step_index: usize,
    pub mentioned_ids: Vec<ObjectId>,
    pub w_l: f64,
    pub touched_nodes: BTreeSet<ObjectId>,
    pub touched_edges: BTreeSet<(ObjectId, ObjectId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpNode {
    pub id: ObjectId,
    pub category: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpEdge {
    pub src: ObjectId,
    pub dst: ObjectId,
    pub kind: RelationKind,
    pub weight: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub nodes: Vec<DumpNode>,
    pub edges: Vec<DumpEdge>,
}
