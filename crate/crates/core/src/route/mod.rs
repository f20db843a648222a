//! Inter-step routes: parsing, pose simulation, grid planning and checks.
//!
//! Headings are quantized to multiples of 90 degrees with 0 facing +y and
//! left turns counterclockwise, so heading 90 faces -x.

mod astar;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{Aabb, Cell, ObjectId, ObjectInstance, OccupancyGrid, PlanStep, SceneModel};
use crate::text::match_category;

pub use astar::{astar_path, bfs_path_len};
pub use parse::{
    parse_fragments, parse_route, split_fragments, Fragment, MoveVerb, RouteClause, RouteGrammar, TurnDirection,
};

/// Distance kept from an object's box when stopping next to it.
pub const CLEARANCE_M: f64 = 0.2;
/// Half-angle of the cone counted as "straight ahead".
pub const AHEAD_HALF_ANGLE_DEG: f64 = 30.0;
/// Step length of a movement clause with neither target nor distance.
pub const DEFAULT_STRIDE_M: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("unknown object \"{0}\"")]
    UnknownObject(String),
    #[error("unknown object id {0}")]
    UnknownId(ObjectId),
    #[error("scene has no occupancy grid")]
    NoGrid,
    #[error("start position is outside the grid or blocked")]
    StartBlocked,
    #[error("no path to {0}")]
    Unreachable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Heading(u16);

impl Heading {
    pub const NORTH: Heading = Heading(0);

    pub fn new(degrees: u16) -> Option<Self> {
        (degrees.is_multiple_of(90) && degrees < 360).then_some(Heading(degrees))
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    /// Unit vector on the ground plane.
    pub fn direction(self) -> [f64; 2] {
        match self.0 {
            0 => [0.0, 1.0],
            90 => [-1.0, 0.0],
            180 => [0.0, -1.0],
            _ => [1.0, 0.0],
        }
    }

    fn from_cell_step(step: (i64, i64)) -> Self {
        match step {
            (1, 0) => Heading(0),
            (0, -1) => Heading(90),
            (-1, 0) => Heading(180),
            _ => Heading(270),
        }
    }

    pub fn turned(self, degrees: u16, direction: TurnDirection) -> Self {
        let delta = match direction {
            TurnDirection::Left => degrees % 360,
            TurnDirection::Right => (360 - degrees % 360) % 360,
        };
        Heading((self.0 + delta) % 360)
    }
}

impl TryFrom<u16> for Heading {
    type Error = String;

    fn try_from(v: u16) -> Result<Self, String> {
        Heading::new(v).ok_or_else(|| format!("heading must be one of 0, 90, 180, 270; got {v}"))
    }
}

impl From<Heading> for u16 {
    fn from(h: Heading) -> u16 {
        h.0
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPose {
    pub position: [f64; 2],
    pub heading: Heading,
}

impl AgentPose {
    pub fn new(x: f64, y: f64, heading: Heading) -> Self {
        AgentPose {
            position: [x, y],
            heading,
        }
    }
}

/// The free grid cell nearest the grid origin, facing +y. Without a grid
/// the agent starts at the scene origin.
pub fn default_start_pose(scene: &SceneModel) -> AgentPose {
    match &scene.occupancy {
        Some(grid) => match grid.nearest_free_cell(grid.origin) {
            Some(cell) => {
                let c = grid.cell_center(cell);
                AgentPose::new(c[0], c[1], Heading::NORTH)
            }
            None => AgentPose::new(grid.origin[0], grid.origin[1], Heading::NORTH),
        },
        None => AgentPose::new(0.0, 0.0, Heading::NORTH),
    }
}

fn expanded_footprint(aabb: &Aabb) -> ([f64; 2], [f64; 2]) {
    (
        [aabb.min[0] - CLEARANCE_M, aabb.min[1] - CLEARANCE_M],
        [aabb.max[0] + CLEARANCE_M, aabb.max[1] + CLEARANCE_M],
    )
}

fn inside(p: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> bool {
    p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1]
}

/// Entry point of the ray into the rectangle, if it is hit ahead of `p`.
fn ray_entry(p: [f64; 2], dir: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> Option<[f64; 2]> {
    let mut t_enter = 0.0f64;
    let mut t_exit = f64::INFINITY;
    for axis in 0..2 {
        if dir[axis] == 0.0 {
            if p[axis] < lo[axis] || p[axis] > hi[axis] {
                return None;
            }
        } else {
            let a = (lo[axis] - p[axis]) / dir[axis];
            let b = (hi[axis] - p[axis]) / dir[axis];
            t_enter = t_enter.max(a.min(b));
            t_exit = t_exit.min(a.max(b));
        }
    }
    (t_enter <= t_exit).then(|| [p[0] + t_enter * dir[0], p[1] + t_enter * dir[1]])
}

fn closest_point(p: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> [f64; 2] {
    [p[0].clamp(lo[0], hi[0]), p[1].clamp(lo[1], hi[1])]
}

fn planar_dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn xy(p: [f64; 3]) -> [f64; 2] {
    [p[0], p[1]]
}

/// Resolves a target phrase to the instance of its category nearest to
/// `from` (ties by lower id).
pub fn resolve_target<'a>(
    phrase: &str,
    scene: &'a SceneModel,
    from: [f64; 2],
) -> Result<&'a ObjectInstance, RouteError> {
    let category =
        match_category(phrase, &scene.categories()).ok_or_else(|| RouteError::UnknownObject(phrase.to_string()))?;
    scene
        .instances_of(&category)
        .min_by(|a, b| {
            planar_dist2(xy(a.centroid), from)
                .total_cmp(&planar_dist2(xy(b.centroid), from))
                .then(a.id.cmp(&b.id))
        })
        .ok_or(RouteError::UnknownObject(phrase.to_string()))
}

fn stop_next_to(pose: &AgentPose, target: &ObjectInstance, straight: bool, grid: Option<&OccupancyGrid>) -> [f64; 2] {
    let (lo, hi) = expanded_footprint(&target.aabb);
    let p = pose.position;
    let point = if inside(p, lo, hi) {
        p
    } else if straight {
        ray_entry(p, pose.heading.direction(), lo, hi).unwrap_or_else(|| closest_point(p, lo, hi))
    } else {
        closest_point(p, lo, hi)
    };
    let Some(grid) = grid else {
        return point;
    };
    if grid.cell_of(point).is_some_and(|c| grid.is_free(c)) {
        return point;
    }
    grid.adjacent_cells(&target.aabb)
        .into_iter()
        .map(|c| grid.cell_center(c))
        .min_by(|a, b| planar_dist2(*a, point).total_cmp(&planar_dist2(*b, point)))
        .unwrap_or(point)
}

/// Simulates one clause.
pub fn apply_clause(pose: &AgentPose, clause: &RouteClause, scene: &SceneModel) -> Result<AgentPose, RouteError> {
    match clause {
        RouteClause::Turn { degrees, direction } => Ok(AgentPose {
            position: pose.position,
            heading: pose.heading.turned(*degrees, *direction),
        }),
        RouteClause::Move {
            adverb,
            distance_m,
            target,
            ..
        } => {
            let target_obj = match target {
                Some(t) => Some(resolve_target(t, scene, pose.position)?),
                None => None,
            };
            let advance = |d: f64| {
                let dir = pose.heading.direction();
                AgentPose {
                    position: [pose.position[0] + d * dir[0], pose.position[1] + d * dir[1]],
                    heading: pose.heading,
                }
            };
            match (distance_m, target_obj) {
                (Some(d), _) => Ok(advance(*d)),
                (None, Some(obj)) => {
                    let straight = adverb.as_deref() == Some("straight ahead");
                    Ok(AgentPose {
                        position: stop_next_to(pose, obj, straight, scene.occupancy.as_ref()),
                        heading: pose.heading,
                    })
                }
                (None, None) => Ok(advance(DEFAULT_STRIDE_M)),
            }
        }
    }
}

/// Whether `point` lies within the straight-ahead cone of the pose.
pub fn is_ahead(pose: &AgentPose, point: [f64; 2]) -> bool {
    let v = [point[0] - pose.position[0], point[1] - pose.position[1]];
    let len = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if len == 0.0 {
        return true;
    }
    let d = pose.heading.direction();
    let cos = (v[0] * d[0] + v[1] * d[1]) / len;
    cos >= AHEAD_HALF_ANGLE_DEG.to_radians().cos() - 1e-12
}

fn start_cell(grid: &OccupancyGrid, p: [f64; 2]) -> Option<Cell> {
    match grid.cell_of(p) {
        Some(c) if grid.is_free(c) => Some(c),
        _ => grid.nearest_free_cell(p),
    }
}

/// Plans a grid route from `start` to a free cell next to the target and
/// compresses it into turn and move clauses.
pub fn plan_route(start: &AgentPose, target_id: ObjectId, scene: &SceneModel) -> Result<Vec<RouteClause>, RouteError> {
    let grid = scene.occupancy.as_ref().ok_or(RouteError::NoGrid)?;
    let target = scene.object(target_id).ok_or(RouteError::UnknownId(target_id))?;
    let from = grid
        .cell_of(start.position)
        .filter(|c| grid.is_free(*c))
        .ok_or(RouteError::StartBlocked)?;
    let goals = grid.adjacent_cells(&target.aabb);
    let path = astar_path(grid, from, &goals).ok_or_else(|| RouteError::Unreachable(target.category.clone()))?;
    Ok(compress_path(&path, start, grid, target))
}

fn compress_path(path: &[Cell], start: &AgentPose, grid: &OccupancyGrid, target: &ObjectInstance) -> Vec<RouteClause> {
    let mut runs: Vec<(Heading, usize)> = Vec::new();
    for w in path.windows(2) {
        let step = (w[1].0 as i64 - w[0].0 as i64, w[1].1 as i64 - w[0].1 as i64);
        let h = Heading::from_cell_step(step);
        match runs.last_mut() {
            Some((last, n)) if *last == h => *n += 1,
            _ => runs.push((h, 1)),
        }
    }
    let mut clauses = Vec::new();
    let mut pose = *start;
    let last = runs.len().saturating_sub(1);
    for (i, (h, n)) in runs.iter().enumerate() {
        let delta = (h.degrees() + 360 - pose.heading.degrees()) % 360;
        match delta {
            90 => clauses.push(RouteClause::turn(90, TurnDirection::Left)),
            180 => clauses.push(RouteClause::turn(180, TurnDirection::Left)),
            270 => clauses.push(RouteClause::turn(90, TurnDirection::Right)),
            _ => {}
        }
        pose.heading = *h;
        let distance = *n as f64 * grid.cell_size;
        let clause = if i == last {
            let ahead = is_ahead(&pose, xy(target.centroid));
            RouteClause::Move {
                verb: MoveVerb::Walk,
                adverb: ahead.then(|| "straight ahead".to_string()),
                distance_m: Some(distance),
                target: Some(target.category.clone()),
            }
        } else {
            RouteClause::Move {
                verb: MoveVerb::Walk,
                adverb: Some("forward".into()),
                distance_m: Some(distance),
                target: None,
            }
        };
        let dir = h.direction();
        pose.position = [
            pose.position[0] + distance * dir[0],
            pose.position[1] + distance * dir[1],
        ];
        clauses.push(clause);
    }
    clauses
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Ok,
    UnreachableTarget,
    DirectionInconsistent,
    UnknownObject,
    Unparsed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteCheckReport {
    pub step_index: usize,
    pub clauses: Vec<RouteClause>,
    pub final_pose: AgentPose,
    pub verdict: Verdict,
    pub detail: String,
}

/// Threads the agent pose through every step and checks each movement.
/// The first failing fragment of a step decides its verdict.
pub fn verify_route(steps: &[PlanStep], scene: &SceneModel, start: &AgentPose) -> Vec<RouteCheckReport> {
    verify_route_with(&RouteGrammar::default(), steps, scene, start)
}

pub fn verify_route_with(
    grammar: &RouteGrammar,
    steps: &[PlanStep],
    scene: &SceneModel,
    start: &AgentPose,
) -> Vec<RouteCheckReport> {
    let mut pose = *start;
    let mut reports = Vec::with_capacity(steps.len());
    for step in steps {
        let mut verdict = Verdict::Ok;
        let mut detail = String::new();
        let mut clauses = Vec::new();
        let fail = |v: Verdict, d: String, verdict: &mut Verdict, detail: &mut String| {
            if *verdict == Verdict::Ok {
                *verdict = v;
                *detail = d;
            }
        };
        for fragment in grammar.parse_fragments(&step.text) {
            let clause = match fragment {
                Fragment::Clause(c) => c,
                Fragment::Unparsed(text) => {
                    fail(
                        Verdict::Unparsed,
                        format!("cannot parse route \"{text}\""),
                        &mut verdict,
                        &mut detail,
                    );
                    continue;
                }
                Fragment::Action(_) => continue,
            };
            if let Some(phrase) = clause.target() {
                match resolve_target(phrase, scene, pose.position) {
                    Err(_) => {
                        fail(
                            Verdict::UnknownObject,
                            format!("no \"{phrase}\" in scene {}", scene.scene_id),
                            &mut verdict,
                            &mut detail,
                        );
                        clauses.push(clause);
                        continue;
                    }
                    Ok(obj) => {
                        let straight =
                            matches!(&clause, RouteClause::Move { adverb: Some(a), .. } if a == "straight ahead");
                        if straight && !is_ahead(&pose, xy(obj.centroid)) {
                            fail(
                                Verdict::DirectionInconsistent,
                                format!(
                                    "{}#{} is not straight ahead of heading {}",
                                    obj.category, obj.id, pose.heading
                                ),
                                &mut verdict,
                                &mut detail,
                            );
                        }
                        if let Some(grid) = &scene.occupancy {
                            let goals = grid.adjacent_cells(&obj.aabb);
                            let reachable = start_cell(grid, pose.position)
                                .and_then(|from| astar_path(grid, from, &goals))
                                .is_some();
                            if !reachable {
                                fail(
                                    Verdict::UnreachableTarget,
                                    format!("no free path to {}#{}", obj.category, obj.id),
                                    &mut verdict,
                                    &mut detail,
                                );
                            }
                        }
                    }
                }
            }
            if let Ok(next) = apply_clause(&pose, &clause, scene) {
                pose = next;
            }
            clauses.push(clause);
        }
        reports.push(RouteCheckReport {
            step_index: step.index,
            clauses,
            final_pose: pose,
            verdict,
            detail,
        });
    }
    reports
}
