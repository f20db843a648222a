//! Scene and dataset data model.
//!
//! A scene is reduced to per-object geometry: category, centroid and an
//! axis-aligned bounding box, plus an optional ground-plane occupancy grid.
//! Segmentation masks are carried as opaque references and never parsed.
//!
//! Coordinates are scene meters with +x right, +y front and +z up.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ObjectId = u32;

/// Size of the full category vocabulary of the benchmark.
pub const DEFAULT_CATEGORY_VOCAB: usize = 200;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate object id {0}")]
    DuplicateId(ObjectId),
    #[error("object {id}: {message}")]
    InvalidObject { id: ObjectId, message: String },
    #[error("occupancy grid: {0}")]
    InvalidGrid(String),
    #[error("category vocabulary size {declared} is smaller than the {present} categories present")]
    VocabTooSmall { declared: usize, present: usize },
}

impl SceneError {
    fn from_json(err: serde_json::Error) -> Self {
        SceneError::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Aabb { min, max }
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    fn is_ordered(&self) -> bool {
        (0..3).all(|i| self.min[i] <= self.max[i])
    }
}

/// Closed-box containment: points on the boundary are inside.
pub fn point_in_aabb(p: [f64; 3], aabb: &Aabb) -> bool {
    p.iter()
        .zip(aabb.min.iter().zip(aabb.max.iter()))
        .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub category: String,
    pub centroid: [f64; 3],
    pub aabb: Aabb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_ref: Option<String>,
}

impl ObjectInstance {
    fn validate(&self) -> Result<(), SceneError> {
        let invalid = |message: &str| SceneError::InvalidObject {
            id: self.id,
            message: message.to_string(),
        };
        if self.category.trim().is_empty() {
            return Err(invalid("empty category"));
        }
        if self.category != self.category.to_lowercase() {
            return Err(invalid("category must be lowercase"));
        }
        let finite = self
            .centroid
            .iter()
            .chain(self.aabb.min.iter())
            .chain(self.aabb.max.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("non-finite coordinate"));
        }
        if !self.aabb.is_ordered() {
            return Err(invalid("aabb min exceeds max"));
        }
        if !point_in_aabb(self.centroid, &self.aabb) {
            return Err(invalid("centroid lies outside aabb"));
        }
        Ok(())
    }
}

/// Grid cell index as (row, col). Rows run along +y, columns along +x.
pub type Cell = (usize, usize);

/// Ground-plane occupancy grid. Cell (r, c) covers
/// `[origin.x + c*cell_size, origin.x + (c+1)*cell_size)` in x and the
/// analogous interval in y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct OccupancyGrid {
    pub cell_size: f64,
    pub origin: [f64; 2],
    pub rows: usize,
    pub cols: usize,
    blocked: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    cell_size: f64,
    origin: [f64; 2],
    rows: usize,
    cols: usize,
    blocked: Vec<u8>,
}

impl TryFrom<RawGrid> for OccupancyGrid {
    type Error = String;

    fn try_from(raw: RawGrid) -> Result<Self, String> {
        if raw.blocked.iter().any(|b| *b > 1) {
            return Err("blocked flags must be 0 or 1".into());
        }
        OccupancyGrid::new(
            raw.cell_size,
            raw.origin,
            raw.rows,
            raw.cols,
            raw.blocked.into_iter().map(|b| b == 1).collect(),
        )
        .map_err(|e| e.to_string())
    }
}

impl From<OccupancyGrid> for RawGrid {
    fn from(g: OccupancyGrid) -> Self {
        RawGrid {
            cell_size: g.cell_size,
            origin: g.origin,
            rows: g.rows,
            cols: g.cols,
            blocked: g.blocked.iter().map(|b| u8::from(*b)).collect(),
        }
    }
}

impl OccupancyGrid {
    pub fn new(
        cell_size: f64,
        origin: [f64; 2],
        rows: usize,
        cols: usize,
        blocked: Vec<bool>,
    ) -> Result<Self, SceneError> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(SceneError::InvalidGrid("cell_size must be positive".into()));
        }
        if rows == 0 || cols == 0 {
            return Err(SceneError::InvalidGrid("grid must have at least one cell".into()));
        }
        if blocked.len() != rows * cols {
            return Err(SceneError::InvalidGrid(format!(
                "expected {} blocked flags, found {}",
                rows * cols,
                blocked.len()
            )));
        }
        Ok(OccupancyGrid {
            cell_size,
            origin,
            rows,
            cols,
            blocked,
        })
    }

    /// An all-free grid.
    pub fn empty(cell_size: f64, origin: [f64; 2], rows: usize, cols: usize) -> Result<Self, SceneError> {
        Self::new(cell_size, origin, rows, cols, vec![false; rows * cols])
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked[cell.0 * self.cols + cell.1]
    }

    pub fn set_blocked(&mut self, cell: Cell, blocked: bool) {
        self.blocked[cell.0 * self.cols + cell.1] = blocked;
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        cell.0 < self.rows && cell.1 < self.cols && !self.is_blocked(cell)
    }

    /// Whether a ground-plane point lies within the grid extents (closed).
    pub fn contains_point(&self, p: [f64; 2]) -> bool {
        let (w, h) = (self.cols as f64 * self.cell_size, self.rows as f64 * self.cell_size);
        p[0] >= self.origin[0] && p[0] <= self.origin[0] + w && p[1] >= self.origin[1] && p[1] <= self.origin[1] + h
    }

    /// Cell containing the point; points on the far edge map to the last cell.
    pub fn cell_of(&self, p: [f64; 2]) -> Option<Cell> {
        if !self.contains_point(p) {
            return None;
        }
        let col = ((p[0] - self.origin[0]) / self.cell_size).floor() as usize;
        let row = ((p[1] - self.origin[1]) / self.cell_size).floor() as usize;
        Some((row.min(self.rows - 1), col.min(self.cols - 1)))
    }

    pub fn cell_center(&self, cell: Cell) -> [f64; 2] {
        [
            self.origin[0] + (cell.1 as f64 + 0.5) * self.cell_size,
            self.origin[1] + (cell.0 as f64 + 0.5) * self.cell_size,
        ]
    }

    /// Cells whose area overlaps the ground projection of the box with
    /// positive measure. A degenerate box still occupies the cell holding it.
    pub fn footprint(&self, aabb: &Aabb) -> Vec<Cell> {
        let span = |lo: f64, hi: f64, origin: f64, n: usize| -> Option<(usize, usize)> {
            let a = (lo - origin) / self.cell_size;
            let b = (hi - origin) / self.cell_size;
            let first = a.floor();
            let last = if b > a { b.ceil() - 1.0 } else { first };
            let first = first.max(0.0);
            let last = last.min(n as f64 - 1.0);
            (first <= last).then_some((first as usize, last as usize))
        };
        let Some((c0, c1)) = span(aabb.min[0], aabb.max[0], self.origin[0], self.cols) else {
            return Vec::new();
        };
        let Some((r0, r1)) = span(aabb.min[1], aabb.max[1], self.origin[1], self.rows) else {
            return Vec::new();
        };
        (r0..=r1).flat_map(|r| (c0..=c1).map(move |c| (r, c))).collect()
    }

    /// Free cells in the 8-neighborhood of the box footprint, excluding the
    /// footprint itself, in (row, col) order.
    pub fn adjacent_cells(&self, aabb: &Aabb) -> Vec<Cell> {
        let fp: BTreeSet<Cell> = self.footprint(aabb).into_iter().collect();
        let mut out = BTreeSet::new();
        for &(r, c) in &fp {
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 {
                        continue;
                    }
                    let cell = (nr as usize, nc as usize);
                    if !fp.contains(&cell) && self.is_free(cell) {
                        out.insert(cell);
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Free cell whose center is closest to `p`; ties go to the smaller (row, col).
    pub fn nearest_free_cell(&self, p: [f64; 2]) -> Option<Cell> {
        let mut best: Option<(f64, Cell)> = None;
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.is_blocked((r, c)) {
                    continue;
                }
                let center = self.cell_center((r, c));
                let d = (center[0] - p[0]).powi(2) + (center[1] - p[1]).powi(2);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, (r, c)));
                }
            }
        }
        best.map(|(_, cell)| cell)
    }

    pub fn free_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }
}

fn default_vocab() -> usize {
    DEFAULT_CATEGORY_VOCAB
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneModel {
    pub scene_id: String,
    pub objects: Vec<ObjectInstance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupancy: Option<OccupancyGrid>,
    #[serde(default = "default_vocab")]
    pub category_vocab_size: usize,
}

impl SceneModel {
    /// Builds a scene and checks every invariant.
    pub fn new(
        scene_id: impl Into<String>,
        objects: Vec<ObjectInstance>,
        occupancy: Option<OccupancyGrid>,
    ) -> Result<Self, SceneError> {
        let scene = SceneModel {
            scene_id: scene_id.into(),
            objects,
            occupancy,
            category_vocab_size: DEFAULT_CATEGORY_VOCAB,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let mut seen = HashSet::new();
        for obj in &self.objects {
            if !seen.insert(obj.id) {
                return Err(SceneError::DuplicateId(obj.id));
            }
            obj.validate()?;
            if let Some(grid) = &self.occupancy {
                if !grid.contains_point([obj.centroid[0], obj.centroid[1]]) {
                    return Err(SceneError::InvalidObject {
                        id: obj.id,
                        message: "centroid projects outside the occupancy grid".into(),
                    });
                }
            }
        }
        let present = self.categories().len();
        if self.category_vocab_size < present {
            return Err(SceneError::VocabTooSmall {
                declared: self.category_vocab_size,
                present,
            });
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self, SceneError> {
        let scene: SceneModel = serde_json::from_str(text).map_err(SceneError::from_json)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn contains_id(&self, id: ObjectId) -> bool {
        self.object(id).is_some()
    }

    /// Distinct categories, sorted.
    pub fn categories(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.objects.iter().map(|o| o.category.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn instances_of<'a>(&'a self, category: &str) -> impl Iterator<Item = &'a ObjectInstance> + 'a {
        let category = category.to_string();
        self.objects.iter().filter(move |o| o.category == category)
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneModel, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SceneModel::from_json_str(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub index: usize,
    pub text: String,
    #[serde(default)]
    pub object_ids: Vec<ObjectId>,
    #[serde(default)]
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionPlanTriplet {
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    pub instruction: String,
    pub activity: String,
    pub steps: Vec<PlanStep>,
}

impl InstructionPlanTriplet {
    /// The answer text as a single string: the activity sentence followed by
    /// `Step <i>: <text>` segments.
    pub fn answer_text(&self) -> String {
        let mut out = self.activity.trim().to_string();
        for step in &self.steps {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&format!("Step {}: {}", step.index, step.text.trim()));
        }
        out
    }
}

/// True when the instruction literally names the activity (case-folded).
pub fn violates_implicitness(instruction: &str, activity: &str) -> bool {
    let activity = activity.trim().to_lowercase();
    !activity.is_empty() && instruction.to_lowercase().contains(&activity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripletWarningKind {
    UnknownObject,
    ImplicitnessViolation,
    StepStructure,
    SceneMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletWarning {
    /// 1-based line in the source file.
    pub line: usize,
    pub kind: TripletWarningKind,
    pub detail: String,
}

/// Semantic checks of one triplet against its scene.
pub fn check_triplet(triplet: &InstructionPlanTriplet, scene: &SceneModel) -> Vec<(TripletWarningKind, String)> {
    let mut out = Vec::new();
    if triplet.scene_id != scene.scene_id {
        out.push((
            TripletWarningKind::SceneMismatch,
            format!(
                "triplet scene {} checked against scene {}",
                triplet.scene_id, scene.scene_id
            ),
        ));
    }
    out.extend(check_step_structure(&triplet.steps).map(|d| (TripletWarningKind::StepStructure, d)));
    let mut unknown = BTreeSet::new();
    for step in &triplet.steps {
        for id in &step.object_ids {
            if !scene.contains_id(*id) {
                unknown.insert(*id);
            }
        }
    }
    for id in unknown {
        out.push((TripletWarningKind::UnknownObject, format!("unknown object {id}")));
    }
    if violates_implicitness(&triplet.instruction, &triplet.activity) {
        out.push((
            TripletWarningKind::ImplicitnessViolation,
            format!(
                "instruction contains the activity phrase \"{}\"",
                triplet.activity.trim()
            ),
        ));
    }
    out
}

fn check_step_structure(steps: &[PlanStep]) -> Option<String> {
    if steps.is_empty() {
        return Some("plan has no steps".into());
    }
    for (pos, step) in steps.iter().enumerate() {
        if step.index != pos + 1 {
            return Some(format!("step at position {} has index {}", pos + 1, step.index));
        }
    }
    let finals = steps.iter().filter(|s| s.is_final).count();
    if finals != 1 {
        return Some(format!("expected exactly one final step, found {finals}"));
    }
    if !steps.last().is_some_and(|s| s.is_final) {
        return Some("final step is not the last step".into());
    }
    None
}

/// Result of reading a triplet file. Lines that fail to parse are reported in
/// `rejected` rather than aborting the load.
#[derive(Debug, Clone, Default)]
pub struct TripletSet {
    /// (1-based line, record)
    pub records: Vec<(usize, InstructionPlanTriplet)>,
    pub rejected: Vec<(usize, String)>,
    pub warnings: Vec<TripletWarning>,
}

impl TripletSet {
    pub fn triplets(&self) -> impl Iterator<Item = &InstructionPlanTriplet> {
        self.records.iter().map(|(_, t)| t)
    }
}

/// Parses JSON Lines without semantic checks. Blank lines are ignored.
pub fn parse_triplets<R: Read>(reader: R) -> std::io::Result<TripletSet> {
    let mut set = TripletSet::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<InstructionPlanTriplet>(&line) {
            Ok(t) => set.records.push((i + 1, t)),
            Err(e) => set.rejected.push((i + 1, e.to_string())),
        }
    }
    Ok(set)
}

/// Reads a triplet file and checks every record against `scene`.
pub fn load_triplets(path: impl AsRef<Path>, scene: &SceneModel) -> Result<TripletSet, SceneError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut set = parse_triplets(file).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let warnings: Vec<TripletWarning> = set
        .records
        .iter()
        .flat_map(|(line, t)| {
            check_triplet(t, scene)
                .into_iter()
                .map(|(kind, detail)| TripletWarning {
                    line: *line,
                    kind,
                    detail,
                })
        })
        .collect();
    set.warnings = warnings;
    Ok(set)
}
