//! Dataset directory handling: `scenes/<scene_id>.json` plus
//! `triplets/{train,val}.jsonl`. Validation, corpus statistics and
//! generation prompts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::tokenize;
use crate::route::{default_start_pose, parse_fragments, verify_route, AgentPose, Fragment, RouteClause, Verdict};
use crate::scene::{
    check_triplet, load_scene, parse_triplets, InstructionPlanTriplet, SceneError, SceneModel, TripletWarningKind,
};
use crate::text::{match_category, words};

pub const SPLITS: [&str; 2] = ["train", "val"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("scene {scene_id} referenced by {path}:{line} not found at {scene_path}")]
    MissingScene {
        scene_id: String,
        path: String,
        line: usize,
        scene_path: String,
    },
    #[error("duplicate sample {0}")]
    DuplicateSample(SampleKey),
    #[error("no triplet files under {0}")]
    NoTriplets(String),
    #[error("dataset has no samples")]
    Empty,
    #[error("prompt count must be positive")]
    ZeroPrompts,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub scene_id: String,
    pub sample_id: String,
}

impl fmt::Display for SampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.scene_id, self.sample_id)
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub key: SampleKey,
    pub split: String,
    pub line: usize,
    pub triplet: InstructionPlanTriplet,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub scenes: BTreeMap<String, SceneModel>,
    /// In file order: train first, then val.
    pub samples: Vec<Sample>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn scene_path(root: &Path, scene_id: &str) -> PathBuf {
    root.join("scenes").join(format!("{scene_id}.json"))
}

/// Loads every split present and the scenes its samples reference.
/// Unparseable lines, missing scenes and duplicate keys are fatal.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let root = root.as_ref();
    let mut scenes: BTreeMap<String, SceneModel> = BTreeMap::new();
    let mut samples = Vec::new();
    let mut seen = BTreeSet::new();
    let mut any_split = false;
    for split in SPLITS {
        let path = root.join("triplets").join(format!("{split}.jsonl"));
        if !path.exists() {
            continue;
        }
        any_split = true;
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let set = parse_triplets(file).map_err(io_err(&path))?;
        if let Some((line, message)) = set.rejected.first() {
            return Err(DatasetError::Malformed {
                path: path.display().to_string(),
                line: *line,
                message: message.clone(),
            });
        }
        for (line, triplet) in set.records {
            if !scenes.contains_key(&triplet.scene_id) {
                let sp = scene_path(root, &triplet.scene_id);
                if !sp.exists() {
                    return Err(DatasetError::MissingScene {
                        scene_id: triplet.scene_id.clone(),
                        path: path.display().to_string(),
                        line,
                        scene_path: sp.display().to_string(),
                    });
                }
                scenes.insert(triplet.scene_id.clone(), load_scene(&sp)?);
            }
            let key = SampleKey {
                scene_id: triplet.scene_id.clone(),
                sample_id: triplet.sample_id.clone().unwrap_or_else(|| format!("{split}:{line}")),
            };
            if !seen.insert(key.clone()) {
                return Err(DatasetError::DuplicateSample(key));
            }
            samples.push(Sample {
                key,
                split: split.to_string(),
                line,
                triplet,
            });
        }
    }
    if !any_split {
        return Err(DatasetError::NoTriplets(root.join("triplets").display().to_string()));
    }
    Ok(Dataset {
        root: root.to_path_buf(),
        scenes,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    UnknownObject,
    DirectionInconsistent,
    UnreachableTarget,
    ImplicitnessViolation,
    StepStructure,
    UnparsedRoute,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::UnknownObject => "unknown-object",
            FindingKind::DirectionInconsistent => "direction-inconsistent",
            FindingKind::UnreachableTarget => "unreachable-target",
            FindingKind::ImplicitnessViolation => "implicitness-violation",
            FindingKind::StepStructure => "step-structure",
            FindingKind::UnparsedRoute => "unparsed-route",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFinding {
    pub sample_key: SampleKey,
    pub kind: FindingKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Overrides the per-scene default start pose.
    pub start: Option<AgentPose>,
}

/// Checks one sample: record structure and object ids, implicitness, and
/// every route fragment simulated from the start pose.
pub fn validate_sample(sample: &Sample, scene: &SceneModel, opts: &ValidateOptions) -> Vec<ValidationFinding> {
    let mut out: Vec<ValidationFinding> = Vec::new();
    let mut push = |kind: FindingKind, detail: String| {
        let f = ValidationFinding {
            sample_key: sample.key.clone(),
            kind,
            detail,
        };
        if !out.contains(&f) {
            out.push(f);
        }
    };
    for (kind, detail) in check_triplet(&sample.triplet, scene) {
        let kind = match kind {
            TripletWarningKind::UnknownObject => FindingKind::UnknownObject,
            TripletWarningKind::ImplicitnessViolation => FindingKind::ImplicitnessViolation,
            TripletWarningKind::StepStructure => FindingKind::StepStructure,
            // samples are always checked against the scene their id names
            TripletWarningKind::SceneMismatch => continue,
        };
        push(kind, detail);
    }
    let start = opts.start.unwrap_or_else(|| default_start_pose(scene));
    for report in verify_route(&sample.triplet.steps, scene, &start) {
        let kind = match report.verdict {
            Verdict::Ok => continue,
            Verdict::UnknownObject => FindingKind::UnknownObject,
            Verdict::DirectionInconsistent => FindingKind::DirectionInconsistent,
            Verdict::UnreachableTarget => FindingKind::UnreachableTarget,
            Verdict::Unparsed => FindingKind::UnparsedRoute,
        };
        push(kind, format!("step {}: {}", report.step_index, report.detail));
    }
    out
}

/// Validates all samples in parallel; findings come back ordered by sample
/// key, then in check order.
pub fn validate_dataset(ds: &Dataset, opts: &ValidateOptions) -> Vec<ValidationFinding> {
    let mut per_sample: Vec<(SampleKey, Vec<ValidationFinding>)> = ds
        .samples
        .par_iter()
        .map(|s| (s.key.clone(), validate_sample(s, &ds.scenes[&s.key.scene_id], opts)))
        .collect();
    per_sample.sort_by(|a, b| a.0.cmp(&b.0));
    per_sample.into_iter().flat_map(|(_, f)| f).collect()
}

/// Verbs that open a manipulation fragment, e.g. "pick up the mug".
pub const ACTION_VERBS: &[&str] = &[
    "add", "boil", "bring", "clean", "close", "cook", "dry", "fill", "get", "grab", "heat", "hold", "lift", "open",
    "place", "plug", "pour", "press", "pick", "push", "put", "remove", "rinse", "serve", "set", "stay", "stir",
    "switch", "take", "turn", "wait", "wash", "wipe",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionObjectCount {
    pub action: String,
    /// Empty when the fragment names no scene category.
    pub object: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub scene_count: usize,
    pub sample_count: usize,
    pub instructions_per_scene: f64,
    pub mean_steps: f64,
    pub mean_words: f64,
    /// step count -> fraction of samples
    pub step_histogram: BTreeMap<usize, f64>,
    pub verb_histogram: BTreeMap<String, usize>,
    pub action_object_histogram: Vec<ActionObjectCount>,
}

/// Words in the answer: the activity phrase plus every step text, step
/// labels excluded.
pub fn answer_word_count(t: &InstructionPlanTriplet) -> usize {
    tokenize(&t.activity).len() + t.steps.iter().map(|s| tokenize(&s.text).len()).sum::<usize>()
}

#[derive(Default)]
struct Tally {
    steps: BTreeMap<usize, usize>,
    words: usize,
    step_total: usize,
    verbs: BTreeMap<String, usize>,
    actions: BTreeMap<(String, String), usize>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        for (k, v) in other.steps {
            *self.steps.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.verbs {
            *self.verbs.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.actions {
            *self.actions.entry(k).or_insert(0) += v;
        }
        self.words += other.words;
        self.step_total += other.step_total;
        self
    }
}

fn tally_sample(t: &InstructionPlanTriplet, scene: &SceneModel) -> Tally {
    let mut tally = Tally::default();
    *tally.steps.entry(t.steps.len()).or_insert(0) += 1;
    tally.step_total = t.steps.len();
    tally.words = answer_word_count(t);
    let categories = scene.categories();
    for step in &t.steps {
        for fragment in parse_fragments(&step.text) {
            match fragment {
                Fragment::Clause(c) => {
                    let verb = match c {
                        RouteClause::Turn { .. } => "turn".to_string(),
                        RouteClause::Move { verb, .. } => verb.as_str().to_string(),
                    };
                    *tally.verbs.entry(verb).or_insert(0) += 1;
                }
                Fragment::Action(text) => {
                    let ws = words(&text);
                    if let Some(action) = ws.iter().find(|w| ACTION_VERBS.contains(&w.as_str())) {
                        let object = match_category(&text, &categories).unwrap_or_default();
                        *tally.actions.entry((action.clone(), object)).or_insert(0) += 1;
                    }
                }
                Fragment::Unparsed(_) => {}
            }
        }
    }
    tally
}

pub fn dataset_stats(ds: &Dataset) -> Result<DatasetStats, DatasetError> {
    if ds.samples.is_empty() {
        return Err(DatasetError::Empty);
    }
    let tally = ds
        .samples
        .par_iter()
        .map(|s| tally_sample(&s.triplet, &ds.scenes[&s.key.scene_id]))
        .reduce(Tally::default, Tally::merge);
    let n = ds.samples.len();
    let scene_count = ds
        .samples
        .iter()
        .map(|s| &s.key.scene_id)
        .collect::<BTreeSet<_>>()
        .len();
    Ok(DatasetStats {
        scene_count,
        sample_count: n,
        instructions_per_scene: n as f64 / scene_count as f64,
        mean_steps: tally.step_total as f64 / n as f64,
        mean_words: tally.words as f64 / n as f64,
        step_histogram: tally.steps.into_iter().map(|(k, v)| (k, v as f64 / n as f64)).collect(),
        verb_histogram: tally.verbs,
        action_object_histogram: tally
            .actions
            .into_iter()
            .map(|((action, object), count)| ActionObjectCount { action, object, count })
            .collect(),
    })
}

const NEEDS: &[&str] = &[
    "feeling tired or low on energy",
    "being hungry",
    "being thirsty",
    "wanting a tidy room",
    "feeling cold",
    "expecting guests",
    "wanting to relax",
    "needing to get ready quickly",
];

const TRIPLET_SCHEMA: &str = r#"{"scene_id": string, "sample_id": string, "instruction": string, "activity": string, "steps": [{"index": integer starting at 1, "text": string, "object_ids": [integer], "is_final": boolean}]}"#;

/// Builds `n` prompts asking a language model for instruction-plan triplets
/// grounded in the scene inventory. The same seed gives the same text.
pub fn generation_prompts(scene: &SceneModel, n: usize, seed: u64) -> Result<Vec<String>, DatasetError> {
    if n == 0 {
        return Err(DatasetError::ZeroPrompts);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inventory: Vec<String> = scene
        .categories()
        .into_iter()
        .map(|c| {
            let ids: Vec<String> = scene.instances_of(&c).map(|o| o.id.to_string()).collect();
            format!("- {c} (ids: {})", ids.join(", "))
        })
        .collect();
    let mut prompts = Vec::with_capacity(n);
    for i in 0..n {
        inventory.shuffle(&mut rng);
        let need = NEEDS[rng.gen_range(0..NEEDS.len())];
        let steps = rng.gen_range(3..=5);
        prompts.push(format!(
            "Scene {scene_id} contains these objects:\n{inventory}\n\n\
             Write one implicit human instruction about {need}. The instruction must not name the activity. \
             Then name the activity a robot assistant should perform and give a plan of {steps} steps. \
             Every step starts with a movement such as \"walk straight ahead to the <object>\" or \
             \"turn 90 degrees left\" followed by one action on a listed object. Mark only the last step as final.\n\n\
             Answer with one JSON object on a single line matching this schema:\n{TRIPLET_SCHEMA}\n\
             Use scene_id \"{scene_id}\" and sample_id \"gen-{i}\".",
            scene_id = scene.scene_id,
            inventory = inventory.join("\n"),
        ));
    }
    Ok(prompts)
}
