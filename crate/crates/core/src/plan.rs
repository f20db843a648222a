//! Progressive plan generation.
//!
//! Step 1 is generated from the bare instruction. Every later step is
//! generated from a history prompt that restates the instruction and all
//! previously generated steps. After each step the objects it mentions are
//! emphasised in the scene graph, and the loop stops on the `[END]` token or
//! at the step cap.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

use crate::generators::GeneratorError;
use crate::graph::{GraphDump, GraphError, ModulationRecord, SceneGraph, DEFAULT_W_L};
use crate::scene::{ObjectId, PlanStep, SceneModel};
use crate::text::detect_mentions;

pub const END_TOKEN: &str = "[END]";
pub const DEFAULT_MAX_STEPS: usize = 8;
pub const DEFAULT_PROMPT_BUDGET: usize = 24;

const TASK_FRAMING: &str = "You are a robot assistant planning a task in a 3D indoor scene. \
Infer the activity the user implicitly asks for, then answer one step at a time as \"Step <n>: <text>\", \
including the route between steps (e.g. \"Walk straight ahead to the table\", \"Turn 90 degrees left\"). \
Append [END] after the final step.\nScene objects, most relevant first:\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub system_context: String,
    pub user_prompt: String,
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorReply {
    pub text: String,
    pub saw_end: bool,
}

impl GeneratorReply {
    /// Detects and strips every `[END]` occurrence.
    pub fn from_raw(raw: &str) -> Self {
        let saw_end = raw.contains(END_TOKEN);
        let text = if saw_end {
            raw.replace(END_TOKEN, "").trim().to_string()
        } else {
            raw.trim().to_string()
        };
        GeneratorReply { text, saw_end }
    }
}

/// A backend producing one plan step per request.
pub trait StepGenerator {
    fn generate(&mut self, request: &GeneratorRequest, graph: &SceneGraph) -> Result<GeneratorReply, GeneratorError>;
}

impl<G: StepGenerator + ?Sized> StepGenerator for Box<G> {
    fn generate(&mut self, request: &GeneratorRequest, graph: &SceneGraph) -> Result<GeneratorReply, GeneratorError> {
        (**self).generate(request, graph)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    EndToken,
    StepCap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    pub w_l: f64,
    pub prompt_budget: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            max_steps: DEFAULT_MAX_STEPS,
            w_l: DEFAULT_W_L,
            prompt_budget: DEFAULT_PROMPT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEpisode {
    pub instruction: String,
    pub activity: String,
    pub steps: Vec<PlanStep>,
    pub modulations: Vec<ModulationRecord>,
    pub max_steps: usize,
    pub terminated_by: Option<Termination>,
    /// Graph state before step 1 and after each step, when requested.
    pub graph_snapshots: Vec<GraphDump>,
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("generation failed at step {step}")]
    Aborted {
        step: usize,
        partial: Box<PlanEpisode>,
        #[source]
        cause: GeneratorError,
    },
}

/// The history prompt for steps after the first.
pub fn render_history_prompt(instruction: &str, history: &[PlanStep]) -> String {
    let steps: Vec<String> = history
        .iter()
        .map(|s| format!("Step {}: {}", s.index, s.text))
        .collect();
    format!(
        "Q: {instruction}. You should answer based on these historical steps: {}",
        steps.join(" ")
    )
}

const HISTORY_SEPARATOR: &str = ". You should answer based on these historical steps: ";

/// Recovers the instruction from a step-1 prompt or a history prompt.
pub fn instruction_from_prompt(user_prompt: &str) -> &str {
    match user_prompt
        .strip_prefix("Q: ")
        .and_then(|rest| rest.split_once(HISTORY_SEPARATOR))
    {
        Some((instruction, _)) => instruction,
        None => user_prompt,
    }
}

/// Reduces an answer header such as "To help you, the robot assistant will
/// make tea, with the following steps:" to the activity phrase "make tea".
/// Headers in another shape come back trimmed.
pub fn activity_phrase(header: &str) -> String {
    let mut a = header.trim().trim_end_matches(':').trim_end();
    if let Some(pos) = a.to_lowercase().rfind("with the following steps") {
        a = a[..pos].trim_end().trim_end_matches(',').trim_end();
    }
    if let Some(pos) = a.to_lowercase().find("the robot assistant will ") {
        a = &a[pos + "the robot assistant will ".len()..];
    }
    a.trim().trim_end_matches('.').to_string()
}

/// Splits a first reply into the activity phrase and the step stream,
/// which starts at the first `Step 1:` marker.
pub fn parse_activity_header(first_reply: &str) -> (String, String) {
    match first_reply.find("Step 1:") {
        Some(pos) => (activity_phrase(&first_reply[..pos]), first_reply[pos..].to_string()),
        None => (first_reply.trim().to_string(), String::new()),
    }
}

/// Finds `Step <digits>:` markers, returning (start, end, number).
fn step_markers(text: &str) -> Vec<(usize, usize, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find("Step ") {
        let start = from + rel;
        let mut end = start + 5;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
        if end > start + 5 && end < bytes.len() && bytes[end] == b':' {
            let n = text[start + 5..end].parse().unwrap_or(0);
            out.push((start, end + 1, n));
            from = end + 1;
        } else {
            from = start + 5;
        }
    }
    out
}

/// Extracts one step's text from a reply: drops a leading `Step <n>:`
/// marker and cuts at the next marker, if the backend ran ahead.
pub fn extract_step_text(reply: &str) -> String {
    let trimmed = reply.trim();
    let markers = step_markers(trimmed);
    let (body_start, rest) = match markers.first() {
        Some(&(0, end, _)) => (end, &markers[1..]),
        _ => (0, &markers[..]),
    };
    let body_end = rest.first().map_or(trimmed.len(), |m| m.0);
    trimmed[body_start..body_end].trim().to_string()
}

pub fn system_context(graph: &SceneGraph, budget: usize) -> String {
    format!("{TASK_FRAMING}{}", graph.serialize_for_prompt(budget))
}

/// Runs one episode. The graph is modulated in place; weights accumulate
/// over the steps of the episode.
pub fn run_episode<G: StepGenerator + ?Sized>(
    scene: &SceneModel,
    graph: &mut SceneGraph,
    instruction: &str,
    generator: &mut G,
    config: &EpisodeConfig,
    keep_snapshots: bool,
) -> Result<PlanEpisode, EpisodeError> {
    if config.max_steps == 0 {
        return Err(EpisodeError::ZeroMaxSteps);
    }
    if !(config.w_l.is_finite() && config.w_l > 0.0) {
        return Err(GraphError::BadWeight(config.w_l).into());
    }
    let mut episode = PlanEpisode {
        instruction: instruction.to_string(),
        activity: String::new(),
        steps: Vec::new(),
        modulations: Vec::new(),
        max_steps: config.max_steps,
        terminated_by: None,
        graph_snapshots: Vec::new(),
    };
    if keep_snapshots {
        episode.graph_snapshots.push(graph.dump());
    }

    for step_index in 1..=config.max_steps {
        let user_prompt = if step_index == 1 {
            instruction.to_string()
        } else {
            render_history_prompt(instruction, &episode.steps)
        };
        let request = GeneratorRequest {
            system_context: system_context(graph, config.prompt_budget),
            user_prompt,
            step_index,
        };
        let reply = match generator.generate(&request, graph) {
            Ok(reply) => reply,
            Err(cause) => {
                return Err(EpisodeError::Aborted {
                    step: step_index,
                    partial: Box::new(episode),
                    cause,
                })
            }
        };
        // Backends may hand back raw text; make sure the token never lands in a step.
        let reply = if reply.text.contains(END_TOKEN) {
            let again = GeneratorReply::from_raw(&reply.text);
            GeneratorReply {
                text: again.text,
                saw_end: true,
            }
        } else {
            reply
        };

        let body = if step_index == 1 {
            let (activity, remainder) = parse_activity_header(&reply.text);
            if remainder.is_empty() {
                // No activity header: the whole reply is the step.
                reply.text.clone()
            } else {
                episode.activity = activity;
                remainder
            }
        } else {
            reply.text.clone()
        };
        let text = extract_step_text(&body);

        if reply.saw_end && text.is_empty() && step_index > 1 {
            // A bare [END] closes the previous step.
            if let Some(last) = episode.steps.last_mut() {
                last.is_final = true;
            }
            episode.terminated_by = Some(Termination::EndToken);
            break;
        }

        let mentioned: Vec<ObjectId> = detect_mentions(&text, scene);
        let record = graph.modulate(&mentioned, config.w_l, step_index)?;
        debug!(step = step_index, mentions = ?mentioned, "generated step");
        episode.steps.push(PlanStep {
            index: step_index,
            text,
            object_ids: mentioned,
            is_final: reply.saw_end,
        });
        episode.modulations.push(record);
        if keep_snapshots {
            episode.graph_snapshots.push(graph.dump());
        }
        if reply.saw_end {
            episode.terminated_by = Some(Termination::EndToken);
            break;
        }
    }
    if episode.terminated_by.is_none() {
        episode.terminated_by = Some(Termination::StepCap);
    }
    Ok(episode)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStepOut {
    pub index: usize,
    pub text: String,
    pub object_ids: Vec<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationOut {
    pub step_index: usize,
    pub mentioned_ids: Vec<ObjectId>,
    pub touched_nodes: Vec<ObjectId>,
    pub touched_edges_count: usize,
}

/// Serialized form of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutput {
    pub instruction: String,
    pub activity: String,
    pub steps: Vec<EpisodeStepOut>,
    pub terminated_by: Option<Termination>,
    pub modulations: Vec<ModulationOut>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub graph_snapshots: Vec<GraphDump>,
}

impl From<&PlanEpisode> for EpisodeOutput {
    fn from(ep: &PlanEpisode) -> Self {
        EpisodeOutput {
            instruction: ep.instruction.clone(),
            activity: ep.activity.clone(),
            steps: ep
                .steps
                .iter()
                .map(|s| EpisodeStepOut {
                    index: s.index,
                    text: s.text.clone(),
                    object_ids: s.object_ids.clone(),
                })
                .collect(),
            terminated_by: ep.terminated_by,
            modulations: ep
                .modulations
                .iter()
                .map(|m| ModulationOut {
                    step_index: m.step_index,
                    mentioned_ids: m.mentioned_ids.clone(),
                    touched_nodes: m.touched_nodes.iter().copied().collect(),
                    touched_edges_count: m.touched_edges.len(),
                })
                .collect(),
            graph_snapshots: ep.graph_snapshots.clone(),
        }
    }
}
