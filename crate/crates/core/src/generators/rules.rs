//! Deterministic keyword-rule generator for offline runs and tests.
//!
//! A rule maps trigger keywords in the instruction to an activity and an
//! ordered list of step templates. `<object>` in a template is replaced by
//! the step's required category and `<route>` by a planned route from the
//! agent's current pose to the nearest instance of that category.

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::GeneratorError;
use crate::graph::SceneGraph;
use crate::plan::{instruction_from_prompt, GeneratorReply, GeneratorRequest, StepGenerator, END_TOKEN};
use crate::route::{apply_clause, plan_route, AgentPose, MoveVerb, RouteClause, RouteError};
use crate::scene::{ObjectId, ObjectInstance, SceneModel};
use crate::text::{find_phrase, words};

const OBJECT_SLOT: &str = "<object>";
const ROUTE_SLOT: &str = "<route>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityRule {
    pub trigger_keywords: Vec<String>,
    pub activity_phrase: String,
    pub required_categories: Vec<String>,
    pub step_templates: Vec<String>,
}

impl ActivityRule {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.step_templates.is_empty() {
            return Err(GeneratorError::Config(format!(
                "rule \"{}\" has no step templates",
                self.activity_phrase
            )));
        }
        let slotted = self
            .step_templates
            .iter()
            .any(|t| t.contains(OBJECT_SLOT) || t.contains(ROUTE_SLOT));
        if slotted && self.required_categories.is_empty() {
            return Err(GeneratorError::Config(format!(
                "rule \"{}\" uses slots but requires no categories",
                self.activity_phrase
            )));
        }
        Ok(())
    }

    /// Number of distinct trigger keywords present in the instruction.
    pub fn score(&self, instruction: &str) -> usize {
        let tokens = words(instruction);
        self.trigger_keywords
            .iter()
            .filter(|k| find_phrase(&tokens, &words(k)).is_some())
            .count()
    }

    fn category_for_step(&self, step_index: usize) -> Option<&str> {
        let last = self.required_categories.len().checked_sub(1)?;
        Some(&self.required_categories[(step_index - 1).min(last)])
    }
}

fn rule(keywords: &[&str], activity: &str, categories: &[&str], templates: &[&str]) -> ActivityRule {
    let strings = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
    ActivityRule {
        trigger_keywords: strings(keywords),
        activity_phrase: activity.into(),
        required_categories: strings(categories),
        step_templates: strings(templates),
    }
}

/// Built-in household rules.
pub fn default_rules() -> Vec<ActivityRule> {
    vec![
        rule(
            &["refreshed", "morning", "tired", "sleepy", "awake", "energy"],
            "prepare a cup of coffee",
            &["kettle", "sink", "stove", "coffee machine", "mug"],
            &[
                "<route> and pick up the <object>.",
                "<route> and fill the kettle with water from the <object>.",
                "<route> and place the kettle on the <object>.",
                "<route> and pour the hot water into the <object>.",
                "<route>, grab the <object> filled with coffee and serve it.",
            ],
        ),
        rule(
            &["tea", "calm", "relax", "soothing"],
            "make a pot of tea",
            &["kettle", "sink", "stove", "mug"],
            &[
                "<route> and pick up the <object>.",
                "<route> and fill the kettle at the <object>.",
                "<route> and heat the water on the <object>.",
                "<route> and pour the tea into the <object>.",
            ],
        ),
        rule(
            &["hungry", "starving", "snack", "breakfast"],
            "make some toast",
            &["fridge", "toaster", "table"],
            &[
                "<route> and take the bread out of the <object>.",
                "<route> and toast the bread in the <object>.",
                "<route> and serve the toast on the <object>.",
            ],
        ),
        rule(
            &["thirsty", "parched", "cool"],
            "pour a cold drink",
            &["fridge", "mug", "table"],
            &[
                "<route> and take a cold drink from the <object>.",
                "<route> and pour it into the <object>.",
                "<route> and place the drink on the <object>.",
            ],
        ),
        rule(
            &["leftovers", "dinner", "reheat"],
            "warm up the leftovers",
            &["fridge", "microwave", "table"],
            &[
                "<route> and take the leftovers out of the <object>.",
                "<route> and heat them in the <object>.",
                "<route> and serve the meal on the <object>.",
            ],
        ),
        rule(
            &["dirty", "dishes", "mess", "messy"],
            "wash the dishes",
            &["table", "sink", "kitchen counter"],
            &[
                "<route> and collect the dirty dishes from the <object>.",
                "<route> and wash the dishes in the <object>.",
                "<route> and stack the clean dishes on the <object>.",
            ],
        ),
    ]
}

/// Used when no rule matches the instruction.
pub fn fallback_rule() -> ActivityRule {
    rule(
        &[],
        "wait for more details",
        &[],
        &["Stay in place and ask for more details."],
    )
}

/// The rule with the most matched keywords; the first one wins ties.
pub fn select_rule<'a>(instruction: &str, rules: &'a [ActivityRule]) -> Option<&'a ActivityRule> {
    let mut best: Option<(&ActivityRule, usize)> = None;
    for r in rules {
        let s = r.score(instruction);
        if s > 0 && best.is_none_or(|(_, b)| s > b) {
            best = Some((r, s));
        }
    }
    best.map(|(r, _)| r)
}

pub trait RoutePlanner {
    fn plan(&self, start: &AgentPose, target: ObjectId, scene: &SceneModel) -> Result<Vec<RouteClause>, RouteError>;
}

/// A* planning when the scene has a grid, a single "walk to" otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridRoutePlanner;

impl RoutePlanner for GridRoutePlanner {
    fn plan(&self, start: &AgentPose, target: ObjectId, scene: &SceneModel) -> Result<Vec<RouteClause>, RouteError> {
        if scene.occupancy.is_some() {
            return plan_route(start, target, scene);
        }
        let obj = scene.object(target).ok_or(RouteError::UnknownId(target))?;
        Ok(vec![walk_to(&obj.category)])
    }
}

fn walk_to(category: &str) -> RouteClause {
    RouteClause::Move {
        verb: MoveVerb::Walk,
        adverb: None,
        distance_m: None,
        target: Some(category.to_string()),
    }
}

fn nearest_instance<'a>(
    scene: &'a SceneModel,
    graph: &SceneGraph,
    category: &str,
    from: [f64; 2],
) -> Option<&'a ObjectInstance> {
    let d2 = |o: &ObjectInstance| (o.centroid[0] - from[0]).powi(2) + (o.centroid[1] - from[1]).powi(2);
    let weight = |o: &ObjectInstance| graph.node_weight(o.id).unwrap_or(1.0);
    scene.instances_of(category).min_by(|a, b| {
        d2(a)
            .total_cmp(&d2(b))
            .then(weight(b).total_cmp(&weight(a)))
            .then(a.id.cmp(&b.id))
    })
}

fn format_meters(d: f64) -> String {
    let rounded = (d * 1000.0).round() / 1000.0;
    format!("{rounded}")
}

fn render_clause(c: &RouteClause) -> String {
    match c {
        RouteClause::Move {
            distance_m: Some(d), ..
        } => {
            let exact = c.to_string();
            exact.replacen(&format!(" {d} "), &format!(" {} ", format_meters(*d)), 1)
        }
        _ => c.to_string(),
    }
}

fn render_route(clauses: &[RouteClause], category: &str) -> String {
    if clauses.is_empty() {
        return format!("stay by the {category}");
    }
    clauses.iter().map(render_clause).collect::<Vec<_>>().join(" and ")
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn snap_to_free(pose: &AgentPose, scene: &SceneModel) -> AgentPose {
    let Some(grid) = &scene.occupancy else {
        return *pose;
    };
    if grid.cell_of(pose.position).is_some_and(|c| grid.is_free(c)) {
        return *pose;
    }
    match grid.nearest_free_cell(pose.position) {
        Some(cell) => AgentPose {
            position: grid.cell_center(cell),
            heading: pose.heading,
        },
        None => *pose,
    }
}

/// Produces the reply for one step and advances `pose` along the emitted
/// route.
pub fn rule_based_generate(
    request: &GeneratorRequest,
    scene: &SceneModel,
    graph: &SceneGraph,
    rules: &[ActivityRule],
    planner: &dyn RoutePlanner,
    pose: &mut AgentPose,
) -> Result<GeneratorReply, GeneratorError> {
    let instruction = instruction_from_prompt(&request.user_prompt);
    let fallback = fallback_rule();
    let rule = select_rule(instruction, rules).unwrap_or(&fallback);
    rule.validate()?;
    if let Some(missing) = rule
        .required_categories
        .iter()
        .find(|c| scene.instances_of(c).next().is_none())
    {
        return Err(GeneratorError::MissingCategory(missing.clone()));
    }
    let s = request.step_index.max(1);
    let Some(template) = rule.step_templates.get(s - 1) else {
        return Ok(GeneratorReply::from_raw(END_TOKEN));
    };

    let mut sentence = template.clone();
    if let Some(category) = rule.category_for_step(s) {
        *pose = snap_to_free(pose, scene);
        let target = nearest_instance(scene, graph, category, pose.position)
            .ok_or_else(|| GeneratorError::MissingCategory(category.to_string()))?;
        if sentence.contains(ROUTE_SLOT) {
            let clauses = planner.plan(pose, target.id, scene).unwrap_or_else(|e| {
                warn!(error = %e, category, "route planning failed, using a direct move");
                vec![walk_to(category)]
            });
            for clause in &clauses {
                if let Ok(next) = apply_clause(pose, clause, scene) {
                    *pose = next;
                }
            }
            sentence = sentence.replace(ROUTE_SLOT, &render_route(&clauses, category));
        }
        sentence = sentence.replace(OBJECT_SLOT, category);
    }
    let sentence = capitalize(&sentence);

    let mut raw = if s == 1 {
        format!(
            "To help you, the robot assistant will {}, with the following steps: Step 1: {sentence}",
            rule.activity_phrase
        )
    } else {
        format!("Step {s}: {sentence}")
    };
    if s == rule.step_templates.len() {
        raw.push(' ');
        raw.push_str(END_TOKEN);
    }
    Ok(GeneratorReply::from_raw(&raw))
}

/// Episode-scoped rule generator that tracks the agent pose between steps.
pub struct RuleBasedGenerator<'a, P: RoutePlanner = GridRoutePlanner> {
    scene: &'a SceneModel,
    rules: Vec<ActivityRule>,
    planner: P,
    start: AgentPose,
    pose: AgentPose,
}

impl<'a> RuleBasedGenerator<'a, GridRoutePlanner> {
    pub fn new(scene: &'a SceneModel, rules: Vec<ActivityRule>, start: AgentPose) -> Self {
        Self::with_planner(scene, rules, start, GridRoutePlanner)
    }
}

impl<'a, P: RoutePlanner> RuleBasedGenerator<'a, P> {
    pub fn with_planner(scene: &'a SceneModel, rules: Vec<ActivityRule>, start: AgentPose, planner: P) -> Self {
        RuleBasedGenerator {
            scene,
            rules,
            planner,
            start,
            pose: start,
        }
    }

    pub fn pose(&self) -> AgentPose {
        self.pose
    }
}

impl<P: RoutePlanner> StepGenerator for RuleBasedGenerator<'_, P> {
    fn generate(&mut self, request: &GeneratorRequest, graph: &SceneGraph) -> Result<GeneratorReply, GeneratorError> {
        if request.step_index <= 1 {
            self.pose = self.start;
        }
        rule_based_generate(request, self.scene, graph, &self.rules, &self.planner, &mut self.pose)
    }
}
