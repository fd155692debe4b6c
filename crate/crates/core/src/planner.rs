//! Task planner and reflector: types shared by every backend, the scripted
//! backend, and the pure prompt/reply handling used by the HTTP backend.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{
    parse_skeleton, primitive_schema, validate_skeleton, PlanSkeleton, PrimitiveKind, Schema, SymbolicState,
};
use crate::exec::{grasp_rules, ExecError, ExecErrorKind, GraspConfig};
use crate::geometry::Pose6D;
use crate::render::render_scene;
use crate::scenarios::Scenario;
use crate::twin::TwinScene;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub id: String,
    pub pose: Pose6D,
    pub on_feature: Option<String>,
    pub graspable: bool,
    pub tool: bool,
    pub held: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(skip)]
    pub rendering: String,
    pub summary: Vec<ObjectSummary>,
    pub instruction: String,
    pub state: SymbolicState,
}

impl Observation {
    pub fn capture(scene: &TwinScene, instruction: &str) -> Result<Self> {
        let state = SymbolicState::from_scene(scene);
        let cfg = GraspConfig::default();
        let mut summary = Vec::with_capacity(scene.objects.len());
        for o in &scene.objects {
            let facts = state.objects.get(&o.id).cloned().unwrap_or_default();
            summary.push(ObjectSummary {
                id: o.id.clone(),
                pose: o.pose,
                on_feature: facts.on_feature,
                graspable: !grasp_rules(scene, &o.id, &cfg)?.0.is_empty(),
                tool: facts.tool,
                held: facts.held,
            });
        }
        Ok(Self { rendering: render_scene(scene), summary, instruction: instruction.into(), state })
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for o in &self.summary {
            let p = o.pose.position;
            out.push_str(&format!(
                "- {} at ({:.3}, {:.3}, {:.3}) yaw {:.0} deg on {}{}{}{}\n",
                o.id,
                p.x,
                p.y,
                p.z,
                o.pose.yaw().to_degrees(),
                o.on_feature.as_deref().unwrap_or("nothing"),
                if o.graspable { ", graspable" } else { ", not graspable" },
                if o.tool { ", tool" } else { "" },
                if o.held { ", held" } else { "" },
            ));
        }
        out
    }
}

/// Why an attempt failed: a controller error, an empty feasible set during
/// rehearsal, or a completed plan that left the goal unmet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Failure {
    Exec { error: ExecError },
    NoFeasiblePose { step: crate::domain::PrimitiveInstance, message: String },
    GoalUnmet { message: String },
}

impl Failure {
    pub fn label(&self) -> String {
        match self {
            Failure::Exec { error } => error.kind.to_string(),
            Failure::NoFeasiblePose { .. } => "NoFeasiblePose".into(),
            Failure::GoalUnmet { .. } => "GoalUnmet".into(),
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Exec { error } => &error.message,
            Failure::NoFeasiblePose { message, .. } | Failure::GoalUnmet { message } => message,
        }
    }

    pub fn step_kind(&self) -> Option<PrimitiveKind> {
        match self {
            Failure::Exec { error } => Some(error.step.kind),
            Failure::NoFeasiblePose { step, .. } => Some(step.kind),
            Failure::GoalUnmet { .. } => None,
        }
    }

    pub fn exec_kind(&self) -> Option<ExecErrorKind> {
        match self {
            Failure::Exec { error } => Some(error.kind),
            _ => None,
        }
    }

    /// Text handed to the reflector.
    pub fn error_text(&self) -> String {
        match self {
            Failure::Exec { error } => format!("{} at step {}: {}", error.kind, error.step, error.message),
            Failure::NoFeasiblePose { step, message } => format!("NoFeasiblePose at step {step}: {message}"),
            Failure::GoalUnmet { message } => format!("GoalUnmet: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionInput {
    pub failure: Failure,
    pub observation: Observation,
    pub failed_plan: PlanSkeleton,
    pub history: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub insight: String,
    pub revised: PlanSkeleton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Scripted,
    Http { endpoint: String, model: String, timeout_secs: u64, max_retries: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub planner: String,
    pub reflector: String,
    pub selector: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            planner: DEFAULT_PLANNER_PROMPT.into(),
            reflector: DEFAULT_REFLECTOR_PROMPT.into(),
            selector: DEFAULT_SELECTOR_PROMPT.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub backend: Backend,
    #[serde(default)]
    pub templates: PromptTemplates,
    #[serde(default)]
    pub temperature: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { backend: Backend::Scripted, templates: PromptTemplates::default(), temperature: 0.0 }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if let Backend::Http { endpoint, .. } = &self.backend {
            if endpoint.trim().is_empty() {
                return Err(Error::invalid("http planner backend requires an endpoint"));
            }
        }
        Ok(())
    }
}

pub trait TaskPlanner {
    fn plan(&mut self, obs: &Observation, primitives: &[(PrimitiveKind, Schema)]) -> Result<PlanSkeleton>;
    fn reflect(&mut self, input: &ReflectionInput) -> Result<Reflection>;
}

pub fn all_schemas() -> Vec<(PrimitiveKind, Schema)> {
    PrimitiveKind::ALL.iter().map(|k| (*k, primitive_schema(*k))).collect()
}

/// Walks the scenario's fallback list, naive first, advancing by a rule table
/// keyed on the failure kind and failing step.
#[derive(Debug, Clone)]
pub struct ScriptedPlanner {
    plans: Vec<PlanSkeleton>,
    tried: Vec<bool>,
    tools: Vec<String>,
}

impl ScriptedPlanner {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            plans: scenario.fallback_plans.clone(),
            tried: alloc::vec![false; scenario.fallback_plans.len()],
            tools: scenario.scene.objects.iter().filter(|o| o.tool_spec.is_some()).map(|o| o.id.clone()).collect(),
        }
    }

    fn take(&mut self, pred: impl Fn(&PlanSkeleton) -> bool, state: &SymbolicState) -> Option<PlanSkeleton> {
        let i = (0..self.plans.len())
            .find(|&i| !self.tried[i] && pred(&self.plans[i]) && validate_skeleton(&self.plans[i], state).is_ok())?;
        self.tried[i] = true;
        Some(self.plans[i].clone())
    }

    fn next_untried(&mut self, state: &SymbolicState) -> Result<PlanSkeleton> {
        self.take(|_| true, state)
            .ok_or_else(|| Error::NoMorePlans("scripted fallback list exhausted".into()))
    }
}

/// Plan makes contact with `object` (Push or Rotate) before grasping it.
fn prepares_grasp(p: &PlanSkeleton, object: &str) -> bool {
    let g = p.steps.iter().position(|s| s.kind == PrimitiveKind::Grasp && s.object_id == object);
    let nm = p
        .steps
        .iter()
        .position(|s| matches!(s.kind, PrimitiveKind::Push | PrimitiveKind::Rotate) && s.object_id == object);
    matches!((nm, g), (Some(a), Some(b)) if a < b)
}

impl TaskPlanner for ScriptedPlanner {
    fn plan(&mut self, obs: &Observation, _primitives: &[(PrimitiveKind, Schema)]) -> Result<PlanSkeleton> {
        self.next_untried(&obs.state)
    }

    fn reflect(&mut self, input: &ReflectionInput) -> Result<Reflection> {
        let state = &input.observation.state;
        let object = match &input.failure {
            Failure::Exec { error } => error.step.object_id.clone(),
            Failure::NoFeasiblePose { step, .. } => step.object_id.clone(),
            Failure::GoalUnmet { .. } => String::new(),
        };
        let tools = self.tools.clone();
        let (insight, pick): (&str, Option<PlanSkeleton>) =
            match (input.failure.exec_kind(), input.failure.step_kind(), &input.failure) {
                (Some(ExecErrorKind::NoGraspFound), Some(PrimitiveKind::Grasp), _)
                    if prepares_grasp(&input.failed_plan, &object) =>
                {
                    // the preparation ran but left too little overhang: repeat it from where the object is now
                    let mut again = input.failed_plan.clone();
                    again.rationale = "repeat the preparation from the object's current pose".into();
                    ("overhang still too small to grasp; push the object further past the edge", Some(again))
                }
                (Some(ExecErrorKind::NoGraspFound), Some(PrimitiveKind::Grasp), _) => (
                    "object ungraspable in place; create overhang or raise it",
                    self.take(|p| prepares_grasp(p, &object), state),
                ),
                (Some(ExecErrorKind::Collision), Some(PrimitiveKind::Grasp), _) => (
                    "gripper approach is blocked where the object sits; move it into the open before grasping",
                    self.take(|p| prepares_grasp(p, &object), state),
                ),
                (Some(ExecErrorKind::OutOfReach), Some(PrimitiveKind::Push), _) => {
                    if tools.is_empty() {
                        return Err(Error::NoMorePlans("contact out of reach and no tool available".into()));
                    }
                    (
                        "contact is beyond the arm's reach; use the tool to extend it",
                        self.take(|p| p.steps.iter().any(|s| s.kind == PrimitiveKind::Grasp && tools.contains(&s.object_id)), state),
                    )
                }
                (Some(ExecErrorKind::Collision), Some(PrimitiveKind::Rotate), _)
                | (None, Some(PrimitiveKind::Rotate), Failure::NoFeasiblePose { .. }) => (
                    "the flip sweeps into the surrounding structure; slide the object out instead of rotating it",
                    self.take(|p| !p.steps.iter().any(|s| s.kind == PrimitiveKind::Rotate), state),
                ),
                (None, None, Failure::GoalUnmet { .. }) => (
                    "the object reached the target but with the wrong face down; reorient it first",
                    None,
                ),
                _ => ("the previous plan failed; try the next alternative", None),
            };
        let mut revised = match pick {
            Some(p) => p,
            None => self.next_untried(state)?,
        };
        revised.revision = input.failed_plan.revision + 1;
        Ok(Reflection { insight: insight.into(), revised })
    }
}

pub const DEFAULT_PLANNER_PROMPT: &str = "You control a robot arm with a parallel gripper above a tabletop.
Available primitives, with preconditions and effects:
{PRIMITIVES}
Scene objects:
{SUMMARY}
Task: {INSTRUCTION}
Think step by step: name the objects, their spatial relations, and the environment
features (edges, walls, slopes, slots, shelves, tools) that matter. Then output
exactly one fenced ```json block with the plan:
{\"revision\": 0, \"rationale\": \"...\", \"steps\": [{\"kind\": \"push|rotate|grasp|moveto|release\", \"object_id\": \"...\", \"region\": {\"name\": \"...\", \"refinement\": \"...\"}}]}
Known region names: {REGIONS}";

pub const DEFAULT_REFLECTOR_PROMPT: &str = "A plan step failed during execution.
Failed plan: {PLAN}
Error: {ERROR}
Previous reflections:
{HISTORY}
Current scene objects:
{SUMMARY}
Task: {INSTRUCTION}
Available primitives:
{PRIMITIVES}
Explain the root cause in one or two sentences after the word INSIGHT:, then
output exactly one fenced ```json block with the revised plan (same schema as
before). Known region names: {REGIONS}";

pub const DEFAULT_SELECTOR_PROMPT: &str = "The images show {COUNT} candidate target poses for the
{CURRENT} step (red = candidate, translucent = current pose). The next step is {NEXT}.
Reply with the index of the best candidate only, a single integer from 0 to {MAX}.";

/// Replaces `{KEY}` placeholders.
pub fn fill_template(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::from(template);
    for (k, v) in values {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

pub fn primitives_text(primitives: &[(PrimitiveKind, Schema)]) -> String {
    let mut out = String::new();
    for (k, s) in primitives {
        let pre: Vec<String> = s.preconditions.iter().map(|l| l.to_string()).collect();
        let eff: Vec<String> = s.effects.iter().map(|l| l.to_string()).collect();
        out.push_str(&format!(
            "({k} ?o) :precondition (and {}) :effect (and {})\n",
            pre.join(" "),
            eff.join(" ")
        ));
    }
    out
}

/// Body of the single fenced block in a model reply.
pub fn extract_fenced_block(reply: &str) -> Result<&str> {
    let parts: Vec<&str> = reply.split("```").collect();
    // odd-indexed pieces are inside fences
    let blocks: Vec<&str> = parts.iter().skip(1).step_by(2).copied().collect();
    if parts.len() % 2 == 0 {
        return Err(Error::Parse { path: "reply".into(), message: "unterminated code fence".into() });
    }
    match blocks.as_slice() {
        [one] => {
            let body = one.trim_start();
            let body = body.strip_prefix("json").unwrap_or(body);
            Ok(body.trim())
        }
        [] => Err(Error::Parse { path: "reply".into(), message: "no fenced block in reply".into() }),
        _ => Err(Error::Parse { path: "reply".into(), message: format!("expected one fenced block, found {}", blocks.len()) }),
    }
}

/// Parses and symbolically validates a planner reply.
pub fn parse_plan_reply(reply: &str, state: &SymbolicState) -> Result<PlanSkeleton> {
    let body = extract_fenced_block(reply)?;
    let sk = parse_skeleton(body)?;
    if let Err(v) = validate_skeleton(&sk, state) {
        let list: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        return Err(Error::Parse { path: "steps".into(), message: format!("plan violates preconditions: {}", list.join("; ")) });
    }
    Ok(sk)
}

/// Insight text from a reflector reply: the text after `INSIGHT:` up to the fence.
pub fn parse_insight(reply: &str) -> String {
    let head = reply.split("```").next().unwrap_or("");
    match head.find("INSIGHT:") {
        Some(i) => head[i + 8..].trim().to_string(),
        None => head.trim().to_string(),
    }
}

/// First integer in a selector reply, checked against the candidate count.
pub fn parse_index(reply: &str, count: usize) -> Result<usize> {
    let digits: String = reply
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    let k: usize = digits
        .parse()
        .map_err(|_| Error::Selection(format!("no index in selector reply {reply:?}")))?;
    if k >= count {
        return Err(Error::Selection(format!("index {k} out of range for {count} candidates")));
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PrimitiveInstance;
    use crate::scenarios::builtin;

    fn obs(s: &Scenario) -> Observation {
        Observation::capture(&s.scene, &s.instruction).unwrap()
    }

    fn exec_failure(kind: ExecErrorKind, step: PrimitiveInstance) -> Failure {
        Failure::Exec { error: ExecError { kind, message: "x".into(), step, phase: "p".into() } }
    }

    #[test]
    fn edge_plan_sequence() {
        let s = builtin("edge").unwrap();
        let o = obs(&s);
        let mut p = ScriptedPlanner::new(&s);
        let first = p.plan(&o, &all_schemas()).unwrap();
        assert_eq!(first.summary(), "grasp(card) -> moveto(card, target_zone) -> release(card)");
        let mut q = ScriptedPlanner::new(&s);
        q.plan(&o, &all_schemas()).unwrap();
        q.plan(&o, &all_schemas()).unwrap();
        let third = q.plan(&o, &all_schemas()).unwrap();
        assert_eq!(third.steps[0].kind, PrimitiveKind::Push);
        assert_eq!(third.steps[0].region_name(), Some("table_edge_nearest"));
        assert!(q.plan(&o, &all_schemas()).is_err());
    }

    #[test]
    fn no_grasp_reflection_jumps_to_push_to_edge() {
        let s = builtin("edge").unwrap();
        let o = obs(&s);
        let mut p = ScriptedPlanner::new(&s);
        let first = p.plan(&o, &all_schemas()).unwrap();
        let input = ReflectionInput {
            failure: exec_failure(ExecErrorKind::NoGraspFound, first.steps[0].clone()),
            observation: o,
            failed_plan: first.clone(),
            history: Vec::new(),
        };
        let r = p.reflect(&input).unwrap();
        assert_eq!(r.insight, "object ungraspable in place; create overhang or raise it");
        assert_eq!(r.revised.revision, first.revision + 1);
        assert_eq!(r.revised.summary(), s.fallback_plans[2].summary());
    }

    #[test]
    fn out_of_reach_reflection_adds_tool_prefix() {
        let s = builtin("tool_hook").unwrap();
        let o = obs(&s);
        let mut p = ScriptedPlanner::new(&s);
        let first = p.plan(&o, &all_schemas()).unwrap();
        let input = ReflectionInput {
            failure: exec_failure(ExecErrorKind::OutOfReach, first.steps[0].clone()),
            observation: o,
            failed_plan: first,
            history: Vec::new(),
        };
        let r = p.reflect(&input).unwrap();
        assert_eq!(r.revised.steps[0], PrimitiveInstance::new(PrimitiveKind::Grasp, "hook"));
        assert_eq!(r.revised.steps[1].region_name(), Some("behind_object"));
    }

    #[test]
    fn book_rotate_collision_moves_to_push_plan() {
        let s = builtin("book").unwrap();
        let o = obs(&s);
        let mut p = ScriptedPlanner::new(&s);
        p.plan(&o, &all_schemas()).unwrap();
        let second = p.plan(&o, &all_schemas()).unwrap();
        let input = ReflectionInput {
            failure: exec_failure(ExecErrorKind::Collision, second.steps[0].clone()),
            observation: o,
            failed_plan: second,
            history: Vec::new(),
        };
        let r = p.reflect(&input).unwrap();
        assert!(r.revised.steps.iter().all(|s| s.kind != PrimitiveKind::Rotate));
        assert_eq!(r.revised.steps[0].region_name(), Some("shelf_front"));
    }

    #[test]
    fn scripted_is_pure_in_its_inputs() {
        let s = builtin("wall").unwrap();
        let run = || {
            let mut p = ScriptedPlanner::new(&s);
            let o = obs(&s);
            let a = p.plan(&o, &all_schemas()).unwrap();
            let input = ReflectionInput {
                failure: exec_failure(ExecErrorKind::NoGraspFound, a.steps[0].clone()),
                observation: o,
                failed_plan: a.clone(),
                history: Vec::new(),
            };
            (a, p.reflect(&input).unwrap())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn fenced_block_parsing() {
        let reply = "Reasoning...\n```json\n{\"revision\":0,\"steps\":[{\"kind\":\"grasp\",\"object_id\":\"box\"}]}\n```\nthanks";
        let sk = parse_plan_reply(reply, &SymbolicState::default()).unwrap();
        assert_eq!(sk.steps.len(), 1);
        assert!(extract_fenced_block("no fence").is_err());
        assert!(extract_fenced_block("```a``` and ```b```").is_err());
        let bad = "```json\n{\"revision\":0,\"steps\":[{\"kind\":\"release\",\"object_id\":\"box\"}]}\n```";
        assert!(parse_plan_reply(bad, &SymbolicState::default()).is_err());
    }

    #[test]
    fn index_parsing() {
        assert_eq!(parse_index("2", 4).unwrap(), 2);
        assert_eq!(parse_index("I pick candidate 3.", 4).unwrap(), 3);
        assert!(matches!(parse_index("7", 4), Err(Error::Selection(_))));
        assert!(parse_index("none", 4).is_err());
    }

    #[test]
    fn template_fill() {
        let t = fill_template("a {X} b {Y} {X}", &[("X", "1"), ("Y", "2")]);
        assert_eq!(t, "a 1 b 2 1");
        assert!(primitives_text(&all_schemas()).contains("(grasp ?o) :precondition (and gripper_free not held(o))"));
        assert_eq!(parse_insight("INSIGHT: too thin\n```json\n{}\n```"), "too thin");
    }
}
