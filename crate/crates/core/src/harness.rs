//! Episode loop: randomize, plan, rehearse sub-goals in the twin, execute,
//! reflect on failure, and judge success from the final snapshot.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{PlanSkeleton, PrimitiveInstance, PrimitiveKind};
use crate::exec::{exec_release, execute_step, ExecConfig, ExecError};
use crate::geometry::{orientation_angle, Pose6D, Vec2, Vec3};
use crate::planner::{all_schemas, Failure, Observation, ReflectionInput, ScriptedPlanner, TaskPlanner};
use crate::scenarios::{Goal, Scenario};
use crate::subgoal::{
    filter_and_rank, implied_hint, resolve_anchor, sample_candidates, select_subgoal, AnchorMode, CandidateSet,
    RegionContext, ScriptedSelector, SelectionContext, SelectionRecord, Selector, SubgoalConfig,
};
use crate::twin::{SceneRole, SettleStatus, TwinScene};
use crate::{Error, Result};

pub const SUCCESS_POS_TOL: f64 = 0.03;
pub const SUCCESS_ANGLE_TOL_DEG: f64 = 10.0;
pub const DEFAULT_BUDGET: u32 = 3;
const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    NoPose,
    NoReflection,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::Full, Ablation::NoPose, Ablation::NoReflection];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoPose => "no_pose",
            Ablation::NoReflection => "no_reflection",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    /// Replans allowed after the initial plan.
    pub budget: u32,
    pub subgoal: SubgoalConfig,
    pub exec: ExecConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET, subgoal: SubgoalConfig::default(), exec: ExecConfig::standard() }
    }
}

/// Randomized start of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStart {
    pub scene: TwinScene,
    pub goal: Goal,
    pub initial_state: Option<String>,
}

fn accept_pose(scene: &TwinScene, id: &str, pose: Pose6D) -> Result<Option<TwinScene>> {
    let placed = match scene.place_at(id, pose) {
        Ok(s) => s,
        Err(Error::PlacementCollision(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let out = placed.settle(id)?;
    if out.status != SettleStatus::Stable || placed.blocked_at(id, &out.final_pose, &[])? {
        return Ok(None);
    }
    Ok(Some(placed.place_at(id, out.final_pose).unwrap_or(placed)))
}

fn jitter(rng: &mut ChaCha8Rng, pose: &Pose6D, pos: f64, yaw_deg: f64) -> Pose6D {
    let dx = rng.gen_range(-pos..=pos);
    let dy = rng.gen_range(-pos..=pos);
    let dyaw = rng.gen_range(-yaw_deg..=yaw_deg).to_radians();
    let mut p = pose.rotated_about_z(dyaw);
    p.position += Vec3::new(dx, dy, 0.0);
    p
}

/// Jitters the task object's start and the goal; the box-style initial-state
/// set is cycled by seed.
pub fn randomize(scenario: &Scenario, seed: u64) -> Result<EpisodeStart> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = scenario.randomization;
    let id = scenario.task_object.as_str();
    let mut base_scene = scenario.scene.clone();
    let mut initial_state = None;
    if !scenario.initial_states.is_empty() {
        let st = &scenario.initial_states[(seed % scenario.initial_states.len() as u64) as usize];
        base_scene.object_mut(id)?.pose = st.pose;
        initial_state = Some(st.name.clone());
    }
    let base = base_scene.object(id)?.pose;
    let mut scene = None;
    for _ in 0..MAX_RESAMPLES {
        let p = jitter(&mut rng, &base, r.pos_jitter, r.yaw_jitter_deg);
        if let Some(s) = accept_pose(&base_scene, id, p)? {
            scene = Some(s);
            break;
        }
    }
    let scene = scene.ok_or_else(|| {
        Error::RandomizationFailure(format!("{}: no feasible start for {id} in {MAX_RESAMPLES} draws", scenario.id))
    })?;
    let goal = match &scenario.goal {
        Goal::Pose { target } => {
            let mut found = None;
            for _ in 0..MAX_RESAMPLES {
                let p = jitter(&mut rng, target, r.goal_pos_jitter, r.goal_yaw_jitter_deg);
                // goal must be a resting pose in the scene without the object in the way
                let mut empty = scene.clone();
                empty.objects.retain(|o| o.id == id);
                if let Some(s) = accept_pose(&empty, id, p)? {
                    found = Some(s.object(id)?.pose);
                    break;
                }
            }
            Goal::Pose {
                target: found.ok_or_else(|| {
                    Error::RandomizationFailure(format!("{}: no feasible goal in {MAX_RESAMPLES} draws", scenario.id))
                })?,
            }
        }
        Goal::Region { zone } => {
            let d = Vec2::new(
                rng.gen_range(-r.goal_pos_jitter..=r.goal_pos_jitter),
                rng.gen_range(-r.goal_pos_jitter..=r.goal_pos_jitter),
            );
            Goal::Region { zone: zone.translated(&d) }
        }
    };
    Ok(EpisodeStart { scene, goal, initial_state })
}

/// Strict thresholds: distance below 3 cm and angle below 10 degrees.
pub fn meets_pose_criterion(distance: f64, angle_deg: f64) -> bool {
    distance < SUCCESS_POS_TOL && angle_deg < SUCCESS_ANGLE_TOL_DEG
}

pub fn check_success(scene: &TwinScene, goal: &Goal, task_object: &str) -> Result<bool> {
    let obj = scene.object(task_object)?;
    if scene.is_held(task_object) {
        return Ok(false);
    }
    Ok(match goal {
        Goal::Pose { target } => meets_pose_criterion(
            (obj.pose.position - target.position).norm(),
            orientation_angle(&obj.pose.orientation, &target.orientation),
        ),
        Goal::Region { zone } => {
            zone.contains(&obj.pose.xy()) && scene.settle(task_object)?.status == SettleStatus::Stable
        }
    })
}

/// Short content hash of a scene snapshot.
pub fn snapshot_id(scene: &TwinScene) -> String {
    // FNV-1a over the canonical JSON
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in scene.to_json().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rehearsal {
    pub step_index: usize,
    pub anchor: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<CandidateSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRecord>,
    pub subgoal: Option<Pose6D>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step_index: usize,
    pub step: String,
    pub error: Option<ExecError>,
    pub trace_len: usize,
    pub snapshot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub skeleton: PlanSkeleton,
    pub rehearsal: Vec<Rehearsal>,
    pub steps: Vec<StepOutcome>,
    pub failure: Option<Failure>,
    pub insight: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scenario_id: String,
    pub seed: u64,
    pub ablation: Ablation,
    pub initial_state: Option<String>,
    pub success: bool,
    pub attempts: Vec<Attempt>,
    pub replans_used: u32,
    /// Why the loop stopped early, when the planner or randomization gave up.
    pub stop_reason: Option<String>,
    pub final_snapshot: Option<String>,
    /// Filled in by the caller, which owns the clock.
    pub wall_ms: u64,
}

fn step_seed(seed: u64, attempt: usize, step: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((attempt as u64) << 32) ^ step as u64
}

/// Sub-goal of one step without pose generation: the anchor point with the
/// current orientation, or a fixed quarter flip toward the target.
fn no_pose_subgoal(scene: &TwinScene, step: &PrimitiveInstance, anchor: &Vec3, goal: &Goal) -> Result<Pose6D> {
    let obj = scene.object(&step.object_id)?;
    let obb = obj.obb();
    if step.kind == PrimitiveKind::Rotate {
        let toward = goal.center();
        let edge = obb
            .bottom_edges()
            .into_iter()
            .min_by(|a, b| {
                let m = |e: &(Vec3, Vec3)| (Vec2::new((e.0.x + e.1.x) / 2.0, (e.0.y + e.1.y) / 2.0) - toward).norm();
                m(a).total_cmp(&m(b))
            })
            .expect("box has four bottom edges");
        return Ok(obb.flipped_about(&edge));
    }
    let z = scene.surface_under(&Vec2::new(anchor.x, anchor.y)).map_or(0.0, |(_, h)| h) + obb.resting_half_height();
    Ok(Pose6D::from_parts(Vec3::new(anchor.x, anchor.y, z), obj.pose.orientation))
}

/// Advances the twin as if the step reached its sub-goal.
fn rehearse_effect(twin: &TwinScene, step: &PrimitiveInstance, subgoal: Option<&Pose6D>) -> Result<TwinScene> {
    let id = &step.object_id;
    let mut next = match (step.kind, subgoal) {
        (PrimitiveKind::Push | PrimitiveKind::Rotate | PrimitiveKind::Moveto, Some(p)) => twin.place_at(id, *p)?,
        _ => twin.clone(),
    };
    match step.kind {
        PrimitiveKind::Grasp => {
            next.robot.held_object = Some(id.clone());
            next.robot.tool_held = next.object(id)?.tool_spec.clone();
        }
        PrimitiveKind::Release => {
            next.robot.held_object = None;
            next.robot.tool_held = None;
            let out = next.settle(id)?;
            next = next.place_at(id, out.final_pose).unwrap_or(next);
        }
        _ => {}
    }
    Ok(next)
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    goal: &'a Goal,
    cfg: &'a HarnessConfig,
    ablation: Ablation,
    seed: u64,
}

/// Sub-goals chosen for a plan in the twin, or the failure that stopped it.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRehearsal {
    pub records: Vec<Rehearsal>,
    pub subgoals: Vec<Option<Pose6D>>,
    pub failure: Option<Failure>,
}

/// Rehearses a plan step by step in the twin: resolve the anchor, sample,
/// filter, select, and advance the twin as if the sub-goal were reached.
#[allow(clippy::too_many_arguments)]
pub fn rehearse_plan(
    scenario: &Scenario,
    goal: &Goal,
    scene: &TwinScene,
    skeleton: &PlanSkeleton,
    seed: u64,
    attempt_index: usize,
    ablation: Ablation,
    cfg: &HarnessConfig,
    selector: &mut dyn Selector,
) -> Result<PlanRehearsal> {
    let mut out = PlanRehearsal { records: Vec::new(), subgoals: Vec::new(), failure: None };
    let mut twin = scene.with_role(SceneRole::Twin);
    for (i, step) in skeleton.steps.iter().enumerate() {
        if !step.kind.needs_target() {
            out.subgoals.push(None);
            out.records.push(Rehearsal { step_index: i, anchor: None, candidates: None, selection: None, subgoal: None });
            twin = rehearse_effect(&twin, step, None)?;
            continue;
        }
        let rctx = RegionContext {
            registry: &scenario.regions,
            goal,
            object_id: &step.object_id,
            task_object: &scenario.task_object,
        };
        let anchor = match &step.region {
            Some(r) => resolve_anchor(r, &twin, &rctx, AnchorMode::Scripted)?,
            None => match &step.target_pose_hint {
                Some(h) => h.position,
                None => twin.object(&step.object_id)?.pose.position,
            },
        };
        let mut record = Rehearsal { step_index: i, anchor: Some(anchor.into()), candidates: None, selection: None, subgoal: None };
        let pose = if ablation == Ablation::NoPose {
            no_pose_subgoal(&twin, step, &anchor, goal)?
        } else {
            let hint = step.target_pose_hint.or_else(|| implied_hint(step.region.as_ref(), &rctx));
            let poses = sample_candidates(
                step,
                &anchor,
                &twin,
                cfg.subgoal.samples,
                step_seed(seed, attempt_index, i),
                hint.as_ref(),
                &cfg.subgoal,
            )?;
            let set = match filter_and_rank(&poses, &step.object_id, &twin, cfg.subgoal.keep) {
                Ok(s) => s,
                Err(Error::NoFeasiblePose(m)) => {
                    out.records.push(record);
                    out.failure = Some(Failure::NoFeasiblePose { step: step.clone(), message: m });
                    return Ok(out);
                }
                Err(e) => return Err(e),
            };
            let obj = twin.object(&step.object_id)?;
            let tool_tip = match (&obj.tool_spec, step.kind) {
                (Some(t), PrimitiveKind::Moveto) => Some(Vec3::from(t.tip_offset)),
                _ => None,
            };
            let sctx = SelectionContext { current: step, next: skeleton.steps.get(i + 1), hint, anchor, tool_tip };
            let (cand, sel) = select_subgoal(&set, &sctx, selector)?;
            record.candidates = Some(set);
            record.selection = Some(sel);
            cand.pose
        };
        record.subgoal = Some(pose);
        out.records.push(record);
        out.subgoals.push(Some(pose));
        twin = match rehearse_effect(&twin, step, Some(&pose)) {
            Ok(t) => t,
            Err(Error::PlacementCollision(m)) => {
                out.failure = Some(Failure::NoFeasiblePose { step: step.clone(), message: m });
                return Ok(out);
            }
            Err(e) => return Err(e),
        };
    }
    Ok(out)
}

/// Candidate set for step `k` of a plan, exactly as selection would see it
/// after rehearsing the earlier steps from the randomized start.
pub fn inspect_step(
    scenario: &Scenario,
    seed: u64,
    skeleton: &PlanSkeleton,
    k: usize,
    cfg: &HarnessConfig,
) -> Result<(TwinScene, CandidateSet)> {
    let step = skeleton
        .steps
        .get(k)
        .ok_or_else(|| Error::invalid(format!("plan has {} steps, no step {k}", skeleton.steps.len())))?;
    if !step.kind.needs_target() {
        return Err(Error::invalid(format!("{} has no sub-goal pose to sample", step.kind)));
    }
    let start = randomize(scenario, seed)?;
    let head = PlanSkeleton { steps: skeleton.steps[..=k].to_vec(), ..skeleton.clone() };
    let r = rehearse_plan(scenario, &start.goal, &start.scene, &head, seed, 0, Ablation::Full, cfg, &mut ScriptedSelector)?;
    if let Some(f) = r.failure {
        return Err(Error::NoFeasiblePose(f.message().into()));
    }
    let mut twin = start.scene.with_role(SceneRole::Twin);
    for (i, st) in head.steps[..k].iter().enumerate() {
        twin = rehearse_effect(&twin, st, r.subgoals[i].as_ref())?;
    }
    let set = r.records[k].candidates.clone().expect("target step records candidates");
    Ok((twin, set))
}

/// Runs one plan: rehearse every step in the twin, then execute in order.
fn run_attempt(
    ctx: &Ctx<'_>,
    scene: &TwinScene,
    skeleton: &PlanSkeleton,
    attempt_index: usize,
    selector: &mut dyn Selector,
) -> Result<(TwinScene, Attempt)> {
    let r = rehearse_plan(ctx.scenario, ctx.goal, scene, skeleton, ctx.seed, attempt_index, ctx.ablation, ctx.cfg, selector)?;
    let mut attempt = Attempt {
        skeleton: skeleton.clone(),
        rehearsal: r.records,
        steps: Vec::new(),
        failure: r.failure,
        insight: None,
    };
    if attempt.failure.is_some() {
        return Ok((scene.clone(), attempt));
    }
    let subgoals = r.subgoals;
    let mut current = scene.clone();
    for (i, step) in skeleton.steps.iter().enumerate() {
        let out = match execute_step(&current, step, subgoals[i].as_ref(), &ctx.cfg.exec) {
            Ok(o) => o,
            Err(e) => {
                attempt.failure = Some(Failure::GoalUnmet { message: format!("step {i} ({step}) aborted: {e}") });
                break;
            }
        };
        current = out.scene;
        let error = out.trace.error.clone();
        attempt.steps.push(StepOutcome {
            step_index: i,
            step: step.to_string(),
            error: error.clone(),
            trace_len: out.trace.entries.len(),
            snapshot: snapshot_id(&current),
        });
        if let Some(error) = error {
            attempt.failure = Some(Failure::Exec { error });
            break;
        }
    }
    Ok((current, attempt))
}

/// Algorithm-1 loop with an arbitrary planner and selector.
pub fn run_episode_with(
    scenario: &Scenario,
    seed: u64,
    ablation: Ablation,
    cfg: &HarnessConfig,
    planner: &mut dyn TaskPlanner,
    selector: &mut dyn Selector,
) -> Result<EpisodeResult> {
    let mut result = EpisodeResult {
        scenario_id: scenario.id.clone(),
        seed,
        ablation,
        initial_state: None,
        success: false,
        attempts: Vec::new(),
        replans_used: 0,
        stop_reason: None,
        final_snapshot: None,
        wall_ms: 0,
    };
    let start = match randomize(scenario, seed) {
        Ok(s) => s,
        Err(e @ Error::RandomizationFailure(_)) => {
            result.stop_reason = Some(e.to_string());
            return Ok(result);
        }
        Err(e) => return Err(e),
    };
    result.initial_state = start.initial_state.clone();
    let ctx = Ctx { scenario, goal: &start.goal, cfg, ablation, seed };
    let mut scene = start.scene;
    let budget = if ablation == Ablation::NoReflection { 0 } else { cfg.budget };
    let schemas = all_schemas();
    let obs = Observation::capture(&scene, &scenario.instruction)?;
    let mut skeleton = match planner.plan(&obs, &schemas) {
        Ok(s) => s,
        Err(e) => {
            // keep attempts = replans + 1 even when no plan exists
            result.attempts.push(Attempt {
                skeleton: PlanSkeleton::new(Vec::new(), ""),
                rehearsal: Vec::new(),
                steps: Vec::new(),
                failure: None,
                insight: None,
            });
            result.stop_reason = Some(e.to_string());
            result.final_snapshot = Some(snapshot_id(&scene));
            return Ok(result);
        }
    };
    let mut history: Vec<String> = Vec::new();
    loop {
        let idx = result.attempts.len();
        let (next, mut attempt) = run_attempt(&ctx, &scene, &skeleton, idx, selector)?;
        scene = next;
        let reached = check_success(&scene, &start.goal, &scenario.task_object)?;
        if attempt.failure.is_none() && reached {
            result.success = true;
            result.attempts.push(attempt);
            break;
        }
        if attempt.failure.is_none() {
            attempt.failure = Some(Failure::GoalUnmet { message: goal_message(&scene, &start.goal, &scenario.task_object)? });
        }
        if reached {
            // a failed step can still leave the goal satisfied; the verdict follows the snapshot
            result.success = true;
            result.attempts.push(attempt);
            break;
        }
        if result.replans_used >= budget {
            result.attempts.push(attempt);
            result.stop_reason = Some("replan budget exhausted".into());
            break;
        }
        // open the gripper before replanning so every plan starts free
        if let Some(held) = scene.robot.held_object.clone() {
            let release = PrimitiveInstance::new(PrimitiveKind::Release, held);
            scene = exec_release(&scene, &release)?.scene;
        }
        let input = ReflectionInput {
            failure: attempt.failure.clone().expect("failure set above"),
            observation: Observation::capture(&scene, &scenario.instruction)?,
            failed_plan: skeleton.clone(),
            history: history.clone(),
        };
        match planner.reflect(&input) {
            Ok(r) => {
                history.push(r.insight.clone());
                attempt.insight = Some(r.insight);
                result.attempts.push(attempt);
                skeleton = r.revised;
                result.replans_used += 1;
            }
            Err(e) => {
                result.attempts.push(attempt);
                result.stop_reason = Some(e.to_string());
                break;
            }
        }
    }
    result.final_snapshot = Some(snapshot_id(&scene));
    debug_assert_eq!(result.attempts.len() as u32, result.replans_used + 1);
    Ok(result)
}

fn goal_message(scene: &TwinScene, goal: &Goal, id: &str) -> Result<String> {
    let obj = scene.object(id)?;
    Ok(match goal {
        Goal::Pose { target } => format!(
            "{id} ended {:.3} m and {:.1} deg from the target pose",
            (obj.pose.position - target.position).norm(),
            orientation_angle(&obj.pose.orientation, &target.orientation)
        ),
        Goal::Region { .. } => format!("{id} is not resting inside the target region"),
    })
}

/// Episode with the scripted planner and selector.
pub fn run_episode(scenario: &Scenario, seed: u64, ablation: Ablation, cfg: &HarnessConfig) -> Result<EpisodeResult> {
    let mut planner = ScriptedPlanner::new(scenario);
    run_episode_with(scenario, seed, ablation, cfg, &mut planner, &mut ScriptedSelector)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub task: String,
    pub trials: usize,
    pub successes: usize,
    pub mean_replans: f64,
    pub mean_wall_ms: f64,
}

/// Per-task aggregation, sorted by task id, independent of input order.
pub fn summarize(results: &[EpisodeResult]) -> Vec<BenchRow> {
    let mut by: alloc::collections::BTreeMap<&str, Vec<&EpisodeResult>> = Default::default();
    for r in results {
        by.entry(r.scenario_id.as_str()).or_default().push(r);
    }
    by.into_iter()
        .map(|(task, rs)| {
            let n = rs.len();
            BenchRow {
                task: task.into(),
                trials: n,
                successes: rs.iter().filter(|r| r.success).count(),
                mean_replans: rs.iter().map(|r| r.replans_used as f64).sum::<f64>() / n as f64,
                mean_wall_ms: rs.iter().map(|r| r.wall_ms as f64).sum::<f64>() / n as f64,
            }
        })
        .collect()
}

/// Sequential benchmark over seeds `0..trials`; results sorted by (task, seed).
pub fn run_benchmark(
    scenarios: &[Scenario],
    trials: usize,
    ablation: Ablation,
    cfg: &HarnessConfig,
) -> Result<Vec<EpisodeResult>> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let mut out = Vec::with_capacity(scenarios.len() * trials);
    for s in scenarios {
        for seed in 0..trials as u64 {
            out.push(run_episode(s, seed, ablation, cfg)?);
        }
    }
    out.sort_by(|a, b| (a.scenario_id.as_str(), a.seed).cmp(&(b.scenario_id.as_str(), b.seed)));
    Ok(out)
}
