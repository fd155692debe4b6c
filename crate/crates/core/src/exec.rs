//! Heuristic low-level policies that drive an object to a sub-goal pose in
//! the execution scene and report typed errors.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{PrimitiveInstance, PrimitiveKind};
use crate::geometry::{
    contact_normals, cross, farthest_point_sample, orientation_angle, signed_yaw_error, Polygon2, Pose6D,
    Vec2, Vec3,
};
use crate::twin::{SettleStatus, TerrainKind, ToolSpec, TwinScene};
use crate::{Error, Result};

/// Kinematic stand-in for the arm, gripper, and grasp planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub base_position: [f64; 2],
    pub reach_min: f64,
    pub reach_max: f64,
    pub gripper_aperture: f64,
    pub finger_clearance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_held: Option<ToolSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_object: Option<String>,
}

impl Default for RobotModel {
    fn default() -> Self {
        Self {
            base_position: [0.0, 0.0],
            reach_min: 0.15,
            reach_max: 0.75,
            gripper_aperture: 0.08,
            finger_clearance: 0.008,
            tool_held: None,
            held_object: None,
        }
    }
}

impl RobotModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.reach_min >= 0.0 && self.reach_min < self.reach_max) {
            return Err(Error::invalid("robot needs 0 <= reach_min < reach_max"));
        }
        if !(self.gripper_aperture > 0.0) {
            return Err(Error::invalid("gripper aperture must be > 0"));
        }
        Ok(())
    }

    pub fn base(&self) -> Vec2 {
        Vec2::from(self.base_position)
    }

    pub fn in_annulus(&self, p: &Vec2, reach: f64) -> bool {
        let r = (p - self.base()).norm();
        r >= self.reach_min && r <= reach
    }
}

/// Maximum reach, extended by a held tool's effective length.
pub fn effective_reach(robot: &RobotModel) -> f64 {
    robot.reach_max + robot.tool_held.as_ref().map_or(0.0, |t| t.effective_length)
}

pub const IK_FAILURE_MESSAGE: &str = "Unable to solve an IK solution";
/// Tool tip must be this close to the object's center to extend push reach.
pub const TOOL_ENGAGE_DIST: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecErrorKind {
    IkFailure,
    OutOfReach,
    Collision,
    NoGraspFound,
    ConvergenceTimeout,
    ObjectLost,
}

impl ExecErrorKind {
    pub const ALL: [ExecErrorKind; 6] = [
        ExecErrorKind::IkFailure,
        ExecErrorKind::OutOfReach,
        ExecErrorKind::Collision,
        ExecErrorKind::NoGraspFound,
        ExecErrorKind::ConvergenceTimeout,
        ExecErrorKind::ObjectLost,
    ];
}

impl fmt::Display for ExecErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecError {
    pub kind: ExecErrorKind,
    pub message: String,
    pub step: PrimitiveInstance,
    #[serde(default)]
    pub phase: String,
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} during {} ({}): {}", self.kind, self.step, self.phase, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub snapshot: u32,
    pub phase: String,
    pub pos_error: f64,
    pub rot_error_deg: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecTrace {
    pub entries: Vec<TraceEntry>,
    pub error: Option<ExecError>,
}

impl ExecTrace {
    pub fn success(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct ExecOutcome {
    pub scene: TwinScene,
    pub trace: ExecTrace,
}

impl ExecOutcome {
    pub fn error(&self) -> Option<&ExecError> {
        self.trace.error.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub pos_tol: f64,
    pub yaw_tol_deg: f64,
    pub fps_k: usize,
    pub max_iters: usize,
    pub stall_iters: usize,
    pub yaw_step: f64,
    pub approach_len: f64,
}

impl Default for PushConfig {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 0.0,
            kd: 0.2,
            pos_tol: 0.01,
            yaw_tol_deg: 5.0,
            fps_k: 16,
            max_iters: 300,
            stall_iters: 20,
            yaw_step: 0.01,
            approach_len: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspConfig {
    pub min_top_height: f64,
    pub min_overhang: f64,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self { min_top_height: 0.03, min_overhang: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecConfig {
    pub push: PushConfig,
    pub grasp: GraspConfig,
    /// Transport clearance above the higher of start and goal, meters.
    #[serde(default = "default_hover")]
    pub hover_height: f64,
}

fn default_hover() -> f64 {
    0.15
}

impl ExecConfig {
    pub fn standard() -> Self {
        Self { hover_height: default_hover(), ..Default::default() }
    }
}

struct Run<'a> {
    step: &'a PrimitiveInstance,
    trace: ExecTrace,
    snapshot: u32,
}

impl<'a> Run<'a> {
    fn new(step: &'a PrimitiveInstance) -> Self {
        Self { step, trace: ExecTrace::default(), snapshot: 0 }
    }

    fn log(&mut self, phase: &str, pos_error: f64, rot_error_deg: f64) {
        self.snapshot += 1;
        self.trace.entries.push(TraceEntry { snapshot: self.snapshot, phase: phase.into(), pos_error, rot_error_deg });
    }

    fn fail(mut self, scene: TwinScene, kind: ExecErrorKind, phase: &str, message: String) -> ExecOutcome {
        self.trace.error = Some(ExecError { kind, message, step: self.step.clone(), phase: phase.into() });
        ExecOutcome { scene, trace: self.trace }
    }

    fn done(self, scene: TwinScene) -> ExecOutcome {
        ExecOutcome { scene, trace: self.trace }
    }
}

/// Point where the ray from `from` along `dir` leaves the convex polygon.
fn ray_exit(poly: &Polygon2, from: &Vec2, dir: &Vec2) -> Vec2 {
    let mut best = 0.0f64;
    for (a, b) in poly.edges() {
        let e = b - a;
        let denom = cross(dir, &e);
        if denom.abs() < 1e-15 {
            continue;
        }
        let t = cross(&(a - from), &e) / denom;
        let u = cross(&(a - from), dir) / denom;
        if t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            best = best.max(t);
        }
    }
    from + dir * best
}

fn segment_hits_polygon(a: &Vec2, b: &Vec2, poly: &Polygon2) -> bool {
    if poly.contains(a) || poly.contains(b) {
        return true;
    }
    poly.edges().any(|(p, q)| {
        let d1 = cross(&(b - a), &(p - a));
        let d2 = cross(&(b - a), &(q - a));
        let d3 = cross(&(q - p), &(a - p));
        let d4 = cross(&(q - p), &(b - p));
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    })
}

fn held_tool_engaged(scene: &TwinScene, object_id: &str) -> Result<Option<String>> {
    let Some(held) = scene.robot.held_object.as_deref() else { return Ok(None) };
    if held == object_id {
        return Ok(None);
    }
    let tool = scene.object(held)?;
    let com = scene.object(object_id)?.pose.xy();
    Ok(tool
        .tool_tip()
        .filter(|t| (Vec2::new(t.x, t.y) - com).norm() <= TOOL_ENGAGE_DIST)
        .map(|_| held.to_string()))
}

fn move_with(scene: &mut TwinScene, tool: &Option<String>, before: &Pose6D, after: &Pose6D) -> Result<()> {
    if let Some(id) = tool {
        let t = scene.object_mut(id)?;
        let d = after.position - before.position;
        t.pose.position += Vec3::new(d.x, d.y, 0.0);
    }
    Ok(())
}

/// Two-phase push: translate toward the sub-goal with contacts antipodal to
/// the motion, then align yaw with couples of farthest-point contacts.
pub fn exec_push(
    scene: &TwinScene,
    step: &PrimitiveInstance,
    subgoal: &Pose6D,
    cfg: &PushConfig,
) -> Result<ExecOutcome> {
    let id = step.object_id.as_str();
    let mut run = Run::new(step);
    let mut scene = scene.clone();
    let tool = held_tool_engaged(&scene, id)?;
    let reach = if tool.is_some() { effective_reach(&scene.robot) } else { scene.robot.reach_max };
    let ignore: Vec<&str> = tool.iter().map(|s| s.as_str()).collect();
    let yaw_tol = cfg.yaw_tol_deg.to_radians();
    let kappa = scene.push_model.rotation_gain / scene.dynamics_perturbation.friction_scale.max(1e-6);
    let (mut integral, mut prev_err) = (0.0, None::<f64>);
    let mut best = f64::INFINITY;
    let mut stall = 0;
    for _ in 0..cfg.max_iters {
        let obj = scene.object(id)?;
        let pose = obj.pose;
        let com = pose.xy();
        let e = subgoal.xy() - com;
        let pos_err = e.norm();
        let yaw_err = signed_yaw_error(&pose, subgoal);
        if pos_err < cfg.pos_tol && yaw_err.abs() < yaw_tol {
            return Ok(run.done(scene));
        }
        let metric = pos_err + 0.1 * yaw_err.abs();
        if metric < best - 1e-6 {
            best = metric;
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.stall_iters {
                let phase = if pos_err >= cfg.pos_tol { "translate" } else { "yaw" };
                return Ok(run.fail(
                    scene,
                    ExecErrorKind::ConvergenceTimeout,
                    phase,
                    format!("push made no progress for {} steps; {pos_err:.3} m from the sub-goal", cfg.stall_iters),
                ));
            }
        }
        let footprint = obj.footprint();
        let mut pushes: Vec<(Vec2, Vec2, f64)> = Vec::with_capacity(2);
        let phase = if pos_err >= cfg.pos_tol {
            let v = e / pos_err;
            let d = prev_err.map_or(0.0, |p| pos_err - p);
            integral += pos_err;
            prev_err = Some(pos_err);
            let u = cfg.kp * pos_err + cfg.ki * integral + cfg.kd * d;
            pushes.push((ray_exit(&footprint, &com, &-v), v, u.clamp(1e-4, crate::twin::MAX_PUSH_STEP)));
            "translate"
        } else {
            let perimeter: f64 = footprint.edges().map(|(a, b)| (b - a).norm()).sum();
            let samples = footprint.boundary_samples(perimeter / (8 * cfg.fps_k) as f64);
            let k = cfg.fps_k.min(samples.len());
            let picked = farthest_point_sample(&samples, k, 0)?;
            let pts: Vec<Vec2> = picked.iter().map(|&i| samples[i]).collect();
            let normals = contact_normals(&footprint, &pts)?;
            let want = yaw_err.signum();
            let reachable = |p: &Vec2| scene.robot.in_annulus(p, reach);
            let arm = |i: usize| cross(&(pts[i] - com), &normals[i]);
            let best = |ok: &dyn Fn(usize) -> bool| {
                (0..pts.len())
                    .filter(|&i| reachable(&pts[i]) && want * arm(i) > 1e-9 && ok(i))
                    .max_by(|&a, &b| (want * arm(a)).total_cmp(&(want * arm(b))))
            };
            let Some(p) = best(&|_| true) else {
                return Ok(run.fail(
                    scene,
                    ExecErrorKind::OutOfReach,
                    "yaw",
                    "no reachable contact produces yaw progress".into(),
                ));
            };
            let step_for = |i: usize| (yaw_err.abs() / (kappa * arm(i).abs())).min(cfg.yaw_step).max(1e-4);
            // an opposite-normal partner turning the same way cancels the translation
            match best(&|i| normals[i].dot(&normals[p]) < -0.9) {
                Some(q) => {
                    let s = step_for(p).min(step_for(q));
                    let inward = scene
                        .surface_under(&com)
                        .map_or(Vec2::zeros(), |(f, _)| f.footprint.centroid() - com);
                    let (a, b) = if normals[p].dot(&inward) >= normals[q].dot(&inward) { (p, q) } else { (q, p) };
                    pushes.push((pts[a], normals[a], s));
                    pushes.push((pts[b], normals[b], s));
                }
                None => pushes.push((pts[p], normals[p], step_for(p))),
            }
            "yaw"
        };
        // the first push of a couple moves the object, so carry contacts in its frame
        let local: Vec<(Vec3, Vec3, f64)> = pushes
            .iter()
            .map(|(c, d, s)| {
                let c3 = pose.inverse_transform_point(&Vec3::new(c.x, c.y, pose.position.z));
                (c3, pose.orientation.inverse() * Vec3::new(d.x, d.y, 0.0), *s)
            })
            .collect();
        let mut after = pose;
        for (lc, ld, step_len) in local {
            let now = scene.object(id)?.pose;
            let cw = now.transform_point(&lc);
            let dw = now.orientation * ld;
            let contact = Vec2::new(cw.x, cw.y);
            let dir = Vec2::new(dw.x, dw.y).normalize();
            if !scene.robot.in_annulus(&contact, reach) {
                let r = (contact - scene.robot.base()).norm();
                let msg = format!(
                    "push contact ({:.3}, {:.3}) is {r:.3} m from the base, outside the reach annulus [{:.2}, {:.2}] m",
                    contact.x, contact.y, scene.robot.reach_min, reach
                );
                return Ok(run.fail(scene, ExecErrorKind::OutOfReach, phase, msg));
            }
            let approach = contact - dir * cfg.approach_len;
            if let Some(other) = scene.objects.iter().find(|o| {
                o.id != id
                    && !ignore.contains(&o.id.as_str())
                    && scene.robot.held_object.as_deref() != Some(o.id.as_str())
                    && segment_hits_polygon(&approach, &contact, &o.footprint())
            }) {
                let msg = format!("pusher approach to {id} passes through {}", other.id);
                return Ok(run.fail(scene, ExecErrorKind::Collision, phase, msg));
            }
            let before = scene.object(id)?.pose;
            let c3 = Vec3::new(contact.x, contact.y, before.position.z);
            let out = scene.apply_push_ignoring(id, &c3, &dir, step_len, &ignore)?;
            after = out.scene.object(id)?.pose;
            let mut next = out.scene;
            move_with(&mut next, &tool, &before, &after)?;
            scene = next;
            if out.settle.status != SettleStatus::Stable {
                let how = match out.settle.status {
                    SettleStatus::Toppled => "toppled",
                    _ => "fell off its support",
                };
                return Ok(run.fail(scene, ExecErrorKind::ObjectLost, phase, format!("{id} {how} while being pushed")));
            }
        }
        let (d, y) = crate::geometry::se2_error(&after, subgoal);
        run.log(phase, d, y);
    }
    let obj = scene.object(id)?;
    let (d, y) = crate::geometry::se2_error(&obj.pose, subgoal);
    if d < cfg.pos_tol && y < cfg.yaw_tol_deg {
        return Ok(run.done(scene));
    }
    Ok(run.fail(
        scene,
        ExecErrorKind::ConvergenceTimeout,
        "translate",
        format!("push did not converge in {} steps ({d:.3} m, {y:.1} deg left)", cfg.max_iters),
    ))
}

/// Face flip about the bottom edge whose landing orientation is closest to
/// the sub-goal, lifted in 5 degree increments.
pub fn exec_rotate(scene: &TwinScene, step: &PrimitiveInstance, subgoal: &Pose6D) -> Result<ExecOutcome> {
    let id = step.object_id.as_str();
    let mut run = Run::new(step);
    let obj = scene.object(id)?;
    let start = obj.pose;
    if orientation_angle(&start.orientation, &subgoal.orientation) <= 10.0 {
        return Ok(run.done(scene.clone()));
    }
    let obb = obj.obb();
    let edge = obb
        .bottom_edges()
        .into_iter()
        .min_by(|a, b| {
            let fa = orientation_angle(&obb.flipped_about(a).orientation, &subgoal.orientation);
            let fb = orientation_angle(&obb.flipped_about(b).orientation, &subgoal.orientation);
            fa.total_cmp(&fb)
        })
        .ok_or_else(|| Error::invalid("object has no bottom edges"))?;
    // the opposite top edge is the edge's point reflection through the center
    let mid = (edge.0 + edge.1) * 0.5;
    let contact = obb.center_pose.position * 2.0 - mid;
    let c2 = Vec2::new(contact.x, contact.y);
    if !scene.robot.in_annulus(&c2, scene.robot.reach_max) {
        let msg = format!("pivot contact ({:.3}, {:.3}) is outside the reach annulus", c2.x, c2.y);
        return Ok(run.fail(scene.clone(), ExecErrorKind::OutOfReach, "approach", msg));
    }
    for i in 1..=18 {
        let theta = (5.0 * i as f64).to_radians();
        let (next, outcome) = match scene.pivot_rotate(id, &edge, theta) {
            Ok(r) => r,
            Err(Error::Collision(msg)) => {
                return Ok(run.fail(scene.clone(), ExecErrorKind::Collision, "pivot", msg));
            }
            Err(e) => return Err(e),
        };
        let now = next.object(id)?.pose;
        let moved = orientation_angle(&now.orientation, &start.orientation);
        let err = orientation_angle(&now.orientation, &subgoal.orientation);
        run.log("pivot", (now.xy() - subgoal.xy()).norm(), err);
        if moved > 45.0 {
            if outcome.status != SettleStatus::Stable {
                return Ok(run.fail(next, ExecErrorKind::ObjectLost, "settle", format!("{id} did not come to rest after the flip")));
            }
            if err > 10.0 {
                let msg = format!("flip landed {err:.1} deg from the sub-goal orientation");
                return Ok(run.fail(next, ExecErrorKind::ConvergenceTimeout, "settle", msg));
            }
            return Ok(run.done(next));
        }
    }
    Ok(run.fail(
        scene.clone(),
        ExecErrorKind::ConvergenceTimeout,
        "pivot",
        "balance point never crossed within 90 degrees".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspRule {
    Top,
    Side,
}

/// Rule-based grasp check: every rule that fires with its grasp point, and
/// a description of each condition that failed.
pub fn grasp_rules(scene: &TwinScene, object_id: &str, cfg: &GraspConfig) -> Result<(Vec<(GraspRule, Vec2)>, Vec<String>)> {
    let obj = scene.object(object_id)?;
    let obb = obj.obb();
    let robot = &scene.robot;
    let height = obb.top_z() - obb.bottom_z();
    let corners = obb.bottom_corners();
    let sides = [(corners[1] - corners[0]).norm(), (corners[2] - corners[1]).norm()];
    let min_extent = sides[0].min(sides[1]);
    let mut fired = Vec::new();
    let mut failed = Vec::new();
    if height < cfg.min_top_height {
        failed.push(format!("top grasp needs height >= {:.3} m (have {height:.3} m)", cfg.min_top_height));
    } else if min_extent > robot.gripper_aperture {
        failed.push(format!("top grasp needs width <= {:.3} m (have {min_extent:.3} m)", robot.gripper_aperture));
    } else {
        fired.push((GraspRule::Top, obj.pose.xy()));
    }
    let over = scene.overhang(object_id)?;
    let d = over.map_or(0.0, |o| o.0);
    if d < cfg.min_overhang {
        failed.push(format!("side grasp needs overhang >= {:.3} m (have {d:.3} m)", cfg.min_overhang));
    } else if height > robot.gripper_aperture {
        failed.push(format!("side grasp needs thickness <= {:.3} m (have {height:.3} m)", robot.gripper_aperture));
    } else if let Some((_, p, q)) = over {
        let below = scene
            .terrain
            .iter()
            .filter(|t| t.footprint.contains(&p))
            .map(|t| t.surface_height(&p))
            .fold(f64::NEG_INFINITY, f64::max);
        let clearance = obb.bottom_z() - below;
        if clearance < robot.finger_clearance {
            failed.push(format!(
                "side grasp needs {:.3} m finger clearance below the overhang (have {clearance:.3} m)",
                robot.finger_clearance
            ));
        } else {
            fired.push((GraspRule::Side, (p + q) * 0.5));
        }
    }
    Ok((fired, failed))
}

/// Reach and approach check for one grasp; `None` when clear.
fn grasp_blocker(scene: &TwinScene, id: &str, rule: GraspRule, point: &Vec2) -> Option<(ExecErrorKind, String)> {
    if !scene.robot.in_annulus(point, scene.robot.reach_max) {
        let msg = format!("grasp point ({:.3}, {:.3}) is outside the reach annulus", point.x, point.y);
        return Some((ExecErrorKind::OutOfReach, msg));
    }
    let half = scene.robot.gripper_aperture * 0.5;
    for t in &scene.terrain {
        match t.kind {
            TerrainKind::Shelf { .. } if t.footprint.contains(point) => {
                let msg = format!("{rule:?} grasp approach to {id} collides with the {} ceiling", t.name);
                return Some((ExecErrorKind::Collision, msg));
            }
            TerrainKind::Wall { .. } => {
                let d = t.footprint.closest_boundary_point(point).0;
                if t.footprint.contains(point) || d < half {
                    let msg = format!("gripper fingers at ({:.3}, {:.3}) collide with {}", point.x, point.y, t.name);
                    return Some((ExecErrorKind::Collision, msg));
                }
            }
            _ => {}
        }
    }
    None
}

pub fn exec_grasp(scene: &TwinScene, step: &PrimitiveInstance, cfg: &GraspConfig) -> Result<ExecOutcome> {
    let id = step.object_id.as_str();
    let mut run = Run::new(step);
    if let Some(h) = &scene.robot.held_object {
        let msg = format!("gripper already holds {h}");
        return Ok(run.fail(scene.clone(), ExecErrorKind::NoGraspFound, "plan", msg));
    }
    let (fired, failed) = grasp_rules(scene, id, cfg)?;
    if fired.is_empty() {
        let msg = format!("no grasp pose found for {id}: {}", failed.join("; "));
        return Ok(run.fail(scene.clone(), ExecErrorKind::NoGraspFound, "plan", msg));
    }
    let mut first_block = None;
    for (rule, point) in &fired {
        match grasp_blocker(scene, id, *rule, point) {
            None => {
                let mut next = scene.clone();
                let tool = next.object(id)?.tool_spec.clone();
                next.robot.held_object = Some(id.into());
                next.robot.tool_held = tool;
                run.log(if *rule == GraspRule::Top { "top_grasp" } else { "side_grasp" }, 0.0, 0.0);
                return Ok(run.done(next));
            }
            Some(b) => {
                first_block.get_or_insert(b);
            }
        }
    }
    let (kind, msg) = first_block.expect("at least one rule fired");
    Ok(run.fail(scene.clone(), kind, "approach", msg))
}

pub fn exec_moveto(scene: &TwinScene, step: &PrimitiveInstance, subgoal: &Pose6D, hover_height: f64) -> Result<ExecOutcome> {
    let mut run = Run::new(step);
    let Some(id) = scene.robot.held_object.clone() else {
        return Err(Error::invalid("moveto needs a held object"));
    };
    let start = scene.object(&id)?.pose;
    if !scene.robot.in_annulus(&subgoal.xy(), scene.robot.reach_max) {
        return Ok(run.fail(scene.clone(), ExecErrorKind::IkFailure, "transport", IK_FAILURE_MESSAGE.into()));
    }
    let hover = start.position.z.max(subgoal.position.z) + hover_height;
    let (a, b) = (start.xy(), subgoal.xy());
    for t in &scene.terrain {
        if let TerrainKind::Wall { wall_height } = t.kind {
            if t.height + wall_height > hover && segment_hits_polygon(&a, &b, &t.footprint) {
                let msg = format!("transport path of {id} crosses {}", t.name);
                return Ok(run.fail(scene.clone(), ExecErrorKind::Collision, "transport", msg));
            }
        }
    }
    for o in scene.objects.iter().filter(|o| o.id != id) {
        if o.obb().top_z() > hover && segment_hits_polygon(&a, &b, &o.footprint()) {
            let msg = format!("transport path of {id} crosses {}", o.id);
            return Ok(run.fail(scene.clone(), ExecErrorKind::Collision, "transport", msg));
        }
    }
    let next = match scene.place_at(&id, *subgoal) {
        Ok(s) => s,
        Err(Error::PlacementCollision(msg)) => {
            return Ok(run.fail(scene.clone(), ExecErrorKind::Collision, "lower", msg));
        }
        Err(e) => return Err(e),
    };
    run.log("transport", 0.0, 0.0);
    Ok(run.done(next))
}

pub fn exec_release(scene: &TwinScene, step: &PrimitiveInstance) -> Result<ExecOutcome> {
    let mut run = Run::new(step);
    let Some(id) = scene.robot.held_object.clone() else {
        return Err(Error::invalid("release needs a held object"));
    };
    let mut next = scene.clone();
    next.robot.held_object = None;
    next.robot.tool_held = None;
    let out = next.settle(&id)?;
    next.object_mut(&id)?.pose = out.final_pose;
    run.log("release", 0.0, 0.0);
    Ok(run.done(next))
}

/// Dispatches one primitive to its controller.
pub fn execute_step(
    scene: &TwinScene,
    step: &PrimitiveInstance,
    subgoal: Option<&Pose6D>,
    cfg: &ExecConfig,
) -> Result<ExecOutcome> {
    let need = || subgoal.ok_or_else(|| Error::invalid(format!("{} needs a sub-goal pose", step.kind)));
    match step.kind {
        PrimitiveKind::Push => exec_push(scene, step, need()?, &cfg.push),
        PrimitiveKind::Rotate => exec_rotate(scene, step, need()?),
        PrimitiveKind::Grasp => exec_grasp(scene, step, &cfg.grasp),
        PrimitiveKind::Moveto => exec_moveto(scene, step, need()?, cfg.hover_height),
        PrimitiveKind::Release => exec_release(scene, step),
    }
}
