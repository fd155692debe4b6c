//! Mental rehearsal: region to anchor, candidate sampling per primitive,
//! settle filtering in the twin, reachability ranking, and selection.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, UnitQuaternion};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{PrimitiveInstance, PrimitiveKind, RegionDescriptor};
use crate::geometry::{closest_on_segment, orientation_angle, yaw_quat, Pose6D, Vec2, Vec3};
use crate::render::render_candidate;
use crate::scenarios::Goal;
use crate::twin::{SettleOutcome, SettleStatus, TerrainKind, TwinScene};
use crate::{Error, Result};

/// Geometric definition of a named region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionResolver {
    /// Goal zone centroid, or the goal pose position.
    TargetZone,
    /// Closest point on a terrain feature's footprint boundary to the object.
    NearestBoundary { feature: String },
    /// Like `NearestBoundary`, skipping boundary stretches within `margin` of a wall.
    OpenBoundary { feature: String, margin: f64 },
    /// Closest point on a fixed segment to the object.
    Segment { a: [f64; 2], b: [f64; 2] },
    /// Beside `object` on the far side from the goal.
    BehindObject { object: String, margin: f64 },
    Fixed { point: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Row-major 3x3 intrinsics.
    pub intrinsics: [[f64; 3]; 3],
    /// World-from-camera transform; the camera looks along its +z axis.
    pub extrinsics: Pose6D,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    /// Nadir camera `height` meters above `center`.
    pub fn overhead(center: Vec2, height: f64) -> Self {
        // camera +z points down: rotate 180 degrees about x
        let q = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), PI);
        Self {
            intrinsics: [[600.0, 0.0, 320.0], [0.0, 600.0, 240.0], [0.0, 0.0, 1.0]],
            extrinsics: Pose6D::from_parts(Vec3::new(center.x, center.y, height), q),
            width: 640,
            height: 480,
        }
    }

    fn k(&self) -> Matrix3<f64> {
        let m = self.intrinsics;
        Matrix3::new(m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2])
    }

    pub fn project(&self, world: &Vec3) -> Result<Vec2> {
        let c = self.extrinsics.inverse_transform_point(world);
        if c.z <= 1e-9 {
            return Err(Error::DegenerateRay("point is behind the camera".into()));
        }
        let p = self.k() * (c / c.z);
        Ok(Vec2::new(p.x, p.y))
    }

    /// Intersects the pixel's viewing ray with the plane `z = plane_z`.
    pub fn back_project(&self, pixel: &Vec2, plane_z: f64) -> Result<Vec3> {
        if !(pixel.x >= 0.0 && pixel.y >= 0.0 && pixel.x <= self.width as f64 && pixel.y <= self.height as f64) {
            return Err(Error::invalid(format!("pixel ({}, {}) outside the image", pixel.x, pixel.y)));
        }
        let k_inv = self
            .k()
            .try_inverse()
            .ok_or_else(|| Error::invalid("camera intrinsics are singular"))?;
        let dir = self.extrinsics.orientation * (k_inv * Vec3::new(pixel.x, pixel.y, 1.0));
        let origin = self.extrinsics.position;
        if dir.z.abs() < 1e-12 {
            return Err(Error::DegenerateRay("viewing ray is parallel to the support plane".into()));
        }
        let t = (plane_z - origin.z) / dir.z;
        if t <= 0.0 {
            return Err(Error::DegenerateRay("support plane is behind the camera".into()));
        }
        Ok(origin + dir * t)
    }
}

pub enum AnchorMode<'a> {
    Scripted,
    Grounded { pixel: Vec2, camera: &'a CameraModel },
}

/// Context a region is resolved in: the scenario's registry and goal plus
/// the object the primitive acts on.
pub struct RegionContext<'a> {
    pub registry: &'a alloc::collections::BTreeMap<String, RegionResolver>,
    pub goal: &'a Goal,
    pub object_id: &'a str,
    /// Object the goal refers to.
    pub task_object: &'a str,
}

fn support_z(scene: &TwinScene, p: &Vec2) -> f64 {
    scene.surface_under(p).map_or(0.0, |(_, h)| h)
}

pub fn resolve_anchor(
    region: &RegionDescriptor,
    scene: &TwinScene,
    ctx: &RegionContext<'_>,
    mode: AnchorMode<'_>,
) -> Result<Vec3> {
    if let AnchorMode::Grounded { pixel, camera } = mode {
        // iterate so the plane matches the support found under the hit point
        let mut z = scene.terrain.iter().map(|t| t.height).fold(0.0, f64::max);
        let mut hit = camera.back_project(&pixel, z)?;
        for _ in 0..5 {
            let s = support_z(scene, &Vec2::new(hit.x, hit.y));
            if (s - z).abs() < 1e-12 {
                break;
            }
            z = s;
            hit = camera.back_project(&pixel, z)?;
        }
        return Ok(hit);
    }
    let resolver = ctx
        .registry
        .get(&region.name)
        .ok_or_else(|| Error::NotFound(format!("region {}", region.name)))?;
    let com = scene.object(ctx.object_id)?.pose.xy();
    let feature = |name: &str| {
        scene
            .terrain
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::NotFound(format!("terrain feature {name}")))
    };
    let p = match resolver {
        RegionResolver::TargetZone => ctx.goal.center(),
        RegionResolver::NearestBoundary { feature: f } => feature(f)?.footprint.closest_boundary_point(&com).1,
        RegionResolver::OpenBoundary { feature: f, margin } => {
            let fp = &feature(f)?.footprint;
            let walls: Vec<_> = scene
                .terrain
                .iter()
                .filter(|t| matches!(t.kind, TerrainKind::Wall { .. }))
                .collect();
            let open = |q: &Vec2| walls.iter().all(|w| w.footprint.closest_boundary_point(q).0 >= *margin && !w.footprint.contains(q));
            let mut best: Option<(f64, Vec2)> = None;
            for (a, b) in fp.edges() {
                // nearest point of this edge, then walk samples for the open part
                let n = (((b - a).norm() / 0.002).ceil() as usize).max(1);
                for i in 0..=n {
                    let q = a + (b - a) * (i as f64 / n as f64);
                    let d = (q - com).norm();
                    if open(&q) && best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, q));
                    }
                }
                let q = closest_on_segment(&com, &a, &b).1;
                let d = (q - com).norm();
                if open(&q) && best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, q));
                }
            }
            best.ok_or_else(|| Error::NotFound(format!("open boundary of {f}")))?.1
        }
        RegionResolver::Segment { a, b } => closest_on_segment(&com, &Vec2::from(*a), &Vec2::from(*b)).1,
        RegionResolver::BehindObject { object, margin } => {
            let obj = scene.object(object)?;
            let com = obj.pose.xy();
            let radius = obj
                .footprint()
                .vertices()
                .iter()
                .map(|v| (v - com).norm())
                .fold(0.0, f64::max);
            let to_goal = ctx.goal.center() - com;
            let dir = if to_goal.norm() > 1e-9 { to_goal / to_goal.norm() } else { Vec2::x() };
            com - dir * (radius + margin)
        }
        RegionResolver::Fixed { point } => Vec2::from(*point),
    };
    Ok(Vec3::new(p.x, p.y, support_z(scene, &p)))
}

/// Pose hint implied by the region when the step gives none: the goal pose
/// for `TargetZone` on pose goals.
pub fn implied_hint(region: Option<&RegionDescriptor>, ctx: &RegionContext<'_>) -> Option<Pose6D> {
    let r = region?;
    match ctx.registry.get(&r.name)? {
        RegionResolver::TargetZone if ctx.object_id == ctx.task_object => ctx.goal.target_pose(),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgoalConfig {
    pub samples: usize,
    pub sample_radius: f64,
    pub push_yaw_range_deg: f64,
    /// Sampling spread around an explicit pose hint.
    pub hint_radius: f64,
    pub hint_yaw_range_deg: f64,
    /// Disc radius for tool tip placement.
    pub tool_radius: f64,
    pub tool_yaw_range_deg: f64,
    pub keep: usize,
}

impl Default for SubgoalConfig {
    fn default() -> Self {
        Self {
            samples: 16,
            sample_radius: 0.06,
            push_yaw_range_deg: 45.0,
            hint_radius: 0.005,
            hint_yaw_range_deg: 2.0,
            tool_radius: 0.03,
            tool_yaw_range_deg: 10.0,
            keep: 4,
        }
    }
}

fn disc(rng: &mut ChaCha8Rng, r: f64) -> Vec2 {
    let rho = r * rng.gen::<f64>().sqrt();
    let th = rng.gen_range(-PI..PI);
    Vec2::new(rho * th.cos(), rho * th.sin())
}

/// Orientation with the yaw about world z factored out.
fn tilt_of(pose: &Pose6D) -> UnitQuaternion<f64> {
    yaw_quat(-pose.yaw()) * pose.orientation
}

/// Samples `n` candidate poses along the primitive's free DOF.
pub fn sample_candidates(
    primitive: &PrimitiveInstance,
    anchor: &Vec3,
    scene: &TwinScene,
    n: usize,
    rng_seed: u64,
    hint: Option<&Pose6D>,
    cfg: &SubgoalConfig,
) -> Result<Vec<Pose6D>> {
    if n < 4 {
        return Err(Error::invalid("need at least 4 samples"));
    }
    let obj = scene.object(&primitive.object_id)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let pose = obj.pose;
    let tilt = tilt_of(&pose);
    let hh = obj.obb().resting_half_height();
    let ax = Vec2::new(anchor.x, anchor.y);
    let flat = |xy: Vec2, yaw: f64| {
        let z = support_z(scene, &xy) + hh;
        Pose6D::from_parts(Vec3::new(xy.x, xy.y, z), yaw_quat(yaw) * tilt)
    };
    let mut out = Vec::with_capacity(n);
    match primitive.kind {
        PrimitiveKind::Push => {
            let (center, yaw0, r, range) = match hint {
                Some(h) => (h.xy(), h.yaw(), cfg.hint_radius, cfg.hint_yaw_range_deg),
                None => (ax, pose.yaw(), cfg.sample_radius, cfg.push_yaw_range_deg),
            };
            let range = range.to_radians();
            for _ in 0..n {
                let xy = center + disc(&mut rng, r);
                out.push(flat(xy, yaw0 + rng.gen_range(-range..=range)));
            }
        }
        PrimitiveKind::Rotate => {
            let obb = obj.obb();
            let flips: Vec<Pose6D> = obb.bottom_edges().iter().map(|e| obb.flipped_about(e)).collect();
            for j in 0..n {
                let mut p = flips[j % flips.len()];
                if j >= flips.len() {
                    let d = disc(&mut rng, 0.01);
                    p.position += Vec3::new(d.x, d.y, 0.0);
                }
                out.push(p);
            }
        }
        PrimitiveKind::Moveto => {
            if let Some(tool) = &obj.tool_spec {
                let heading = {
                    let d = ax - scene.robot.base();
                    d.y.atan2(d.x)
                };
                let range = cfg.tool_yaw_range_deg.to_radians();
                let tip = Vec3::from(tool.tip_offset);
                for _ in 0..n {
                    let t = ax + disc(&mut rng, cfg.tool_radius);
                    let yaw = heading + rng.gen_range(-range..=range);
                    let rot = yaw_quat(yaw) * tilt;
                    let off = rot * tip;
                    let c = Vec2::new(t.x - off.x, t.y - off.y);
                    let z = support_z(scene, &c) + hh;
                    out.push(Pose6D::from_parts(Vec3::new(c.x, c.y, z), rot));
                }
            } else {
                let (center, yaw0, r, range) = match hint {
                    Some(h) => (h.xy(), h.yaw(), cfg.hint_radius, cfg.hint_yaw_range_deg.to_radians()),
                    None => (ax, pose.yaw(), cfg.sample_radius, PI),
                };
                for _ in 0..n {
                    let xy = center + disc(&mut rng, r);
                    out.push(flat(xy, yaw0 + rng.gen_range(-range..=range)));
                }
            }
        }
        PrimitiveKind::Grasp | PrimitiveKind::Release => {
            return Err(Error::invalid(format!("{} has no sub-goal pose", primitive.kind)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub pose: Pose6D,
    pub settle: SettleOutcome,
    pub reachability_score: f64,
    /// Overhang beyond the support at this pose, meters.
    pub overhang: f64,
    #[serde(skip)]
    pub rendering: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub object_id: String,
    pub candidates: Vec<Candidate>,
}

pub fn reachability(scene: &TwinScene, pose: &Pose6D) -> f64 {
    let d = (pose.xy() - scene.robot.base()).norm();
    (1.0 - d / scene.robot.reach_max).clamp(0.0, 1.0)
}

/// Places and settles each candidate, keeps stable ones, and returns the
/// `keep` best by reachability with renderings.
pub fn filter_and_rank(
    candidates: &[Pose6D],
    object_id: &str,
    scene: &TwinScene,
    keep: usize,
) -> Result<CandidateSet> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to filter"));
    }
    let mut survivors = Vec::new();
    for pose in candidates {
        let placed = match scene.place_at(object_id, *pose) {
            Ok(s) => s,
            Err(Error::PlacementCollision(_)) => continue,
            Err(e) => return Err(e),
        };
        let settle = placed.settle(object_id)?;
        if settle.status != SettleStatus::Stable || placed.blocked_at(object_id, &settle.final_pose, &[])? {
            continue;
        }
        let settled = placed.place_at(object_id, settle.final_pose).unwrap_or(placed);
        let overhang = settled.overhang(object_id)?.map_or(0.0, |o| o.0);
        survivors.push(Candidate {
            pose: settle.final_pose,
            settle,
            reachability_score: reachability(scene, &settle.final_pose),
            overhang,
            rendering: String::new(),
        });
    }
    if survivors.is_empty() {
        return Err(Error::NoFeasiblePose(format!(
            "all {} sampled poses for {object_id} toppled, fell off, or collided",
            candidates.len()
        )));
    }
    // stable sort keeps sampling order among equal scores
    survivors.sort_by(|a, b| b.reachability_score.total_cmp(&a.reachability_score));
    survivors.truncate(keep.max(1));
    for (k, c) in survivors.iter_mut().enumerate() {
        c.rendering = render_candidate(scene, object_id, &c.pose, k);
    }
    Ok(CandidateSet { object_id: object_id.into(), candidates: survivors })
}

#[derive(Debug, Clone)]
pub struct SelectionContext<'a> {
    pub current: &'a PrimitiveInstance,
    pub next: Option<&'a PrimitiveInstance>,
    pub hint: Option<Pose6D>,
    pub anchor: Vec3,
    /// Tool tip offset when the moved object is a tool.
    pub tool_tip: Option<Vec3>,
}

/// Deterministic per-primitive-pair choice rule.
pub fn select_scripted(set: &CandidateSet, ctx: &SelectionContext<'_>) -> usize {
    let argmin = |f: &dyn Fn(&Candidate) -> f64| {
        set.candidates
            .iter()
            .enumerate()
            .min_by(|a, b| f(a.1).total_cmp(&f(b.1)))
            .map_or(0, |(i, _)| i)
    };
    if let Some(tip) = ctx.tool_tip {
        let a = Vec2::new(ctx.anchor.x, ctx.anchor.y);
        return argmin(&|c| {
            let t = c.pose.transform_point(&tip);
            (Vec2::new(t.x, t.y) - a).norm()
        });
    }
    if let Some(h) = ctx.hint {
        if ctx.current.kind == PrimitiveKind::Rotate {
            return argmin(&|c| orientation_angle(&c.pose.orientation, &h.orientation));
        }
        return argmin(&|c| (c.pose.xy() - h.xy()).norm() + 0.01 * orientation_angle(&c.pose.orientation, &h.orientation));
    }
    if ctx.next.map(|n| n.kind) == Some(PrimitiveKind::Grasp) {
        return argmin(&|c| -c.overhang);
    }
    0
}

/// Pluggable candidate selector; the model-backed one lives with the IO code.
pub trait Selector {
    fn select(&mut self, set: &CandidateSet, ctx: &SelectionContext<'_>) -> Result<usize>;
}

pub struct ScriptedSelector;

impl Selector for ScriptedSelector {
    fn select(&mut self, set: &CandidateSet, ctx: &SelectionContext<'_>) -> Result<usize> {
        Ok(select_scripted(set, ctx))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

/// Asks the selector; on a selection error or bad index, falls back to the
/// scripted rule and records why.
pub fn select_subgoal(
    set: &CandidateSet,
    ctx: &SelectionContext<'_>,
    selector: &mut dyn Selector,
) -> Result<(Candidate, SelectionRecord)> {
    if set.candidates.is_empty() {
        return Err(Error::Selection("empty candidate set".into()));
    }
    let record = match selector.select(set, ctx) {
        Ok(k) if k < set.candidates.len() => SelectionRecord { index: k, fallback_reason: None },
        Ok(k) => SelectionRecord {
            index: select_scripted(set, ctx),
            fallback_reason: Some(format!("index {k} out of range for {} candidates", set.candidates.len())),
        },
        Err(e) => SelectionRecord { index: select_scripted(set, ctx), fallback_reason: Some(format!("{e}")) },
    };
    Ok((set.candidates[record.index].clone(), record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon2;
    use crate::planner::parse_index;
    use crate::twin::tests::table_scene;
    use alloc::collections::BTreeMap;
    use alloc::vec;
    use proptest::prelude::*;

    fn registry() -> BTreeMap<String, RegionResolver> {
        let mut m = BTreeMap::new();
        m.insert("table_edge_nearest".into(), RegionResolver::NearestBoundary { feature: "table".into() });
        m.insert("target_zone".into(), RegionResolver::TargetZone);
        m
    }

    fn zone_goal() -> Goal {
        Goal::Region { zone: Polygon2::rect(0.5, 0.1, 0.7, 0.3).unwrap() }
    }

    fn anchor_of(scene: &TwinScene, name: &str) -> Vec3 {
        let reg = registry();
        let goal = zone_goal();
        let ctx = RegionContext { registry: &reg, goal: &goal, object_id: "box", task_object: "box" };
        resolve_anchor(&RegionDescriptor::named(name), scene, &ctx, AnchorMode::Scripted).unwrap()
    }

    fn push(id: &str) -> PrimitiveInstance {
        PrimitiveInstance::at(PrimitiveKind::Push, id, "table_edge_nearest")
    }

    #[test]
    fn nearest_edge_anchor_at_object_y() {
        // box 10 cm from the +x edge of a table spanning x in [0, 0.8]
        let s = table_scene().place_at("box", Pose6D::from_xyz_yaw(0.7, 0.1, 0.8, 0.0)).unwrap();
        let a = anchor_of(&s, "table_edge_nearest");
        assert!((a - Vec3::new(0.8, 0.1, 0.75)).norm() < 1e-12);
    }

    #[test]
    fn target_zone_anchor_is_centroid() {
        let a = anchor_of(&table_scene(), "target_zone");
        assert!((a.x - 0.6).abs() < 1e-12 && (a.y - 0.2).abs() < 1e-12);
    }

    #[test]
    fn unknown_region_is_not_found() {
        let reg = registry();
        let goal = zone_goal();
        let ctx = RegionContext { registry: &reg, goal: &goal, object_id: "box", task_object: "box" };
        let r = resolve_anchor(&RegionDescriptor::named("nowhere"), &table_scene(), &ctx, AnchorMode::Scripted);
        assert!(matches!(r, Err(Error::NotFound(_))));
    }

    #[test]
    fn nadir_center_pixel_hits_point_below() {
        let cam = CameraModel::overhead(Vec2::new(0.4, 0.0), 1.5);
        let p = cam.back_project(&Vec2::new(320.0, 240.0), 0.75).unwrap();
        assert!((p - Vec3::new(0.4, 0.0, 0.75)).norm() < 1e-12);
    }

    #[test]
    fn horizontal_ray_is_degenerate() {
        let mut cam = CameraModel::overhead(Vec2::new(0.0, 0.0), 1.0);
        cam.extrinsics = Pose6D::from_parts(Vec3::new(0.0, 0.0, 1.0), UnitQuaternion::from_axis_angle(&Vec3::x_axis(), -PI / 2.0));
        assert!(matches!(cam.back_project(&Vec2::new(320.0, 240.0), 0.75), Err(Error::DegenerateRay(_))));
        assert!(cam.back_project(&Vec2::new(-1.0, 0.0), 0.75).is_err());
    }

    #[test]
    fn grounded_anchor_lands_on_table() {
        let s = table_scene();
        let cam = CameraModel::overhead(Vec2::new(0.4, 0.0), 1.5);
        let pixel = cam.project(&Vec3::new(0.3, 0.1, 0.75)).unwrap();
        let reg = registry();
        let goal = zone_goal();
        let ctx = RegionContext { registry: &reg, goal: &goal, object_id: "box", task_object: "box" };
        let a = resolve_anchor(&RegionDescriptor::named("x"), &s, &ctx, AnchorMode::Grounded { pixel, camera: &cam }).unwrap();
        assert!((a - Vec3::new(0.3, 0.1, 0.75)).norm() < 1e-9);
    }

    #[test]
    fn push_samples_pin_roll_pitch_and_height() {
        let s = table_scene();
        let a = anchor_of(&s, "target_zone");
        let poses = sample_candidates(&push("box"), &a, &s, 16, 7, None, &SubgoalConfig::default()).unwrap();
        assert_eq!(poses.len(), 16);
        for p in &poses {
            let q = p.orientation.quaternion();
            assert_eq!((q.i, q.j), (0.0, 0.0));
            assert!((p.position.z - 0.80).abs() < 1e-12);
            assert!((p.xy() - Vec2::new(a.x, a.y)).norm() <= 0.06 + 1e-12);
            assert!(p.yaw().abs() <= 45f64.to_radians() + 1e-9);
        }
    }

    #[test]
    fn rotate_samples_are_the_four_adjacent_flips() {
        let mut s = table_scene();
        s.objects[0] = crate::twin::RigidObject::new("plank", [0.1, 0.03, 0.01], Pose6D::from_xyz_yaw(0.4, 0.0, 0.76, 0.0));
        let step = PrimitiveInstance::new(PrimitiveKind::Rotate, "plank");
        let poses = sample_candidates(&step, &Vec3::new(0.4, 0.0, 0.75), &s, 16, 3, None, &SubgoalConfig::default()).unwrap();
        let mut distinct: Vec<UnitQuaternion<f64>> = Vec::new();
        for p in &poses {
            assert!((orientation_angle(&p.orientation, &UnitQuaternion::identity()) - 90.0).abs() < 1e-9);
            if !distinct.iter().any(|d| orientation_angle(d, &p.orientation) < 1e-6) {
                distinct.push(p.orientation);
            }
        }
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn sampling_is_deterministic_and_checks_inputs() {
        let s = table_scene();
        let a = anchor_of(&s, "target_zone");
        let cfg = SubgoalConfig::default();
        let one = sample_candidates(&push("box"), &a, &s, 16, 42, None, &cfg).unwrap();
        assert_eq!(one, sample_candidates(&push("box"), &a, &s, 16, 42, None, &cfg).unwrap());
        assert_ne!(one, sample_candidates(&push("box"), &a, &s, 16, 43, None, &cfg).unwrap());
        assert!(sample_candidates(&push("box"), &a, &s, 3, 42, None, &cfg).is_err());
        let grasp = PrimitiveInstance::new(PrimitiveKind::Grasp, "box");
        assert!(sample_candidates(&grasp, &a, &s, 16, 42, None, &cfg).is_err());
    }

    #[test]
    fn void_candidates_are_discarded() {
        let s = table_scene();
        let off = vec![Pose6D::from_xyz_yaw(1.2, 0.0, 0.8, 0.0), Pose6D::from_xyz_yaw(-0.3, 0.2, 0.8, 0.0)];
        assert!(matches!(filter_and_rank(&off, "box", &s, 4), Err(Error::NoFeasiblePose(_))));
        // COM past the edge beyond balance topples
        let past = vec![Pose6D::from_xyz_yaw(0.82, 0.0, 0.8, 0.0)];
        assert!(matches!(filter_and_rank(&past, "box", &s, 4), Err(Error::NoFeasiblePose(_))));
    }

    #[test]
    fn six_survivors_give_four_sorted() {
        let s = table_scene();
        let poses: Vec<Pose6D> = (0..6).map(|i| Pose6D::from_xyz_yaw(0.2 + 0.1 * i as f64, 0.1, 0.8, 0.0)).collect();
        let set = filter_and_rank(&poses, "box", &s, 4).unwrap();
        assert_eq!(set.candidates.len(), 4);
        assert!(set.candidates.windows(2).all(|w| w[0].reachability_score >= w[1].reachability_score));
        assert!(set.candidates.iter().all(|c| !c.rendering.is_empty()));
        // closest to the base first
        assert!((set.candidates[0].pose.position.x - 0.2).abs() < 1e-12);
    }

    fn fake_set(overhangs: &[f64]) -> CandidateSet {
        let candidates = overhangs
            .iter()
            .enumerate()
            .map(|(i, &o)| {
                let pose = Pose6D::from_xyz_yaw(0.1 * i as f64, 0.0, 0.8, 0.0);
                Candidate {
                    pose,
                    settle: SettleOutcome { status: SettleStatus::Stable, final_pose: pose },
                    reachability_score: 1.0 - 0.1 * i as f64,
                    overhang: o,
                    rendering: String::new(),
                }
            })
            .collect();
        CandidateSet { object_id: "card".into(), candidates }
    }

    fn ctx<'a>(cur: &'a PrimitiveInstance, next: Option<&'a PrimitiveInstance>) -> SelectionContext<'a> {
        SelectionContext { current: cur, next, hint: None, anchor: Vec3::zeros(), tool_tip: None }
    }

    #[test]
    fn scripted_selection_rules() {
        let cur = push("card");
        let grasp = PrimitiveInstance::new(PrimitiveKind::Grasp, "card");
        assert_eq!(select_scripted(&fake_set(&[0.0]), &ctx(&cur, None)), 0);
        assert_eq!(select_scripted(&fake_set(&[0.0, 0.01, 0.03]), &ctx(&cur, Some(&grasp))), 2);
        assert_eq!(select_scripted(&fake_set(&[0.0, 0.01, 0.03]), &ctx(&cur, None)), 0);
    }

    struct Replying(&'static str);
    impl Selector for Replying {
        fn select(&mut self, set: &CandidateSet, _: &SelectionContext<'_>) -> Result<usize> {
            parse_index(self.0, set.candidates.len())
        }
    }

    #[test]
    fn model_reply_selection_and_fallback() {
        let cur = push("card");
        let grasp = PrimitiveInstance::new(PrimitiveKind::Grasp, "card");
        let set = fake_set(&[0.0, 0.01, 0.03, 0.02]);
        let (c, rec) = select_subgoal(&set, &ctx(&cur, None), &mut Replying("2")).unwrap();
        assert_eq!((rec.index, rec.fallback_reason), (2, None));
        assert_eq!(c.pose, set.candidates[2].pose);
        let (_, rec) = select_subgoal(&set, &ctx(&cur, Some(&grasp)), &mut Replying("9")).unwrap();
        assert_eq!(rec.index, 2);
        assert!(rec.fallback_reason.is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn edge_anchor_on_boundary(x in 0.06f64..0.74, y in -0.34f64..0.34) {
            let s = table_scene().place_at("box", Pose6D::from_xyz_yaw(x, y, 0.8, 0.0)).unwrap();
            let a = anchor_of(&s, "table_edge_nearest");
            let table = &s.terrain[1].footprint;
            prop_assert!(table.closest_boundary_point(&Vec2::new(a.x, a.y)).0 < 1e-9);
        }

        #[test]
        fn camera_round_trip(u in 0.0f64..640.0, v in 0.0f64..480.0, h in 1.0f64..2.0) {
            let cam = CameraModel::overhead(Vec2::new(0.4, 0.0), h);
            let w = cam.back_project(&Vec2::new(u, v), 0.75).unwrap();
            let back = cam.project(&w).unwrap();
            prop_assert!((back - Vec2::new(u, v)).norm() < 0.5);
        }

        #[test]
        fn filter_output_is_stable_sorted_subset(seed in 0u64..10_000) {
            let s = table_scene();
            let a = Vec3::new(0.75, 0.0, 0.75);
            let poses = sample_candidates(&push("box"), &a, &s, 16, seed, None, &SubgoalConfig::default()).unwrap();
            if let Ok(set) = filter_and_rank(&poses, "box", &s, 4) {
                prop_assert!(!set.candidates.is_empty() && set.candidates.len() <= 4);
                for c in &set.candidates {
                    prop_assert_eq!(c.settle.status, SettleStatus::Stable);
                    prop_assert!(poses.iter().any(|p| (p.position - c.pose.position).norm() < 1e-9
                        && orientation_angle(&p.orientation, &c.pose.orientation) < 1e-6));
                }
                prop_assert!(set.candidates.windows(2).all(|w| w[0].reachability_score >= w[1].reachability_score));
            }
        }
    }
}
