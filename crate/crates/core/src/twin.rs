//! Quasi-static tabletop world used both as the rehearsal twin and as the
//! execution environment.
//!
//! There is no momentum and no sliding: settle resolves a pose to static
//! equilibrium analytically, pushes follow a declared gain model, and pivots
//! either fall back or complete a face flip.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use nalgebra::UnitQuaternion;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::exec::RobotModel;
use crate::geometry::{
    convex_hull, hull_contains, nearest_hull_edge, overlap_area, overlap_pieces, lifting_axis,
    yaw_quat, Obb, Polygon2, Pose6D, PoseSE2, Vec2, Vec3,
};
use crate::{Error, Result};

/// Scene document version written to and accepted from files.
pub const SCENE_VERSION: u32 = 1;
/// Largest translation a single push step may command, meters.
pub const MAX_PUSH_STEP: f64 = 0.02;
/// Contact points farther than this from a surface are rejected, meters.
pub const CONTACT_TOL: f64 = 0.005;
const HEIGHT_TOL: f64 = 1e-6;
const OVERLAP_EPS: f64 = 1e-8;
/// How far a body's bottom may sit below a surface and still rest on it.
const SUPPORT_SINK_TOL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "extra", rename_all = "snake_case")]
pub enum TerrainKind {
    TableSurface,
    Ground,
    /// `wall_height` above the feature's base height.
    Wall { wall_height: f64 },
    /// Top of the slope sits at the feature height along its uphill edge.
    Slope { incline_deg: f64, downhill: [f64; 2] },
    /// Groove whose rim is at the feature height and floor `depth` below.
    Slot { depth: f64, width: f64 },
    /// Raised floor at the feature height with a ceiling `clearance` above it.
    Shelf { clearance: f64, open_face: [f64; 2] },
}

impl TerrainKind {
    pub fn label(&self) -> &'static str {
        match self {
            TerrainKind::TableSurface => "table_surface",
            TerrainKind::Ground => "ground",
            TerrainKind::Wall { .. } => "wall",
            TerrainKind::Slope { .. } => "slope",
            TerrainKind::Slot { .. } => "slot",
            TerrainKind::Shelf { .. } => "shelf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainFeature {
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub kind: TerrainKind,
    pub footprint: Polygon2,
    pub height: f64,
}

impl TerrainFeature {
    pub fn new(name: impl Into<String>, kind: TerrainKind, footprint: Polygon2, height: f64) -> Self {
        Self { name: name.into(), kind, footprint, height }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.height >= 0.0) {
            return Err(Error::invalid(alloc::format!("feature {} has negative height", self.name)));
        }
        match &self.kind {
            TerrainKind::Wall { wall_height } if !(*wall_height >= 0.0) => {
                Err(Error::invalid("wall height must be >= 0"))
            }
            TerrainKind::Slope { incline_deg, downhill } => {
                if !(*incline_deg > 0.0 && *incline_deg < 60.0) {
                    return Err(Error::invalid("slope incline must lie in (0, 60) degrees"));
                }
                if Vec2::from(*downhill).norm() < 1e-9 {
                    return Err(Error::invalid("slope downhill direction must be non-zero"));
                }
                Ok(())
            }
            TerrainKind::Slot { depth, width } => {
                if !(*width > 0.0) || !(*depth >= 0.0) || *depth > self.height {
                    return Err(Error::invalid("slot needs width > 0 and 0 <= depth <= height"));
                }
                Ok(())
            }
            TerrainKind::Shelf { clearance, .. } if !(*clearance > 0.0) => {
                Err(Error::invalid("shelf clearance must be > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Height of the surface an object would rest on at `p`.
    pub fn surface_height(&self, p: &Vec2) -> f64 {
        match &self.kind {
            TerrainKind::TableSurface | TerrainKind::Ground | TerrainKind::Shelf { .. } => self.height,
            TerrainKind::Wall { wall_height } => self.height + wall_height,
            TerrainKind::Slot { depth, .. } => self.height - depth,
            TerrainKind::Slope { incline_deg, downhill } => {
                let d = Vec2::from(*downhill).normalize();
                let crest = self
                    .footprint
                    .vertices()
                    .iter()
                    .map(|v| v.dot(&d))
                    .fold(f64::INFINITY, f64::min);
                let run = (p.dot(&d) - crest).max(0.0);
                (self.height - run * incline_deg.to_radians().tan()).max(0.0)
            }
        }
    }

    /// Highest point of the surface over a convex region.
    fn max_height_over(&self, ring: &[Vec2]) -> f64 {
        ring.iter()
            .map(|p| self.surface_height(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_ground(&self) -> bool {
        matches!(self.kind, TerrainKind::Ground)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    Hook,
    Pusher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub kind: ToolKind,
    pub effective_length: f64,
    /// Tool tip in the tool's body frame.
    pub tip_offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxShape {
    pub half_extents: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidObject {
    pub id: String,
    pub shape: BoxShape,
    pub pose: Pose6D,
    pub mass: f64,
    pub friction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_spec: Option<ToolSpec>,
}

impl RigidObject {
    pub fn new(id: impl Into<String>, half_extents: [f64; 3], pose: Pose6D) -> Self {
        Self {
            id: id.into(),
            shape: BoxShape { half_extents },
            pose,
            mass: 0.2,
            friction: 0.5,
            tool_spec: None,
        }
    }

    pub fn obb(&self) -> Obb {
        Obb { center_pose: self.pose, half_extents: Vec3::from(self.shape.half_extents) }
    }

    pub fn footprint(&self) -> Polygon2 {
        self.obb().footprint()
    }

    /// World position of the tool tip, when this object is a tool.
    pub fn tool_tip(&self) -> Option<Vec3> {
        self.tool_spec
            .as_ref()
            .map(|t| self.pose.transform_point(&Vec3::from(t.tip_offset)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::invalid(alloc::format!("object {} has non-positive extents", self.id)));
        }
        if !(self.mass > 0.0) {
            return Err(Error::invalid(alloc::format!("object {} needs mass > 0", self.id)));
        }
        if !(0.05..=2.0).contains(&self.friction) {
            return Err(Error::invalid(alloc::format!("object {} friction outside [0.05, 2]", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneRole {
    Twin,
    Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsPerturbation {
    pub friction_scale: f64,
    pub push_gain_scale: f64,
}

impl Default for DynamicsPerturbation {
    fn default() -> Self {
        Self { friction_scale: 1.0, push_gain_scale: 0.85 }
    }
}

/// Declared quasi-static push model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushModel {
    /// In-plane rotation per unit moment arm per unit step, rad / (m * m).
    pub rotation_gain: f64,
}

impl Default for PushModel {
    fn default() -> Self {
        Self { rotation_gain: 40.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinScene {
    pub terrain: Vec<TerrainFeature>,
    pub objects: Vec<RigidObject>,
    pub robot: RobotModel,
    pub role: SceneRole,
    #[serde(default)]
    pub dynamics_perturbation: DynamicsPerturbation,
    #[serde(default)]
    pub push_model: PushModel,
}

#[derive(Serialize, Deserialize)]
struct SceneDocument {
    version: u32,
    #[serde(flatten)]
    scene: TwinScene,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettleStatus {
    Stable,
    Toppled,
    FellOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettleOutcome {
    pub status: SettleStatus,
    pub final_pose: Pose6D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PushOutcome {
    pub scene: TwinScene,
    /// Planar displacement actually achieved (x, y, yaw).
    pub delta: PoseSE2,
    pub settle: SettleOutcome,
    /// Translation was clipped by an obstacle; the contact is a pivot candidate.
    pub blocked: bool,
}

/// A support surface found under a footprint.
struct Support {
    height: f64,
    ground: bool,
    /// Points of the supporting region at `height`.
    contact: Vec<Vec2>,
}

fn ring_area(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| crate::geometry::cross(&ring[i], &ring[(i + 1) % n]))
        .sum::<f64>()
        .abs()
        * 0.5
}

/// Rotation taking the bottom face normal exactly onto world -z, applied
/// about the body center.
pub fn rectify_face_down(obb: &Obb) -> Pose6D {
    let face = obb.bottom_face();
    let n_world = obb.center_pose.orientation * face.normal_local();
    let align = UnitQuaternion::rotation_between(&n_world, &-Vec3::z())
        .unwrap_or_else(UnitQuaternion::identity);
    Pose6D::from_parts(obb.center_pose.position, align * obb.center_pose.orientation)
}

/// Flat orientation with the largest face down and the given heading.
fn largest_face_down(half: &Vec3, yaw: f64) -> UnitQuaternion<f64> {
    let axis = (0..3)
        .min_by(|a, b| half[*a].total_cmp(&half[*b]))
        .unwrap_or(2);
    let base = match axis {
        0 => UnitQuaternion::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2),
        1 => UnitQuaternion::from_axis_angle(&Vec3::x_axis(), FRAC_PI_2),
        _ => UnitQuaternion::identity(),
    };
    yaw_quat(yaw) * base
}

impl TwinScene {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SceneDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: alloc::format!("line {} column {}", e.line(), e.column()),
            message: alloc::format!("{e}"),
        })?;
        if doc.version != SCENE_VERSION {
            return Err(Error::Parse {
                path: "version".into(),
                message: alloc::format!("unsupported scene version {}", doc.version),
            });
        }
        doc.scene.validate()?;
        Ok(doc.scene)
    }

    pub fn to_json(&self) -> String {
        let doc = SceneDocument { version: SCENE_VERSION, scene: self.clone() };
        serde_json::to_string_pretty(&doc).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.terrain {
            t.validate()?;
        }
        for (i, o) in self.objects.iter().enumerate() {
            o.validate()?;
            if self.objects[..i].iter().any(|p| p.id == o.id) {
                return Err(Error::invalid(alloc::format!("duplicate object id {}", o.id)));
            }
        }
        self.robot.validate()
    }

    pub fn object(&self, id: &str) -> Result<&RigidObject> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::NotFound(alloc::format!("object {id}")))
    }

    pub(crate) fn object_mut(&mut self, id: &str) -> Result<&mut RigidObject> {
        self.objects
            .iter_mut()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::NotFound(alloc::format!("object {id}")))
    }

    pub fn with_role(&self, role: SceneRole) -> Self {
        Self { role, ..self.clone() }
    }

    /// Push gain in effect: the perturbation applies only to the execution role.
    pub fn push_gain(&self) -> f64 {
        match self.role {
            SceneRole::Twin => 1.0,
            SceneRole::Execution => self.dynamics_perturbation.push_gain_scale,
        }
    }

    pub fn is_held(&self, id: &str) -> bool {
        self.robot.held_object.as_deref() == Some(id)
    }

    /// Highest terrain feature whose footprint contains `p`, with its height there.
    pub fn surface_under(&self, p: &Vec2) -> Option<(&TerrainFeature, f64)> {
        self.terrain
            .iter()
            .filter(|t| t.footprint.contains(p))
            .map(|t| (t, t.surface_height(p)))
            .fold(None, |best: Option<(&TerrainFeature, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
    }

    /// True when the two objects' boxes share volume.
    fn objects_overlap(a: &Obb, b: &Obb) -> bool {
        let vertical = a.top_z().min(b.top_z()) - a.bottom_z().max(b.bottom_z());
        vertical > 1e-9 && overlap_area(&a.footprint(), &b.footprint()) > OVERLAP_EPS
    }

    /// Returns a new scene with the object at `pose`; does not settle.
    pub fn place_at(&self, object_id: &str, pose: Pose6D) -> Result<TwinScene> {
        let mut next = self.clone();
        let obj = next.object_mut(object_id)?;
        obj.pose = Pose6D::new(pose.position, pose.wxyz())?;
        let placed = obj.obb();
        for other in next.objects.iter().filter(|o| o.id != object_id) {
            if Self::objects_overlap(&placed, &other.obb()) {
                return Err(Error::PlacementCollision(alloc::format!(
                    "{object_id} would interpenetrate {}",
                    other.id
                )));
            }
        }
        Ok(next)
    }

    /// Surfaces under the footprint that the body can rest on: anything
    /// higher than its bottom is a side contact, not a support.
    fn supports_under(&self, object_id: &str, footprint: &Polygon2, bottom: f64) -> Vec<Support> {
        let ring = footprint.vertices();
        let limit = bottom + SUPPORT_SINK_TOL;
        let mut out = Vec::new();
        for t in &self.terrain {
            let pieces = overlap_pieces(ring, &t.footprint);
            for piece in pieces {
                let h = t.max_height_over(&piece);
                if h > limit || ring_area(&piece) <= OVERLAP_EPS {
                    continue;
                }
                let contact = piece
                    .iter()
                    .copied()
                    .filter(|p| (t.surface_height(p) - h).abs() <= HEIGHT_TOL)
                    .collect();
                out.push(Support { height: h, ground: t.is_ground(), contact });
            }
        }
        for o in self.objects.iter().filter(|o| o.id != object_id && !self.is_held(&o.id)) {
            let obb = o.obb();
            for piece in overlap_pieces(ring, &obb.footprint()) {
                if obb.top_z() > limit || ring_area(&piece) <= OVERLAP_EPS {
                    continue;
                }
                out.push(Support { height: obb.top_z(), ground: false, contact: piece });
            }
        }
        out
    }

    /// Resolves the object to static equilibrium. See [`SettleStatus`].
    pub fn settle(&self, object_id: &str) -> Result<SettleOutcome> {
        let obj = self.object(object_id)?;
        Ok(self.settle_pose(object_id, &obj.obb(), 0))
    }

    fn settle_pose(&self, object_id: &str, obb: &Obb, depth: usize) -> SettleOutcome {
        let pose = rectify_face_down(obb);
        let obb = obb.with_pose(pose);
        let hh = obb.resting_half_height();
        let footprint = obb.footprint();
        let supports = self.supports_under(object_id, &footprint, obb.bottom_z());
        let com = pose.xy();
        let at = |z: f64| {
            Pose6D::from_parts(Vec3::new(pose.position.x, pose.position.y, z + hh), pose.orientation)
        };
        if supports.iter().all(|s| s.ground) {
            let ground = supports.iter().map(|s| s.height).fold(0.0, f64::max);
            return SettleOutcome { status: SettleStatus::FellOff, final_pose: at(ground) };
        }
        let top = supports.iter().map(|s| s.height).fold(f64::NEG_INFINITY, f64::max);
        let contact: Vec<Vec2> = supports
            .iter()
            .filter(|s| (s.height - top).abs() <= HEIGHT_TOL)
            .flat_map(|s| s.contact.iter().copied())
            .collect();
        let hull = convex_hull(&contact);
        if hull_contains(&hull, &com, 1e-9) {
            return SettleOutcome { status: SettleStatus::Stable, final_pose: at(top) };
        }
        // tip over the nearest support edge and land beyond it
        let (edge_pt, outward) = nearest_hull_edge(&hull, &com).unwrap_or((com, Vec2::x()));
        let orientation = largest_face_down(&obb.half_extents, pose.yaw());
        let landed = obb.with_pose(Pose6D::from_parts(Vec3::zeros(), orientation));
        let reach = landed
            .footprint()
            .vertices()
            .iter()
            .map(|v| v.dot(&outward))
            .fold(f64::NEG_INFINITY, f64::max);
        let xy = edge_pt + outward * (reach + 0.005);
        let fallen = landed.with_pose(Pose6D::from_parts(Vec3::new(xy.x, xy.y, top + landed.resting_half_height()), orientation));
        let final_pose = if depth < 4 {
            self.settle_pose(object_id, &fallen, depth + 1).final_pose
        } else {
            fallen.center_pose
        };
        SettleOutcome { status: SettleStatus::Toppled, final_pose }
    }

    /// True when the object at `pose` would penetrate raised terrain or another object.
    pub fn blocked_at(&self, object_id: &str, pose: &Pose6D, ignore: &[&str]) -> Result<bool> {
        let obj = self.object(object_id)?;
        let obb = obj.obb().with_pose(*pose);
        let bottom = obb.bottom_z();
        let top = obb.top_z();
        let footprint = obb.footprint();
        for t in self.terrain.iter().filter(|t| !t.is_ground()) {
            let pieces = overlap_pieces(footprint.vertices(), &t.footprint);
            for piece in &pieces {
                if ring_area(piece) <= OVERLAP_EPS {
                    continue;
                }
                if t.max_height_over(piece) > bottom + 1e-3 {
                    return Ok(true);
                }
                if let TerrainKind::Shelf { clearance, .. } = t.kind {
                    if top > t.height + clearance + 1e-9 {
                        return Ok(true);
                    }
                }
            }
        }
        for other in self.objects.iter().filter(|o| {
            o.id != object_id && !self.is_held(&o.id) && !ignore.contains(&o.id.as_str())
        }) {
            if Self::objects_overlap(&obb, &other.obb()) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// One quasi-static push step. Translation is `step * direction * g_p`,
    /// rotation is `kappa * arm * step`, scaled back together if the motion
    /// would penetrate an obstacle.
    pub fn apply_push(
        &self,
        object_id: &str,
        contact: &Vec3,
        direction: &Vec2,
        step: f64,
    ) -> Result<PushOutcome> {
        self.apply_push_ignoring(object_id, contact, direction, step, &[])
    }

    pub(crate) fn apply_push_ignoring(
        &self,
        object_id: &str,
        contact: &Vec3,
        direction: &Vec2,
        step: f64,
        ignore: &[&str],
    ) -> Result<PushOutcome> {
        if !(step > 0.0 && step <= MAX_PUSH_STEP + 1e-12) {
            return Err(Error::invalid(alloc::format!("push step {step} outside (0, {MAX_PUSH_STEP}]")));
        }
        if (direction.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::invalid("push direction must be a unit vector"));
        }
        let obj = self.object(object_id)?;
        let dist = obj.obb().surface_distance(contact);
        if dist >= CONTACT_TOL {
            return Err(Error::invalid(alloc::format!(
                "contact is {dist:.4} m from the surface of {object_id}"
            )));
        }
        let pose = obj.pose;
        let com = pose.xy();
        let arm = crate::geometry::moment_arm(&Vec2::new(contact.x, contact.y), direction, &com);
        let kappa = self.push_model.rotation_gain / self.dynamics_perturbation.friction_scale.max(1e-6);
        let dt = direction * (step * self.push_gain());
        let dyaw = kappa * arm * step;
        let moved = |f: f64| {
            let p = pose.rotated_about_z(dyaw * f);
            Pose6D::from_parts(p.position + Vec3::new(dt.x * f, dt.y * f, 0.0), p.orientation)
        };
        let mut fraction = 1.0;
        let mut blocked = false;
        if self.blocked_at(object_id, &moved(1.0), ignore)? {
            blocked = true;
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..24 {
                let mid = 0.5 * (lo + hi);
                if self.blocked_at(object_id, &moved(mid), ignore)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            fraction = lo;
        }
        let mut scene = self.clone();
        scene.object_mut(object_id)?.pose = moved(fraction);
        let settle = scene.settle(object_id)?;
        scene.object_mut(object_id)?.pose = settle.final_pose;
        Ok(PushOutcome {
            scene,
            delta: PoseSE2 { x: dt.x * fraction, y: dt.y * fraction, yaw: dyaw * fraction },
            settle,
            blocked,
        })
    }

    /// Highest corner of the box while pivoting about `edge` from 0 to `angle`
    /// violates a shelf ceiling or enters a wall.
    fn sweep_collides(&self, obb: &Obb, edge: &(Vec3, Vec3), angle: f64) -> Option<String> {
        let (axis, pivot) = lifting_axis(obb, edge);
        let steps = ((angle.abs().to_degrees()).ceil() as usize).max(1);
        for i in 0..=steps {
            let theta = angle * i as f64 / steps as f64;
            let posed = obb.with_pose(obb.center_pose.rotated_about_axis(&pivot, &axis, theta));
            for c in posed.corners() {
                let c2 = Vec2::new(c.x, c.y);
                for t in &self.terrain {
                    match t.kind {
                        TerrainKind::Shelf { clearance, .. } => {
                            if t.footprint.contains(&c2) && c.z > t.height + clearance + 1e-9 {
                                return Some(alloc::format!(
                                    "swept corner reaches {:.3} m, above the {} ceiling at {:.3} m",
                                    c.z,
                                    t.name,
                                    t.height + clearance
                                ));
                            }
                        }
                        TerrainKind::Wall { wall_height } => {
                            let inside = t.footprint.contains(&c2)
                                && t.footprint.closest_boundary_point(&c2).0 > 1e-6;
                            if inside && c.z < t.height + wall_height {
                                return Some(alloc::format!("swept corner enters wall {}", t.name));
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
        None
    }

    /// Rotates the object about one of its bottom edges, then settles.
    ///
    /// Positive angles lift the box about the edge. If the center crosses the
    /// vertical plane through the edge the flip completes onto the adjacent
    /// face; otherwise the box falls back.
    pub fn pivot_rotate(
        &self,
        object_id: &str,
        pivot_edge: &(Vec3, Vec3),
        angle: f64,
    ) -> Result<(TwinScene, SettleOutcome)> {
        if !(angle.abs() <= FRAC_PI_2 + 1e-12) {
            return Err(Error::invalid("pivot angle must satisfy |angle| <= pi/2"));
        }
        let obj = self.object(object_id)?;
        let obb = obj.obb();
        let edge = obb
            .bottom_edges()
            .into_iter()
            .find(|(a, b)| {
                let same = (a - pivot_edge.0).norm() < CONTACT_TOL && (b - pivot_edge.1).norm() < CONTACT_TOL;
                let swapped = (a - pivot_edge.1).norm() < CONTACT_TOL && (b - pivot_edge.0).norm() < CONTACT_TOL;
                same || swapped
            })
            .ok_or_else(|| Error::invalid("pivot edge is not a bottom edge of the object"))?;
        let mid = (edge.0 + edge.1) * 0.5;
        let support = [edge.0, edge.1, mid]
            .iter()
            .filter_map(|p| self.surface_under(&Vec2::new(p.x, p.y)).map(|(_, h)| h))
            .fold(f64::NEG_INFINITY, f64::max);
        let below_objects = self
            .objects
            .iter()
            .filter(|o| o.id != object_id && o.footprint().contains(&Vec2::new(mid.x, mid.y)))
            .map(|o| o.obb().top_z())
            .fold(f64::NEG_INFINITY, f64::max);
        let support = support.max(below_objects);
        if !((mid.z - support).abs() < CONTACT_TOL) {
            return Err(Error::invalid("pivot edge is not in contact with a surface"));
        }
        if angle <= 0.0 {
            // zero is identity; negative angles drive the box into its support
            let outcome = self.settle(object_id)?;
            let mut scene = self.clone();
            scene.object_mut(object_id)?.pose = outcome.final_pose;
            return Ok((scene, outcome));
        }
        let (axis, pivot) = lifting_axis(&obb, &edge);
        let tilted = obb.center_pose.rotated_about_axis(&pivot, &axis, angle);
        let outward = {
            let m = Vec2::new(mid.x - obb.center_pose.position.x, mid.y - obb.center_pose.position.y);
            if m.norm() > 1e-12 { m / m.norm() } else { Vec2::x() }
        };
        let offset = Vec2::new(tilted.position.x - pivot.x, tilted.position.y - pivot.y).dot(&outward);
        let crosses = offset > 1e-12;
        let sweep = if crosses { FRAC_PI_2 } else { angle };
        if let Some(msg) = self.sweep_collides(&obb, &edge, sweep) {
            return Err(Error::Collision(msg));
        }
        let landed = if crosses { obb.flipped_about(&edge) } else { obb.center_pose };
        let mut scene = self.clone();
        scene.object_mut(object_id)?.pose = landed;
        let outcome = scene.settle(object_id)?;
        scene.object_mut(object_id)?.pose = outcome.final_pose;
        Ok((scene, outcome))
    }

    /// Support-surface overhang of the object: farthest distance any part of
    /// its footprint extends beyond the surface it rests on, with the
    /// outermost point and the nearest supported point.
    pub fn overhang(&self, object_id: &str) -> Result<Option<(f64, Vec2, Vec2)>> {
        let obj = self.object(object_id)?;
        let obb = obj.obb();
        let footprint = obb.footprint();
        let bottom = obb.bottom_z();
        let mut pieces: Vec<Vec<Vec2>> = Vec::new();
        for t in &self.terrain {
            for piece in overlap_pieces(footprint.vertices(), &t.footprint) {
                // flat contact only: a slope touching along its crest does not support
                if piece.iter().all(|p| (t.surface_height(p) - bottom).abs() < 1e-4) {
                    pieces.push(piece);
                }
            }
        }
        if pieces.is_empty() {
            return Ok(None);
        }
        let polys: Vec<Polygon2> = pieces.into_iter().filter_map(|p| Polygon2::new(p).ok()).collect();
        let mut best: Option<(f64, Vec2, Vec2)> = None;
        for p in footprint.boundary_samples(0.002) {
            if polys.iter().any(|poly| poly.contains(&p)) {
                continue;
            }
            let (d, q) = polys
                .iter()
                .map(|poly| poly.closest_boundary_point(&p))
                .fold((f64::INFINITY, p), |acc, x| if x.0 < acc.0 { x } else { acc });
            if best.as_ref().map_or(true, |b| d > b.0) {
                best = Some((d, p, q));
            }
        }
        Ok(best)
    }
}
