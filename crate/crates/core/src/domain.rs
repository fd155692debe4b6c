//! Five-primitive symbolic domain and the plan-skeleton wire format.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::geometry::{Pose6D, Vec3};
use crate::twin::TwinScene;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Push,
    Rotate,
    Grasp,
    Moveto,
    Release,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 5] = [
        PrimitiveKind::Push,
        PrimitiveKind::Rotate,
        PrimitiveKind::Grasp,
        PrimitiveKind::Moveto,
        PrimitiveKind::Release,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Push => "push",
            PrimitiveKind::Rotate => "rotate",
            PrimitiveKind::Grasp => "grasp",
            PrimitiveKind::Moveto => "moveto",
            PrimitiveKind::Release => "release",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Push, Rotate and Moveto need a region or a pose hint to aim at.
    pub fn needs_target(self) -> bool {
        matches!(self, PrimitiveKind::Push | PrimitiveKind::Rotate | PrimitiveKind::Moveto)
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionDescriptor {
    pub name: String,
    #[serde(default)]
    pub refinement: String,
}

impl RegionDescriptor {
    pub fn named(name: impl Into<String>) -> Self {
        Self { name: name.into(), refinement: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveInstance {
    pub kind: PrimitiveKind,
    pub object_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionDescriptor>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "hint_ser",
        deserialize_with = "hint_de"
    )]
    pub target_pose_hint: Option<Pose6D>,
}

#[derive(Serialize, Deserialize)]
struct HintRepr {
    xyz: [f64; 3],
    quat_wxyz: [f64; 4],
}

fn hint_ser<S: Serializer>(hint: &Option<Pose6D>, s: S) -> core::result::Result<S::Ok, S::Error> {
    hint.map(|p| HintRepr { xyz: p.position.into(), quat_wxyz: p.wxyz() }).serialize(s)
}

fn hint_de<'de, D: Deserializer<'de>>(d: D) -> core::result::Result<Option<Pose6D>, D::Error> {
    let repr = Option::<HintRepr>::deserialize(d)?;
    repr.map(|r| Pose6D::new(Vec3::from(r.xyz), r.quat_wxyz).map_err(serde::de::Error::custom))
        .transpose()
}

impl PrimitiveInstance {
    pub fn new(kind: PrimitiveKind, object_id: impl Into<String>) -> Self {
        Self { kind, object_id: object_id.into(), region: None, target_pose_hint: None }
    }

    pub fn at(kind: PrimitiveKind, object_id: impl Into<String>, region: &str) -> Self {
        Self { region: Some(RegionDescriptor::named(region)), ..Self::new(kind, object_id) }
    }

    pub fn with_hint(mut self, hint: Pose6D) -> Self {
        self.target_pose_hint = Some(hint);
        self
    }

    pub fn region_name(&self) -> Option<&str> {
        self.region.as_ref().map(|r| r.name.as_str())
    }
}

impl fmt::Display for PrimitiveInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.region_name() {
            Some(r) => write!(f, "{}({}, {})", self.kind, self.object_id, r),
            None => write!(f, "{}({})", self.kind, self.object_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSkeleton {
    pub revision: u32,
    #[serde(default)]
    pub rationale: String,
    pub steps: Vec<PrimitiveInstance>,
}

impl PlanSkeleton {
    pub fn new(steps: Vec<PrimitiveInstance>, rationale: impl Into<String>) -> Self {
        Self { revision: 0, rationale: rationale.into(), steps }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("skeleton serializes")
    }

    /// Compact one-line form, e.g. `push(card, table_edge_nearest) -> grasp(card)`.
    pub fn summary(&self) -> String {
        self.steps.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" -> ")
    }
}

fn parse_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { path: path.into(), message: message.into() }
}

/// Parses the skeleton schema, reporting the JSON path of the first problem.
pub fn parse_skeleton(document: &str) -> Result<PlanSkeleton> {
    let value: Value = serde_json::from_str(document)
        .map_err(|e| parse_err(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    parse_skeleton_value(&value)
}

pub fn parse_skeleton_value(value: &Value) -> Result<PlanSkeleton> {
    let obj = value.as_object().ok_or_else(|| parse_err("$", "skeleton must be an object"))?;
    let steps = obj
        .get("steps")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("steps", "missing steps array"))?;
    if steps.is_empty() {
        return Err(parse_err("steps", "skeleton needs at least one step"));
    }
    for (i, step) in steps.iter().enumerate() {
        let kind = step
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| parse_err(format!("steps[{i}].kind"), "missing primitive kind"))?;
        let kind = PrimitiveKind::from_name(kind).ok_or_else(|| {
            parse_err(format!("steps[{i}].kind"), format!("unknown primitive \"{kind}\""))
        })?;
        let has = |k: &str| step.get(k).map_or(false, |v| !v.is_null());
        if kind.needs_target() && !has("region") && !has("target_pose_hint") {
            return Err(parse_err(
                format!("steps[{i}].region"),
                format!("{kind} step needs a region or target_pose_hint"),
            ));
        }
    }
    serde_json::from_value::<PlanSkeleton>(value.clone()).map_err(|e| parse_err("$", e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Predicate {
    GripperFree,
    Held(String),
    /// Push may run with a free gripper or while the gripper wields a tool.
    GripperFreeOrToolHeld,
    PoseChanged(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Literal {
    pub predicate: Predicate,
    pub positive: bool,
}

impl Literal {
    fn pos(p: Predicate) -> Self {
        Self { predicate: p, positive: true }
    }
    fn neg(p: Predicate) -> Self {
        Self { predicate: p, positive: false }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("not ")?;
        }
        match &self.predicate {
            Predicate::GripperFree => f.write_str("gripper_free"),
            Predicate::Held(o) => write!(f, "held({o})"),
            Predicate::GripperFreeOrToolHeld => f.write_str("gripper_free or tool_held"),
            Predicate::PoseChanged(o) => write!(f, "pose_changed({o})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub preconditions: Vec<Literal>,
    pub effects: Vec<Literal>,
}

/// Lifted schema with the object variable written as `o`.
pub fn primitive_schema(kind: PrimitiveKind) -> Schema {
    grounded_schema(kind, "o")
}

pub fn grounded_schema(kind: PrimitiveKind, o: &str) -> Schema {
    use Predicate::*;
    let held = || Held(o.into());
    match kind {
        PrimitiveKind::Grasp => Schema {
            preconditions: alloc::vec![Literal::pos(GripperFree), Literal::neg(held())],
            effects: alloc::vec![Literal::pos(held()), Literal::neg(GripperFree)],
        },
        PrimitiveKind::Moveto => Schema {
            preconditions: alloc::vec![Literal::pos(held())],
            effects: alloc::vec![Literal::pos(PoseChanged(o.into()))],
        },
        PrimitiveKind::Release => Schema {
            preconditions: alloc::vec![Literal::pos(held())],
            effects: alloc::vec![Literal::pos(GripperFree), Literal::neg(held())],
        },
        PrimitiveKind::Push => Schema {
            preconditions: alloc::vec![Literal::pos(GripperFreeOrToolHeld), Literal::neg(held())],
            effects: alloc::vec![Literal::pos(PoseChanged(o.into()))],
        },
        PrimitiveKind::Rotate => Schema {
            preconditions: alloc::vec![Literal::pos(GripperFree), Literal::neg(held())],
            effects: alloc::vec![Literal::pos(PoseChanged(o.into()))],
        },
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectFacts {
    pub held: bool,
    pub on_feature: Option<String>,
    #[serde(default)]
    pub tool: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicState {
    pub objects: BTreeMap<String, ObjectFacts>,
    pub gripper_free: bool,
}

impl Default for SymbolicState {
    fn default() -> Self {
        Self { objects: BTreeMap::new(), gripper_free: true }
    }
}

impl SymbolicState {
    pub fn from_scene(scene: &TwinScene) -> Self {
        let held = scene.robot.held_object.as_deref();
        let objects = scene
            .objects
            .iter()
            .map(|o| {
                let on = scene.surface_under(&o.pose.xy()).map(|(f, _)| f.kind.label().to_string());
                let facts = ObjectFacts {
                    held: held == Some(o.id.as_str()),
                    on_feature: on,
                    tool: o.tool_spec.is_some(),
                };
                (o.id.clone(), facts)
            })
            .collect();
        Self { objects, gripper_free: held.is_none() }
    }

    pub fn held(&self, o: &str) -> bool {
        self.objects.get(o).map_or(false, |f| f.held)
    }

    fn tool_held(&self) -> bool {
        self.objects.values().any(|f| f.held && f.tool)
    }

    pub fn holds(&self, lit: &Literal) -> bool {
        let v = match &lit.predicate {
            Predicate::GripperFree => self.gripper_free,
            Predicate::Held(o) => self.held(o),
            Predicate::GripperFreeOrToolHeld => self.gripper_free || self.tool_held(),
            Predicate::PoseChanged(_) => true,
        };
        v == lit.positive
    }

    pub fn apply(&mut self, lit: &Literal) {
        match &lit.predicate {
            Predicate::GripperFree => self.gripper_free = lit.positive,
            Predicate::Held(o) => self.objects.entry(o.clone()).or_default().held = lit.positive,
            // pose truth is geometric and lives in the scene
            Predicate::GripperFreeOrToolHeld | Predicate::PoseChanged(_) => {}
        }
    }

    pub fn apply_step(&mut self, step: &PrimitiveInstance) {
        for e in grounded_schema(step.kind, &step.object_id).effects {
            self.apply(&e);
        }
    }
}

/// Kind whose effects undo `kind` on the symbolic state.
pub fn inverse_kind(kind: PrimitiveKind) -> PrimitiveKind {
    match kind {
        PrimitiveKind::Grasp => PrimitiveKind::Release,
        PrimitiveKind::Release => PrimitiveKind::Grasp,
        k => k,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub step: usize,
    pub predicate: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {} is false", self.step, self.predicate)
    }
}

/// Simulates effects step by step and collects every failed precondition.
pub fn validate_skeleton(
    skeleton: &PlanSkeleton,
    initial: &SymbolicState,
) -> core::result::Result<(), Vec<Violation>> {
    let mut state = initial.clone();
    let mut violations = Vec::new();
    if skeleton.steps.is_empty() {
        violations.push(Violation { step: 0, predicate: "non-empty skeleton".into() });
    }
    for (i, step) in skeleton.steps.iter().enumerate() {
        let schema = grounded_schema(step.kind, &step.object_id);
        for pre in &schema.preconditions {
            if !state.holds(pre) {
                violations.push(Violation { step: i, predicate: pre.to_string() });
            }
        }
        for e in &schema.effects {
            state.apply(e);
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use PrimitiveKind::*;

    fn fig2_plan() -> PlanSkeleton {
        PlanSkeleton::new(
            vec![
                PrimitiveInstance::at(Push, "card", "table_edge_nearest"),
                PrimitiveInstance::new(Grasp, "card"),
                PrimitiveInstance::at(Moveto, "card", "target_zone"),
                PrimitiveInstance::new(Release, "card"),
            ],
            "push to edge then grasp",
        )
    }

    #[test]
    fn grasp_requires_free_gripper() {
        let s = primitive_schema(Grasp);
        assert!(s.preconditions.contains(&Literal::pos(Predicate::GripperFree)));
        assert_eq!(PrimitiveKind::ALL.len(), 5);
    }

    #[test]
    fn release_unheld_and_push_held_violate() {
        let st = SymbolicState::default();
        let rel = PlanSkeleton::new(vec![PrimitiveInstance::new(Release, "box")], "");
        assert_eq!(validate_skeleton(&rel, &st).unwrap_err()[0].predicate, "held(box)");
        let push_held = PlanSkeleton::new(
            vec![PrimitiveInstance::new(Grasp, "box"), PrimitiveInstance::at(Push, "box", "target_zone")],
            "",
        );
        let v = validate_skeleton(&push_held, &st).unwrap_err();
        assert!(v.iter().all(|v| v.step == 1));
        assert!(v.iter().any(|v| v.predicate == "not held(box)"));
    }

    #[test]
    fn validate_examples() {
        let st = SymbolicState::default();
        let simple = PlanSkeleton::new(
            vec![
                PrimitiveInstance::new(Grasp, "box"),
                PrimitiveInstance::at(Moveto, "box", "target_zone"),
                PrimitiveInstance::new(Release, "box"),
            ],
            "",
        );
        assert!(validate_skeleton(&simple, &st).is_ok());
        let moveto = PlanSkeleton::new(vec![PrimitiveInstance::at(Moveto, "box", "target_zone")], "");
        let v = validate_skeleton(&moveto, &st).unwrap_err();
        assert_eq!(v, vec![Violation { step: 0, predicate: "held(box)".into() }]);
        assert!(validate_skeleton(&fig2_plan(), &st).is_ok());
    }

    #[test]
    fn push_with_tool_in_hand_is_allowed() {
        let mut st = SymbolicState::default();
        st.objects.insert("hook".into(), ObjectFacts { tool: true, ..Default::default() });
        let plan = PlanSkeleton::new(
            vec![
                PrimitiveInstance::new(Grasp, "hook"),
                PrimitiveInstance::at(Moveto, "hook", "behind_object"),
                PrimitiveInstance::at(Push, "puck", "target_zone"),
                PrimitiveInstance::new(Release, "hook"),
            ],
            "",
        );
        assert!(validate_skeleton(&plan, &st).is_ok());
        let mut no_tool = st.clone();
        no_tool.objects.get_mut("hook").unwrap().tool = false;
        assert!(validate_skeleton(&plan, &no_tool).is_err());
    }

    #[test]
    fn parse_minimal_and_errors() {
        let sk = parse_skeleton(r#"{"revision":0,"rationale":"","steps":[{"kind":"grasp","object_id":"box"}]}"#).unwrap();
        assert_eq!(sk.steps.len(), 1);
        match parse_skeleton(r#"{"revision":0,"steps":[{"kind":"grasp","object_id":"a"},{"kind":"slide","object_id":"a"}]}"#) {
            Err(Error::Parse { path, message }) => {
                assert_eq!(path, "steps[1].kind");
                assert!(message.contains("slide"));
            }
            other => panic!("{other:?}"),
        }
        match parse_skeleton(r#"{"revision":0,"steps":[{"kind":"push","object_id":"a"}]}"#) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "steps[0].region"),
            other => panic!("{other:?}"),
        }
        assert!(parse_skeleton(r#"{"revision":0,"steps":[]}"#).is_err());
        assert!(parse_skeleton("not json").is_err());
    }

    #[test]
    fn hint_uses_wire_names() {
        let step = PrimitiveInstance::new(Moveto, "box").with_hint(Pose6D::from_xyz_yaw(0.1, 0.2, 0.3, 0.0));
        let v = serde_json::to_value(&step).unwrap();
        assert_eq!(v["target_pose_hint"]["xyz"][1], 0.2);
        assert_eq!(v["target_pose_hint"]["quat_wxyz"][0], 1.0);
    }

    fn arb_step() -> impl Strategy<Value = PrimitiveInstance> {
        let kinds = prop::sample::select(PrimitiveKind::ALL.to_vec());
        let ids = prop::sample::select(vec!["box", "card", "hook", "book"]);
        let regions = prop::sample::select(vec!["table_edge_nearest", "target_zone", "slot_lip", "shelf_front"]);
        (kinds, ids, regions, prop::option::of((-1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0, -3.0f64..3.0)), any::<bool>())
            .prop_map(|(k, o, r, hint, with_region)| {
                let mut s = PrimitiveInstance::new(k, o);
                if with_region || (k.needs_target() && hint.is_none()) {
                    s.region = Some(RegionDescriptor { name: r.into(), refinement: "near the robot".into() });
                }
                if let Some((x, y, z, yaw)) = hint {
                    s.target_pose_hint = Some(Pose6D::from_xyz_yaw(x, y, z, yaw));
                }
                s
            })
    }

    fn arb_skeleton() -> impl Strategy<Value = PlanSkeleton> {
        (prop::collection::vec(arb_step(), 1..8), 0u32..10, "[a-z ]{0,20}")
            .prop_map(|(steps, revision, rationale)| PlanSkeleton { revision, rationale, steps })
    }

    fn close(a: &PlanSkeleton, b: &PlanSkeleton) -> bool {
        a.revision == b.revision
            && a.rationale == b.rationale
            && a.steps.len() == b.steps.len()
            && a.steps.iter().zip(&b.steps).all(|(x, y)| {
                x.kind == y.kind
                    && x.object_id == y.object_id
                    && x.region == y.region
                    && match (x.target_pose_hint, y.target_pose_hint) {
                        (None, None) => true,
                        (Some(p), Some(q)) => {
                            (p.position - q.position).norm() < 1e-12
                                && (p.orientation.coords - q.orientation.coords).norm() < 1e-12
                        }
                        _ => false,
                    }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn roundtrip(sk in arb_skeleton()) {
            let back = parse_skeleton(&sk.to_json()).unwrap();
            prop_assert!(close(&sk, &back));
        }

        #[test]
        fn prefix_monotone(sk in arb_skeleton()) {
            let st = SymbolicState::default();
            if validate_skeleton(&sk, &st).is_ok() {
                for n in 1..sk.steps.len() {
                    let prefix = PlanSkeleton { steps: sk.steps[..n].to_vec(), ..sk.clone() };
                    prop_assert!(validate_skeleton(&prefix, &st).is_ok());
                }
            }
        }

        #[test]
        fn effects_then_inverse_restore(kind in prop::sample::select(PrimitiveKind::ALL.to_vec()), held_first in any::<bool>()) {
            let mut st = SymbolicState::default();
            st.objects.insert("x".into(), ObjectFacts::default());
            if held_first {
                st.apply_step(&PrimitiveInstance::new(Grasp, "x"));
            }
            let before = st.clone();
            st.apply_step(&PrimitiveInstance::new(kind, "x"));
            st.apply_step(&PrimitiveInstance::new(inverse_kind(kind), "x"));
            // only meaningful when the forward step's preconditions held
            let pre_ok = grounded_schema(kind, "x").preconditions.iter().all(|l| before.holds(l));
            if pre_ok {
                prop_assert_eq!(st, before);
            }
        }
    }
}
