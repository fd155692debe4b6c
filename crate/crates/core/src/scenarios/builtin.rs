use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use nalgebra::UnitQuaternion;

use super::{Goal, InitialState, Randomization, Scenario};
use crate::domain::{PlanSkeleton, PrimitiveInstance, PrimitiveKind};
use crate::exec::RobotModel;
use crate::geometry::{yaw_quat, Polygon2, Pose6D, Vec3};
use crate::subgoal::RegionResolver;
use crate::twin::{
    DynamicsPerturbation, PushModel, RigidObject, SceneRole, TerrainFeature, TerrainKind, ToolKind, ToolSpec,
    TwinScene,
};
use crate::{Error, Result};

pub const BUILTIN_IDS: [&str; 8] = ["box", "book", "edge", "wall", "slope", "slot", "tool_hook", "tool_pusher"];

pub fn builtin_ids() -> &'static [&'static str] {
    &BUILTIN_IDS
}

pub fn builtin(id: &str) -> Result<Scenario> {
    let s = match id {
        "box" => box_task(),
        "book" => book(),
        "edge" => edge(),
        "wall" => wall(),
        "slope" => slope(),
        "slot" => slot(),
        "tool_hook" => tool_hook(),
        "tool_pusher" => tool_pusher(),
        _ => return Err(Error::NotFound(alloc::format!("scenario {id}"))),
    };
    s.validate()?;
    Ok(s)
}

const TABLE_H: f64 = 0.75;
const STAND_H: f64 = 0.78;
const CARD: [f64; 3] = [0.05, 0.03, 0.004];

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon2 {
    Polygon2::rect(x0, y0, x1, y1).expect("valid rectangle")
}

fn feature(name: &str, kind: TerrainKind, fp: Polygon2, h: f64) -> TerrainFeature {
    TerrainFeature::new(name, kind, fp, h)
}

fn ground() -> TerrainFeature {
    feature("ground", TerrainKind::Ground, rect(-2.0, -2.0, 2.0, 2.0), 0.0)
}

fn table() -> TerrainFeature {
    feature("table", TerrainKind::TableSurface, rect(0.25, -0.4, 1.05, 0.4), TABLE_H)
}

/// Raised platform holding the pose targets of the thin-object tasks.
fn stand() -> TerrainFeature {
    feature("stand", TerrainKind::TableSurface, rect(0.52, -0.30, 0.72, -0.04), STAND_H)
}

fn flat(x: f64, y: f64, z: f64, yaw: f64) -> Pose6D {
    Pose6D::from_xyz_yaw(x, y, z, yaw)
}

fn scene(terrain: Vec<TerrainFeature>, objects: Vec<RigidObject>) -> TwinScene {
    TwinScene {
        terrain,
        objects,
        robot: RobotModel::default(),
        role: SceneRole::Execution,
        dynamics_perturbation: DynamicsPerturbation::default(),
        push_model: PushModel::default(),
    }
}

fn step(kind: PrimitiveKind, o: &str, region: Option<&str>) -> PrimitiveInstance {
    match region {
        Some(r) => PrimitiveInstance::at(kind, o, r),
        None => PrimitiveInstance::new(kind, o),
    }
}

fn push(o: &str, r: &str) -> PrimitiveInstance {
    step(PrimitiveKind::Push, o, Some(r))
}
fn rotate(o: &str, r: &str) -> PrimitiveInstance {
    step(PrimitiveKind::Rotate, o, Some(r))
}
fn grasp(o: &str) -> PrimitiveInstance {
    step(PrimitiveKind::Grasp, o, None)
}
fn moveto(o: &str, r: &str) -> PrimitiveInstance {
    step(PrimitiveKind::Moveto, o, Some(r))
}
fn release(o: &str) -> PrimitiveInstance {
    step(PrimitiveKind::Release, o, None)
}

fn plan(steps: Vec<PrimitiveInstance>, why: &str) -> PlanSkeleton {
    PlanSkeleton::new(steps, why)
}

fn naive(o: &str) -> PlanSkeleton {
    plan(vec![grasp(o), moveto(o, "target_zone"), release(o)], "grasp the object directly and carry it to the target")
}

fn lift_via(o: &str, region: &str, why: &str) -> PlanSkeleton {
    plan(vec![push(o, region), grasp(o), moveto(o, "target_zone"), release(o)], why)
}

fn regions(entries: Vec<(&str, RegionResolver)>) -> BTreeMap<String, RegionResolver> {
    entries.into_iter().map(|(k, v)| (k.into(), v)).collect()
}

fn card_on_table(x: f64, y: f64) -> RigidObject {
    RigidObject::new("card", CARD, flat(x, y, TABLE_H + CARD[2], 0.0))
}

fn card_goal() -> Goal {
    Goal::Pose { target: flat(0.62, -0.17, STAND_H + CARD[2], 0.0) }
}

fn box_task() -> Scenario {
    let half = [0.06, 0.045, 0.045];
    let lying = flat(0.45, -0.12, TABLE_H + half[2], 0.0);
    let standing = Pose6D::from_parts(
        Vec3::new(0.45, -0.12, TABLE_H + half[0]),
        yaw_quat(0.0) * UnitQuaternion::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2),
    );
    Scenario {
        id: "box".into(),
        instruction: "move the box to the target pose on the table".into(),
        task_object: "box".into(),
        scene: scene(vec![ground(), table()], vec![RigidObject::new("box", half, lying)]),
        goal: Goal::Pose { target: flat(0.62, 0.12, TABLE_H + half[2], 0.0) },
        regions: regions(vec![("target_zone", RegionResolver::TargetZone)]),
        fallback_plans: vec![
            plan(vec![push("box", "target_zone")], "the box is too wide to grasp; push it into place"),
            plan(
                vec![rotate("box", "target_zone"), push("box", "target_zone")],
                "tip the box onto its long side, then push it into place",
            ),
        ],
        randomization: Randomization::default(),
        initial_states: vec![
            InitialState { name: "lying".into(), pose: lying },
            InitialState { name: "standing".into(), pose: standing },
        ],
    }
}

fn edge() -> Scenario {
    Scenario {
        id: "edge".into(),
        instruction: "put the card on the stand".into(),
        task_object: "card".into(),
        scene: scene(vec![ground(), table(), stand()], vec![card_on_table(0.36, 0.08)]),
        goal: card_goal(),
        regions: regions(vec![
            ("target_zone", RegionResolver::TargetZone),
            ("table_edge_nearest", RegionResolver::NearestBoundary { feature: "table".into() }),
        ]),
        fallback_plans: vec![
            naive("card"),
            plan(vec![push("card", "target_zone")], "slide the card straight to the target"),
            lift_via("card", "table_edge_nearest", "push the card over the nearest table edge so it can be grasped from the side"),
        ],
        randomization: Randomization::default(),
        initial_states: vec![],
    }
}

fn wall() -> Scenario {
    let wall = feature(
        "wall",
        TerrainKind::Wall { wall_height: 0.15 },
        rect(0.25, 0.38, 1.05, 0.40),
        TABLE_H,
    );
    Scenario {
        id: "wall".into(),
        instruction: "put the card on the stand".into(),
        task_object: "card".into(),
        scene: scene(vec![ground(), table(), wall, stand()], vec![card_on_table(0.52, 0.26)]),
        goal: card_goal(),
        regions: regions(vec![
            ("target_zone", RegionResolver::TargetZone),
            ("table_edge_nearest", RegionResolver::NearestBoundary { feature: "table".into() }),
            ("table_edge_open", RegionResolver::OpenBoundary { feature: "table".into(), margin: 0.1 }),
        ]),
        fallback_plans: vec![
            naive("card"),
            lift_via("card", "table_edge_nearest", "push the card to the nearest table edge, then grasp from the side"),
            lift_via("card", "table_edge_open", "the wall blocks that edge; use the nearest open edge instead"),
        ],
        randomization: Randomization::default(),
        initial_states: vec![],
    }
}

fn slope() -> Scenario {
    let slope = feature(
        "slope",
        TerrainKind::Slope { incline_deg: 20.0, downhill: [-1.0, 0.0] },
        rect(0.05, -0.4, 0.25, 0.4),
        TABLE_H,
    );
    Scenario {
        id: "slope".into(),
        instruction: "put the card on the stand".into(),
        task_object: "card".into(),
        scene: scene(vec![ground(), table(), slope, stand()], vec![card_on_table(0.34, 0.1)]),
        goal: card_goal(),
        regions: regions(vec![
            ("target_zone", RegionResolver::TargetZone),
            ("slope_crest", RegionResolver::Segment { a: [0.25, -0.4], b: [0.25, 0.4] }),
        ]),
        fallback_plans: vec![
            naive("card"),
            lift_via("card", "slope_crest", "push the card past the slope crest so its edge lifts clear"),
        ],
        randomization: Randomization::default(),
        initial_states: vec![],
    }
}

fn slot() -> Scenario {
    let near = feature("table_near", TerrainKind::TableSurface, rect(0.25, -0.4, 0.30, 0.4), TABLE_H);
    let far = feature("table", TerrainKind::TableSurface, rect(0.37, -0.4, 1.05, 0.4), TABLE_H);
    let slot = feature(
        "slot",
        TerrainKind::Slot { depth: 0.02, width: 0.07 },
        rect(0.30, -0.4, 0.37, 0.4),
        TABLE_H,
    );
    Scenario {
        id: "slot".into(),
        instruction: "put the card on the stand".into(),
        task_object: "card".into(),
        scene: scene(vec![ground(), near, slot, far, stand()], vec![card_on_table(0.47, 0.12)]),
        goal: card_goal(),
        regions: regions(vec![
            ("target_zone", RegionResolver::TargetZone),
            ("slot_lip", RegionResolver::Segment { a: [0.37, -0.4], b: [0.37, 0.4] }),
        ]),
        fallback_plans: vec![
            naive("card"),
            lift_via("card", "slot_lip", "push the card over the slot so its edge hangs above the groove"),
        ],
        randomization: Randomization::default(),
        initial_states: vec![],
    }
}

fn book() -> Scenario {
    let half = [0.10, 0.03, 0.016];
    let floor = 0.80;
    let shelf = feature(
        "shelf",
        TerrainKind::Shelf { clearance: 0.05, open_face: [-1.0, 0.0] },
        rect(0.40, -0.16, 0.78, 0.16),
        floor,
    );
    Scenario {
        id: "book".into(),
        instruction: "take the book out of the shelf and lay it on the table".into(),
        task_object: "book".into(),
        scene: scene(
            vec![ground(), table(), shelf],
            vec![RigidObject::new("book", half, flat(0.57, 0.0, floor + half[2], 0.0))],
        ),
        goal: Goal::Pose { target: flat(0.55, -0.28, TABLE_H + half[2], 0.0) },
        regions: regions(vec![
            ("target_zone", RegionResolver::TargetZone),
            ("shelf_front", RegionResolver::Segment { a: [0.40, -0.16], b: [0.40, 0.16] }),
        ]),
        fallback_plans: vec![
            naive("book"),
            plan(
                vec![rotate("book", "shelf_front"), grasp("book"), moveto("book", "target_zone"), release("book")],
                "stand the book up so it can be pinched from above",
            ),
            lift_via("book", "shelf_front", "slide the book toward the open face until its spine sticks out, then grasp the spine"),
        ],
        randomization: Randomization::default(),
        initial_states: vec![],
    }
}

fn puck(x: f64, y: f64) -> RigidObject {
    let half = [0.03, 0.03, 0.02];
    RigidObject::new("puck", half, flat(x, y, TABLE_H + half[2], 0.0))
}

fn tool(id: &str, half: [f64; 3], at: (f64, f64), spec: ToolSpec) -> RigidObject {
    let mut o = RigidObject::new(id, half, flat(at.0, at.1, TABLE_H + half[2], 0.0));
    o.tool_spec = Some(spec);
    o
}

fn tool_plans(t: &str) -> Vec<PlanSkeleton> {
    vec![
        plan(vec![push("puck", "target_zone")], "push the puck into the target zone"),
        plan(
            vec![grasp(t), moveto(t, "behind_object"), push("puck", "target_zone"), release(t)],
            "extend reach with the tool placed behind the puck",
        ),
    ]
}

fn tool_regions() -> BTreeMap<String, RegionResolver> {
    regions(vec![
        ("target_zone", RegionResolver::TargetZone),
        ("behind_object", RegionResolver::BehindObject { object: "puck".into(), margin: 0.02 }),
    ])
}

fn tool_hook() -> Scenario {
    let hook = tool(
        "hook",
        [0.28, 0.015, 0.016],
        (0.5, -0.28),
        ToolSpec { kind: ToolKind::Hook, effective_length: 0.3, tip_offset: [0.28, 0.09, 0.0] },
    );
    Scenario {
        id: "tool_hook".into(),
        instruction: "bring the puck into the marked zone".into(),
        task_object: "puck".into(),
        scene: scene(vec![ground(), table()], vec![puck(0.82, 0.0), hook]),
        goal: Goal::Region { zone: rect(0.35, -0.12, 0.55, 0.12) },
        regions: tool_regions(),
        fallback_plans: tool_plans("hook"),
        randomization: Randomization::default(),
        initial_states: vec![],
    }
}

fn tool_pusher() -> Scenario {
    let pusher = tool(
        "pusher",
        [0.2, 0.015, 0.016],
        (0.45, -0.25),
        ToolSpec { kind: ToolKind::Pusher, effective_length: 0.3, tip_offset: [0.2, 0.0, 0.0] },
    );
    Scenario {
        id: "tool_pusher".into(),
        instruction: "push the puck into the far zone".into(),
        task_object: "puck".into(),
        scene: scene(vec![ground(), table()], vec![puck(0.42, 0.15), pusher]),
        goal: Goal::Region { zone: rect(0.85, 0.05, 1.0, 0.25) },
        regions: tool_regions(),
        fallback_plans: tool_plans("pusher"),
        randomization: Randomization::default(),
        initial_states: vec![],
    }
}
