//! Whole-episode behavior of the scripted stack on the built-in scenarios.

use std::collections::BTreeSet;

use pnp_core::domain::PrimitiveKind;
use pnp_core::exec::ExecErrorKind;
use pnp_core::harness::{randomize, run_benchmark, run_episode, Ablation, HarnessConfig};
use pnp_core::planner::Failure;
use pnp_core::scenarios::{builtin, Scenario, BUILTIN_IDS};

fn scenario(id: &str) -> Scenario {
    builtin(id).unwrap()
}

#[test]
fn scenario_files_round_trip() {
    for id in BUILTIN_IDS {
        let s = scenario(id);
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s, "{id}");
    }
}

#[test]
fn randomization_is_seeded_and_varied() {
    for id in BUILTIN_IDS {
        let s = scenario(id);
        let a = randomize(&s, 3).unwrap();
        assert_eq!(a.scene, randomize(&s, 3).unwrap().scene, "{id}");
        let b = randomize(&s, 4).unwrap();
        assert_ne!(a.scene.object(&s.task_object).unwrap().pose, b.scene.object(&s.task_object).unwrap().pose, "{id}");
    }
}

#[test]
fn episodes_are_deterministic() {
    for id in ["book", "tool_hook"] {
        let s = scenario(id);
        let mut a = run_episode(&s, 5, Ablation::Full, &HarnessConfig::default()).unwrap();
        let mut b = run_episode(&s, 5, Ablation::Full, &HarnessConfig::default()).unwrap();
        a.wall_ms = 0;
        b.wall_ms = 0;
        assert_eq!(a, b, "{id}");
    }
}

#[test]
fn book_recovers_through_reflection() {
    let r = run_episode(&scenario("book"), 0, Ablation::Full, &HarnessConfig::default()).unwrap();
    assert!(r.success);
    assert_eq!(r.attempts.len(), r.replans_used as usize + 1);
    let first = r.attempts[0].failure.as_ref().unwrap();
    assert_eq!(first.exec_kind(), Some(ExecErrorKind::Collision));
    assert!(r.attempts[0].insight.is_some());
    assert_eq!(r.attempts.last().unwrap().skeleton.steps[0].kind, PrimitiveKind::Push);
    assert!(r.final_snapshot.is_some());
}

#[test]
fn tool_hook_reaches_for_the_tool() {
    let r = run_episode(&scenario("tool_hook"), 1, Ablation::Full, &HarnessConfig::default()).unwrap();
    assert!(r.success);
    assert_eq!(r.attempts[0].failure.as_ref().unwrap().exec_kind(), Some(ExecErrorKind::OutOfReach));
    assert_eq!(r.attempts[1].skeleton.steps[0].object_id, "hook");
}

#[test]
fn no_reflection_stops_after_first_failure() {
    for id in ["book", "wall", "slot", "tool_hook"] {
        let r = run_episode(&scenario(id), 0, Ablation::NoReflection, &HarnessConfig::default()).unwrap();
        assert!(!r.success, "{id}");
        assert_eq!((r.attempts.len(), r.replans_used), (1, 0), "{id}");
        assert!(r.stop_reason.is_some(), "{id}");
    }
}

#[test]
fn no_pose_skips_sampling() {
    let r = run_episode(&scenario("edge"), 0, Ablation::NoPose, &HarnessConfig::default()).unwrap();
    for a in &r.attempts {
        for rh in &a.rehearsal {
            assert!(rh.candidates.is_none(), "no candidates are sampled without pose reasoning");
        }
    }
}

#[test]
fn failures_across_the_benchmark_are_typed() {
    let scenarios: Vec<Scenario> = BUILTIN_IDS.iter().map(|id| scenario(id)).collect();
    let mut kinds = BTreeSet::new();
    for ab in Ablation::ALL {
        for r in run_benchmark(&scenarios, 4, ab, &HarnessConfig::default()).unwrap() {
            assert!(r.replans_used <= 3);
            assert_eq!(r.attempts.len(), r.replans_used as usize + 1);
            for a in &r.attempts {
                if let Some(f) = &a.failure {
                    assert!(!f.error_text().is_empty());
                    kinds.insert(f.label());
                    if let Failure::NoFeasiblePose { step, .. } = f {
                        assert!(step.kind != PrimitiveKind::Grasp && step.kind != PrimitiveKind::Release);
                    }
                }
            }
        }
    }
    for k in ["Collision", "NoGraspFound", "OutOfReach"] {
        assert!(kinds.contains(k), "{k} missing from {kinds:?}");
    }
}
