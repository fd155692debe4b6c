//! Exit codes and files written by the `pnp` binary.

use std::path::Path;
use std::process::{Command, Output};

use pnp_core::planner::PromptTemplates;
use pnp_core::scenarios::{builtin, BUILTIN_IDS};

fn pnp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnp")).args(args).arg("--out").arg(out).output().unwrap()
}

fn pnp_bare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnp")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn repo_root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR")).parent().unwrap().parent().unwrap()
}

#[test]
fn run_success_and_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = pnp(&["run", "--scenario", "box", "--seed", "0", "--render"], dir.path());
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(dir.path().join("box_seed0.json").is_file());
    assert!(dir.path().join("box_seed0/scene.svg").is_file());
    assert!(dir.path().join("box_seed0/a0_s0/manifest.json").is_file());
    assert!(dir.path().join("box_seed0/a0_s0/cand_0.svg").is_file());

    let fail = pnp(&["run", "--scenario", "book", "--ablation", "no_reflection"], dir.path());
    assert_eq!(code(&fail), 1);
    assert!(stdout(&fail).contains("Collision"));
}

#[test]
fn edge_examples() {
    let dir = tempfile::tempdir().unwrap();
    let ok = pnp(&["run", "--scenario", "edge", "--seed", "0", "--planner", "scripted"], dir.path());
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(dir.path().join("edge_seed0.json").is_file());
    assert_eq!(code(&pnp(&["run", "--scenario", "edge", "--ablation", "no_reflection"], dir.path())), 1);
    assert_eq!(code(&pnp(&["run", "--scenario", "/no/such/file.json"], dir.path())), 2);
}

#[test]
fn run_exits_3_when_no_pose_is_feasible() {
    // book with only the flip plan: the flip never finds a pose under the ceiling
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&builtin("book").unwrap().to_json()).unwrap();
    let flip = v["fallback_plans"][1].clone();
    v["fallback_plans"] = serde_json::json!([flip]);
    let file = dir.path().join("flip_only.json");
    std::fs::write(&file, v.to_string()).unwrap();
    let o = pnp(&["run", "--scenario", file.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code(&o), 3, "{}", stdout(&o));
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&pnp(&["run", "--scenario", "nope"], dir.path())), 2);
    assert_eq!(code(&pnp(&["run", "--scenario", "box", "--ablation", "half"], dir.path())), 2);
    assert_eq!(code(&pnp(&["bench", "--trials", "0"], dir.path())), 2);
    assert_eq!(code(&pnp(&["run", "--scenario", "box", "--planner", "http"], dir.path())), 2);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"id\": ").unwrap();
    assert_eq!(code(&pnp(&["run", "--scenario", bad.to_str().unwrap()], dir.path())), 2);
    assert_eq!(code(&pnp_bare(&["frobnicate"])), 2);
}

#[test]
fn sample_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = pnp(&["sample", "--scenario", "edge", "--step", "0"], dir.path());
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let manifest = dir.path().join("sample_edge_p2_s0/manifest.json");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    let n = m["candidates"].as_array().unwrap().len();
    assert!((1..=4).contains(&n));
    assert!(dir.path().join("sample_edge_p2_s0/cand_0.svg").is_file());
    // grasp has no sub-goal pose
    assert_eq!(code(&pnp(&["sample", "--scenario", "edge", "--step", "1"], dir.path())), 2);
    // the book flip under the shelf ceiling
    assert_eq!(code(&pnp(&["sample", "--scenario", "book", "--plan-index", "1", "--step", "0"], dir.path())), 3);
}

#[test]
fn validate_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, builtin("edge").unwrap().fallback_plans[2].to_json()).unwrap();
    let o = pnp_bare(&["validate", "--scenario", "edge", "--skeleton", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("ok"));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"revision": 0, "rationale": "", "steps": [{"kind": "moveto", "object_id": "card", "region": {"name": "target_zone"}}]}"#,
    )
    .unwrap();
    let o = pnp_bare(&["validate", "--scenario", "edge", "--skeleton", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("step 0"), "{}", stdout(&o));

    std::fs::write(&bad, r#"{"revision": 0, "rationale": "", "steps": [{"kind": "teleport", "object_id": "card"}]}"#).unwrap();
    assert_eq!(code(&pnp_bare(&["validate", "--scenario", "edge", "--skeleton", bad.to_str().unwrap()])), 2);
    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(code(&pnp_bare(&["validate", "--scenario", "edge", "--skeleton", bad.to_str().unwrap()])), 2);
}

#[test]
fn bench_reads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"trials": 2, "scenarios": ["box", "edge"], "workers": 2}"#).unwrap();
    let o = pnp(&["bench", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "task,trials,successes,mean_replans,mean_wall_ms");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("box,2,"));
    assert_eq!(std::fs::read_dir(dir.path().join("out/traces")).unwrap().count(), 4);
}

#[test]
fn render_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&pnp(&["render", "--scenario", "wall", "--seed", "2"], dir.path())), 0);
    let svg = std::fs::read_to_string(dir.path().join("wall_seed2.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn shipped_scenarios_match_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pnp")).args(["scenarios", "export", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    for id in BUILTIN_IDS {
        let exported = std::fs::read_to_string(dir.path().join(format!("{id}.json"))).unwrap();
        let shipped = std::fs::read_to_string(repo_root().join(format!("scenarios/{id}.json"))).unwrap();
        assert_eq!(exported, shipped, "{id}");
    }
}

#[test]
fn shipped_prompts_match_defaults() {
    let t = PromptTemplates::default();
    for (name, text) in [("planner", &t.planner), ("reflector", &t.reflector), ("selector", &t.selector)] {
        let shipped = std::fs::read_to_string(repo_root().join(format!("prompts/{name}.txt"))).unwrap();
        assert_eq!(&shipped, text, "{name}");
    }
    let loaded = pnp::io::load_templates(Some(&repo_root().join("prompts"))).unwrap();
    assert_eq!(loaded, t);
}
