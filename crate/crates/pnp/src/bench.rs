//! Timed episodes, the parallel benchmark, and its CSV / table output.

use std::time::Instant;

use rayon::prelude::*;

use pnp_core::harness::{run_episode, run_episode_with, Ablation, BenchRow, EpisodeResult, HarnessConfig};
use pnp_core::planner::PlannerConfig;
use pnp_core::scenarios::Scenario;
use pnp_core::Result;

use crate::http::{CallLog, HttpClient, HttpPlanner, HttpSelector};

#[derive(Debug, Clone)]
pub enum PlannerChoice {
    Scripted,
    Http(PlannerConfig),
}

/// Runs one episode with wall-clock timing; http call failures are returned
/// alongside so traces can show retries.
pub fn timed_episode(
    scenario: &Scenario,
    seed: u64,
    ablation: Ablation,
    cfg: &HarnessConfig,
    planner: &PlannerChoice,
) -> Result<(EpisodeResult, Vec<CallLog>)> {
    let t0 = Instant::now();
    let (mut result, log) = match planner {
        PlannerChoice::Scripted => (run_episode(scenario, seed, ablation, cfg)?, Vec::new()),
        PlannerChoice::Http(pc) => {
            let client = HttpClient::from_config(pc)?;
            let regions = scenario.regions.keys().cloned().collect();
            let mut p = HttpPlanner::new(client.clone(), pc.templates.clone(), regions);
            let mut s = HttpSelector::new(client, &pc.templates);
            let r = run_episode_with(scenario, seed, ablation, cfg, &mut p, &mut s)?;
            let mut log = p.log;
            log.extend(s.log);
            (r, log)
        }
    };
    result.wall_ms = t0.elapsed().as_millis() as u64;
    Ok((result, log))
}

/// Seeds `0..trials` for every scenario on `workers` threads; output sorted by (task, seed).
pub fn run_parallel(
    scenarios: &[Scenario],
    trials: usize,
    ablation: Ablation,
    cfg: &HarnessConfig,
    planner: &PlannerChoice,
    workers: usize,
) -> Result<Vec<(EpisodeResult, Vec<CallLog>)>> {
    let jobs: Vec<(&Scenario, u64)> =
        scenarios.iter().flat_map(|s| (0..trials as u64).map(move |k| (s, k))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool builds");
    let mut out = pool.install(|| {
        jobs.par_iter()
            .map(|(s, k)| timed_episode(s, *k, ablation, cfg, planner))
            .collect::<Result<Vec<_>>>()
    })?;
    out.sort_by(|a, b| (a.0.scenario_id.as_str(), a.0.seed).cmp(&(b.0.scenario_id.as_str(), b.0.seed)));
    Ok(out)
}

pub fn csv_string(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "trials", "successes", "mean_replans", "mean_wall_ms"]).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.task.clone(),
            r.trials.to_string(),
            r.successes.to_string(),
            format!("{:.2}", r.mean_replans),
            format!("{:.1}", r.mean_wall_ms),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

/// One-row success table, tasks as columns.
pub fn success_table(rows: &[BenchRow], label: &str) -> String {
    let width = rows.iter().map(|r| r.task.len()).max().unwrap_or(4).max(5);
    let mut head = format!("{:<8}", "method");
    let mut line = format!("{label:<8}");
    for r in rows {
        head.push_str(&format!(" | {:>width$}", r.task));
        line.push_str(&format!(" | {:>width$}", format!("{}/{}", r.successes, r.trials)));
    }
    format!("{head}\n{line}\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_table_shape() {
        let rows = vec![
            BenchRow { task: "box".into(), trials: 10, successes: 10, mean_replans: 0.5, mean_wall_ms: 12.34 },
            BenchRow { task: "edge".into(), trials: 10, successes: 9, mean_replans: 1.0, mean_wall_ms: 3.0 },
        ];
        let csv = csv_string(&rows);
        assert_eq!(
            csv,
            "task,trials,successes,mean_replans,mean_wall_ms\nbox,10,10,0.50,12.3\nedge,10,9,1.00,3.0\n"
        );
        let t = success_table(&rows, "Ours");
        assert!(t.lines().nth(1).unwrap().starts_with("Ours"));
        assert!(t.contains("10/10") && t.contains("9/10"));
    }
}
