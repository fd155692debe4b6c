//! Scenario definitions: scene template, goal, region registry, and the
//! ordered fallback plans for the scripted planner.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::PlanSkeleton;
use crate::geometry::{Polygon2, Pose6D, Vec2};
use crate::subgoal::RegionResolver;
use crate::twin::TwinScene;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Goal {
    Pose { target: Pose6D },
    Region { zone: Polygon2 },
}

impl Goal {
    pub fn center(&self) -> Vec2 {
        match self {
            Goal::Pose { target } => target.xy(),
            Goal::Region { zone } => zone.centroid(),
        }
    }

    pub fn target_pose(&self) -> Option<Pose6D> {
        match self {
            Goal::Pose { target } => Some(*target),
            Goal::Region { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Randomization {
    pub pos_jitter: f64,
    pub yaw_jitter_deg: f64,
    pub goal_pos_jitter: f64,
    pub goal_yaw_jitter_deg: f64,
}

impl Default for Randomization {
    fn default() -> Self {
        Self { pos_jitter: 0.05, yaw_jitter_deg: 30.0, goal_pos_jitter: 0.05, goal_yaw_jitter_deg: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub name: String,
    pub pose: Pose6D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub instruction: String,
    /// Object whose final state decides success.
    pub task_object: String,
    pub scene: TwinScene,
    pub goal: Goal,
    pub regions: BTreeMap<String, RegionResolver>,
    pub fallback_plans: Vec<PlanSkeleton>,
    #[serde(default)]
    pub randomization: Randomization,
    /// Alternative start poses of the task object, cycled by seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_states: Vec<InitialState>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.scene.object(&self.task_object)?;
        if self.fallback_plans.is_empty() {
            return Err(Error::invalid(alloc::format!("scenario {} has no fallback plans", self.id)));
        }
        for plan in &self.fallback_plans {
            for step in &plan.steps {
                if let Some(r) = step.region_name() {
                    if !self.regions.contains_key(r) {
                        return Err(Error::NotFound(alloc::format!("region {r} in scenario {}", self.id)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: alloc::format!("line {} column {}", e.line(), e.column()),
            message: alloc::format!("{e}"),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

mod builtin;
pub use builtin::{builtin, builtin_ids, BUILTIN_IDS};
