//! File formats and the output sandbox.

use std::fmt;
use std::fs;
use std::path::{Component, Path, PathBuf};

use pnp_core::planner::PromptTemplates;
use pnp_core::scenarios::{builtin, Scenario, BUILTIN_IDS};

/// Error carrying the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn no_feasible_pose(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<pnp_core::Error> for CliError {
    fn from(e: pnp_core::Error) -> Self {
        match e {
            pnp_core::Error::NoFeasiblePose(m) => CliError::no_feasible_pose(format!("no feasible pose: {m}")),
            other => CliError::input(other.to_string()),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// A built-in id or a path to a scenario JSON file.
pub fn load_scenario(arg: &str) -> Result<Scenario, CliError> {
    let path = Path::new(arg);
    if path.exists() {
        let text = read_text(path)?;
        return Scenario::from_json(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())));
    }
    if BUILTIN_IDS.contains(&arg) {
        return Ok(builtin(arg)?);
    }
    Err(CliError::input(format!(
        "scenario {arg} is neither a readable file nor a built-in id ({})",
        BUILTIN_IDS.join(", ")
    )))
}

/// Templates from `dir/{planner,reflector,selector}.txt`; missing files keep the defaults.
pub fn load_templates(dir: Option<&Path>) -> Result<PromptTemplates, CliError> {
    let mut t = PromptTemplates::default();
    let Some(dir) = dir else { return Ok(t) };
    if !dir.is_dir() {
        return Err(CliError::input(format!("template directory {} does not exist", dir.display())));
    }
    for (name, slot) in [("planner", &mut t.planner), ("reflector", &mut t.reflector), ("selector", &mut t.selector)] {
        let p = dir.join(format!("{name}.txt"));
        if p.exists() {
            *slot = read_text(&p)?;
        }
    }
    Ok(t)
}

/// Every file the CLI writes goes through here, so nothing lands outside `--out`.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::input(format!("cannot create {}: {e}", root.display())))?;
        let meta = fs::metadata(root).map_err(|e| CliError::input(e.to_string()))?;
        if meta.permissions().readonly() {
            return Err(CliError::input(format!("output directory {} is not writable", root.display())));
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, rel: impl AsRef<Path>, contents: &str) -> Result<PathBuf, CliError> {
        let rel = rel.as_ref();
        if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
            return Err(CliError::input(format!("refusing to write outside the output directory: {}", rel.display())));
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::input(format!("cannot create {}: {e}", parent.display())))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_dir_rejects_escapes() {
        let tmp = tempfile::tempdir().unwrap();
        let out = OutDir::create(tmp.path()).unwrap();
        assert!(out.write("a/b.txt", "x").is_ok());
        assert!(out.write("../evil.txt", "x").is_err());
        assert!(out.write("/etc/evil", "x").is_err());
    }

    #[test]
    fn scenario_argument_resolution() {
        assert_eq!(load_scenario("edge").unwrap().id, "edge");
        assert_eq!(load_scenario("/no/such/file.json").unwrap_err().code, 2);
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("bad.json");
        fs::write(&p, "{\"id\": 3}").unwrap();
        assert_eq!(load_scenario(p.to_str().unwrap()).unwrap_err().code, 2);
    }
}
