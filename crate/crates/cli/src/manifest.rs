//! Run manifests: enough to replay a run and regenerate its files exactly.
//!
//! Reports embed only the stable part (subcommand, parameters, seed and
//! artifact version) so a replay produces byte-identical reports. The sidecar
//! `<out>.manifest.json` also lists the written files and the wall-clock
//! duration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::commands::{CmdResult, Command};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub params: Value,
    pub seed: u64,
    pub artifact_version: String,
    #[serde(default)]
    pub outputs: Vec<PathBuf>,
    #[serde(default)]
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(command: &Command, seed: u64) -> CmdResult<Self> {
        let mut tagged = serde_json::to_value(command)?;
        let params = tagged
            .get_mut("params")
            .map(Value::take)
            .unwrap_or_else(|| json!({}));
        Ok(Self {
            subcommand: command.name().to_string(),
            params,
            seed,
            artifact_version: modgap::ARTIFACT_VERSION.to_string(),
            outputs: Vec::new(),
            duration_secs: 0.0,
        })
    }

    /// The fields that are identical across replays.
    pub fn stable(&self) -> Value {
        json!({
            "subcommand": self.subcommand,
            "params": self.params,
            "seed": self.seed,
            "artifact_version": self.artifact_version,
        })
    }

    pub fn command(&self) -> CmdResult<Command> {
        Ok(serde_json::from_value(json!({
            "subcommand": self.subcommand,
            "params": self.params,
        }))?)
    }

    pub fn load(path: &Path) -> CmdResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read manifest {}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> CmdResult<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// `<out>` with its extension replaced by `manifest.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commands::CapFractionArgs;

    #[test]
    fn roundtrips_through_json() {
        let cmd = Command::CapFraction(CapFractionArgs { dim: 3, cos: 0.25 });
        let m = RunManifest::new(&cmd, 7).unwrap();
        assert_eq!(m.subcommand, "cap-fraction");
        assert_eq!(m.params, json!({"dim": 3, "cos": 0.25}));
        let back: RunManifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(matches!(back.command().unwrap(), Command::CapFraction(a) if a.dim == 3));
    }

    #[test]
    fn unknown_params_rejected() {
        let m = RunManifest {
            subcommand: "cap-fraction".into(),
            params: json!({"dim": 3, "cos": 0.2, "bogus": 1}),
            seed: 1,
            artifact_version: "x".into(),
            outputs: vec![],
            duration_secs: 0.0,
        };
        assert!(m.command().is_err());
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar_path(Path::new("a/curve.csv")), PathBuf::from("a/curve.manifest.json"));
        assert_eq!(sidecar_path(Path::new("r.json")), PathBuf::from("r.manifest.json"));
    }
}
