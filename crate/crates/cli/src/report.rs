//! Machine-readable run reports.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    /// Files written by the run.
    pub outputs: Vec<String>,
    pub results: Value,
    /// Wall-clock seconds per stage; the only field that varies across reruns.
    #[serde(default)]
    pub timing: Value,
}

impl Report {
    pub fn new(command: &str, seed: u64, results: Value) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            seed,
            outputs: Vec::new(),
            results,
            timing: Value::Null,
        }
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let r: Report = serde_json::from_str(text).context("malformed report")?;
        if r.schema_version != SCHEMA_VERSION {
            bail!("report schema {} is not supported (expected {SCHEMA_VERSION})", r.schema_version);
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trips() {
        let mut r = Report::new("classify", 3, json!({"accuracy": 0.95, "n_test": 20}));
        r.outputs.push("out/report.json".into());
        r.timing = json!({"total": 1.5});
        assert_eq!(Report::parse(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn rejects_other_schema_and_junk() {
        let mut r = Report::new("power", 0, json!(null));
        r.schema_version = 99;
        assert!(Report::parse(&r.to_json().unwrap()).is_err());
        assert!(Report::parse("{\"schema_version\": 1}").is_err());
    }
}
