//! Human-readable and JSON run reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

/// Parameters used, derived results and non-fatal warnings of a run. Maps
/// are ordered so both renderings are deterministic.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, Value>,
    pub results: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Self { experiment: experiment.into(), seed, ..Self::default() }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.into(), serde_json::to_value(value).expect("serializable parameter"));
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.into(), serde_json::to_value(value).expect("serializable result"));
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.results.get(key).and_then(Value::as_f64)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "seed = {}", self.seed);
        for (title, map) in [("parameters", &self.parameters), ("results", &self.results)] {
            let _ = writeln!(s, "\n[{title}]");
            for (k, v) in map {
                let _ = writeln!(s, "{k} = {}", render(v));
            }
        }
        let _ = writeln!(s, "\n[warnings]");
        if self.warnings.is_empty() {
            let _ = writeln!(s, "none");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "- {w}");
        }
        s
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "n/a".into(),
        other => other.to_string(),
    }
}
