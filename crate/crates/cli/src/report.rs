//! JSON run reports with sorted keys and shortest round-trip floats.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub results: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

impl Report {
    pub fn new<C: Serialize>(command: &'static str, config: &C) -> Self {
        Self {
            tool: "xaikit",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: to_value(config),
            results: BTreeMap::new(),
            items: Vec::new(),
            wall_time_seconds: None,
        }
    }

    pub fn result<T: Serialize>(&mut self, key: &str, value: T) -> &mut Self {
        self.results.insert(key.to_string(), to_value(&value));
        self
    }

    pub fn item<T: Serialize>(&mut self, value: T) -> &mut Self {
        self.items.push(to_value(&value));
        self
    }

    /// Keys come out sorted because `serde_json::Map` is ordered.
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&to_value(self)).expect("report renders");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.render()).map_err(|e| CliError::io(path, e))
    }
}
