use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub struct Table {
    kind: &'static str,
    columns: Vec<&'static str>,
    body: String,
}

impl Table {
    pub fn new(kind: &'static str, columns: &[&'static str]) -> Self {
        Self { kind, columns: columns.to_vec(), body: String::new() }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    pub fn write(&self, path: &Path, config: &RunConfig, notes: &[String]) -> Result<(), CliError> {
        let mut text = String::new();
        let _ = writeln!(text, "# schema: abpeakon.{}/{}", self.kind, SCHEMA_VERSION);
        let _ = writeln!(text, "# config: {}", serde_json::to_string(config).expect("config serializes"));
        for n in notes {
            let _ = writeln!(text, "# {n}");
        }
        text.push_str(&self.columns.join(","));
        text.push('\n');
        text.push_str(&self.body);
        write_file(path, &text)
    }
}

/// Writes `{schema, config, ...body}` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, kind: &str, config: &RunConfig, body: &T) -> Result<(), CliError> {
    let mut doc = json!({
        "schema": format!("abpeakon.{kind}/{SCHEMA_VERSION}"),
        "config": config,
    });
    match serde_json::to_value(body).map_err(|e| CliError::Io(e.to_string()))? {
        Value::Object(map) => {
            let obj = doc.as_object_mut().expect("object");
            for (k, v) in map {
                obj.insert(k, v);
            }
        }
        other => {
            doc["data"] = other;
        }
    }
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
