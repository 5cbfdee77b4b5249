//! CSV/JSON assembly and the file-or-stdout sink.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Config echo carried by every output.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub command: &'static str,
    pub version: &'static str,
    pub engine: String,
    pub config: Value,
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
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

pub struct Csv {
    lines: Vec<String>,
}

impl Csv {
    pub fn new(meta: &Meta, columns: &[&str]) -> Self {
        let header = serde_json::to_string(meta).expect("meta serializes");
        Self {
            lines: vec![format!("# {header}"), columns.join(",")],
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.lines.push(cells.join(","));
    }

    pub fn comment(&mut self, label: &str, value: &impl Serialize) {
        let v = serde_json::to_string(value).expect("comment serializes");
        self.lines.push(format!("# {label} {v}"));
    }

    pub fn finish(self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

pub fn json_doc(meta: &Meta, body: Value) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("meta".into(), serde_json::to_value(meta).expect("meta serializes"));
    if let Value::Object(fields) = body {
        obj.extend(fields);
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("json serializes");
    s.push('\n');
    s
}

pub struct Document {
    pub suffix: Option<&'static str>,
    pub ext: &'static str,
    pub content: String,
}

/// Command result: a primary document and companions written beside it.
/// Companions are only written when an output path is given.
pub struct Outputs {
    pub primary: Document,
    pub companions: Vec<Document>,
}

impl Outputs {
    pub fn single(ext: &'static str, content: String) -> Self {
        Self {
            primary: Document { suffix: None, ext, content },
            companions: Vec::new(),
        }
    }
}

pub struct Sink {
    pub out: Option<PathBuf>,
    pub command: &'static str,
}

impl Sink {
    fn is_dir_target(path: &Path) -> bool {
        path.is_dir() || path.as_os_str().to_string_lossy().ends_with('/')
    }

    pub fn path_for(&self, suffix: Option<&str>, ext: &str) -> Option<PathBuf> {
        let out = self.out.as_ref()?;
        if Self::is_dir_target(out) {
            let name = match suffix {
                Some(s) => format!("{}_{s}.{ext}", self.command),
                None => format!("{}.{ext}", self.command),
            };
            return Some(out.join(name));
        }
        match suffix {
            None => Some(out.clone()),
            Some(s) => {
                let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Some(out.with_file_name(format!("{stem}_{s}.{ext}")))
            }
        }
    }

    fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
            }
        }
        std::fs::write(path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn emit(&self, outputs: &Outputs) -> Result<(), CliError> {
        if self.out.is_none() {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(outputs.primary.content.as_bytes())?;
            return Ok(());
        }
        for doc in std::iter::once(&outputs.primary).chain(&outputs.companions) {
            let path = self.path_for(doc.suffix, doc.ext).expect("out is set");
            Self::write_file(&path, &doc.content)?;
        }
        Ok(())
    }

    /// Structured failure report, written where the primary output would go.
    pub fn emit_failure(&self, meta: Option<&Meta>, err: &CliError) {
        let body = serde_json::json!({
            "status": "failed",
            "kind": err.kind(),
            "error": err.to_string(),
            "meta": meta,
        });
        let text = format!("{}\n", serde_json::to_string_pretty(&body).expect("json serializes"));
        match self.path_for(Some("failure"), "json") {
            Some(path) => {
                let _ = Self::write_file(&path, &text);
            }
            None => print!("{text}"),
        }
    }
}
