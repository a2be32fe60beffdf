//! Artifact writing and run records.

use crate::error::{CliError, CliResult};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Write `contents` to a sibling temporary file, then rename it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    file.write_all(contents.as_bytes()).map_err(|e| CliError::io(&tmp, e))?;
    file.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Append one line to a JSON-lines file, rewriting it atomically.
pub fn append_line_atomic(path: &Path, line: &str) -> CliResult<()> {
    let mut text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(CliError::io(path, e)),
    };
    if !text.is_empty() && !text.ends_with('\n') {
        text.push('\n');
    }
    text.push_str(line);
    text.push('\n');
    write_atomic(path, &text)
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

/// Summary of one experiment run, stored as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub experiment: String,
    pub parameters: BTreeMap<String, String>,
    pub artifacts: Vec<PathBuf>,
    pub assertions: Vec<Assertion>,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
    }

    /// One `PASS`/`FAIL` line per assertion.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for a in &self.assertions {
            let mark = if a.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{mark} {}: {} ({})\n", self.experiment, a.name, a.detail));
        }
        out
    }
}

/// Collects artifacts written into one output directory.
#[derive(Debug)]
pub struct ArtifactSink {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactSink {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), written: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, contents)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn into_paths(self) -> Vec<PathBuf> {
        self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/a.csv");
        write_atomic(&path, "one\n").unwrap();
        write_atomic(&path, "two\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two\n");
        let leftovers: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn json_lines_accumulate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        append_line_atomic(&path, "{\"a\":1}").unwrap();
        append_line_atomic(&path, "{\"a\":2}").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "{\"a\":1}\n{\"a\":2}\n");
    }

    #[test]
    fn record_serializes_to_one_line() {
        let rec = RunRecord {
            experiment: "figure2".into(),
            parameters: BTreeMap::from([("eps".to_string(), "0.1".to_string())]),
            artifacts: vec![PathBuf::from("out/figure2.csv")],
            assertions: vec![Assertion::new("shared zero", true, "gap 0")],
            wall_seconds: 0.5,
        };
        let line = rec.to_json_line();
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["experiment"], "figure2");
        assert_eq!(v["assertions"][0]["passed"], true);
        assert!(rec.passed());
        assert!(rec.summary().starts_with("PASS figure2: shared zero"));
    }
}
