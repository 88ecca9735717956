//! Artifact files. Every name is a single path component inside the output
//! directory, and every CSV starts with a versioned schema line.

use std::fmt::Write as _;
use std::path::{Component, Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("refusing to write {0:?}: names must be a single plain file name")]
    Escape(String),
    #[error("cannot write {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

/// Schema line heading a CSV of the given kind.
pub fn schema_line(kind: &str) -> String {
    format!("# schema: schelling/{kind}/v1")
}

pub struct OutputDir {
    root: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path, hash: &str) -> Result<Self, OutputError> {
        std::fs::create_dir_all(root).map_err(|e| OutputError::Io {
            path: root.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            hash: hash.to_string(),
            written: Vec::new(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// `<stem>-<hash>.<ext>`.
    pub fn name(&self, stem: &str, ext: &str) -> String {
        format!("{stem}-{}.{ext}", self.hash)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, OutputError> {
        let mut parts = Path::new(name).components();
        let plain = matches!(parts.next(), Some(Component::Normal(_))) && parts.next().is_none();
        if !plain || name.contains(['/', '\\']) {
            return Err(OutputError::Escape(name.into()));
        }
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|e| OutputError::Io {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        self.written.push(path.clone());
        Ok(path)
    }
}

/// In-memory CSV with a schema line and a header row.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(kind: &str, header: &[&str]) -> Self {
        let mut text = schema_line(kind);
        text.push('\n');
        text.push_str(&header.join(","));
        text.push('\n');
        Self {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(c);
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x}").expect("writing to a string");
    s
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
