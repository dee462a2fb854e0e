//! CSV export with atomic replacement of the target file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// In-memory CSV table with a fixed header.
#[derive(Debug, Clone)]
pub struct CsvTable {
    text: String,
    width: usize,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let cols: Vec<&str> = header.iter().map(|s| s.as_ref()).collect();
        let mut text = cols.join(",");
        text.push('\n');
        Self {
            text,
            width: cols.len(),
        }
    }

    /// Appends a numeric row; floats use the shortest round-trip representation.
    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.width);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let _ = write!(self.text, "{v:?}");
        }
        self.text.push('\n');
    }

    /// Appends a row of preformatted fields.
    pub fn push_fields<S: AsRef<str>>(&mut self, row: &[S]) {
        debug_assert_eq!(row.len(), self.width);
        let cols: Vec<&str> = row.iter().map(|s| s.as_ref()).collect();
        self.text.push_str(&cols.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.text)
    }
}

/// Formats an `f64` the way [`CsvTable::push`] does.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
