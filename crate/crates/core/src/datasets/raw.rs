use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// A headered CSV held as text cells. Every row has exactly as many cells as
/// there are columns; cells are whitespace-trimmed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::MalformedHeader(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if columns.iter().all(String::is_empty) {
            return Err(Error::MalformedHeader("empty header row".into()));
        }
        let mut rows = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            // UCI files end with a blank line or two
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            if rec.len() != columns.len() {
                return Err(Error::Row {
                    row,
                    message: format!("{} cells, expected {}", rec.len(), columns.len()),
                });
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { columns, rows })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file))
    }

    /// Index of the first column whose name matches one of `aliases`
    /// (case-insensitive).
    pub fn column(&self, aliases: &[&str]) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| aliases.iter().any(|a| c.eq_ignore_ascii_case(a)))
    }

    /// Resolves every `(role, aliases)` pair, failing with the full list of
    /// missing roles.
    pub(crate) fn require(&self, wanted: &[(&str, &[&str])]) -> Result<Vec<usize>> {
        let mut found = Vec::with_capacity(wanted.len());
        let mut missing = Vec::new();
        for (role, aliases) in wanted {
            match self.column(aliases) {
                Some(i) => found.push(i),
                None => missing.push(*role),
            }
        }
        if missing.is_empty() {
            Ok(found)
        } else {
            Err(Error::MalformedHeader(format!(
                "missing column(s): {}",
                missing.join(", ")
            )))
        }
    }
}
