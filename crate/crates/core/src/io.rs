//! Small file helpers: atomic writes and CSV emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Run `write` against a temporary sibling of `path`, then rename it into place.
pub fn write_atomic_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = temp_sibling(path);
    write(&tmp)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic_with(path, |tmp| {
        let mut f = fs::File::create(tmp).map_err(|e| Error::io(tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(tmp, e))
    })
}

/// Minimal CSV table. Fields containing separators or quotes are quoted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            comments: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        fn field(s: &str) -> String {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        }
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        let line = |cells: &[String]| cells.iter().map(|c| field(c)).collect::<Vec<_>>().join(",");
        out.push_str(&line(&self.header));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }

    /// Parse a table produced by [`CsvTable::render`] whose fields need no
    /// quoting.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = CsvTable::default();
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let split = |l: &str| l.split(',').map(str::to_string).collect::<Vec<_>>();
        for line in lines.by_ref() {
            if let Some(c) = line.strip_prefix("# ") {
                t.comments.push(c.to_string());
            } else {
                t.header = split(line);
                break;
            }
        }
        if t.header.is_empty() {
            return Err(Error::Parameter("csv table has no header".into()));
        }
        for line in lines {
            if line.contains('"') {
                return Err(Error::Parameter(format!("quoted csv fields are not supported: {line:?}")));
            }
            let row = split(line);
            if row.len() != t.header.len() {
                return Err(Error::Parameter(format!(
                    "csv row has {} fields, header has {}",
                    row.len(),
                    t.header.len()
                )));
            }
            t.rows.push(row);
        }
        Ok(t)
    }
}

/// Fixed-precision float formatting so tables are byte-stable.
pub fn fmt_f(v: f64, digits: usize) -> String {
    if v == 0.0 {
        // avoid "-0.0000"
        return format!("{:.*}", digits, 0.0);
    }
    format!("{:.*}", digits, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_fields() {
        let mut t = CsvTable::new(["a", "b"]);
        t.comment("fake is positive");
        t.push(["x,y", "plain"]);
        assert_eq!(t.render(), "# fake is positive\na,b\n\"x,y\",plain\n");
    }

    #[test]
    fn parse_inverts_render() {
        let mut t = CsvTable::new(["a", "b"]);
        t.comment("note");
        t.push(["1", "x"]);
        t.push(["2", ""]);
        assert_eq!(CsvTable::parse(&t.render()).unwrap(), t);
        assert!(CsvTable::parse("a,b\n1\n").is_err());
        assert!(CsvTable::parse("# only\n").is_err());
    }

    #[test]
    fn atomic_write_creates_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/c.txt");
        write_atomic(&p, b"hi").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "hi");
        assert!(!temp_sibling(&p).exists());
    }
}
