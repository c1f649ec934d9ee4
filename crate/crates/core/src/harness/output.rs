use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A file to be written under the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: PathBuf,
    pub contents: String,
}

/// Everything a verb emits, written in one pass by a single collector.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Artifacts(pub Vec<Artifact>);

impl Artifacts {
    pub fn push(&mut self, path: impl Into<PathBuf>, contents: String) {
        self.0.push(Artifact {
            path: path.into(),
            contents,
        });
    }

    pub fn extend(&mut self, other: Artifacts) {
        self.0.extend(other.0);
    }

    pub fn get(&self, path: impl AsRef<Path>) -> Option<&str> {
        self.0
            .iter()
            .find(|a| a.path == path.as_ref())
            .map(|a| a.contents.as_str())
    }

    pub fn write_all(&self, root: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.0.len());
        for a in &self.0 {
            let full = root.join(&a.path);
            if let Some(dir) = full.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            std::fs::write(&full, &a.contents).map_err(|e| Error::io(&full, e))?;
            written.push(full);
        }
        Ok(written)
    }
}

/// CSV text from string records.
pub(crate) fn csv_text<I, R, S>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Whitespace-aligned table: first column left-aligned, the rest right.
pub(crate) fn text_table(title: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<w$}", w = width[i])
                } else {
                    format!("{c:>w$}", w = width[i])
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    out.push_str(&line(&mut header.iter().copied()));
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(&mut r.iter().map(String::as_str)));
        out.push('\n');
    }
    out
}

pub(crate) fn fmt_rho(v: f64) -> String {
    format!("{v:.3}")
}

pub(crate) fn fmt_p(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.2e}")
    }
}

/// File-name-safe rendering of a dataset name.
pub(crate) fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_table() {
        let t = text_table(
            "# demo",
            &["name", "value"],
            &[vec!["a".into(), "1.5".into()], vec!["longer".into(), "-0.25".into()]],
        );
        assert_eq!(t, "# demo\nname    value\n-------------\na         1.5\nlonger  -0.25\n");
    }

    #[test]
    fn csv_quotes_when_needed() {
        let s = csv_text(&["a", "b"], [["1", "x,y"]]);
        assert_eq!(s, "a,b\n1,\"x,y\"\n");
    }

    #[test]
    fn writes_nested_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::default();
        a.push("tables/t.csv", "x\n".into());
        a.write_all(dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("tables/t.csv")).unwrap(), "x\n");
        assert_eq!(a.get("tables/t.csv"), Some("x\n"));
        assert_eq!(slug("a b/c"), "a_b_c");
        assert_eq!(fmt_p(0.0), "0");
        assert_eq!(fmt_p(1.234e-10), "1.23e-10");
    }
}
