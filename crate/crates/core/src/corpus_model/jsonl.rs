//! JSON Lines reading and writing.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::CorpusError;

/// Reads every record of a JSONL file. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_lines(path, &text, false)
}

/// Like [`read_jsonl`] but tolerates a final line that was cut off by an
/// interrupted append (no trailing newline and not parseable).
pub fn read_jsonl_lenient<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_lines(path, &text, !text.ends_with('\n'))
}

fn parse_lines<T: DeserializeOwned>(
    path: &Path,
    text: &str,
    last_may_be_torn: bool,
) -> Result<Vec<T>, CorpusError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if last_may_be_torn && i + 1 == lines.len() => break,
            Err(e) => {
                return Err(CorpusError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Writes all records, replacing the file atomically.
pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<(), CorpusError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let tmp = tmp_path(path);
    {
        let file = File::create(&tmp).map_err(|e| CorpusError::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        for r in records {
            write_line(&mut w, r).map_err(|e| CorpusError::io(&tmp, e))?;
        }
        w.flush().map_err(|e| CorpusError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| CorpusError::io(path, e))
}

/// Serializes a value as pretty JSON, replacing the file atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CorpusError> {
    let tmp = tmp_path(path);
    let mut body = serde_json::to_string_pretty(value).expect("serializable value");
    body.push('\n');
    fs::write(&tmp, body).map_err(|e| CorpusError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CorpusError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

fn write_line<W: Write, T: Serialize>(w: &mut W, record: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, record)?;
    w.write_all(b"\n")
}

/// Append-only writer; every [`append`](Self::append) is flushed so that an
/// interrupted run loses at most the line being written.
pub struct JsonlAppender {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl JsonlAppender {
    pub fn open(path: &Path) -> Result<Self, CorpusError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CorpusError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner: BufWriter::new(file),
        })
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<(), CorpusError> {
        write_line(&mut self.inner, record)
            .and_then(|_| self.inner.flush())
            .map_err(|e| CorpusError::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        n: u32,
    }

    #[test]
    fn torn_tail_is_ignored_only_in_lenient_mode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        fs::write(&path, "{\"n\":1}\n{\"n\":2}\n{\"n\":").unwrap();
        let rows: Vec<Row> = read_jsonl_lenient(&path).unwrap();
        assert_eq!(rows, vec![Row { n: 1 }, Row { n: 2 }]);
        assert!(matches!(
            read_jsonl::<Row>(&path),
            Err(CorpusError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn appender_and_atomic_writer_agree() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let rows = [Row { n: 1 }, Row { n: 7 }];
        let mut app = JsonlAppender::open(&a).unwrap();
        for r in &rows {
            app.append(r).unwrap();
        }
        drop(app);
        write_jsonl(&b, &rows).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }
}
