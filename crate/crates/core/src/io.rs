//! Line-delimited JSON persistence with a versioned header line.
//!
//! Every file starts with `{"format": <kind>, "version": <n>}` followed by
//! one JSON record per line. Readers reject unknown kinds and versions.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
}

/// Streaming writer for one record kind.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<Box<dyn Write>>,
}

impl JsonlWriter {
    pub fn create(path: &Path, kind: &str, version: u32) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Self::from_writer(path, Box::new(file), kind, version)
    }

    pub fn from_writer(path: &Path, out: Box<dyn Write>, kind: &str, version: u32) -> Result<Self> {
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(out),
        };
        w.write(&Header {
            format: kind.to_string(),
            version,
        })?;
        Ok(w)
    }

    pub fn write<T: Serialize + ?Sized>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out
            .write_all(b"\n")
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_jsonl<'a, T, I>(path: &Path, kind: &str, version: u32, records: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut w = JsonlWriter::create(path, kind, version)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

/// Reads every record after checking the header.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, kind: &str, version: u32) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(file), path, kind, version)
}

pub fn parse_jsonl<T: DeserializeOwned, R: BufRead>(
    reader: R,
    path: &Path,
    kind: &str,
    version: u32,
) -> Result<Vec<T>> {
    let mut lines = reader.lines();
    let malformed = |reason: String| Error::Malformed {
        kind: kind.to_string(),
        reason,
    };
    let first = lines
        .next()
        .ok_or_else(|| malformed("empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&first)
        .map_err(|e| malformed(format!("bad header: {e}")))?;
    if header.format != kind {
        return Err(malformed(format!("expected format {kind:?}, found {:?}", header.format)));
    }
    if header.version != version {
        return Err(Error::SchemaVersion {
            kind: kind.to_string(),
            found: header.version,
            supported: version,
        });
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| malformed(format!("line {}: {e}", n + 2)))?,
        );
    }
    Ok(out)
}

/// Single-record document.
pub fn write_document<T: Serialize>(path: &Path, kind: &str, version: u32, doc: &T) -> Result<()> {
    write_jsonl(path, kind, version, std::iter::once(doc))
}

pub fn read_document<T: DeserializeOwned>(path: &Path, kind: &str, version: u32) -> Result<T> {
    let mut all: Vec<T> = read_jsonl(path, kind, version)?;
    if all.len() != 1 {
        return Err(Error::Malformed {
            kind: kind.to_string(),
            reason: format!("expected one record, found {}", all.len()),
        });
    }
    Ok(all.remove(0))
}

/// Serializes non-finite floats as strings ("inf", "-inf", "nan").
pub mod non_finite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other:?}"))),
            },
        }
    }
}
