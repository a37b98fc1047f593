//! File-system helpers: corpus directories and deterministic JSON artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{parse_corpus, print_corpus, Corpus, ParseError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {msg}")]
    Json { path: PathBuf, msg: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}: no .mfw files found")]
    EmptyDir(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Pretty JSON with a trailing newline. Struct fields serialize in
/// declaration order and maps are `BTreeMap`s, so output is stable.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    write_text(path, &to_json_string(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Reads a corpus from a directory of `.mfw` files (names relative to the
/// directory, sorted) or from a `corpus.json` written by [`write_json`].
pub fn read_corpus(path: &Path) -> Result<Corpus, IoError> {
    if path.is_file() {
        if path.extension().is_some_and(|e| e == "json") {
            return read_json(path);
        }
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        return Ok(parse_corpus(&[(name, read_text(path)?)])?);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(io_err(path))? {
        let p = entry.map_err(io_err(path))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "mfw") {
            let name = p
                .strip_prefix(path)
                .unwrap_or(&p)
                .to_string_lossy()
                .into_owned();
            files.push((name, read_text(&p)?));
        }
    }
    if files.is_empty() {
        return Err(IoError::EmptyDir(path.to_path_buf()));
    }
    files.sort();
    Ok(parse_corpus(&files)?)
}

/// Writes the canonical print of each source file into `dir`.
pub fn write_corpus_dir(dir: &Path, c: &Corpus) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for doc in print_corpus(c) {
        write_text(&dir.join(&doc.name), &doc.text)?;
    }
    Ok(())
}
