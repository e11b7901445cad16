//! `key = value` configuration files.
//!
//! One assignment per line, `#` comments, unknown keys rejected so typos
//! fail loudly. Typed accessors consume keys; `finish()` reports leftovers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub struct KvFile {
    path: PathBuf,
    values: BTreeMap<String, String>,
}

impl KvFile {
    pub fn load(path: &Path) -> Result<KvFile> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<KvFile> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                path: path.into(),
                message: format!("line {}: expected `key = value`", lineno + 1),
            })?;
            let key = k.trim().to_string();
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::ConfigParse {
                    path: path.into(),
                    message: format!("line {}: duplicate key `{key}`", lineno + 1),
                });
            }
        }
        Ok(KvFile {
            path: path.into(),
            values,
        })
    }

    fn err(&self, message: String) -> Error {
        Error::ConfigParse {
            path: self.path.clone(),
            message,
        }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    pub fn take_parsed<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| self.err(format!("bad value `{s}` for `{key}`"))),
        }
    }

    pub fn take_required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let s = self
            .take(key)
            .ok_or_else(|| self.err(format!("missing required key `{key}`")))?;
        s.parse()
            .map_err(|_| self.err(format!("bad value `{s}` for `{key}`")))
    }

    pub fn take_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key).as_deref() {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(s) => Err(self.err(format!("bad boolean `{s}` for `{key}`"))),
        }
    }

    /// Comma- or space-separated list of values.
    pub fn take_list<T: std::str::FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.take(key) {
            None => Ok(default),
            Some(s) => s
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse()
                        .map_err(|_| self.err(format!("bad list item `{t}` for `{key}`")))
                })
                .collect(),
        }
    }

    /// Fail if any keys were never consumed.
    pub fn finish(self) -> Result<()> {
        if let Some(key) = self.values.keys().next() {
            return Err(Error::ConfigParse {
                path: self.path,
                message: format!("unknown key `{key}`"),
            });
        }
        Ok(())
    }
}
