//! Flat `key=value` text used for configs and model checkpoints.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Keys carry section prefixes (`student.epochs`). Parsing keeps
//! the file order so a document can be written back verbatim.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut doc = KvDoc::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::parse(origin, i + 1, "empty key"));
            }
            if doc.get(k).is_some() {
                return Err(Error::parse(origin, i + 1, format!("duplicate key `{k}`")));
            }
            doc.entries.push((k.to_string(), v.to_string()));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Sets `key`, replacing an existing value in place.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn reader(&self) -> KvReader<'_> {
        KvReader {
            doc: self,
            used: vec![false; self.entries.len()],
        }
    }
}

/// Typed access that remembers which keys were read, so unknown keys can be
/// reported.
pub struct KvReader<'a> {
    doc: &'a KvDoc,
    used: Vec<bool>,
}

impl<'a> KvReader<'a> {
    fn lookup(&mut self, key: &str) -> Option<&'a str> {
        let idx = self.doc.entries.iter().position(|(k, _)| k == key)?;
        self.used[idx] = true;
        Some(self.doc.entries[idx].1.as_str())
    }

    pub fn has(&self, key: &str) -> bool {
        self.doc.get(key).is_some()
    }

    pub fn str(&mut self, key: &str) -> Result<&'a str> {
        self.lookup(key).ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn opt_str(&mut self, key: &str) -> Option<&'a str> {
        self.lookup(key)
    }

    pub fn get<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.str(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{raw}`")))
    }

    pub fn get_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.lookup(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{raw}`"))),
        }
    }

    pub fn opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.lookup(key) {
            None => Ok(None),
            Some("" | "none") => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{raw}`"))),
        }
    }

    pub fn list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let raw = self.str(key)?;
        parse_list(raw).map_err(|_| Error::Config(format!("key `{key}`: cannot parse list `{raw}`")))
    }

    pub fn list_or<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        if self.has(key) {
            self.list(key)
        } else {
            Ok(default)
        }
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.lookup(key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(other) => Err(Error::Config(format!("key `{key}`: expected a boolean, found `{other}`"))),
        }
    }

    /// Fails if any key was never read.
    pub fn finish(self) -> Result<()> {
        let unknown: Vec<&str> = self
            .doc
            .entries
            .iter()
            .zip(&self.used)
            .filter(|(_, used)| !**used)
            .map(|((k, _), _)| k.as_str())
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }
}

pub fn parse_list<T: FromStr>(raw: &str) -> std::result::Result<Vec<T>, T::Err> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|s| s.trim().parse()).collect()
}

pub fn join_list<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_tracks_usage() {
        let doc = KvDoc::parse("# comment\nstudent.epochs = 240\n\nrho=0.9\nhidden = 4, 8\n", "t").unwrap();
        let mut r = doc.reader();
        assert_eq!(r.get::<usize>("student.epochs").unwrap(), 240);
        assert_eq!(r.list::<usize>("hidden").unwrap(), vec![4, 8]);
        assert!(r.finish().is_err());
        let mut r = doc.reader();
        r.get::<f64>("rho").unwrap();
        r.get::<usize>("student.epochs").unwrap();
        r.list::<usize>("hidden").unwrap();
        r.finish().unwrap();
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(KvDoc::parse("a=1\na=2\n", "t").is_err());
        assert!(KvDoc::parse("no equals sign\n", "t").is_err());
        let doc = KvDoc::parse("a = x\n", "t").unwrap();
        assert!(doc.reader().get::<f64>("a").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut doc = KvDoc::new();
        doc.set("a.b", 0.1);
        doc.set("c", "x,y");
        doc.set("a.b", 2);
        assert_eq!(doc.to_text(), "a.b = 2\nc = x,y\n");
        assert_eq!(KvDoc::parse(&doc.to_text(), "t").unwrap(), doc);
    }
}
