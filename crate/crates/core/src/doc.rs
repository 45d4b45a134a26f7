//! Structured-document plumbing shared by every file format the harness reads
//! or writes: a YAML-compatible subset (maps, sequences, scalars) in, pretty
//! JSON (itself inside that subset) out.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_yaml::{Mapping, Value};

use crate::error::{Error, Result};

/// Parse bytes into a document tree. Tags are rejected; anything that is not
/// UTF-8 or not well-formed is a `Parse` error carrying a 1-based line.
pub fn parse_bytes(bytes: &[u8]) -> Result<Value> {
    let text = match std::str::from_utf8(bytes) {
        Ok(t) => t,
        Err(e) => {
            let line = 1 + bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count();
            return Err(Error::parse(line, "document is not valid UTF-8"));
        }
    };
    parse_str(text)
}

pub fn parse_str(text: &str) -> Result<Value> {
    let value: Value = serde_yaml::from_str(text).map_err(|e| {
        let line = e.location().map(|l| l.line()).unwrap_or(0);
        Error::parse(line, e.to_string())
    })?;
    reject_tags(&value, "$")?;
    Ok(value)
}

fn reject_tags(value: &Value, path: &str) -> Result<()> {
    match value {
        Value::Tagged(t) => Err(Error::schema(path, format!("tag `{}` is not supported", t.tag))),
        Value::Sequence(seq) => seq
            .iter()
            .enumerate()
            .try_for_each(|(i, v)| reject_tags(v, &format!("{path}[{i}]"))),
        Value::Mapping(map) => map
            .iter()
            .try_for_each(|(k, v)| reject_tags(v, &format!("{path}.{}", key_text(k)))),
        _ => Ok(()),
    }
}

pub fn read_file(path: &Path) -> Result<Value> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_bytes(&bytes)
}

/// Parse a document and deserialize it into a typed exchange struct.
pub fn from_bytes<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let value = parse_bytes(bytes)?;
    serde_yaml::from_value(value).map_err(|e| Error::schema("$", e.to_string()))
}

pub fn read_typed<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Canonical machine output: pretty JSON with a trailing newline. Field order
/// follows struct declaration order, maps are ordered, so output is byte-stable.
pub fn to_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("exchange documents always serialize");
    s.push('\n');
    s
}

pub fn write_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, to_string(value)).map_err(|e| Error::io(path, e))
}

pub fn key_text(k: &Value) -> String {
    match k {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Null => "null".into(),
        _ => "<complex key>".into(),
    }
}

/// A view into a document tree that remembers its path, so every accessor can
/// produce a `Schema` error pointing at the offending field.
#[derive(Clone)]
pub struct At<'a> {
    pub value: &'a Value,
    pub path: String,
}

impl<'a> At<'a> {
    pub fn root(value: &'a Value) -> Self {
        Self {
            value,
            path: "$".into(),
        }
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn err(&self, reason: impl Into<String>) -> Error {
        Error::schema(self.path.clone(), reason)
    }

    pub fn map(&self) -> Result<&'a Mapping> {
        self.value.as_mapping().ok_or_else(|| self.err("expected a mapping"))
    }

    pub fn get(&self, key: &str) -> Option<At<'a>> {
        let v = self.value.as_mapping()?.get(key)?;
        if v.is_null() {
            return None;
        }
        Some(At {
            value: v,
            path: format!("{}.{key}", self.path),
        })
    }

    pub fn req(&self, key: &str) -> Result<At<'a>> {
        self.map()?;
        self.get(key)
            .ok_or_else(|| Error::schema(format!("{}.{key}", self.path), "required field is missing"))
    }

    /// First present key among spellings.
    pub fn get_any(&self, keys: &[&str]) -> Option<At<'a>> {
        keys.iter().find_map(|k| self.get(k))
    }

    pub fn str(&self) -> Result<&'a str> {
        self.value.as_str().ok_or_else(|| self.err("expected a string"))
    }

    /// Scalars rendered as text (numbers and booleans included).
    pub fn text(&self) -> Result<String> {
        match self.value {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            _ => Err(self.err("expected a scalar")),
        }
    }

    pub fn f64(&self) -> Result<f64> {
        let v = self.value.as_f64().ok_or_else(|| self.err("expected a number"))?;
        if !v.is_finite() {
            return Err(self.err("number must be finite"));
        }
        Ok(v)
    }

    pub fn u64(&self) -> Result<u64> {
        self.value.as_u64().ok_or_else(|| self.err("expected a non-negative integer"))
    }

    pub fn bool(&self) -> Result<bool> {
        self.value.as_bool().ok_or_else(|| self.err("expected a boolean"))
    }

    pub fn seq(&self) -> Result<Vec<At<'a>>> {
        let seq = self.value.as_sequence().ok_or_else(|| self.err("expected a sequence"))?;
        Ok(seq
            .iter()
            .enumerate()
            .map(|(i, v)| At {
                value: v,
                path: format!("{}[{i}]", self.path),
            })
            .collect())
    }

    pub fn entries(&self) -> Result<Vec<(String, At<'a>)>> {
        let map = self.map()?;
        Ok(map
            .iter()
            .map(|(k, v)| {
                let key = key_text(k);
                let path = format!("{}.{key}", self.path);
                (key, At { value: v, path })
            })
            .collect())
    }

    pub fn str_list(&self) -> Result<Vec<String>> {
        self.seq()?.iter().map(|a| a.text()).collect()
    }

    pub fn f64_list(&self) -> Result<Vec<f64>> {
        self.seq()?.iter().map(|a| a.f64()).collect()
    }

    /// `[lo, hi]` pair with `lo < hi`.
    pub fn span(&self) -> Result<[f64; 2]> {
        let v = self.f64_list()?;
        if v.len() != 2 {
            return Err(self.err("expected a [lo, hi] pair"));
        }
        if v[0] >= v[1] {
            return Err(self.err(format!("span lower bound {} is not below upper bound {}", v[0], v[1])));
        }
        Ok([v[0], v[1]])
    }
}

/// Build a mapping from `(key, value)` pairs, skipping `None` values.
pub fn mapping<I>(pairs: I) -> Value
where
    I: IntoIterator<Item = (&'static str, Option<Value>)>,
{
    let mut m = Mapping::new();
    for (k, v) in pairs {
        if let Some(v) = v {
            m.insert(Value::String(k.into()), v);
        }
    }
    Value::Mapping(m)
}

/// Build a mapping from owned or borrowed keys.
pub fn map_of<K: Into<String>>(pairs: impl IntoIterator<Item = (K, Value)>) -> Value {
    Value::Mapping(pairs.into_iter().map(|(k, v)| (Value::String(k.into()), v)).collect())
}

pub fn num(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::Number((v as i64).into())
    } else {
        Value::Number(v.into())
    }
}

pub fn s(v: impl Into<String>) -> Value {
    Value::String(v.into())
}

pub fn str_seq(items: &[String]) -> Value {
    Value::Sequence(items.iter().map(|i| s(i.clone())).collect())
}

pub fn emit_yaml(value: &Value) -> String {
    serde_yaml::to_string(value).expect("document trees always serialize")
}
