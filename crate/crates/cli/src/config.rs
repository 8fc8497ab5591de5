//! Configuration files and command-line overrides.
//!
//! Files are TOML with one table per section (`[grid]`, `[potential]`,
//! `[truncation]`, `[time]`, `[solver]`, `[experiment]`). An override is
//! `section.key=value` or a bare `key=value` when the key name occurs in a
//! single section. Values are TOML literals; anything that does not parse
//! as one is taken as a string, and `a/b` is accepted for floats.

use std::path::{Path, PathBuf};

use damage_core::simulator::{Scenario, SimConfig};
use toml::{Table, Value};

use crate::CliError;

/// Keys that are absent from a serialized default configuration because
/// they default to "unset".
const OPTIONAL_KEYS: [(&str, &str, Kind); 5] = [
    ("grid", "nodes_y", Kind::Integer),
    ("grid", "extent_y", Kind::Float),
    ("solver", "c_omega", Kind::Float),
    ("experiment", "g_file", Kind::String),
    ("experiment", "z0_file", Kind::String),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Integer,
    Float,
    String,
    Other,
}

fn kind_of(v: &Value) -> Kind {
    match v {
        Value::Integer(_) => Kind::Integer,
        Value::Float(_) => Kind::Float,
        Value::String(_) => Kind::String,
        _ => Kind::Other,
    }
}

/// `(section, key, kind)` for every key the schema accepts.
fn schema() -> Vec<(String, String, Kind)> {
    let defaults = Table::try_from(SimConfig::default()).expect("default config serializes");
    let mut keys = Vec::new();
    for (section, body) in &defaults {
        if let Value::Table(t) = body {
            for (k, v) in t {
                keys.push((section.clone(), k.clone(), kind_of(v)));
            }
        }
    }
    for (s, k, kind) in OPTIONAL_KEYS {
        keys.push((s.to_owned(), k.to_owned(), kind));
    }
    keys
}

fn parse_fraction(s: &str) -> Option<f64> {
    let (a, b) = s.split_once('/')?;
    let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    (b != 0.0).then(|| a / b)
}

/// Parse a float that may be written as `a/b`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .ok()
        .or_else(|| parse_fraction(s))
        .ok_or_else(|| format!("not a number: {s}"))
}

fn parse_value(raw: &str, kind: Kind) -> Value {
    let raw = raw.trim();
    let literal = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"));
    match (literal, kind) {
        (Some(Value::Integer(i)), Kind::Float) => Value::Float(i as f64),
        (Some(v), Kind::String) if !v.is_str() => Value::String(raw.to_owned()),
        (Some(v), _) => v,
        (None, Kind::Float) => match parse_fraction(raw) {
            Some(x) => Value::Float(x),
            None => Value::String(raw.to_owned()),
        },
        (None, _) => Value::String(raw.to_owned()),
    }
}

/// Apply one `key=value` override to a configuration table.
pub fn apply_override(table: &mut Table, arg: &str) -> Result<(), CliError> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("override `{arg}` is not key=value")))?;
    let key = key.trim();
    let schema = schema();
    let matches: Vec<&(String, String, Kind)> = match key.split_once('.') {
        Some((s, k)) => schema
            .iter()
            .filter(|(ss, kk, _)| ss == s && kk == k)
            .collect(),
        None => schema.iter().filter(|(_, kk, _)| kk == key).collect(),
    };
    let (section, name, kind) = match matches.as_slice() {
        [one] => *one,
        [] => {
            return Err(CliError::Parse(format!(
                "unknown configuration key `{key}`"
            )))
        }
        _ => {
            return Err(CliError::Parse(format!(
                "key `{key}` is ambiguous, qualify it with its section"
            )))
        }
    };
    let body = table
        .entry(section.clone())
        .or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(body) = body else {
        return Err(CliError::Parse(format!("`{section}` is not a section")));
    };
    let value = match kind {
        // list keys take a comma-separated list of numbers
        Kind::Other if !raw.trim_start().starts_with('[') => Value::Array(
            raw.split(',')
                .map(|x| parse_number(x).map(Value::Float))
                .collect::<Result<_, _>>()
                .map_err(CliError::Parse)?,
        ),
        _ => parse_value(raw, *kind),
    };
    body.insert(name.clone(), value);
    Ok(())
}

fn resolve_paths(cfg: &mut SimConfig, base: &Path) {
    for p in [&mut cfg.experiment.g_file, &mut cfg.experiment.z0_file]
        .into_iter()
        .flatten()
    {
        let path = PathBuf::from(&*p);
        if path.is_relative() {
            *p = base.join(path).to_string_lossy().into_owned();
        }
    }
}

/// Build a configuration from TOML text and overrides, without validating it.
pub fn parse_str(text: &str, overrides: &[String]) -> Result<SimConfig, CliError> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))
}

/// Read, override and validate a configuration. `None` starts from the
/// defaults. The returned configuration has passed the hypothesis checks
/// performed when a scenario is built.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<SimConfig, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = parse_str(&text, overrides)?;
    if let Some(dir) = path.and_then(Path::parent) {
        resolve_paths(&mut cfg, dir);
    }
    Scenario::new(&cfg)?;
    Ok(cfg)
}

pub fn serialize(cfg: &SimConfig) -> String {
    toml::to_string(cfg).expect("configuration serializes")
}
