//! Flat `key = value` config files.
//!
//! ```text
//! # comment
//! iterations = 3000
//! hidden = [64, 64]
//!
//! [env]
//! kind = vases
//!
//! [env.vases]
//! density = 0.4
//! ```
//!
//! Section headers prefix the keys below them with a dotted path. Values are
//! read as JSON literals when they parse as one and as bare strings
//! otherwise. The result is laid over the serialized defaults of the target
//! type, so unknown keys are rejected by its deserializer.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Parse a scalar or array literal.
pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Set `path` (dot separated) inside `root`, creating objects on the way.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad key `{path}`")));
    }
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            if cur.is_null() {
                *cur = Value::Object(Map::new());
            } else {
                return Err(Error::Config(format!(
                    "`{}` is not a section",
                    parts[..i].join(".")
                )));
            }
        }
        let obj = cur.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!()
}

/// The `(dotted key, value)` assignments of a config file, in order.
pub fn parse_assignments(text: &str) -> Result<Vec<(String, Value)>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(Error::Parse {
                line: line_no,
                msg: "unterminated section header".into(),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::Parse {
            line: line_no,
            msg: format!("expected `key = value`, found `{line}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty key".into(),
            });
        }
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        out.push((full, parse_value(value)));
    }
    Ok(out)
}

/// Parse a `key=value` command-line override.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (k, v) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not `key=value`")))?;
    Ok((k.trim().to_string(), parse_value(v)))
}

/// Resolve a config: defaults, then the file, then overrides.
///
/// Returns the typed config and its fully resolved JSON form.
pub fn resolve<T: Serialize + DeserializeOwned>(
    base: &T,
    file: Option<&str>,
    overrides: &[String],
) -> Result<(T, Value)> {
    let mut value = serde_json::to_value(base)?;
    let mut sets = match file {
        Some(text) => parse_assignments(text)?,
        None => Vec::new(),
    };
    for o in overrides {
        sets.push(parse_override(o)?);
    }
    for (k, v) in sets {
        set_path(&mut value, &k, v)?;
    }
    let typed: T = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    let resolved = serde_json::to_value(&typed)?;
    Ok((typed, resolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::TrainConfig;

    #[test]
    fn sections_and_literals() {
        let text = "iterations = 5 # inline\nhidden = [3, 4]\n\n[env]\nkind = ou\n[env.ou]\nnoise=0.5\n";
        let (cfg, resolved) = resolve(&TrainConfig::default(), Some(text), &[]).unwrap();
        assert_eq!(cfg.iterations, 5);
        assert_eq!(cfg.hidden, vec![3, 4]);
        assert_eq!(cfg.env.kind, "ou");
        assert_eq!(cfg.env.ou.noise, 0.5);
        assert_eq!(resolved["env"]["ou"]["noise"], 0.5);
    }

    #[test]
    fn overrides_win() {
        let text = "seed = 3\n";
        let ov = vec!["seed=9".to_string(), "env.augment=tv_noise".into(), "clip=1.5".into()];
        let (cfg, _) = resolve(&TrainConfig::default(), Some(text), &ov).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.env.augment, Some(crate::env::AugmentKind::TvNoise));
        assert_eq!(cfg.clip, Some(1.5));
    }

    #[test]
    fn errors() {
        let err = parse_assignments("a = 1\nnonsense\n").unwrap_err();
        assert_eq!(err.to_string(), "line 2: expected `key = value`, found `nonsense`");
        assert!(parse_assignments("[env\n").is_err());
        assert!(resolve(&TrainConfig::default(), Some("no_such_key = 1"), &[]).is_err());
        assert!(resolve(&TrainConfig::default(), Some("iterations = many"), &[]).is_err());
        assert!(resolve(&TrainConfig::default(), None, &["seed".into()]).is_err());
        assert!(resolve(&TrainConfig::default(), Some("seed.x = 1"), &[]).is_err());
    }

    #[test]
    fn resolved_round_trips() {
        let (cfg, resolved) = resolve(&TrainConfig::preset("ou").unwrap(), None, &[]).unwrap();
        let back: TrainConfig = serde_json::from_value(resolved).unwrap();
        assert_eq!(back, cfg);
    }
}
