//! Layered configuration: defaults, then a JSON file, then `--key value` flags.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use std::path::Path;

/// Builds a config from its defaults, an optional JSON file and flag overrides.
///
/// Keys are checked against the serialized defaults, so a misspelt key is an
/// error rather than silently ignored. A flag key is either a dotted path
/// (`jitterfit.max_translation_m`) or a bare name that resolves to the
/// shallowest key of that name; dashes and underscores are interchangeable.
pub fn layered<T: Serialize + DeserializeOwned + Default>(file: Option<&Path>, overrides: &[String]) -> Result<T, String> {
    let mut root = serde_json::to_value(T::default()).map_err(|e| e.to_string())?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
        merge(&mut root, v, "")?;
    }
    for (key, raw) in pairs(overrides)? {
        set_key(&mut root, &key, &raw)?;
    }
    serde_json::from_value(root).map_err(|e| e.to_string())
}

fn pairs(args: &[String]) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            return Err(format!("unexpected argument {a:?}; overrides take the form --key value"));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => (flag.to_string(), it.next().ok_or_else(|| format!("flag --{flag} needs a value"))?.clone()),
        };
        out.push((key.replace('-', "_"), value));
    }
    Ok(out)
}

fn merge(dst: &mut Value, src: Value, at: &str) -> Result<(), String> {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) => {
            for (k, v) in s {
                let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                let slot = d.get_mut(&k).ok_or_else(|| format!("unknown config key {path:?}"))?;
                merge(slot, v, &path)?;
            }
            Ok(())
        }
        (d, s) => {
            *d = s;
            Ok(())
        }
    }
}

/// Every path in the tree whose last segment is `name`, shallowest first.
fn find_paths(v: &Value, name: &str, prefix: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    if let Value::Object(m) = v {
        for (k, child) in m {
            prefix.push(k.clone());
            if k == name {
                out.push(prefix.clone());
            }
            find_paths(child, name, prefix, out);
            prefix.pop();
        }
    }
}

fn set_key(root: &mut Value, key: &str, raw: &str) -> Result<(), String> {
    let path: Vec<String> = if key.contains('.') {
        key.split('.').map(str::to_string).collect()
    } else {
        let mut found = Vec::new();
        find_paths(root, key, &mut Vec::new(), &mut found);
        let depth = found.iter().map(Vec::len).min().ok_or_else(|| format!("unknown config key {key:?}"))?;
        let top: Vec<_> = found.into_iter().filter(|p| p.len() == depth).collect();
        if top.len() > 1 {
            let names: Vec<String> = top.iter().map(|p| p.join(".")).collect();
            return Err(format!("ambiguous key {key:?}; use one of {}", names.join(", ")));
        }
        top.into_iter().next().expect("one path")
    };
    let mut slot = &mut *root;
    for seg in &path {
        slot = slot
            .as_object_mut()
            .and_then(|m: &mut Map<String, Value>| m.get_mut(seg))
            .ok_or_else(|| format!("unknown config key {key:?}"))?;
    }
    *slot = parse_value(raw, slot).map_err(|e| format!("--{key}: {e}"))?;
    Ok(())
}

/// JSON when it parses to the slot's kind; otherwise text, or a comma list for arrays.
fn parse_value(raw: &str, current: &Value) -> Result<Value, String> {
    let parsed: Option<Value> = serde_json::from_str(raw).ok();
    let same_kind = |v: &Value| {
        matches!(
            (current, v),
            (Value::Null, _)
                | (Value::Bool(_), Value::Bool(_))
                | (Value::Number(_), Value::Number(_))
                | (Value::String(_), Value::String(_))
                | (Value::Array(_), Value::Array(_))
                | (Value::Object(_), Value::Object(_))
        )
    };
    match parsed {
        Some(v) if same_kind(&v) => Ok(v),
        _ => match current {
            Value::String(_) | Value::Null => Ok(Value::String(raw.to_string())),
            Value::Array(_) => Ok(Value::Array(
                raw.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string())))
                    .collect(),
            )),
            _ => Err(format!("cannot use {raw:?} here; expected {}", kind_name(current))),
        },
    }
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "any value",
        Value::Bool(_) => "true or false",
        Value::Number(_) => "a number",
        Value::String(_) => "text",
        Value::Array(_) => "a list",
        Value::Object(_) => "a JSON object",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use parcelfit::matchfit::{MatchFitConfig, StageName};

    fn args(a: &[&str]) -> Vec<String> {
        a.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bare_and_dotted_keys() {
        let c: MatchFitConfig = layered(None, &args(&["--seed", "7", "--jitterfit.max-translation-m", "40", "--snap_radius_m=12"])).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.jitterfit.max_translation_m, 40.0);
        assert_eq!(c.facefit.snap_radius_m, 12.0);
    }

    #[test]
    fn stage_lists() {
        let c: MatchFitConfig = layered(None, &args(&["--stages", "facefit,jitterfit"])).unwrap();
        assert_eq!(c.stages, vec![StageName::Facefit, StageName::Jitterfit]);
        let c: MatchFitConfig = layered(None, &args(&["--stages", ""])).unwrap();
        assert!(c.stages.is_empty());
        let c: MatchFitConfig = layered(None, &args(&["--stages", "[\"splinefit\"]"])).unwrap();
        assert_eq!(c.stages, vec![StageName::Splinefit]);
    }

    #[test]
    fn bad_keys_and_values() {
        assert!(layered::<MatchFitConfig>(None, &args(&["--nope", "1"])).unwrap_err().contains("unknown"));
        assert!(layered::<MatchFitConfig>(None, &args(&["--area_tol_frac", "0.1"])).unwrap_err().contains("ambiguous"));
        assert!(layered::<MatchFitConfig>(None, &args(&["--seed", "x"])).is_err());
        assert!(layered::<MatchFitConfig>(None, &args(&["--seed"])).is_err());
        assert!(layered::<MatchFitConfig>(None, &args(&["--stages", "warp"])).is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 3, "facefit": {"beam_width": 8}}"#).unwrap();
        let c: MatchFitConfig = layered(Some(&p), &args(&["--seed", "4"])).unwrap();
        assert_eq!((c.seed, c.facefit.beam_width), (4, 8));
        std::fs::write(&p, r#"{"facefit": {"beam": 8}}"#).unwrap();
        assert!(layered::<MatchFitConfig>(Some(&p), &[]).unwrap_err().contains("facefit.beam"));
    }
}
