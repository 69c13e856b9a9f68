//! Flat key=value configuration files. Keys are dotted paths
//! (`synth.count = 500`), `#` starts a comment, blank lines are skipped.
//! A file whose first non-whitespace byte is `{` is read as a run manifest
//! instead, and its `"config"` object becomes the map; re-running against
//! an emitted manifest therefore reproduces the run.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

pub type KvMap = BTreeMap<String, String>;

pub fn parse_config_str(text: &str) -> Result<KvMap> {
    if text.trim_start().starts_with('{') {
        return from_manifest(text);
    }
    let mut map = KvMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected key = value, got {:?}",
                lineno + 1,
                line
            )));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn from_manifest(text: &str) -> Result<KvMap> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("manifest parse: {e}")))?;
    let config = value
        .get("config")
        .and_then(|c| c.as_object())
        .ok_or_else(|| Error::Config("manifest has no \"config\" object".into()))?;
    let mut map = KvMap::new();
    for (k, v) in config {
        let s = match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        map.insert(k.clone(), s);
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> Result<KvMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let map = parse_config_str(
            "# header\n synth.count = 12 # trailing\n\n net.variant=full\n",
        )
        .unwrap();
        assert_eq!(map.get("synth.count").map(String::as_str), Some("12"));
        assert_eq!(map.get("net.variant").map(String::as_str), Some("full"));
        assert_eq!(map.len(), 2);
    }

    #[test]
    fn rejects_bare_words() {
        assert!(parse_config_str("oops\n").is_err());
    }

    #[test]
    fn manifest_json_round_trips_config() {
        let text = r#"{"command":"synth","config":{"synth.count":"5","synth.seed":"9"}}"#;
        let map = parse_config_str(text).unwrap();
        assert_eq!(map.get("synth.count").map(String::as_str), Some("5"));
        assert_eq!(map.get("synth.seed").map(String::as_str), Some("9"));
    }

    #[test]
    fn value_may_contain_equals() {
        let map = parse_config_str("a = b=c\n").unwrap();
        assert_eq!(map.get("a").map(String::as_str), Some("b=c"));
    }
}
