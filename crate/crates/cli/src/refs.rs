//! Prediction and reference files for `evaluate`.
//!
//! Each JSONL line carries `scene_id`, `sample_id` and either a `text`
//! string or a `steps` array (strings or objects with `text`), optionally
//! with an `activity` that is prepended.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;
use sharp_core::dataset::SampleKey;
use sharp_core::metrics::{tokenize, TokenizedPair};

fn record_text(v: &Value) -> Option<String> {
    if let Some(t) = v.get("text").and_then(Value::as_str) {
        return Some(t.to_string());
    }
    let steps = v.get("steps")?.as_array()?;
    let mut parts: Vec<String> = Vec::new();
    if let Some(a) = v.get("activity").and_then(Value::as_str) {
        parts.push(a.to_string());
    }
    for s in steps {
        match s {
            Value::String(t) => parts.push(t.clone()),
            other => parts.push(other.get("text")?.as_str()?.to_string()),
        }
    }
    Some(parts.join(" "))
}

/// Reads keyed texts; a key may repeat.
pub fn read_keyed(path: &Path) -> Result<Vec<(SampleKey, String)>> {
    let raw = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value =
            serde_json::from_str(line).with_context(|| format!("{}:{}: invalid JSON", path.display(), i + 1))?;
        let field = |name: &str| -> Result<String> {
            match v.get(name) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(Value::Number(n)) => Ok(n.to_string()),
                _ => bail!("{}:{}: missing {name}", path.display(), i + 1),
            }
        };
        let key = SampleKey {
            scene_id: field("scene_id")?,
            sample_id: field("sample_id")?,
        };
        let text = record_text(&v)
            .with_context(|| format!("{}:{}: needs a text string or a steps array", path.display(), i + 1))?;
        out.push((key, text));
    }
    Ok(out)
}

/// Joins predictions with references by key. Every prediction key must be
/// unique and the two key sets must match.
pub fn join_pairs(
    predictions: &[(SampleKey, String)],
    references: &[(SampleKey, String)],
) -> Result<Vec<TokenizedPair>> {
    let mut preds: BTreeMap<&SampleKey, &str> = BTreeMap::new();
    for (k, t) in predictions {
        if preds.insert(k, t).is_some() {
            bail!("duplicate prediction for {k}");
        }
    }
    let mut refs: BTreeMap<&SampleKey, Vec<&str>> = BTreeMap::new();
    for (k, t) in references {
        refs.entry(k).or_default().push(t);
    }
    let missing: Vec<String> = refs
        .keys()
        .filter(|k| !preds.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    let extra: Vec<String> = preds
        .keys()
        .filter(|k| !refs.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        bail!(
            "prediction and reference keys differ; missing predictions: [{}]; predictions without references: [{}]",
            missing.join(", "),
            extra.join(", ")
        );
    }
    Ok(preds
        .into_iter()
        .map(|(k, cand)| TokenizedPair {
            candidate: tokenize(cand),
            references: refs[k].iter().map(|r| tokenize(r)).collect(),
        })
        .collect())
}
