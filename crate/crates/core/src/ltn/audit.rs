use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{decide, evaluate_rules, gated_channels, GateParams, LtnError, RuleReport};
use crate::corpus::{Chunk, ChunkRef};
use crate::fuzzy::FuzzyBackend;
use crate::predicates::{
    ChannelVector, EstimateFlag, EstimateMethod, PredicateError, PredicateEstimate, PredicateKey, CHANNEL_COUNT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvidence {
    pub chunk: ChunkRef,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPredicate {
    pub key: PredicateKey,
    pub method: EstimateMethod,
    pub value: f64,
    #[serde(default)]
    pub flags: Vec<EstimateFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_masses: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quoted: Vec<String>,
    pub evidence: Vec<AuditEvidence>,
}

/// Everything needed to retrace one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub doc_id: String,
    pub o_base: f64,
    pub threshold: f64,
    pub label: u8,
    pub backend: FuzzyBackend,
    pub gates: [f64; CHANNEL_COUNT],
    pub channels_pre: [f64; CHANNEL_COUNT],
    pub channels_post: [f64; CHANNEL_COUNT],
    pub rules: RuleReport,
    pub predicates: Vec<AuditPredicate>,
}

/// Assembles the report for one document. `chunks` must contain every chunk
/// the estimates cite.
pub fn build_audit_report(
    doc_id: &str,
    estimates: &[PredicateEstimate],
    channels: &ChannelVector,
    chunks: &[Chunk],
    gates: &GateParams,
    backend: FuzzyBackend,
    threshold: f64,
) -> Result<AuditReport, LtnError> {
    gates.validate()?;
    let decision = decide(channels, gates, backend, threshold)?;
    let by_ref: BTreeMap<ChunkRef, &Chunk> = chunks.iter().map(|c| (c.chunk_ref(), c)).collect();

    let mut by_key: BTreeMap<PredicateKey, &PredicateEstimate> = BTreeMap::new();
    for e in estimates {
        if e.doc_id != doc_id {
            return Err(LtnError::DocumentMismatch {
                expected: doc_id.to_string(),
                found: e.doc_id.clone(),
            });
        }
        if by_key.insert(e.key, e).is_some() {
            return Err(PredicateError::DuplicatePredicate(e.key).into());
        }
    }
    let mut predicates = Vec::with_capacity(PredicateKey::ALL.len());
    for key in PredicateKey::ALL {
        let e = by_key.get(&key).ok_or(PredicateError::MissingPredicate(key))?;
        let evidence = e
            .evidence_chunks
            .iter()
            .map(|r| {
                by_ref
                    .get(r)
                    .map(|c| AuditEvidence {
                        chunk: r.clone(),
                        text: c.text.clone(),
                    })
                    .ok_or_else(|| LtnError::UnresolvedEvidence(r.to_string()))
            })
            .collect::<Result<_, _>>()?;
        predicates.push(AuditPredicate {
            key,
            method: e.method,
            value: e.value,
            flags: e.flags.clone(),
            class_masses: e.class_masses,
            quoted: e.evidence_spans.clone(),
            evidence,
        });
    }

    Ok(AuditReport {
        doc_id: doc_id.to_string(),
        o_base: decision.o_base,
        threshold,
        label: decision.label,
        backend,
        gates: gates.gates(),
        channels_pre: channels.0,
        channels_post: gated_channels(channels, gates).0,
        rules: evaluate_rules(channels, decision.o_base, backend),
        predicates,
    })
}

fn unit(v: &Value, what: &str) -> Result<f64, String> {
    let x = v.as_f64().ok_or_else(|| format!("{what}: expected a number"))?;
    if !(0.0..=1.0).contains(&x) {
        return Err(format!("{what}: {x} outside [0, 1]"));
    }
    Ok(x)
}

fn unit_array(obj: &serde_json::Map<String, Value>, field: &str, len: usize) -> Result<Vec<f64>, String> {
    let arr = obj
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("`{field}` must be an array"))?;
    if arr.len() != len {
        return Err(format!("`{field}` has {} entries, expected {len}", arr.len()));
    }
    arr.iter()
        .enumerate()
        .map(|(i, x)| unit(x, &format!("{field}[{i}]")))
        .collect()
}

/// Structural check of a serialized [`AuditReport`]: field presence and
/// types, value ranges, cardinalities (8 predicates, 11 channels, 6 rules),
/// label consistency and evidence refs pointing into the same document.
pub fn validate_report_json(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("report must be an object")?;
    let doc_id = obj
        .get("doc_id")
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .ok_or("`doc_id` must be a nonempty string")?;
    let o = unit(obj.get("o_base").unwrap_or(&Value::Null), "o_base")?;
    let t = unit(obj.get("threshold").unwrap_or(&Value::Null), "threshold")?;
    let label = obj.get("label").and_then(Value::as_u64).ok_or("`label` must be 0 or 1")?;
    if label > 1 {
        return Err(format!("`label` must be 0 or 1, got {label}"));
    }
    if label != u64::from(o >= t) {
        return Err(format!("label {label} inconsistent with o_base {o} and threshold {t}"));
    }
    let backend = obj.get("backend").and_then(Value::as_str).ok_or("`backend` must be a string")?;
    if !FuzzyBackend::ALL.iter().any(|b| b.name() == backend) {
        return Err(format!("unknown backend `{backend}`"));
    }
    let gates = unit_array(obj, "gates", CHANNEL_COUNT)?;
    if gates.iter().any(|&g| g <= 0.0 || g >= 1.0) {
        return Err("gates must lie strictly inside (0, 1)".into());
    }
    let pre = unit_array(obj, "channels_pre", CHANNEL_COUNT)?;
    let post = unit_array(obj, "channels_post", CHANNEL_COUNT)?;
    if pre.iter().zip(&post).any(|(a, b)| b > a) {
        return Err("a gated channel exceeds its ungated value".into());
    }
    let rules = obj.get("rules").and_then(Value::as_object).ok_or("`rules` must be an object")?;
    for name in ["r1", "r2", "r3", "r4", "r5", "r6", "pos_feature"] {
        unit(rules.get(name).unwrap_or(&Value::Null), &format!("rules.{name}"))?;
    }
    let preds = obj
        .get("predicates")
        .and_then(Value::as_array)
        .ok_or("`predicates` must be an array")?;
    if preds.len() != PredicateKey::ALL.len() {
        return Err(format!("{} predicates, expected 8", preds.len()));
    }
    let mut keys = BTreeSet::new();
    for (i, p) in preds.iter().enumerate() {
        let key: PredicateKey = p
            .get("key")
            .and_then(Value::as_str)
            .ok_or_else(|| format!("predicates[{i}].key missing"))?
            .parse()
            .map_err(|e: PredicateError| e.to_string())?;
        if !keys.insert(key) {
            return Err(format!("predicate {key} listed twice"));
        }
        serde_json::from_value::<EstimateMethod>(p.get("method").cloned().unwrap_or(Value::Null))
            .map_err(|e| format!("predicates[{i}].method: {e}"))?;
        unit(p.get("value").unwrap_or(&Value::Null), &format!("predicates[{i}].value"))?;
        let evidence = p
            .get("evidence")
            .and_then(Value::as_array)
            .ok_or_else(|| format!("predicates[{i}].evidence must be an array"))?;
        for (j, ev) in evidence.iter().enumerate() {
            let chunk: ChunkRef = serde_json::from_value(ev.get("chunk").cloned().unwrap_or(Value::Null))
                .map_err(|e| format!("predicates[{i}].evidence[{j}].chunk: {e}"))?;
            if chunk.doc_id != doc_id {
                return Err(format!("evidence {chunk} belongs to another document"));
            }
            if !ev.get("text").is_some_and(Value::is_string) {
                return Err(format!("predicates[{i}].evidence[{j}].text must be a string"));
            }
        }
    }
    Ok(())
}
