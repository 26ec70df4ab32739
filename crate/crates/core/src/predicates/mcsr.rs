use serde_json::Value;

use super::EstimateMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McsrVariant {
    BestConf,
    TopProb,
}

impl McsrVariant {
    pub fn method(self) -> EstimateMethod {
        match self {
            McsrVariant::BestConf => EstimateMethod::McsrBestconf,
            McsrVariant::TopProb => EstimateMethod::McsrTopprob,
        }
    }

    /// Scalar value of the predicate given reflected masses.
    pub fn value(self, masses: &[f64; 3]) -> f64 {
        match self {
            McsrVariant::BestConf => mcsr_bestconf_value(masses),
            McsrVariant::TopProb => mcsr_topprob_value(masses),
        }
    }
}

/// Index of the largest reflected confidence; ties go to the lower class.
pub fn mcsr_winner(reflected: &[f64; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if reflected[i] > reflected[best] {
            best = i;
        }
    }
    best
}

pub fn mcsr_bestconf_value(masses: &[f64; 3]) -> f64 {
    match mcsr_winner(masses) {
        0 => 0.0,
        w => masses[w],
    }
}

pub fn mcsr_topprob_value(masses: &[f64; 3]) -> f64 {
    let sum: f64 = masses.iter().sum();
    match mcsr_winner(masses) {
        0 => 0.0,
        _ if sum <= 0.0 => 0.0,
        w => masses[w] / sum,
    }
}

/// Masses scaled to sum to one; all-zero masses are returned unchanged.
pub fn normalize_masses(masses: &[f64; 3]) -> [f64; 3] {
    let sum: f64 = masses.iter().sum();
    if sum <= 0.0 {
        return *masses;
    }
    masses.map(|m| m / sum)
}

/// The parts of a model answer the estimate keeps.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct McsrAnswer {
    pub reflected: [f64; 3],
    pub evidence: Vec<String>,
}

fn unit_triple(v: &Value, field: &str) -> Result<[f64; 3], String> {
    let arr = v
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("missing array `{field}`"))?;
    if arr.len() != 3 {
        return Err(format!("`{field}` must have 3 entries, got {}", arr.len()));
    }
    let mut out = [0.0; 3];
    for (slot, x) in out.iter_mut().zip(arr) {
        let x = x.as_f64().ok_or_else(|| format!("`{field}` entries must be numbers"))?;
        if !(0.0..=1.0).contains(&x) {
            return Err(format!("`{field}` entry {x} outside [0, 1]"));
        }
        *slot = x;
    }
    Ok(out)
}

pub(crate) fn validate_mcsr(v: &Value) -> Result<(), String> {
    parse_mcsr(v).map(|_| ())
}

pub(crate) fn parse_mcsr(v: &Value) -> Result<McsrAnswer, String> {
    unit_triple(v, "initial")?;
    let reflected = unit_triple(v, "reflected")?;
    let evidence = match v.get("evidence") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|e| e.as_str().map(str::to_string).ok_or("`evidence` entries must be strings"))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err("`evidence` must be an array".into()),
    };
    Ok(McsrAnswer { reflected, evidence })
}
