//! Gated decision layer over the eleven channels.
//!
//! Each channel `p_i` is scaled by a gate `g_i = σ(α_i)`. The positive core is
//! the disjunction of the seven gated positive channels, the negative core the
//! disjunction of the two gated NOT channels, and the score is
//! `O_base = PosCore ∧ ¬NegCore`. Rules R1 to R6 are evaluated on ungated
//! channels for the report only.

mod audit;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{Dual, FuzzyBackend, Truth};
use crate::predicates::{Channel, ChannelVector, CHANNEL_COUNT, POSITIVE_CHANNELS};

pub use audit::{build_audit_report, validate_report_json, AuditEvidence, AuditPredicate, AuditReport};

#[derive(Debug, Error)]
pub enum LtnError {
    #[error("gate logit {index} is not finite ({value})")]
    NonFiniteGate { index: usize, value: f64 },
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("evidence chunk {0} does not resolve to a stored chunk")]
    UnresolvedEvidence(String),
    #[error("estimate for `{found}` passed with document `{expected}`")]
    DocumentMismatch { expected: String, found: String },
    #[error(transparent)]
    Predicate(#[from] crate::predicates::PredicateError),
}

/// Gate logits, one per channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateParams {
    pub alpha: [f64; CHANNEL_COUNT],
}

impl Default for GateParams {
    fn default() -> Self {
        Self::uniform(0.0)
    }
}

impl GateParams {
    pub fn uniform(alpha: f64) -> Self {
        Self {
            alpha: [alpha; CHANNEL_COUNT],
        }
    }

    pub fn validate(&self) -> Result<(), LtnError> {
        match self.alpha.iter().position(|a| !a.is_finite()) {
            Some(index) => Err(LtnError::NonFiniteGate {
                index,
                value: self.alpha[index],
            }),
            None => Ok(()),
        }
    }

    pub fn gates(&self) -> [f64; CHANNEL_COUNT] {
        self.alpha.map(crate::fuzzy::sigmoid)
    }
}

/// `O_base` on any [`Truth`] type; `alpha` are logits.
pub fn o_base_generic<T: Truth>(
    channels: &[T; CHANNEL_COUNT],
    alpha: &[T; CHANNEL_COUNT],
    backend: FuzzyBackend,
) -> T {
    let gated = |c: Channel| channels[c.index()].mul(alpha[c.index()].sigmoid());
    let pos_core = T::fold_or(POSITIVE_CHANNELS.iter().map(|&c| gated(c)), backend);
    let neg_core = gated(Channel::NotOfferStrong).or(gated(Channel::NotOfferVague), backend);
    pos_core.and(neg_core.not(), backend)
}

pub fn o_base(channels: &ChannelVector, gates: &GateParams, backend: FuzzyBackend) -> f64 {
    o_base_generic(&channels.0, &gates.alpha, backend)
}

/// `O_base` with partial derivatives with respect to the eleven logits.
pub fn o_base_dual(channels: &ChannelVector, gates: &GateParams, backend: FuzzyBackend) -> Dual<CHANNEL_COUNT> {
    let c = channels.0.map(Dual::constant);
    let mut a = [Dual::constant(0.0); CHANNEL_COUNT];
    for (i, slot) in a.iter_mut().enumerate() {
        *slot = Dual::variable(gates.alpha[i], i);
    }
    o_base_generic(&c, &a, backend)
}

/// Channels after gating.
pub fn gated_channels(channels: &ChannelVector, gates: &GateParams) -> ChannelVector {
    let g = gates.gates();
    let mut out = channels.0;
    for (x, gi) in out.iter_mut().zip(g) {
        *x *= gi;
    }
    ChannelVector(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub o_base: f64,
    pub label: u8,
    pub threshold: f64,
}

/// Label 1 iff `o_base >= threshold`.
pub fn decide(
    channels: &ChannelVector,
    gates: &GateParams,
    backend: FuzzyBackend,
    threshold: f64,
) -> Result<Decision, LtnError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(LtnError::Threshold(threshold));
    }
    let o = o_base(channels, gates, backend);
    Ok(Decision {
        o_base: o,
        label: u8::from(o >= threshold),
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
    pub pos_feature: f64,
}

impl RuleReport {
    pub fn rules(&self) -> [f64; 6] {
        [self.r1, self.r2, self.r3, self.r4, self.r5, self.r6]
    }
}

/// Truth values of the explanatory rules against the score `o`.
pub fn evaluate_rules(channels: &ChannelVector, o: f64, backend: FuzzyBackend) -> RuleReport {
    use Channel::*;
    let c = |ch: Channel| channels[ch];
    let pos_feature = f64::fold_or(POSITIVE_CHANNELS.iter().map(|&ch| c(ch)), backend);
    let not_o = Truth::not(o);
    RuleReport {
        r1: c(TitleClear).implies(o, backend),
        r2: c(ValidityClear).and(c(PaymentPresent), backend).implies(o, backend),
        r3: c(TitleClear)
            .or(c(NumberClear), backend)
            .and(Truth::not(c(NotOfferStrong)), backend)
            .implies(o, backend),
        r4: pos_feature.implies(o, backend),
        r5: c(NotOfferStrong).implies(not_o, backend),
        r6: c(NotOfferVague).implies(not_o, backend),
        pos_feature,
    }
}
