use std::collections::BTreeMap;
use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use super::{PredicateError, PredicateEstimate, PredicateKey};

pub const CHANNEL_COUNT: usize = 11;

/// The decision-layer inputs, in vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    TitleClear,
    NumberClear,
    NumberPresent,
    ValidityClear,
    ValidityVague,
    ReservationClear,
    PaymentPresent,
    DeliveryPresent,
    ContactPresent,
    NotOfferStrong,
    NotOfferVague,
}

/// Channels whose disjunction forms the positive core.
pub const POSITIVE_CHANNELS: [Channel; 7] = [
    Channel::TitleClear,
    Channel::NumberPresent,
    Channel::ValidityVague,
    Channel::ReservationClear,
    Channel::PaymentPresent,
    Channel::DeliveryPresent,
    Channel::ContactPresent,
];

impl Channel {
    pub const ALL: [Channel; CHANNEL_COUNT] = [
        Channel::TitleClear,
        Channel::NumberClear,
        Channel::NumberPresent,
        Channel::ValidityClear,
        Channel::ValidityVague,
        Channel::ReservationClear,
        Channel::PaymentPresent,
        Channel::DeliveryPresent,
        Channel::ContactPresent,
        Channel::NotOfferStrong,
        Channel::NotOfferVague,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Channel::TitleClear => "T_c",
            Channel::NumberClear => "N_c",
            Channel::NumberPresent => "N_p",
            Channel::ValidityClear => "V_c",
            Channel::ValidityVague => "V_v",
            Channel::ReservationClear => "R_c",
            Channel::PaymentPresent => "P_p",
            Channel::DeliveryPresent => "D_p",
            Channel::ContactPresent => "S_p",
            Channel::NotOfferStrong => "NOT_s",
            Channel::NotOfferVague => "NOT_v",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Eleven truth degrees in [`Channel`] order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelVector(pub [f64; CHANNEL_COUNT]);

impl ChannelVector {
    pub fn new(values: [f64; CHANNEL_COUNT]) -> Result<Self, PredicateError> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(PredicateError::ChannelRange { index, value });
            }
        }
        Ok(Self(values))
    }

    pub fn zeros() -> Self {
        Self([0.0; CHANNEL_COUNT])
    }

    pub fn get(&self, c: Channel) -> f64 {
        self.0[c.index()]
    }

    pub fn set(&mut self, c: Channel, v: f64) {
        self.0[c.index()] = v;
    }

    pub fn as_array(&self) -> &[f64; CHANNEL_COUNT] {
        &self.0
    }
}

impl Index<Channel> for ChannelVector {
    type Output = f64;

    fn index(&self, c: Channel) -> &f64 {
        &self.0[c.index()]
    }
}

/// (clear, present) split of one estimate.
fn split(est: &PredicateEstimate) -> (f64, f64) {
    match (est.method.is_mcsr(), est.class_masses) {
        (true, Some([_, m1, m2])) => (m2, (m1 + m2).min(1.0)),
        _ => {
            let s = est.value;
            ((2.0 * s - 1.0).max(0.0), (2.0 * s).min(1.0))
        }
    }
}

/// Channel value of a predicate that feeds a single channel: MCSR sources use
/// the same split as two-channel predicates, scalar sources pass `s` through
/// for present channels.
fn single(est: &PredicateEstimate, clear: bool) -> f64 {
    let (c, p) = split(est);
    let mcsr = est.method.is_mcsr() && est.class_masses.is_some();
    match (clear, mcsr) {
        (true, _) => c,
        (false, true) => p,
        (false, false) => est.value,
    }
}

/// Maps one estimate per predicate onto the eleven channels.
pub fn to_channels(estimates: &[PredicateEstimate]) -> Result<ChannelVector, PredicateError> {
    let mut by_key: BTreeMap<PredicateKey, &PredicateEstimate> = BTreeMap::new();
    for est in estimates {
        if let Some(first) = by_key.values().next() {
            if first.doc_id != est.doc_id {
                return Err(PredicateError::MixedDocuments(first.doc_id.clone(), est.doc_id.clone()));
            }
        }
        if by_key.insert(est.key, est).is_some() {
            return Err(PredicateError::DuplicatePredicate(est.key));
        }
    }
    let get = |k: PredicateKey| by_key.get(&k).copied().ok_or(PredicateError::MissingPredicate(k));

    use Channel::*;
    let mut v = ChannelVector::zeros();
    v.set(TitleClear, single(get(PredicateKey::Title)?, true));
    let (c, p) = split(get(PredicateKey::Number)?);
    v.set(NumberClear, c);
    v.set(NumberPresent, p);
    let (c, p) = split(get(PredicateKey::Validity)?);
    v.set(ValidityClear, c);
    v.set(ValidityVague, p);
    v.set(ReservationClear, single(get(PredicateKey::Reservation)?, true));
    v.set(PaymentPresent, single(get(PredicateKey::Payment)?, false));
    v.set(DeliveryPresent, single(get(PredicateKey::Delivery)?, false));
    v.set(ContactPresent, single(get(PredicateKey::Contact)?, false));
    let (c, p) = split(get(PredicateKey::NotOffer)?);
    v.set(NotOfferStrong, c);
    v.set(NotOfferVague, p);
    ChannelVector::new(v.0)
}
