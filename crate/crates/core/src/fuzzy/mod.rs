//! Fuzzy-logic backends: Gödel, Product and Łukasiewicz semantics for
//! conjunction, disjunction, negation and implication over truth degrees in
//! `[0, 1]`.
//!
//! Two families of entry points exist:
//!
//! - the checked free functions ([`and`], [`or`], [`not`], [`implies`],
//!   [`fold_and`], [`fold_or`]) validate their inputs and are what callers
//!   outside the decision layer should use;
//! - the [`Truth`] trait, implemented for `f64` and for [`Dual`], which the
//!   decision layer evaluates generically so that one formula tree yields both
//!   plain scores and forward-mode gradients.

mod dual;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dual::Dual;

/// Inputs may exceed `[0, 1]` by at most this much before they are rejected.
pub const DOMAIN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("truth value {0} lies outside [0, 1]")]
    Domain(f64),
    #[error("unknown fuzzy backend `{0}` (expected godel, product or lukasiewicz)")]
    UnknownBackend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FuzzyBackend {
    Godel,
    Product,
    Lukasiewicz,
}

impl FuzzyBackend {
    pub const ALL: [FuzzyBackend; 3] = [
        FuzzyBackend::Godel,
        FuzzyBackend::Product,
        FuzzyBackend::Lukasiewicz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FuzzyBackend::Godel => "godel",
            FuzzyBackend::Product => "product",
            FuzzyBackend::Lukasiewicz => "lukasiewicz",
        }
    }
}

impl fmt::Display for FuzzyBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FuzzyBackend {
    type Err = FuzzyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "godel" | "gödel" => Ok(FuzzyBackend::Godel),
            "product" => Ok(FuzzyBackend::Product),
            "lukasiewicz" | "łukasiewicz" => Ok(FuzzyBackend::Lukasiewicz),
            _ => Err(FuzzyError::UnknownBackend(s.to_string())),
        }
    }
}

/// Validates a truth degree, clamping values that are out of range by no more
/// than [`DOMAIN_TOLERANCE`].
pub fn check_unit(x: f64) -> Result<f64, FuzzyError> {
    if !(-DOMAIN_TOLERANCE..=1.0 + DOMAIN_TOLERANCE).contains(&x) {
        return Err(FuzzyError::Domain(x));
    }
    Ok(x.clamp(0.0, 1.0))
}

/// A truth degree the fuzzy connectives can be evaluated on.
///
/// Implementations assume operands already lie in `[0, 1]`.
pub trait Truth: Copy {
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn and(self, rhs: Self, backend: FuzzyBackend) -> Self;
    fn or(self, rhs: Self, backend: FuzzyBackend) -> Self;
    fn not(self) -> Self;
    fn implies(self, rhs: Self, backend: FuzzyBackend) -> Self;
    /// Ordinary product, used for gating.
    fn mul(self, rhs: Self) -> Self;
    /// Logistic function.
    fn sigmoid(self) -> Self;

    /// Left fold seeded with the first element (1 for an empty input). Seeding
    /// with the identity instead would put a rounding step in front of every
    /// Łukasiewicz conjunction (`1 + x - 1 != x` in floating point).
    fn fold_and<I: IntoIterator<Item = Self>>(values: I, backend: FuzzyBackend) -> Self {
        let mut iter = values.into_iter();
        match iter.next() {
            None => Self::constant(1.0),
            Some(first) => iter.fold(first, |acc, v| acc.and(v, backend)),
        }
    }

    /// Left fold seeded with the first element (0 for an empty input).
    fn fold_or<I: IntoIterator<Item = Self>>(values: I, backend: FuzzyBackend) -> Self {
        let mut iter = values.into_iter();
        match iter.next() {
            None => Self::constant(0.0),
            Some(first) => iter.fold(first, |acc, v| acc.or(v, backend)),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Truth for f64 {
    fn constant(v: f64) -> Self {
        v
    }

    fn value(&self) -> f64 {
        *self
    }

    fn and(self, b: Self, backend: FuzzyBackend) -> Self {
        let a = self;
        match backend {
            FuzzyBackend::Godel => a.min(b),
            FuzzyBackend::Product => a * b,
            FuzzyBackend::Lukasiewicz => (a + b - 1.0).max(0.0),
        }
    }

    fn or(self, b: Self, backend: FuzzyBackend) -> Self {
        let a = self;
        match backend {
            FuzzyBackend::Godel => a.max(b),
            FuzzyBackend::Product => a + b - a * b,
            FuzzyBackend::Lukasiewicz => (a + b).min(1.0),
        }
    }

    fn not(self) -> Self {
        1.0 - self
    }

    fn implies(self, b: Self, backend: FuzzyBackend) -> Self {
        let a = self;
        match backend {
            FuzzyBackend::Godel => {
                if a <= b {
                    1.0
                } else {
                    b
                }
            }
            FuzzyBackend::Product => {
                if a == 0.0 {
                    1.0
                } else {
                    (b / a).min(1.0)
                }
            }
            FuzzyBackend::Lukasiewicz => (1.0 - a + b).min(1.0),
        }
    }

    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }

    fn sigmoid(self) -> Self {
        sigmoid(self)
    }
}

pub fn and(backend: FuzzyBackend, a: f64, b: f64) -> Result<f64, FuzzyError> {
    Ok(check_unit(a)?.and(check_unit(b)?, backend))
}

pub fn or(backend: FuzzyBackend, a: f64, b: f64) -> Result<f64, FuzzyError> {
    Ok(check_unit(a)?.or(check_unit(b)?, backend))
}

pub fn not(a: f64) -> Result<f64, FuzzyError> {
    Ok(Truth::not(check_unit(a)?))
}

pub fn implies(backend: FuzzyBackend, a: f64, b: f64) -> Result<f64, FuzzyError> {
    Ok(check_unit(a)?.implies(check_unit(b)?, backend))
}

/// n-ary conjunction; the empty conjunction is 1.
pub fn fold_and(backend: FuzzyBackend, values: &[f64]) -> Result<f64, FuzzyError> {
    let checked = values
        .iter()
        .map(|&v| check_unit(v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(f64::fold_and(checked, backend))
}

/// n-ary disjunction; the empty disjunction is 0.
pub fn fold_or(backend: FuzzyBackend, values: &[f64]) -> Result<f64, FuzzyError> {
    let checked = values
        .iter()
        .map(|&v| check_unit(v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(f64::fold_or(checked, backend))
}
