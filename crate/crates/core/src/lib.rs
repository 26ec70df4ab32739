//! Offer-document validation with extracted predicates and a gated
//! fuzzy-logic decision layer.

pub mod corpus;
pub mod evaluation;
pub mod fuzzy;
pub mod llm;
pub mod ltn;
pub mod par;
pub mod predicates;
pub mod prompts;
pub mod retrieval;
pub mod training;
