use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// Repeated stratified k-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub repetitions: usize,
    pub k: usize,
    pub seed: u64,
    /// Per repetition: document id to test-fold index.
    pub assignments: Vec<BTreeMap<String, usize>>,
}

impl FoldPlan {
    pub fn test_ids(&self, rep: usize, fold: usize) -> Vec<String> {
        self.assignments[rep]
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn train_ids(&self, rep: usize, fold: usize) -> Vec<String> {
        self.assignments[rep]
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Seed for the fold's own randomness.
    pub fn fold_seed(&self, rep: usize, fold: usize) -> u64 {
        fold_seed(self.seed, rep, fold)
    }

    /// `(rep, fold)` pairs in evaluation order.
    pub fn folds(&self) -> Vec<(usize, usize)> {
        (0..self.repetitions)
            .flat_map(|r| (0..self.k).map(move |f| (r, f)))
            .collect()
    }
}

pub fn fold_seed(seed: u64, rep: usize, fold: usize) -> u64 {
    seed.wrapping_add(1000 * rep as u64).wrapping_add(fold as u64)
}

/// Per repetition, shuffles each class on its own and deals it round-robin
/// into `k` folds. Negatives continue dealing where positives stopped, which
/// keeps fold sizes within one of each other.
pub fn make_fold_plan(
    labels: &[(String, u8)],
    k: usize,
    repetitions: usize,
    seed: u64,
) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::Folds(format!("k must be at least 2, got {k}")));
    }
    if repetitions == 0 {
        return Err(EvalError::Folds("at least one repetition is required".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (id, y) in labels {
        if *y > 1 {
            return Err(EvalError::Folds(format!("label {y} of `{id}` is not 0 or 1")));
        }
        if !seen.insert(id.as_str()) {
            return Err(EvalError::Folds(format!("duplicate document id `{id}`")));
        }
    }
    let pos: Vec<&str> = labels.iter().filter(|(_, y)| *y == 1).map(|(id, _)| id.as_str()).collect();
    let neg: Vec<&str> = labels.iter().filter(|(_, y)| *y == 0).map(|(id, _)| id.as_str()).collect();
    for (name, members) in [("positive", pos.len()), ("negative", neg.len())] {
        if members < k {
            return Err(EvalError::Folds(format!(
                "the {name} class has {members} members, fewer than k = {k}"
            )));
        }
    }

    let mut assignments = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 * rep as u64));
        let mut p = pos.clone();
        let mut n = neg.clone();
        p.shuffle(&mut rng);
        n.shuffle(&mut rng);
        let mut map = BTreeMap::new();
        for (i, id) in p.iter().enumerate() {
            map.insert(id.to_string(), i % k);
        }
        let offset = p.len() % k;
        for (i, id) in n.iter().enumerate() {
            map.insert(id.to_string(), (i + offset) % k);
        }
        assignments.push(map);
    }
    Ok(FoldPlan {
        repetitions,
        k,
        seed,
        assignments,
    })
}
