//! Stratified k-fold assignment.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::EvalError;
use crate::rng::Rng;

/// Test-fold index sets of a stratified k-fold split.
///
/// Each class is shuffled and dealt round-robin over the folds, continuing
/// where the previous class stopped, so every fold receives every class and
/// fold sizes differ by at most one.
pub fn stratified_folds(labels: &[usize], k: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 || labels.len() < k {
        return Err(EvalError::TooFewSamples {
            samples: labels.len(),
            folds: k,
        });
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }
    for (class, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < k {
            return Err(EvalError::ClassTooSmall {
                class,
                count: m.len(),
                folds: k,
            });
        }
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for m in members.iter_mut() {
        m.shuffle(rng);
        for &i in m.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Indices not in `fold`, ascending.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    for &i in fold {
        held[i] = true;
    }
    (0..n).filter(|&i| !held[i]).collect()
}
