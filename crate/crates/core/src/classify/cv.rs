use rand::seq::SliceRandom;

use crate::rng;
use crate::{Error, Result};

pub const DEFAULT_FOLDS: usize = 5;

/// Assign every sample to one of `folds` folds, stratified by class.
///
/// Within each class (ascending class code) the members are shuffled with the
/// seeded RNG and dealt round-robin; the dealing position carries over between
/// classes so fold sizes stay balanced as well.
pub fn stratified_kfold(y: &[u32], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::arg(format!("need at least 2 folds, got {folds}")));
    }
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut r = rng::seeded(seed);
    let mut assign = vec![0; y.len()];
    let mut next = 0;
    for c in classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        if members.len() < folds {
            return Err(Error::arg(format!(
                "class {c} has {} members, fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut r);
        for i in members {
            assign[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok(assign)
}

/// Train and test index lists for `fold`, both ascending.
pub fn split_fold(assign: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    (0..assign.len()).partition(|&i| assign[i] != fold)
}
