//! Label-stratified train/val/test splits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Disjoint index sets covering all items, stratified per class.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl Split {
    /// Placeholder with no assignments; runs re-split per seed before
    /// training, and fitting rejects empty parts.
    pub fn empty(seed: u64) -> Self {
        Split {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Within each class: a seeded shuffle, then ratio slicing with train and
/// val floored and the remainder going to test. Deterministic per seed.
/// Ratios must sum to one and every class needs at least 3 members.
pub fn stratified_split(labels: &[usize], ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (r_train, r_val, r_test) = ratios;
    if r_train < 0.0 || r_val < 0.0 || r_test < 0.0 {
        return Err(Error::InvalidParameter(format!("negative ratio in {ratios:?}")));
    }
    if ((r_train + r_val + r_test) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "ratios {ratios:?} do not sum to 1"
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidSplit(String::from("no labels to split")));
    }
    let num_classes = labels.iter().copied().max().unwrap() + 1;
    let mut per_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); num_classes];
    for (i, &c) in labels.iter().enumerate() {
        per_class[c].push(i);
    }
    let mut rng = SplitMix64::derive(seed, 0x5911);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for (c, members) in per_class.iter_mut().enumerate() {
        if members.len() < 3 {
            return Err(Error::InvalidSplit(format!(
                "class {c} has only {} members (need >= 3)",
                members.len()
            )));
        }
        rng.shuffle(members);
        let m = members.len();
        let n_train = (r_train * m as f64) as usize;
        let n_val = (r_val * m as f64) as usize;
        split.train.extend_from_slice(&members[..n_train]);
        split.val.extend_from_slice(&members[n_train..n_train + n_val]);
        split.test.extend_from_slice(&members[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
