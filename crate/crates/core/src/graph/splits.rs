use rand::seq::SliceRandom;

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Train/validation/test fractions used throughout the experiments.
pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.2, 0.2, 0.6);

/// Disjoint node masks plus the set of injected pseudo vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
    pub pseudo: Vec<bool>,
}

impl SplitMasks {
    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn count(mask: &[bool]) -> usize {
        mask.iter().filter(|&&b| b).count()
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (
            Self::count(&self.train),
            Self::count(&self.val),
            Self::count(&self.test),
        )
    }

    /// Masks restricted to the first `n` nodes.
    pub fn truncate(&self, n: usize) -> Self {
        Self {
            train: self.train[..n].to_vec(),
            val: self.val[..n].to_vec(),
            test: self.test[..n].to_vec(),
            pseudo: self.pseudo[..n].to_vec(),
        }
    }

    /// Checks disjointness and the pseudo/test exclusion.
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let n = num_nodes;
        if [&self.train, &self.val, &self.test, &self.pseudo]
            .iter()
            .any(|m| m.len() != n)
        {
            return Err(Error::InvalidArgument(format!(
                "split masks do not have length {n}"
            )));
        }
        for i in 0..n {
            let k = self.train[i] as u8 + self.val[i] as u8 + self.test[i] as u8;
            if k > 1 {
                return Err(Error::InvalidArgument(format!(
                    "node {i} is in more than one split"
                )));
            }
            if self.test[i] && self.pseudo[i] {
                return Err(Error::InvalidArgument(format!(
                    "pseudo node {i} is in the test split"
                )));
            }
        }
        Ok(())
    }
}

/// Random 3-way split of `num_nodes` nodes: a seeded permutation whose first
/// ⌊r_train·N⌋ entries are train, next ⌊r_val·N⌋ are validation, rest test.
pub(crate) fn split_nodes(
    num_nodes: usize,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<SplitMasks> {
    let (rt, rv, rs) = ratios;
    if !(rt > 0.0 && rv > 0.0 && rs > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be positive, got {ratios:?}"
        )));
    }
    if (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must sum to 1, got {}",
            rt + rv + rs
        )));
    }
    let n = num_nodes;
    // The 1e-9 guards against products like 0.6·10 landing just below an integer.
    let n_train = (rt * n as f64 + 1e-9).floor() as usize;
    let n_val = ((rv * n as f64 + 1e-9).floor() as usize).min(n - n_train);

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, Purpose::Split, 0));

    let mut masks = SplitMasks {
        train: vec![false; n],
        val: vec![false; n],
        test: vec![false; n],
        pseudo: vec![false; n],
    };
    for (rank, &node) in perm.iter().enumerate() {
        if rank < n_train {
            masks.train[node] = true;
        } else if rank < n_train + n_val {
            masks.val[node] = true;
        } else {
            masks.test[node] = true;
        }
    }
    Ok(masks)
}

/// Uniform (unstratified) random split of the nodes of `g`.
pub fn make_splits(g: &Graph, ratios: (f64, f64, f64), seed: u64) -> Result<SplitMasks> {
    split_nodes(g.num_nodes(), ratios, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_nodes() {
        let m = split_nodes(10, DEFAULT_RATIOS, 7).unwrap();
        assert_eq!(m.sizes(), (2, 2, 6));
        m.validate(10).unwrap();
        assert!(m.pseudo.iter().all(|&p| !p));
    }

    #[test]
    fn cora_sized() {
        let m = split_nodes(2708, DEFAULT_RATIOS, 0).unwrap();
        assert_eq!(m.sizes(), (541, 541, 1626));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            split_nodes(100, DEFAULT_RATIOS, 3).unwrap(),
            split_nodes(100, DEFAULT_RATIOS, 3).unwrap()
        );
        assert_ne!(
            split_nodes(100, DEFAULT_RATIOS, 3).unwrap(),
            split_nodes(100, DEFAULT_RATIOS, 4).unwrap()
        );
    }

    #[test]
    fn ratios_must_sum_to_one() {
        assert!(split_nodes(10, (0.2, 0.2, 0.5), 0).is_err());
        assert!(split_nodes(10, (0.0, 0.4, 0.6), 0).is_err());
    }
}
