use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Items that belong to one Target/Observer pair. Splits never separate
/// items of the same pair.
pub trait PairKeyed {
    fn pair_key(&self) -> &str;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    Fractions([f64; 3]),
    #[error("cannot split an empty corpus")]
    Empty,
}

/// Pair-level train/dev/test split. Pair ids are sorted, shuffled with the
/// seed, and cut at `round(cumulative fraction * pair count)`. Items keep
/// their input order inside each split.
pub fn make_splits<T: PairKeyed + Clone>(items: &[T], fractions: [f64; 3], seed: u64) -> Result<Splits<T>, SplitError> {
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || fractions.iter().any(|f| *f < 0.0 || !f.is_finite()) {
        return Err(SplitError::Fractions(fractions));
    }
    if items.is_empty() {
        return Err(SplitError::Empty);
    }

    let mut keys: Vec<&str> = items.iter().map(|i| i.pair_key()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    keys.shuffle(&mut rng);

    let n = keys.len() as f64;
    let train_end = (fractions[0] * n).round() as usize;
    let dev_end = (((fractions[0] + fractions[1]) * n).round() as usize).max(train_end);
    let assignment: HashMap<&str, usize> = keys
        .iter()
        .enumerate()
        .map(|(i, k)| {
            (
                *k,
                if i < train_end {
                    0
                } else if i < dev_end {
                    1
                } else {
                    2
                },
            )
        })
        .collect();

    let mut splits = Splits { train: Vec::new(), dev: Vec::new(), test: Vec::new() };
    for item in items {
        match assignment[item.pair_key()] {
            0 => splits.train.push(item.clone()),
            1 => splits.dev.push(item.clone()),
            _ => splits.test.push(item.clone()),
        }
    }
    Ok(splits)
}
