use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// Stratified, seeded split of row indices into (train, test).
///
/// Each class contributes `round(test_fraction · class_size)` rows to the
/// test part. A class with at least two members must land in both parts,
/// otherwise the fraction is rejected. Returned indices are ascending.
pub fn split_indices(labels: &[u8], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_test = (test_fraction * n as f64).round() as usize;
        if n >= 2 && (n_test == 0 || n_test == n) {
            return Err(Error::invalid(format!(
                "test fraction {test_fraction} leaves class {class} ({n} rows) out of one part"
            )));
        }
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} produces an empty part"
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.labels(), test_fraction, seed)?;
    Ok((data.select_rows(&train), data.select_rows(&test)))
}
