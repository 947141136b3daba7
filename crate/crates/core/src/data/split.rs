use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure, Result};

/// Seeded shuffle into `(train, val, test)` with sizes
/// `round(f_train n)`, `round(f_val n)` and the remainder.
pub fn split_dataset<R: Clone>(records: &[R], fractions: [f64; 3], seed: u64) -> Result<(Vec<R>, Vec<R>, Vec<R>)> {
    ensure!(
        fractions.iter().all(|f| (0.0..=1.0).contains(f)),
        Config,
        "split fractions must lie in [0, 1], got {fractions:?}"
    );
    let total: f64 = fractions.iter().sum();
    ensure!((total - 1.0).abs() <= 1e-9, Config, "split fractions sum to {total}, not 1");
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_val]),
        pick(&order[n_train + n_val..]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_partition() {
        let items: Vec<u32> = (0..10).collect();
        let (a, b, c) = split_dataset(&items, [0.8, 0.1, 0.1], 0).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (8, 1, 1));
        let mut all: Vec<u32> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort();
        assert_eq!(all, items);
        assert_eq!(split_dataset(&items, [0.8, 0.1, 0.1], 0).unwrap(), (a, b, c));
    }

    #[test]
    fn bad_fractions() {
        assert!(split_dataset(&[1, 2], [0.5, 0.6, 0.1], 0).is_err());
        assert!(split_dataset(&[1, 2], [1.5, -0.5, 0.0], 0).is_err());
    }
}
