use ndarray::{s, Array2, Array3};

use super::{Ragged, RowSplits};
use crate::error::{Error, Result};
use crate::Scalar;

/// Zero-padded `(B, N_max, F)` view of a ragged batch with its validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedBatch<T> {
    dense: Array3<T>,
    mask: Array2<bool>,
}

impl<T: Scalar> PaddedBatch<T> {
    /// Accepts only masks whose true entries form a prefix of each row.
    pub fn new(dense: Array3<T>, mask: Array2<bool>) -> Result<Self> {
        let (b, n, _) = dense.dim();
        if mask.dim() != (b, n) {
            return Err(Error::Dimension(format!(
                "mask shape {:?} does not match padded shape ({b}, {n})",
                mask.dim()
            )));
        }
        for (g, row) in mask.rows().into_iter().enumerate() {
            let len = row.iter().take_while(|&&m| m).count();
            if row.iter().skip(len).any(|&m| m) {
                return Err(Error::Validation(format!("mask row {g} is not a prefix")));
            }
        }
        Ok(Self { dense, mask })
    }

    pub fn to_padded(r: &Ragged<T>, pad_value: T) -> Self {
        let splits = r.row_splits();
        let (b, n_max, f) = (splits.num_rows(), splits.max_len(), r.width());
        let mut dense = Array3::from_elem((b, n_max, f), pad_value);
        let mut mask = Array2::from_elem((b, n_max), false);
        for g in 0..b {
            let len = splits.len_of(g);
            dense.slice_mut(s![g, ..len, ..]).assign(&r.row(g));
            mask.slice_mut(s![g, ..len]).fill(true);
        }
        Self { dense, mask }
    }

    pub fn to_ragged(&self) -> Ragged<T> {
        let lengths: Vec<usize> = self
            .mask
            .rows()
            .into_iter()
            .map(|row| row.iter().filter(|&&m| m).count())
            .collect();
        let splits = RowSplits::from_lengths(lengths.iter().copied());
        let f = self.dense.dim().2;
        let mut values = Array2::zeros((splits.total(), f));
        for (g, &len) in lengths.iter().enumerate() {
            values
                .slice_mut(s![splits.range(g), ..])
                .assign(&self.dense.slice(s![g, ..len, ..]));
        }
        Ragged::new(values, splits).expect("lengths derived from mask")
    }

    pub fn dense(&self) -> &Array3<T> {
        &self.dense
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Total cells of the padded node tensor, `B * N_max * F`.
    pub fn cells(&self) -> usize {
        self.dense.len()
    }
}
