//! Ragged batches: one flat row buffer plus row-partition offsets.
//!
//! Every batch of variable-size graphs in the crate is built from two
//! ragged primitives: [`Ragged`] for real-valued rows (node or edge
//! features) and [`RaggedIndex`] for `(receiver, sender)` index pairs.
//! Edge pairs always store the receiving node in column 0 and the sending
//! node in column 1, so messages flow from `pair[1]` to `pair[0]`.

mod adjacency;
mod batch;
pub mod kernels;
mod padded;

use std::ops::Range;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

pub use adjacency::{adjacency_from_edges, AdjacencyCsr};
pub use batch::{DisjointBatch, GraphBatch};
pub use kernels::{gather_rows, segment_reduce, Reducer};
pub use padded::PaddedBatch;

use crate::error::{ensure, Result};
use crate::Scalar;

/// `(receiver, sender)` node indices of one directed edge.
pub type EdgePair = [usize; 2];

/// Validated row-partition offsets `[0, ..., total_rows]` of length `B + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowSplits(Vec<usize>);

impl RowSplits {
    pub fn new(splits: Vec<usize>) -> Result<Self> {
        ensure!(!splits.is_empty(), Validation, "row_splits must have at least one entry");
        ensure!(splits[0] == 0, Validation, "row_splits[0] = {} (expected 0)", splits[0]);
        if let Some(w) = splits.windows(2).position(|w| w[1] < w[0]) {
            return Err(crate::Error::Validation(format!(
                "row_splits decreases at position {}: {} > {}",
                w + 1,
                splits[w],
                splits[w + 1]
            )));
        }
        Ok(Self(splits))
    }

    pub fn from_lengths<I: IntoIterator<Item = usize>>(lengths: I) -> Self {
        let mut splits = vec![0];
        let mut acc = 0;
        for len in lengths {
            acc += len;
            splits.push(acc);
        }
        Self(splits)
    }

    /// Number of batch entries `B`.
    pub fn num_rows(&self) -> usize {
        self.0.len() - 1
    }

    pub fn total(&self) -> usize {
        *self.0.last().unwrap()
    }

    pub fn range(&self, b: usize) -> Range<usize> {
        self.0[b]..self.0[b + 1]
    }

    pub fn len_of(&self, b: usize) -> usize {
        self.0[b + 1] - self.0[b]
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.windows(2).map(|w| w[1] - w[0])
    }

    pub fn max_len(&self) -> usize {
        self.lengths().max().unwrap_or(0)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Batch entry owning each flat row.
    pub fn segment_ids(&self) -> Vec<usize> {
        let mut ids = Vec::with_capacity(self.total());
        for (b, len) in self.lengths().enumerate() {
            ids.extend(std::iter::repeat_n(b, len));
        }
        ids
    }
}

/// Ragged real matrix of shape `(B, None, F)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ragged<T> {
    values: Array2<T>,
    splits: RowSplits,
}

impl<T: Scalar> Ragged<T> {
    pub fn new(values: Array2<T>, splits: RowSplits) -> Result<Self> {
        ensure!(
            splits.total() == values.nrows(),
            Validation,
            "row_splits end at {} but there are {} flat rows",
            splits.total(),
            values.nrows()
        );
        Ok(Self { values, splits })
    }

    /// Stacks per-entry matrices; zero-row entries may have any width.
    pub fn from_rows(rows: &[Array2<T>]) -> Result<Self> {
        let width = rows
            .iter()
            .find(|m| m.nrows() > 0)
            .or(rows.first())
            .map_or(0, |m| m.ncols());
        for (b, m) in rows.iter().enumerate() {
            ensure!(
                m.nrows() == 0 || m.ncols() == width,
                Dimension,
                "batch entry {b} has width {} but expected {width}",
                m.ncols()
            );
        }
        let views: Vec<ArrayView2<T>> = rows
            .iter()
            .filter(|m| m.nrows() > 0)
            .map(|m| m.view())
            .collect();
        let values = if views.is_empty() {
            Array2::zeros((0, width))
        } else {
            concatenate(Axis(0), &views).expect("widths checked above")
        };
        Ok(Self {
            values,
            splits: RowSplits::from_lengths(rows.iter().map(|m| m.nrows())),
        })
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn row_splits(&self) -> &RowSplits {
        &self.splits
    }

    pub fn num_rows(&self) -> usize {
        self.splits.num_rows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, b: usize) -> ArrayView2<'_, T> {
        let r = self.splits.range(b);
        self.values.slice(s![r, ..])
    }

    pub fn into_parts(self) -> (Array2<T>, RowSplits) {
        (self.values, self.splits)
    }
}

/// Convenience wrapper matching the free-function form of the batch API.
pub fn ragged_from_rows<T: Scalar>(rows: &[Array2<T>]) -> Result<Ragged<T>> {
    Ragged::from_rows(rows)
}

pub fn to_padded<T: Scalar>(r: &Ragged<T>, pad_value: T) -> PaddedBatch<T> {
    PaddedBatch::to_padded(r, pad_value)
}

pub fn from_padded<T: Scalar>(p: &PaddedBatch<T>) -> Ragged<T> {
    p.to_ragged()
}

/// Ragged `(B, None, 2)` table of per-entry-local edge pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RaggedIndex {
    pairs: Vec<EdgePair>,
    splits: RowSplits,
}

impl RaggedIndex {
    pub fn new(pairs: Vec<EdgePair>, splits: RowSplits) -> Result<Self> {
        ensure!(
            splits.total() == pairs.len(),
            Validation,
            "row_splits end at {} but there are {} index pairs",
            splits.total(),
            pairs.len()
        );
        Ok(Self { pairs, splits })
    }

    pub fn from_rows(rows: &[Vec<EdgePair>]) -> Self {
        Self {
            pairs: rows.iter().flatten().copied().collect(),
            splits: RowSplits::from_lengths(rows.iter().map(Vec::len)),
        }
    }

    pub fn pairs(&self) -> &[EdgePair] {
        &self.pairs
    }

    pub fn row(&self, b: usize) -> &[EdgePair] {
        &self.pairs[self.splits.range(b)]
    }

    pub fn row_splits(&self) -> &RowSplits {
        &self.splits
    }

    pub fn num_rows(&self) -> usize {
        self.splits.num_rows()
    }
}
