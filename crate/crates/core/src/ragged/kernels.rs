//! Segment and gather kernels shared by every layer.
//!
//! Empty segments reduce to the zero vector for all reducers.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    Sum,
    Mean,
    Max,
}

pub(crate) fn check_ids(ids: &[usize], num_segments: usize) -> Result<()> {
    if let Some((r, &id)) = ids.iter().enumerate().find(|(_, &id)| id >= num_segments) {
        return Err(crate::Error::Validation(format!(
            "segment id {id} at row {r} is out of range for {num_segments} segments"
        )));
    }
    Ok(())
}

pub fn segment_reduce<T: Scalar>(
    values: ArrayView2<'_, T>,
    segment_ids: &[usize],
    num_segments: usize,
    reducer: Reducer,
) -> Result<Array2<T>> {
    match reducer {
        Reducer::Sum => segment_sum(values, segment_ids, num_segments),
        Reducer::Mean => segment_mean(values, segment_ids, num_segments).map(|(m, _)| m),
        Reducer::Max => segment_max(values, segment_ids, num_segments).map(|(m, _)| m),
    }
}

fn check_rows<T>(values: &ArrayView2<'_, T>, segment_ids: &[usize]) -> Result<()> {
    ensure!(
        values.nrows() == segment_ids.len(),
        Dimension,
        "{} value rows but {} segment ids",
        values.nrows(),
        segment_ids.len()
    );
    Ok(())
}

pub fn segment_sum<T: Scalar>(
    values: ArrayView2<'_, T>,
    segment_ids: &[usize],
    num_segments: usize,
) -> Result<Array2<T>> {
    check_rows(&values, segment_ids)?;
    check_ids(segment_ids, num_segments)?;
    let mut out = Array2::zeros((num_segments, values.ncols()));
    for (row, &seg) in values.rows().into_iter().zip(segment_ids) {
        let mut dst = out.row_mut(seg);
        dst += &row;
    }
    Ok(out)
}

/// Mean per segment together with the per-segment row counts.
pub fn segment_mean<T: Scalar>(
    values: ArrayView2<'_, T>,
    segment_ids: &[usize],
    num_segments: usize,
) -> Result<(Array2<T>, Vec<usize>)> {
    let mut out = segment_sum(values, segment_ids, num_segments)?;
    let counts = segment_counts(segment_ids, num_segments);
    for (mut row, &c) in out.rows_mut().into_iter().zip(&counts) {
        if c > 0 {
            let inv = T::one() / T::of(c as f64);
            row.mapv_inplace(|x| x * inv);
        }
    }
    Ok((out, counts))
}

/// Column-wise max per segment and the source row of each maximum.
///
/// Ties resolve to the lowest row index; empty segments yield zero with no
/// source row.
pub fn segment_max<T: Scalar>(
    values: ArrayView2<'_, T>,
    segment_ids: &[usize],
    num_segments: usize,
) -> Result<(Array2<T>, Array2<Option<usize>>)> {
    check_rows(&values, segment_ids)?;
    check_ids(segment_ids, num_segments)?;
    let width = values.ncols();
    let mut out = Array2::zeros((num_segments, width));
    let mut arg: Array2<Option<usize>> = Array2::from_elem((num_segments, width), None);
    for (r, (row, &seg)) in values.rows().into_iter().zip(segment_ids).enumerate() {
        for (c, &x) in row.iter().enumerate() {
            match arg[[seg, c]] {
                Some(_) if x <= out[[seg, c]] => {}
                _ => {
                    out[[seg, c]] = x;
                    arg[[seg, c]] = Some(r);
                }
            }
        }
    }
    Ok((out, arg))
}

pub fn segment_counts(segment_ids: &[usize], num_segments: usize) -> Vec<usize> {
    let mut counts = vec![0; num_segments];
    for &s in segment_ids {
        counts[s] += 1;
    }
    counts
}

pub fn gather_rows<T: Scalar>(matrix: ArrayView2<'_, T>, indices: &[usize]) -> Result<Array2<T>> {
    check_ids(indices, matrix.nrows()).map_err(|_| {
        let bad = indices.iter().find(|&&i| i >= matrix.nrows()).unwrap();
        crate::Error::Validation(format!(
            "gather index {bad} out of range for {} rows",
            matrix.nrows()
        ))
    })?;
    let mut out = Array2::zeros((indices.len(), matrix.ncols()));
    for (mut dst, &i) in out.rows_mut().into_iter().zip(indices) {
        dst.assign(&matrix.row(i));
    }
    Ok(out)
}
