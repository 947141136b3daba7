use std::sync::Arc;

use rand::Rng;

use super::graph::GraphContext;
use crate::autodiff::{Index, ParamId, ParamStore, Tape, Var};
use crate::error::{ensure, Error, Result};
use crate::Scalar;

/// Output of [`topk_pool`].
#[derive(Clone, Debug)]
pub struct PoolResult {
    /// Gated features of the kept nodes, grouped by graph and ordered by
    /// descending score within each graph.
    pub h: Var,
    /// Original row index of every pooled row.
    pub kept: Index,
    /// Index structure of the induced subgraph, with remapped edges.
    pub ctx: GraphContext,
    pub original_nodes: usize,
    /// Smallest score gap between the last kept and first dropped node of
    /// any graph; infinite when no node was dropped. Zero means a tie
    /// decided the selection.
    pub margin: f64,
}

/// Learnable projection vector `p` for top-k pooling.
#[derive(Clone, Debug)]
pub struct TopKPool {
    pub projection: ParamId,
    pub ratio: f64,
}

impl TopKPool {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, rng: &mut impl Rng, name: &str, width: usize, ratio: f64) -> Self {
        Self {
            projection: store.glorot(format!("{name}.projection"), width, 1, rng),
            ratio,
        }
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, ctx: &GraphContext, h: Var) -> Result<PoolResult> {
        let p = tape.param(self.projection);
        topk_pool(tape, ctx, h, p, self.ratio)
    }
}

/// Number of nodes kept out of `n` at ratio `k`: `⌈k n⌉`, with a small
/// tolerance so that e.g. `(2/3) * 3` keeps exactly 2.
pub fn keep_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Top-k (gPool) selection.
///
/// Scores `y = h p / ‖p‖`; each graph keeps its `⌈k N_b⌉` highest-scoring
/// nodes (ties go to the lower index) with features gated by `tanh(y)`.
/// Edges with a dropped endpoint are removed.
pub fn topk_pool<T: Scalar>(tape: &mut Tape<T>, ctx: &GraphContext, h: Var, p: Var, ratio: f64) -> Result<PoolResult> {
    ensure!(ratio > 0.0 && ratio <= 1.0, Contract, "pool ratio {ratio} outside (0, 1]");
    let width = tape.shape(h).1;
    ensure!(tape.shape(p) == (width, 1), Dimension, "projection shape {:?} for width {width}", tape.shape(p));
    let sq = tape.square(p);
    let norm2 = tape.sum_all(sq);
    if tape.scalar(norm2) <= T::zero() {
        return Err(Error::Contract("projection vector has zero norm".into()));
    }
    let inv_norm = tape.rsqrt(norm2)?;
    let raw = tape.matmul(h, p)?;
    let scores = tape.mul_scalar_var(raw, inv_norm)?;

    let y = tape.value(scores);
    let splits = ctx.node_splits();
    let mut kept = Vec::new();
    let mut kept_graph = Vec::new();
    let mut margin = T::infinity();
    for g in 0..ctx.num_graphs {
        let range = splits.range(g);
        let mut order: Vec<usize> = range.clone().collect();
        // Stable sort keeps ascending index order among equal scores.
        order.sort_by(|&a, &b| y[[b, 0]].partial_cmp(&y[[a, 0]]).unwrap_or(std::cmp::Ordering::Equal));
        let k = keep_count(ratio, range.len());
        if k > 0 && k < order.len() {
            let gap = y[[order[k - 1], 0]] - y[[order[k], 0]];
            margin = margin.min(gap);
        }
        order.truncate(k);
        kept_graph.extend(std::iter::repeat_n(g, order.len()));
        kept.extend(order);
    }

    let mut new_index = vec![usize::MAX; ctx.num_nodes()];
    for (pos, &orig) in kept.iter().enumerate() {
        new_index[orig] = pos;
    }
    let pairs = ctx
        .pairs
        .iter()
        .filter(|e| new_index[e[0]] != usize::MAX && new_index[e[1]] != usize::MAX)
        .map(|e| [new_index[e[0]], new_index[e[1]]])
        .collect();

    let kept: Index = Arc::from(kept);
    let gate = tape.tanh(scores);
    let gate = tape.gather_rows(gate, &kept)?;
    let rows = tape.gather_rows(h, &kept)?;
    let pooled = tape.mul_col(rows, gate)?;
    Ok(PoolResult {
        h: pooled,
        kept,
        ctx: GraphContext::new(ctx.num_graphs, kept_graph, pairs),
        original_nodes: ctx.num_nodes(),
        margin: margin.as_f64(),
    })
}

/// Scatters pooled rows back to their original positions; dropped rows are zero.
pub fn topk_unpool<T: Scalar>(tape: &mut Tape<T>, pooled: Var, kept: &Index, original_nodes: usize) -> Result<Var> {
    ensure!(
        tape.shape(pooled).0 == kept.len(),
        Validation,
        "{} pooled rows but {} kept indices",
        tape.shape(pooled).0,
        kept.len()
    );
    let mut seen = vec![false; original_nodes];
    for &k in kept.iter() {
        ensure!(k < original_nodes, Validation, "kept index {k} >= {original_nodes} original nodes");
        ensure!(!seen[k], Validation, "kept index {k} appears twice");
        seen[k] = true;
    }
    tape.segment_sum(pooled, kept, original_nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn pool(hv: Array2<f64>, pv: Array2<f64>, ratio: f64, node_graph: Vec<usize>) -> (Tape<f64>, PoolResult) {
        let b = node_graph.iter().max().map_or(0, |m| m + 1);
        let ctx = GraphContext::new(b, node_graph, vec![]);
        let mut t = Tape::new();
        let h = t.constant(hv);
        let p = t.constant(pv);
        let r = topk_pool(&mut t, &ctx, h, p, ratio).unwrap();
        (t, r)
    }

    #[test]
    fn keeps_top_two_of_three() {
        let (t, r) = pool(array![[2.0], [1.0], [3.0]], array![[1.0]], 2.0 / 3.0, vec![0, 0, 0]);
        assert_eq!(&*r.kept, &[2, 0]);
        let expected = array![[3.0 * 3f64.tanh()], [2.0 * 2f64.tanh()]];
        assert_eq!(t.value(r.h), &expected);
    }

    #[test]
    fn full_ratio_keeps_everything_gated() {
        let (t, r) = pool(array![[0.5], [-1.0]], array![[2.0]], 1.0, vec![0, 0]);
        assert_eq!(r.kept.len(), 2);
        let mut rows: Vec<f64> = t.value(r.h).iter().copied().collect();
        rows.sort_by(f64::total_cmp);
        let mut expected = vec![0.5 * 0.5f64.tanh(), -(-1f64).tanh()];
        expected.sort_by(f64::total_cmp);
        assert_eq!(rows, expected);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let (_, r) = pool(array![[1.0], [1.0], [1.0], [1.0]], array![[1.0]], 0.5, vec![0, 0, 0, 0]);
        assert_eq!(&*r.kept, &[0, 1]);
        assert_eq!(r.margin, 0.0);
    }

    #[test]
    fn margin_is_smallest_boundary_gap() {
        let (_, r) = pool(array![[2.0], [1.0], [3.0], [5.0], [4.5]], array![[1.0]], 0.5, vec![0, 0, 0, 1, 1]);
        assert_eq!(r.margin, 0.5);
        let (_, r) = pool(array![[2.0], [1.0]], array![[1.0]], 1.0, vec![0, 0]);
        assert_eq!(r.margin, f64::INFINITY);
    }

    #[test]
    fn edges_remapped_to_pooled_rows() {
        let ctx = GraphContext::new(1, vec![0; 3], vec![[0, 1], [2, 0], [1, 2]]);
        let mut t = Tape::new();
        let h = t.constant(array![[2.0], [1.0], [3.0]]);
        let p = t.constant(array![[1.0]]);
        let r = topk_pool(&mut t, &ctx, h, p, 2.0 / 3.0).unwrap();
        // Kept order [2, 0] so node 2 -> 0 and node 0 -> 1.
        assert_eq!(r.ctx.pairs, vec![[0, 1]]);
    }

    #[test]
    fn zero_projection_rejected() {
        let ctx = GraphContext::new(1, vec![0], vec![]);
        let mut t = Tape::new();
        let h = t.constant(array![[1.0]]);
        let p = t.constant(array![[0.0]]);
        assert!(matches!(topk_pool(&mut t, &ctx, h, p, 0.5), Err(Error::Contract(_))));
    }

    #[test]
    fn unpool_restores_positions() {
        let (mut t, r) = pool(array![[2.0], [1.0], [3.0]], array![[1.0]], 2.0 / 3.0, vec![0, 0, 0]);
        let up = topk_unpool(&mut t, r.h, &r.kept, r.original_nodes).unwrap();
        let v = t.value(up);
        assert_eq!(v[[0, 0]], 2.0 * 2f64.tanh());
        assert_eq!(v[[1, 0]], 0.0);
        assert_eq!(v[[2, 0]], 3.0 * 3f64.tanh());
        let bad: Index = vec![0].into();
        assert!(matches!(topk_unpool(&mut t, r.h, &bad, 3), Err(Error::Validation(_))));
    }

    #[test]
    fn keep_count_rounding() {
        assert_eq!(keep_count(2.0 / 3.0, 3), 2);
        assert_eq!(keep_count(0.5, 3), 2);
        assert_eq!(keep_count(0.5, 1), 1);
        assert_eq!(keep_count(1.0, 7), 7);
        assert_eq!(keep_count(0.1, 0), 0);
    }
}
