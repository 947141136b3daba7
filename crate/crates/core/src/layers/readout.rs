use ndarray::Array2;
use rand::Rng;

use super::dense::Gru;
use super::graph::GraphContext;
use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{ensure, Result};
use crate::ragged::Reducer;
use crate::Scalar;

/// Per-graph reduction of node rows, `(N_total, F) -> (B, F)`.
pub fn readout_reduce<T: Scalar>(tape: &mut Tape<T>, ctx: &GraphContext, h: Var, reducer: Reducer) -> Result<Var> {
    tape.segment_reduce(h, &ctx.node_graph, ctx.num_graphs, reducer)
}

/// Attention readout iterating a recurrent query over softmax-weighted
/// node sums. Output is `concat(q_T, r_T)` of width `2F`.
#[derive(Clone, Debug)]
pub struct Set2Set {
    cell: Gru,
    pub steps: usize,
}

impl Set2Set {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, rng: &mut impl Rng, name: &str, width: usize, steps: usize) -> Self {
        Self {
            cell: Gru::new(store, rng, &format!("{name}.cell"), 2 * width, width),
            steps,
        }
    }

    pub fn width(&self) -> usize {
        self.cell.hidden_width
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, ctx: &GraphContext, h: Var) -> Result<Var> {
        ensure!(self.steps >= 1, Contract, "set2set needs at least one step");
        let f = self.width();
        ensure!(tape.shape(h).1 == f, Dimension, "set2set expects width {f}, got {}", tape.shape(h).1);
        let b = ctx.num_graphs;
        let mut q_star = tape.constant(Array2::zeros((b, 2 * f)));
        let mut hidden = tape.constant(Array2::zeros((b, f)));
        for _ in 0..self.steps {
            hidden = self.cell.apply(tape, q_star, hidden)?;
            let q_nodes = tape.gather_rows(hidden, &ctx.node_graph)?;
            let prod = tape.mul(h, q_nodes)?;
            let scores = tape.row_sum(prod);
            let alpha = tape.segment_softmax(scores, &ctx.node_graph, b)?;
            let weighted = tape.mul_col(h, alpha)?;
            let r = tape.segment_sum(weighted, &ctx.node_graph, b)?;
            q_star = tape.concat_cols(&[hidden, r])?;
        }
        Ok(q_star)
    }
}
