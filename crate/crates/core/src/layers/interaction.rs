use rand::Rng;

use super::dense::{Activation, Mlp};
use super::graph::GraphContext;
use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::Scalar;

/// Interaction-network block with caller-supplied relation and object
/// functions: `e'_k = φ_R(h_i, h_j, e_k)`, `h'_i = φ_O(h_i, Σ_{k→i} e'_k)`.
pub fn interaction_block_with<T, R, O>(
    tape: &mut Tape<T>,
    ctx: &GraphContext,
    h: Var,
    edges: Option<Var>,
    relation: R,
    object: O,
) -> Result<(Var, Var)>
where
    T: Scalar,
    R: FnOnce(&mut Tape<T>, Var, Var, Var) -> Result<Var>,
    O: FnOnce(&mut Tape<T>, Var, Var) -> Result<Var>,
{
    let e = edges.ok_or_else(|| Error::Contract("interaction block needs edge features".into()))?;
    let hi = tape.gather_rows(h, &ctx.receivers)?;
    let hj = tape.gather_rows(h, &ctx.senders)?;
    let e_new = relation(tape, hi, hj, e)?;
    let agg = tape.segment_sum(e_new, &ctx.receivers, ctx.num_nodes())?;
    let h_new = object(tape, h, agg)?;
    Ok((e_new, h_new))
}

/// MLP relation/object functions over concatenated inputs.
#[derive(Clone, Debug)]
pub struct InteractionBlock {
    pub relation: Mlp,
    pub object: Mlp,
}

impl InteractionBlock {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        node_width: usize,
        edge_width: usize,
        out_width: usize,
        activation: Activation,
    ) -> Self {
        Self {
            relation: Mlp::new(
                store,
                rng,
                &format!("{name}.relation"),
                &[2 * node_width + edge_width, out_width, out_width],
                activation,
                activation,
            ),
            object: Mlp::new(
                store,
                rng,
                &format!("{name}.object"),
                &[node_width + out_width, out_width, out_width],
                activation,
                activation,
            ),
        }
    }
}

pub fn interaction_block<T: Scalar>(
    tape: &mut Tape<T>,
    ctx: &GraphContext,
    h: Var,
    edges: Option<Var>,
    block: &InteractionBlock,
) -> Result<(Var, Var)> {
    interaction_block_with(
        tape,
        ctx,
        h,
        edges,
        |tape, hi, hj, e| {
            let x = tape.concat_cols(&[hi, hj, e])?;
            block.relation.apply(tape, x)
        },
        |tape, h, agg| {
            let x = tape.concat_cols(&[h, agg])?;
            block.object.apply(tape, x)
        },
    )
}
