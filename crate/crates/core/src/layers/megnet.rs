use rand::Rng;

use super::dense::{Activation, Mlp};
use super::graph::GraphContext;
use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::Scalar;

/// Edge, node and graph-state update functions of one MegNet block.
pub struct MegNetFns<E, V, U> {
    pub edge: E,
    pub node: V,
    pub state: U,
}

/// MegNet block with caller-supplied update functions:
///
/// * `e'_k = φ_e(h_i, h_j, e_k, u_g)`
/// * `h'_i = φ_v(mean_{k→i} e'_k, h_i, u_g)`
/// * `u'_g = φ_u(mean_g e', mean_g h', u_g)`
///
/// Means over empty sets are zero. Returns `(e', h', u')`.
pub fn megnet_block_with<T, E, V, U>(
    tape: &mut Tape<T>,
    ctx: &GraphContext,
    h: Var,
    edges: Option<Var>,
    state: Option<Var>,
    fns: MegNetFns<E, V, U>,
) -> Result<(Var, Var, Var)>
where
    T: Scalar,
    E: FnOnce(&mut Tape<T>, [Var; 4]) -> Result<Var>,
    V: FnOnce(&mut Tape<T>, [Var; 3]) -> Result<Var>,
    U: FnOnce(&mut Tape<T>, [Var; 3]) -> Result<Var>,
{
    let e = edges.ok_or_else(|| Error::Contract("MegNet block needs edge features".into()))?;
    let u = state.ok_or_else(|| Error::Contract("MegNet block needs a graph state".into()))?;
    let n = ctx.num_nodes();
    let b = ctx.num_graphs;

    let hi = tape.gather_rows(h, &ctx.receivers)?;
    let hj = tape.gather_rows(h, &ctx.senders)?;
    let ue = tape.gather_rows(u, &ctx.edge_graph)?;
    let e_new = (fns.edge)(tape, [hi, hj, e, ue])?;

    let incoming = tape.segment_mean(e_new, &ctx.receivers, n)?;
    let un = tape.gather_rows(u, &ctx.node_graph)?;
    let h_new = (fns.node)(tape, [incoming, h, un])?;

    let e_mean = tape.segment_mean(e_new, &ctx.edge_graph, b)?;
    let h_mean = tape.segment_mean(h_new, &ctx.node_graph, b)?;
    let u_new = (fns.state)(tape, [e_mean, h_mean, u])?;
    Ok((e_new, h_new, u_new))
}

#[derive(Clone, Debug)]
pub struct MegNetBlock {
    pub edge: Mlp,
    pub node: Mlp,
    pub state: Mlp,
}

impl MegNetBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        node_width: usize,
        edge_width: usize,
        state_width: usize,
        out: usize,
        activation: Activation,
    ) -> Self {
        let mut mlp = |part: &str, input: usize| {
            Mlp::new(store, rng, &format!("{name}.{part}"), &[input, out, out], activation, activation)
        };
        Self {
            edge: mlp("edge", 2 * node_width + edge_width + state_width),
            node: mlp("node", out + node_width + state_width),
            state: mlp("state", 2 * out + state_width),
        }
    }
}

pub fn megnet_block<T: Scalar>(
    tape: &mut Tape<T>,
    ctx: &GraphContext,
    h: Var,
    edges: Option<Var>,
    state: Option<Var>,
    block: &MegNetBlock,
) -> Result<(Var, Var, Var)> {
    megnet_block_with(
        tape,
        ctx,
        h,
        edges,
        state,
        MegNetFns {
            edge: |t: &mut Tape<T>, parts: [Var; 4]| {
                let x = t.concat_cols(&parts)?;
                block.edge.apply(t, x)
            },
            node: |t: &mut Tape<T>, parts: [Var; 3]| {
                let x = t.concat_cols(&parts)?;
                block.node.apply(t, x)
            },
            state: |t: &mut Tape<T>, parts: [Var; 3]| {
                let x = t.concat_cols(&parts)?;
                block.state.apply(t, x)
            },
        },
    )
}
