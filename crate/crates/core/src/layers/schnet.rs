use ndarray::Array2;
use rand::Rng;

use super::dense::{Activation, Dense, Mlp};
use super::graph::GraphContext;
use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{ensure, Error, Result};
use crate::Scalar;

/// Radial basis expansion `out[n, k] = exp(−γ (d_n − μ_k)²)`.
pub fn gaussian_basis<T: Scalar>(distances: &[T], centers: &[T], gamma: T) -> Result<Array2<T>> {
    ensure!(gamma > T::zero(), Contract, "gamma must be positive, got {gamma}");
    Ok(Array2::from_shape_fn((distances.len(), centers.len()), |(n, k)| {
        let d = distances[n] - centers[k];
        (-gamma * d * d).exp()
    }))
}

/// Continuous-filter convolution aggregate `Σ_j in(x_j) ⊙ W(e_ij)` per
/// receiver `i`.
pub fn cfconv_aggregate<T, F, G>(
    tape: &mut Tape<T>,
    ctx: &GraphContext,
    x: Var,
    edges: Var,
    filter: F,
    atomwise_in: G,
) -> Result<Var>
where
    T: Scalar,
    F: FnOnce(&mut Tape<T>, Var) -> Result<Var>,
    G: FnOnce(&mut Tape<T>, Var) -> Result<Var>,
{
    let w = filter(tape, edges)?;
    let xin = atomwise_in(tape, x)?;
    let xj = tape.gather_rows(xin, &ctx.senders)?;
    let msg = tape.mul(xj, w)?;
    tape.segment_sum(msg, &ctx.receivers, ctx.num_nodes())
}

/// Residual interaction `x + out(cfconv_aggregate(x))`.
pub fn schnet_interaction_with<T, F, G, O>(
    tape: &mut Tape<T>,
    ctx: &GraphContext,
    x: Var,
    edges: Var,
    filter: F,
    atomwise_in: G,
    atomwise_out: O,
) -> Result<Var>
where
    T: Scalar,
    F: FnOnce(&mut Tape<T>, Var) -> Result<Var>,
    G: FnOnce(&mut Tape<T>, Var) -> Result<Var>,
    O: FnOnce(&mut Tape<T>, Var) -> Result<Var>,
{
    let agg = cfconv_aggregate(tape, ctx, x, edges, filter, atomwise_in)?;
    let v = atomwise_out(tape, agg)?;
    if tape.shape(v) != tape.shape(x) {
        return Err(Error::Dimension(format!(
            "interaction output {:?} does not match residual {:?}",
            tape.shape(v),
            tape.shape(x)
        )));
    }
    tape.add(x, v)
}

/// Filter network of two shifted-softplus layers, a linear atom-wise input
/// projection and a two-layer atom-wise output network.
#[derive(Clone, Debug)]
pub struct SchNetInteraction {
    pub filter: Mlp,
    pub atomwise_in: Dense,
    pub atomwise_out: Mlp,
}

impl SchNetInteraction {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        width: usize,
        basis_width: usize,
    ) -> Self {
        let ssp = Activation::ShiftedSoftplus;
        Self {
            filter: Mlp::new(store, rng, &format!("{name}.filter"), &[basis_width, width, width], ssp, ssp),
            atomwise_in: Dense::new(store, rng, &format!("{name}.in"), width, width, Activation::Linear),
            atomwise_out: Mlp::new(store, rng, &format!("{name}.out"), &[width, width, width], ssp, Activation::Linear),
        }
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, ctx: &GraphContext, x: Var, edges: Var) -> Result<Var> {
        schnet_interaction_with(
            tape,
            ctx,
            x,
            edges,
            |t, e| self.filter.apply(t, e),
            |t, x| self.atomwise_in.apply(t, x),
            |t, v| self.atomwise_out.apply(t, v),
        )
    }
}
