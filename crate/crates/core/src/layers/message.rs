use rand::Rng;

use super::dense::{Activation, Gru, Mlp};
use super::graph::GraphContext;
use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{ensure, Result};
use crate::Scalar;

/// Sums per-edge messages at their receiving node:
/// `m_i = Σ_{k: receiver(k) = i} M(h_i, h_{sender(k)}, e_k)`.
///
/// `message` receives the gathered receiver rows, sender rows and edge
/// features (one row per edge). Nodes without incoming edges get zeros.
pub fn message_aggregate<T, F>(
    tape: &mut Tape<T>,
    ctx: &GraphContext,
    h: Var,
    edges: Option<Var>,
    message: F,
) -> Result<Var>
where
    T: Scalar,
    F: FnOnce(&mut Tape<T>, Var, Var, Option<Var>) -> Result<Var>,
{
    let h_recv = tape.gather_rows(h, &ctx.receivers)?;
    let h_send = tape.gather_rows(h, &ctx.senders)?;
    let m = message(tape, h_recv, h_send, edges)?;
    ensure!(
        tape.shape(m).0 == ctx.num_edges(),
        Dimension,
        "message function returned {} rows for {} edges",
        tape.shape(m).0,
        ctx.num_edges()
    );
    tape.segment_sum(m, &ctx.receivers, ctx.num_nodes())
}

/// One update `h' = U(h, m)` with `m` from [`message_aggregate`].
pub fn message_pass_step<T, M, U>(
    tape: &mut Tape<T>,
    ctx: &GraphContext,
    h: Var,
    edges: Option<Var>,
    message: M,
    update: U,
) -> Result<Var>
where
    T: Scalar,
    M: FnOnce(&mut Tape<T>, Var, Var, Option<Var>) -> Result<Var>,
    U: FnOnce(&mut Tape<T>, Var, Var) -> Result<Var>,
{
    let m = message_aggregate(tape, ctx, h, edges, message)?;
    let out = update(tape, h, m)?;
    ensure!(
        tape.shape(out).0 == tape.shape(h).0,
        Dimension,
        "update function changed the node count"
    );
    Ok(out)
}

#[derive(Clone, Debug)]
pub enum Update {
    /// `U(h, m) = MLP(concat(h, m))`.
    Mlp(Mlp),
    /// `U(h, m) = GRU(input = m, hidden = h)`.
    Gru(Gru),
}

impl Update {
    fn apply<T: Scalar>(&self, tape: &mut Tape<T>, h: Var, m: Var) -> Result<Var> {
        match self {
            Update::Mlp(mlp) => {
                let x = tape.concat_cols(&[h, m])?;
                mlp.apply(tape, x)
            }
            Update::Gru(gru) => gru.apply(tape, m, h),
        }
    }
}

/// `T` rounds of message passing with MLP messages over
/// `concat(h_i, h_j, e_ij)` and an MLP or recurrent update.
#[derive(Clone, Debug)]
pub struct MessagePassing {
    messages: Vec<Mlp>,
    updates: Vec<Update>,
    pub steps: usize,
}

impl MessagePassing {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        hidden: usize,
        edge_width: usize,
        steps: usize,
        shared_weights: bool,
        recurrent_update: bool,
        activation: Activation,
    ) -> Self {
        let copies = if shared_weights { 1 } else { steps };
        let mut messages = Vec::with_capacity(copies);
        let mut updates = Vec::with_capacity(copies);
        for c in 0..copies {
            messages.push(Mlp::new(
                store,
                rng,
                &format!("{name}.message{c}"),
                &[2 * hidden + edge_width, hidden, hidden],
                activation,
                Activation::Linear,
            ));
            updates.push(if recurrent_update {
                Update::Gru(Gru::new(store, rng, &format!("{name}.update{c}"), hidden, hidden))
            } else {
                Update::Mlp(Mlp::new(
                    store,
                    rng,
                    &format!("{name}.update{c}"),
                    &[2 * hidden, hidden, hidden],
                    activation,
                    activation,
                ))
            });
        }
        Self {
            messages,
            updates,
            steps,
        }
    }

    /// Step `t` of the schedule, `h^{t+1} = U_t(h^t, m^{t+1})`.
    pub fn step<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        ctx: &GraphContext,
        h: Var,
        edges: Option<Var>,
        t: usize,
    ) -> Result<Var> {
        ensure!(t < self.steps, Contract, "step {t} outside schedule of {} steps", self.steps);
        let k = t % self.messages.len();
        let mlp = &self.messages[k];
        let update = &self.updates[k];
        message_pass_step(
            tape,
            ctx,
            h,
            edges,
            |tape, hi, hj, e| {
                let mut parts = vec![hi, hj];
                parts.extend(e);
                let x = tape.concat_cols(&parts)?;
                mlp.apply(tape, x)
            },
            |tape, h, m| update.apply(tape, h, m),
        )
    }

    pub fn run<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        ctx: &GraphContext,
        mut h: Var,
        edges: Option<Var>,
    ) -> Result<Var> {
        for t in 0..self.steps {
            h = self.step(tape, ctx, h, edges, t)?;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pickoff_sender(_: &mut Tape<f64>, _: Var, hj: Var, _: Option<Var>) -> Result<Var> {
        Ok(hj)
    }

    #[test]
    fn sums_sender_features_at_receiver() {
        let ctx = GraphContext::new(1, vec![0, 0, 0], vec![[2, 0], [2, 1]]);
        let mut t = Tape::new();
        let h = t.constant(array![[1.0], [2.0], [3.0]]);
        let m = message_aggregate(&mut t, &ctx, h, None, pickoff_sender).unwrap();
        assert_eq!(t.value(m), &array![[0.0], [0.0], [3.0]]);

        let h2 = message_pass_step(&mut t, &ctx, h, None, pickoff_sender, |_, _, m| Ok(m)).unwrap();
        assert_eq!(t.value(h2), &array![[0.0], [0.0], [3.0]]);
        let same = message_pass_step(&mut t, &ctx, h, None, pickoff_sender, |_, h, _| Ok(h)).unwrap();
        assert_eq!(t.value(same), t.value(h));
    }

    #[test]
    fn no_edges_gives_zero_messages() {
        let ctx = GraphContext::new(2, vec![0, 1, 1], vec![]);
        let mut t = Tape::new();
        let h = t.constant(array![[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]]);
        let m = message_aggregate(&mut t, &ctx, h, None, pickoff_sender).unwrap();
        assert_eq!(t.value(m), &Array2::<f64>::zeros((3, 2)));
    }

    #[test]
    fn shared_two_step_run_equals_manual_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::<f64>::new();
        let mp = MessagePassing::new(&mut store, &mut rng, "mp", 3, 1, 2, true, true, Activation::Tanh);
        let ctx = GraphContext::new(1, vec![0; 4], vec![[0, 1], [1, 2], [2, 3], [3, 0], [0, 2]]);
        let hv = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 - j as f64) * 0.3);
        let ev = Array2::from_shape_fn((5, 1), |(k, _)| k as f64 * 0.1);

        let mut t = Tape::with_params(&store);
        let h = t.constant(hv.clone());
        let e = t.constant(ev.clone());
        let run = mp.run(&mut t, &ctx, h, Some(e)).unwrap();

        let mut t2 = Tape::with_params(&store);
        let h = t2.constant(hv);
        let e = t2.constant(ev);
        let h1 = mp.step(&mut t2, &ctx, h, Some(e), 0).unwrap();
        let h2 = mp.step(&mut t2, &ctx, h1, Some(e), 0).unwrap();
        assert_eq!(t.value(run), t2.value(h2));
        assert!(mp.step(&mut t2, &ctx, h2, Some(e), 2).is_err());
    }
}
