//! The six reference architectures assembled from [`crate::layers`].

mod spec;

pub use spec::{ModelKind, ModelSpec, Readout, UpdateKind, Widths};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::Result;
use crate::layers::{
    gcn_conv, gcn_normalize, interaction_block, megnet_block, readout_reduce, Activation, Dense, GraphContext,
    InteractionBlock, MegNetBlock, MessagePassing, Mlp, SchNetInteraction, Set2Set, TopKPool,
};
use crate::ragged::{AdjacencyCsr, DisjointBatch, Reducer};
use crate::Scalar;

#[derive(Clone, Debug)]
enum Body {
    Gcn(Vec<Dense>),
    Interaction(Vec<InteractionBlock>),
    Mpn { embed: Dense, passing: MessagePassing },
    Schnet { embed: Dense, blocks: Vec<SchNetInteraction> },
    Megnet(Vec<MegNetBlock>),
    Unet { down: Vec<Dense>, pools: Vec<TopKPool>, bottom: Dense, up: Vec<Dense> },
}

#[derive(Clone, Debug)]
enum Pooling {
    Reduce(Reducer),
    Set2Set(Set2Set),
}

#[derive(Clone, Debug)]
enum Head {
    /// The body already produces per-node outputs.
    None,
    Node(Dense),
    Graph { pooling: Pooling, mlp: Mlp },
}

/// A built model: its spec, its parameters and the layer structure that
/// reads them.
#[derive(Clone, Debug)]
pub struct Model<T> {
    spec: ModelSpec,
    params: ParamStore<T>,
    body: Body,
    head: Head,
}

/// Builds a model with seeded Glorot-uniform weights and zero biases.
pub fn build_model<T: Scalar>(spec: &ModelSpec) -> Result<Model<T>> {
    Model::new(spec.clone())
}

impl<T: Scalar> Model<T> {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut store = ParamStore::new();
        let act = spec.activation;
        let w = spec.widths;
        let node_task = spec.task.is_node_level();
        let mut state_width = 0;

        let (body, last) = match spec.model {
            ModelKind::Gcn => {
                let mut convs = Vec::new();
                let mut width = w.node_in;
                for (k, &out) in spec.layers.iter().enumerate() {
                    convs.push(Dense::new(&mut store, &mut rng, &format!("gcn.conv{k}"), width, out, act));
                    width = out;
                }
                if node_task {
                    let k = convs.len();
                    convs.push(Dense::new(&mut store, &mut rng, &format!("gcn.conv{k}"), width, w.out, Activation::Linear));
                    width = w.out;
                }
                (Body::Gcn(convs), width)
            }
            ModelKind::Interaction => {
                let mut blocks = Vec::new();
                let (mut nw, mut ew) = (w.node_in, w.edge_in);
                for (k, &out) in spec.layers.iter().enumerate() {
                    let name = format!("interaction.block{k}");
                    blocks.push(InteractionBlock::new(&mut store, &mut rng, &name, nw, ew, out, act));
                    (nw, ew) = (out, out);
                }
                (Body::Interaction(blocks), nw)
            }
            ModelKind::Mpn => {
                let hidden = spec.layers[0];
                let embed = Dense::new(&mut store, &mut rng, "mpn.embed", w.node_in, hidden, act);
                let passing = MessagePassing::new(
                    &mut store,
                    &mut rng,
                    "mpn",
                    hidden,
                    w.edge_in,
                    spec.steps,
                    spec.shared_weights,
                    spec.update == UpdateKind::Gru,
                    act,
                );
                (Body::Mpn { embed, passing }, hidden)
            }
            ModelKind::Schnet => {
                let hidden = spec.layers[0];
                let embed = Dense::new(&mut store, &mut rng, "schnet.embed", w.node_in, hidden, Activation::Linear);
                let blocks = (0..spec.layers.len())
                    .map(|k| SchNetInteraction::new(&mut store, &mut rng, &format!("schnet.block{k}"), hidden, w.edge_in))
                    .collect();
                (Body::Schnet { embed, blocks }, hidden)
            }
            ModelKind::Megnet => {
                let mut blocks = Vec::new();
                let (mut nw, mut ew) = (w.node_in, w.edge_in);
                state_width = w.state_in.max(1);
                for (k, &out) in spec.layers.iter().enumerate() {
                    let name = format!("megnet.block{k}");
                    blocks.push(MegNetBlock::new(&mut store, &mut rng, &name, nw, ew, state_width, out, act));
                    (nw, ew, state_width) = (out, out, out);
                }
                (Body::Megnet(blocks), nw)
            }
            ModelKind::Unet => {
                let hidden = spec.layers[0];
                let levels = spec.layers.len();
                let mut down = Vec::new();
                let mut pools = Vec::new();
                let mut up = Vec::new();
                for l in 0..levels {
                    let input = if l == 0 { w.node_in } else { hidden };
                    down.push(Dense::new(&mut store, &mut rng, &format!("unet.down{l}"), input, hidden, act));
                    pools.push(TopKPool::new(&mut store, &mut rng, &format!("unet.pool{l}"), hidden, spec.pool_ratio));
                }
                let bottom = Dense::new(&mut store, &mut rng, "unet.bottom", hidden, hidden, act);
                for l in 0..levels {
                    up.push(Dense::new(&mut store, &mut rng, &format!("unet.up{l}"), hidden, hidden, act));
                }
                (Body::Unet { down, pools, bottom, up }, hidden)
            }
        };

        let head = if node_task {
            if spec.model == ModelKind::Gcn {
                Head::None
            } else {
                Head::Node(Dense::new(&mut store, &mut rng, "head", last, w.out, Activation::Linear))
            }
        } else {
            let (pooling, pooled) = match spec.readout() {
                Readout::Sum => (Pooling::Reduce(Reducer::Sum), last),
                Readout::Mean => (Pooling::Reduce(Reducer::Mean), last),
                Readout::Max => (Pooling::Reduce(Reducer::Max), last),
                Readout::Set2set => (
                    Pooling::Set2Set(Set2Set::new(&mut store, &mut rng, "readout", last, spec.set2set_steps)),
                    2 * last,
                ),
            };
            let input = pooled + state_width;
            let mlp = Mlp::new(&mut store, &mut rng, "head", &[input, last, w.out], act, Activation::Linear);
            Head::Graph { pooling, mlp }
        };

        Ok(Self {
            spec,
            params: store,
            body,
            head,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Records the model on `tape`, whose parameters must be bound to this
    /// model's store. Returns `(N_total, out)` for node tasks and
    /// `(B, out)` for graph tasks.
    pub fn forward(&self, tape: &mut Tape<T>, batch: &DisjointBatch<T>) -> Result<Var> {
        let mut margin = f64::INFINITY;
        self.forward_with_margin(tape, batch, &mut margin)
    }

    /// Smallest top-k selection margin over every pooling level (see
    /// [`crate::layers::PoolResult::margin`]); infinite for models without
    /// pooling. Outputs are exactly relabeling-invariant only when it is
    /// positive.
    pub fn pool_margin(&self, batch: &DisjointBatch<T>) -> Result<f64> {
        let mut tape = Tape::with_params(&self.params);
        let mut margin = f64::INFINITY;
        self.forward_with_margin(&mut tape, batch, &mut margin)?;
        Ok(margin)
    }

    fn forward_with_margin(&self, tape: &mut Tape<T>, batch: &DisjointBatch<T>, margin: &mut f64) -> Result<Var> {
        let ctx = GraphContext::from_disjoint(batch);
        let x = tape.constant(batch.node_matrix().clone());
        let edges = batch.edge_matrix().map(|e| tape.constant(e.clone()));
        let mut state = None;

        let h = match &self.body {
            Body::Gcn(convs) => {
                let a = normalized(&ctx)?;
                let mut h = x;
                for conv in convs {
                    h = gcn_conv(tape, h, &a, conv)?;
                }
                h
            }
            Body::Interaction(blocks) => {
                let (mut h, mut e) = (x, edges);
                for block in blocks {
                    let (e2, h2) = interaction_block(tape, &ctx, h, e, block)?;
                    (h, e) = (h2, Some(e2));
                }
                h
            }
            Body::Mpn { embed, passing } => {
                let h = embed.apply(tape, x)?;
                passing.run(tape, &ctx, h, edges)?
            }
            Body::Schnet { embed, blocks } => {
                let mut h = embed.apply(tape, x)?;
                let e = edges.ok_or_else(|| crate::Error::Contract("schnet needs edge features".into()))?;
                for block in blocks {
                    h = block.apply(tape, &ctx, h, e)?;
                }
                h
            }
            Body::Megnet(blocks) => {
                let u0 = match batch.state() {
                    Some(u) if self.spec.widths.state_in > 0 => u.clone(),
                    _ => Array2::zeros((ctx.num_graphs, 1)),
                };
                let (mut h, mut e, mut u) = (x, edges, tape.constant(u0));
                for block in blocks {
                    let (e2, h2, u2) = megnet_block(tape, &ctx, h, e, Some(u), block)?;
                    (h, e, u) = (h2, Some(e2), u2);
                }
                state = Some(u);
                h
            }
            Body::Unet { down, pools, bottom, up } => {
                let mut h = x;
                let mut level_ctx = ctx.clone();
                let mut skips = Vec::with_capacity(down.len());
                for (conv, pool) in down.iter().zip(pools) {
                    h = gcn_conv(tape, h, &normalized(&level_ctx)?, conv)?;
                    let pooled = pool.apply(tape, &level_ctx, h)?;
                    *margin = margin.min(pooled.margin);
                    skips.push((h, level_ctx, pooled.kept, pooled.original_nodes));
                    h = pooled.h;
                    level_ctx = pooled.ctx;
                }
                h = gcn_conv(tape, h, &normalized(&level_ctx)?, bottom)?;
                for (conv, (skip, skip_ctx, kept, n)) in up.iter().rev().zip(skips.into_iter().rev()) {
                    let restored = crate::layers::topk_unpool(tape, h, &kept, n)?;
                    let joined = tape.add(restored, skip)?;
                    h = gcn_conv(tape, joined, &normalized(&skip_ctx)?, conv)?;
                }
                h
            }
        };

        match &self.head {
            Head::None => Ok(h),
            Head::Node(dense) => dense.apply(tape, h),
            Head::Graph { pooling, mlp } => {
                let pooled = match pooling {
                    Pooling::Reduce(r) => readout_reduce(tape, &ctx, h, *r)?,
                    Pooling::Set2Set(s2s) => s2s.apply(tape, &ctx, h)?,
                };
                let input = match state {
                    Some(u) => tape.concat_cols(&[pooled, u])?,
                    None => pooled,
                };
                mlp.apply(tape, input)
            }
        }
    }

    /// Forward pass on a fresh tape.
    pub fn predict(&self, batch: &DisjointBatch<T>) -> Result<Array2<T>> {
        let mut tape = Tape::with_params(&self.params);
        let out = self.forward(&mut tape, batch)?;
        Ok(tape.value(out).clone())
    }
}

fn normalized<T: Scalar>(ctx: &GraphContext) -> Result<AdjacencyCsr<T>> {
    gcn_normalize(&ctx.adjacency()?, ctx.num_nodes())
}
