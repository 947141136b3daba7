//! Finite-difference checks of every layer and model on small seeded
//! batches. Smooth activations are used so no input sits on a kink.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raggednn::autodiff::{grad_check, GradCheckReport, ParamStore, Tape, Var};
use raggednn::data::synthetic::{random_graphs, RandomGraphs};
use raggednn::data::{BatchTargets, LabeledBatch, Task};
use raggednn::layers::{
    gcn_conv, gcn_normalize, interaction_block, megnet_block, message_aggregate, readout_reduce, topk_unpool, Activation,
    Dense, GraphContext, Gru, InteractionBlock, MegNetBlock, MessagePassing, Mlp, SchNetInteraction, Set2Set, TopKPool,
};
use raggednn::models::{Model, ModelKind, ModelSpec, Widths};
use raggednn::ragged::{DisjointBatch, Reducer};
use raggednn::train::{compute_loss, LossKind};
use raggednn::{Error, Result};

/// Names accepted by `gradcheck --layer`.
pub const LAYER_NAMES: [&str; 8] = ["gcn", "mpn", "interaction", "schnet", "megnet", "unet", "set2set", "topk"];

pub const DEFAULT_EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

const NODE_IN: usize = 3;
const EDGE_IN: usize = 2;
const STATE_IN: usize = 2;
const OUT: usize = 2;

fn batch(task: Task, seed: u64) -> Result<(DisjointBatch<f64>, BatchTargets<f64>)> {
    let shape = RandomGraphs {
        min_nodes: 2,
        max_nodes: 5,
        max_edges: 8,
        node_width: NODE_IN,
        edge_width: EDGE_IN,
        state_width: STATE_IN,
        targets: OUT,
        task,
    };
    let records = random_graphs(3, shape, seed);
    let refs: Vec<_> = records.iter().collect();
    let b = LabeledBatch::from_records(&refs)?;
    Ok((b.graphs.to_disjoint()?, b.targets))
}

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
}

/// `Σ (v ⊙ R)` for a fixed random `R`, reducing any output to a scalar.
fn project(tape: &mut Tape<f64>, v: Var, rng: &mut ChaCha8Rng) -> Result<Var> {
    let (r, c) = tape.shape(v);
    let weights = tape.constant(normal(rng, r, c));
    let prod = tape.mul(v, weights)?;
    Ok(tape.sum_all(prod))
}

/// Full model loss (mse for regression, cross entropy otherwise) on a
/// three-graph batch, checked over every parameter.
pub fn check_model(kind: ModelKind, task: Task, seed: u64, eps: f64) -> Result<GradCheckReport> {
    let widths = Widths {
        node_in: NODE_IN,
        edge_in: EDGE_IN,
        state_in: if kind == ModelKind::Megnet { STATE_IN } else { 0 },
        out: OUT,
    };
    let layers = match kind {
        ModelKind::Gcn | ModelKind::Unet | ModelKind::Schnet | ModelKind::Interaction => vec![4, 4],
        _ => vec![4],
    };
    let mut spec = ModelSpec::new(kind, task, widths, layers);
    spec.activation = Activation::Tanh;
    spec.seed = seed;
    let model = Model::<f64>::new(spec)?;
    let (d, targets) = batch(task, seed.wrapping_add(1))?;
    let loss = LossKind::default_for(task);
    let loss = if loss == LossKind::Mae { LossKind::Mse } else { loss };
    grad_check(
        |tape, vars| {
            tape.bind_params(vars);
            let pred = model.forward(tape, &d)?;
            compute_loss(tape, loss, pred, &targets)
        },
        &model.params().values(),
        eps,
    )
}

/// Checks `f` over the parameters in `store` followed by `inputs`.
fn check_layer<F>(store: &ParamStore<f64>, inputs: Vec<Array2<f64>>, eps: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let n = store.len();
    let mut params = store.values();
    params.extend(inputs);
    grad_check(
        |tape, vars| {
            tape.bind_params(&vars[..n]);
            f(tape, &vars[n..])
        },
        &params,
        eps,
    )
}

/// Layer-level checks; graph inputs (node, edge and state features) are
/// differentiated along with the parameters.
pub fn check_component(name: &str, seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, _) = batch(Task::GraphRegression, seed.wrapping_add(1))?;
    let ctx = GraphContext::from_disjoint(&d);
    let x = d.node_matrix().clone();
    let e = d.edge_matrix().cloned().unwrap_or_else(|| Array2::zeros((d.num_edges(), EDGE_IN)));
    let u = d.state().cloned().unwrap_or_else(|| Array2::zeros((d.num_graphs(), STATE_IN)));
    let mut store = ParamStore::new();
    let act = Activation::Tanh;
    let project_out = |tape: &mut Tape<f64>, v: Var| project(tape, v, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    match name {
        "dense" => {
            let layer = Dense::new(&mut store, &mut rng, "dense", NODE_IN, 4, Activation::Softplus);
            check_layer(&store, vec![x], eps, |t, i| {
                let y = layer.apply(t, i[0])?;
                project_out(t, y)
            })
        }
        "mlp" => {
            let mlp = Mlp::new(&mut store, &mut rng, "mlp", &[NODE_IN, 5, 4], act, Activation::Sigmoid);
            check_layer(&store, vec![x], eps, |t, i| {
                let y = mlp.apply(t, i[0])?;
                project_out(t, y)
            })
        }
        "gru" => {
            let gru = Gru::new(&mut store, &mut rng, "gru", NODE_IN, 4);
            let h = normal(&mut rng, x.nrows(), 4);
            check_layer(&store, vec![x, h], eps, |t, i| {
                let y = gru.apply(t, i[0], i[1])?;
                project_out(t, y)
            })
        }
        "message_aggregate" => {
            let mlp = Mlp::new(&mut store, &mut rng, "msg", &[2 * NODE_IN + EDGE_IN, 4], act, act);
            check_layer(&store, vec![x, e], eps, |t, i| {
                let m = message_aggregate(t, &ctx, i[0], Some(i[1]), |t, hi, hj, e| {
                    let z = t.concat_cols(&[hi, hj, e.unwrap()])?;
                    mlp.apply(t, z)
                })?;
                project_out(t, m)
            })
        }
        "message_passing" => {
            let embed = Dense::new(&mut store, &mut rng, "embed", NODE_IN, 4, act);
            let mp = MessagePassing::new(&mut store, &mut rng, "mp", 4, EDGE_IN, 2, false, false, act);
            check_layer(&store, vec![x, e], eps, |t, i| {
                let h = embed.apply(t, i[0])?;
                let y = mp.run(t, &ctx, h, Some(i[1]))?;
                project_out(t, y)
            })
        }
        "gcn_conv" => {
            let layer = Dense::new(&mut store, &mut rng, "gcn", NODE_IN, 4, act);
            let a = gcn_normalize(&ctx.adjacency()?, ctx.num_nodes())?;
            check_layer(&store, vec![x], eps, |t, i| {
                let y = gcn_conv(t, i[0], &a, &layer)?;
                project_out(t, y)
            })
        }
        "interaction" => {
            let block = InteractionBlock::new(&mut store, &mut rng, "in", NODE_IN, EDGE_IN, 4, act);
            check_layer(&store, vec![x, e], eps, |t, i| {
                let (e2, h2) = interaction_block(t, &ctx, i[0], Some(i[1]), &block)?;
                let a = project_out(t, e2)?;
                let b = project_out(t, h2)?;
                t.add(a, b)
            })
        }
        "schnet" => {
            let embed = Dense::new(&mut store, &mut rng, "embed", NODE_IN, 4, Activation::Linear);
            let block = SchNetInteraction::new(&mut store, &mut rng, "cf", 4, EDGE_IN);
            check_layer(&store, vec![x, e], eps, |t, i| {
                let h = embed.apply(t, i[0])?;
                let y = block.apply(t, &ctx, h, i[1])?;
                project_out(t, y)
            })
        }
        "megnet" => {
            let block = MegNetBlock::new(&mut store, &mut rng, "mg", NODE_IN, EDGE_IN, STATE_IN, 4, act);
            check_layer(&store, vec![x, e, u], eps, |t, i| {
                let (e2, h2, u2) = megnet_block(t, &ctx, i[0], Some(i[1]), Some(i[2]), &block)?;
                let a = project_out(t, e2)?;
                let b = project_out(t, h2)?;
                let c = project_out(t, u2)?;
                let ab = t.add(a, b)?;
                t.add(ab, c)
            })
        }
        "readout_sum" | "readout_mean" | "readout_max" => {
            let reducer = match name {
                "readout_sum" => Reducer::Sum,
                "readout_mean" => Reducer::Mean,
                _ => Reducer::Max,
            };
            check_layer(&store, vec![x], eps, |t, i| {
                let y = readout_reduce(t, &ctx, i[0], reducer)?;
                project_out(t, y)
            })
        }
        "set2set" => {
            let s2s = Set2Set::new(&mut store, &mut rng, "s2s", NODE_IN, 3);
            check_layer(&store, vec![x], eps, |t, i| {
                let y = s2s.apply(t, &ctx, i[0])?;
                project_out(t, y)
            })
        }
        "topk" => {
            let pool = TopKPool::new(&mut store, &mut rng, "pool", NODE_IN, 0.5);
            check_layer(&store, vec![x], eps, |t, i| {
                let pooled = pool.apply(t, &ctx, i[0])?;
                let restored = topk_unpool(t, pooled.h, &pooled.kept, pooled.original_nodes)?;
                let a = project_out(t, pooled.h)?;
                let b = project_out(t, restored)?;
                t.add(a, b)
            })
        }
        other => Err(Error::Config(format!("unknown layer {other}"))),
    }
}

/// Every layer-level check by name.
pub const COMPONENTS: [&str; 14] = [
    "dense",
    "mlp",
    "gru",
    "message_aggregate",
    "message_passing",
    "gcn_conv",
    "interaction",
    "schnet",
    "megnet",
    "readout_sum",
    "readout_mean",
    "readout_max",
    "set2set",
    "topk",
];

/// The `gradcheck --layer` entry: models by architecture name, plus the
/// `set2set` and `topk` layers.
pub fn check_named(name: &str, seed: u64, eps: f64) -> Result<GradCheckReport> {
    match name {
        "set2set" | "topk" => check_component(name, seed, eps),
        _ => {
            let kind = ModelKind::ALL
                .into_iter()
                .find(|k| k.name() == name)
                .ok_or_else(|| Error::Config(format!("unknown layer {name}; valid: {}", LAYER_NAMES.join(", "))))?;
            check_model(kind, Task::GraphRegression, seed, eps)
        }
    }
}
