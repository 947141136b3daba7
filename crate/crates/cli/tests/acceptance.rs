//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{run, s, write_config, write_dataset, write_spec};
use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raggednn::autodiff::Tape;
use raggednn::data::synthetic::{mutag_like, qm9_like, random_graphs, stochastic_block_model, RandomGraphs};
use raggednn::data::{DatasetSpec, DistanceExpansion, GraphRecord, LabeledBatch, Task};
use raggednn::layers::{gcn_conv, gcn_normalize, keep_count, topk_pool, topk_unpool, Activation, Dense, GraphContext};
use raggednn::models::{Model, ModelKind, ModelSpec, Readout, Widths};
use raggednn::ragged::{AdjacencyCsr, GraphBatch, PaddedBatch, Ragged};
use raggednn::train::{EpochRecord, Session, Split, TrainSettings};
use raggednn::ParamStore;
use raggednn_cli::gradcheck::{check_component, check_model, COMPONENTS, DEFAULT_EPS, TOLERANCE};
use serde_json::{json, Value};

const TASKS: [Task; 3] = [Task::GraphRegression, Task::GraphClassification, Task::NodeClassification];

type Outcome = Result<String, String>;
type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    if a.dim() != b.dim() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn random_shape(max_nodes: usize, max_edges: usize, task: Task) -> RandomGraphs {
    RandomGraphs {
        min_nodes: 1,
        max_nodes,
        max_edges,
        node_width: 3,
        edge_width: 2,
        state_width: 2,
        targets: 2,
        task,
    }
}

fn small_model(kind: ModelKind, task: Task, seed: u64) -> Model<f64> {
    let widths = Widths {
        node_in: 3,
        edge_in: 2,
        state_in: if kind == ModelKind::Megnet { 2 } else { 0 },
        out: 2,
    };
    let layers = if kind == ModelKind::Mpn { vec![8] } else { vec![8, 8] };
    let mut spec = ModelSpec::new(kind, task, widths, layers);
    spec.seed = seed;
    spec.activation = Activation::Tanh;
    Model::new(spec).unwrap()
}

fn disjoint(records: &[GraphRecord]) -> raggednn::DisjointBatch {
    let refs: Vec<_> = records.iter().collect();
    LabeledBatch::<f64>::from_records(&refs).unwrap().graphs.to_disjoint().unwrap()
}

fn predict(model: &Model<f64>, records: &[GraphRecord]) -> Array2<f64> {
    model.predict(&disjoint(records)).unwrap()
}

fn read_metrics(path: &Path) -> Vec<EpochRecord> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut record = |name: String, err: f64| {
        checks += 1;
        if err > TOLERANCE {
            failures.push(format!("{name} {err:.2e}"));
        }
        if err > worst.0 {
            worst = (err, name);
        }
    };
    for name in COMPONENTS {
        match check_component(name, 0, DEFAULT_EPS) {
            Ok(r) => record(name.to_string(), r.max_rel_error),
            Err(e) => record(format!("{name} ({e})"), f64::INFINITY),
        }
    }
    for kind in ModelKind::ALL {
        for task in TASKS {
            let name = format!("{}/{task:?}", kind.name());
            match check_model(kind, task, 0, DEFAULT_EPS) {
                Ok(r) => record(name, r.max_rel_error),
                Err(e) => record(format!("{name} ({e})"), f64::INFINITY),
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures.is_empty() && elapsed < Duration::from_secs(120),
        format!(
            "{checks} layer and model checks, max rel error {:.2e} ({}), {}{}",
            worst.0,
            worst.1,
            secs(elapsed),
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

fn batched_vs_loop() -> Outcome {
    let mut worst = 0.0f64;
    let mut evaluated = 0;
    for kind in ModelKind::ALL {
        for task in TASKS {
            let model = small_model(kind, task, 1);
            for k in 0..100u64 {
                let count = 1 + (k % 6) as usize;
                let records = random_graphs(count, random_shape(12, 30, task), 1000 + k);
                let batched = predict(&model, &records);
                let parts: Vec<_> = records.iter().map(|r| predict(&model, std::slice::from_ref(r))).collect();
                let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
                let looped = concatenate(Axis(0), &views).unwrap();
                worst = worst.max(max_abs_diff(&batched, &looped));
                evaluated += 1;
            }
        }
    }
    verdict(
        worst <= 1e-10,
        format!("{evaluated} model/batch pairs, max |batched - per graph| {worst:.2e}"),
    )
}

fn permutation_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let (mut instances, mut tied) = (0, 0);
    for kind in ModelKind::ALL {
        for task in TASKS {
            let model = small_model(kind, task, 2);
            for r in random_graphs(10, random_shape(12, 30, task), 77) {
                if model.pool_margin(&disjoint(std::slice::from_ref(&r))).unwrap() <= 1e-9 {
                    tied += 1;
                    continue;
                }
                instances += 1;
                let base = predict(&model, std::slice::from_ref(&r));
                for _ in 0..20 {
                    let mut perm: Vec<usize> = (0..r.num_nodes()).collect();
                    perm.shuffle(&mut rng);
                    let moved = predict(&model, &[r.relabel(&perm).unwrap()]);
                    let expected = if task.is_node_level() {
                        let mut e = Array2::zeros(base.dim());
                        for (i, &p) in perm.iter().enumerate() {
                            e.row_mut(p).assign(&base.row(i));
                        }
                        e
                    } else {
                        base.clone()
                    };
                    worst = worst.max(max_abs_diff(&moved, &expected));
                }
            }
        }
    }
    verdict(
        worst <= 1e-10 && instances >= 150,
        format!(
            "{instances} instances x 20 relabelings, max deviation {worst:.2e} \
             ({tied} unet instances with tied top-k scores excluded)"
        ),
    )
}

fn representation_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    for k in 0..1000u64 {
        let count = rng.gen_range(0..=8);
        let shape = RandomGraphs {
            min_nodes: 0,
            ..random_shape(10, 20, Task::GraphRegression)
        };
        let records: Vec<GraphRecord> = random_graphs(count, shape, k);
        let nodes: Vec<_> = records.iter().map(|r| r.node_features.clone()).collect();
        let edges: Vec<_> = records.iter().map(|r| r.edge_index.clone()).collect();
        let feats: Vec<_> = records.iter().map(|r| r.edge_features.clone().unwrap()).collect();
        let batch = GraphBatch::from_graphs(&nodes, &edges, Some(&feats), None).unwrap();

        let d = batch.to_disjoint().unwrap();
        let back = GraphBatch::from_disjoint(&d).unwrap();
        let bits = |r: &Ragged<f64>| r.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let same_disjoint = back == batch && bits(back.nodes()) == bits(batch.nodes());

        let pad = rng.gen_range(-1.0..1.0);
        let padded_nodes = PaddedBatch::to_padded(batch.nodes(), pad).to_ragged();
        let padded_edges = PaddedBatch::to_padded(batch.edges().unwrap(), pad).to_ragged();
        let same_padded = bits(&padded_nodes) == bits(batch.nodes())
            && padded_nodes.row_splits() == batch.nodes().row_splits()
            && bits(&padded_edges) == bits(batch.edges().unwrap())
            && padded_edges.row_splits() == batch.edges().unwrap().row_splits();

        let mut cumulative = 0;
        let mut oracle = Vec::new();
        for (g, r) in records.iter().enumerate() {
            oracle.extend(r.edge_index.iter().map(|e| ([e[0] + cumulative, e[1] + cumulative], g)));
            cumulative += r.num_nodes();
        }
        let got: Vec<_> = d.edge_index_global().iter().copied().zip(d.edge_graph_id().iter().copied()).collect();
        if !(same_disjoint && same_padded && got == oracle) {
            failures += 1;
        }
    }
    verdict(
        failures == 0,
        format!("1000 random batches, {failures} mismatches in disjoint, padded or offset checks"),
    )
}

fn gcn_node_classification() -> Outcome {
    let start = Instant::now();
    let graph = stochastic_block_model(200, 0.1, 0.01, 1.0, 0);
    let dataset = DatasetSpec::infer(std::slice::from_ref(&graph)).unwrap();
    let widths = Widths {
        node_in: 8,
        edge_in: 0,
        state_in: 0,
        out: 2,
    };
    let spec = ModelSpec::new(ModelKind::Gcn, Task::NodeClassification, widths, vec![16]);
    let mut settings = TrainSettings::new(&dataset);
    settings.split = [0.1, 0.0, 0.9];
    settings.optimizer.lr = 0.01;
    let mut session = Session::<f64>::new(Model::new(spec).unwrap(), dataset, vec![graph], None, settings).unwrap();
    for _ in 0..200 {
        session.run_epoch().unwrap();
    }
    let accuracy = session.evaluate(Split::Test).unwrap()["accuracy"];
    let labeled = session.batches(Split::Train)[0].targets.count();
    let elapsed = start.elapsed();
    verdict(
        accuracy >= 0.95 && elapsed < Duration::from_secs(60),
        format!(
            "2-layer GCN, {labeled} labeled nodes, unlabeled accuracy {accuracy:.3} after 200 epochs, {}",
            secs(elapsed)
        ),
    )
}

fn mutag_overfit(dir: &Path) -> Outcome {
    let start = Instant::now();
    let data = write_dataset(dir, "mutag20.jsonl", &mutag_like(20, 0));
    let widths = Widths {
        node_in: 7,
        edge_in: 4,
        state_in: 0,
        out: 2,
    };
    let spec = write_spec(dir, "mpn.json", &ModelSpec::new(ModelKind::Mpn, Task::GraphClassification, widths, vec![16]));
    let extra = json!({
        "epochs": 300,
        "batch_size": 10,
        "split": [1.0, 0.0, 0.0],
        "optimizer": {"kind": "adam", "lr": 0.005},
        "output_dir": dir.join("mutag-out"),
    });
    let cfg = write_config(dir, "mutag.json", &spec, &data, extra);
    let (code, _, err) = run(&["train", "--config", s(&cfg)]);
    if code != 0 {
        return Err(format!("train exited {code}: {}", err.lines().last().unwrap_or("")));
    }
    let history = read_metrics(&dir.join("mutag-out/metrics.jsonl"));
    let first = history.iter().find(|r| r.metric["accuracy"] == 1.0).map(|r| r.epoch);
    let elapsed = start.elapsed();
    verdict(
        first.is_some() && elapsed < Duration::from_secs(120),
        format!(
            "MPN on 20 graphs, first epoch at 100% training accuracy: {}, {}",
            first.map_or("none".into(), |e| e.to_string()),
            secs(elapsed)
        ),
    )
}

fn qm9_regression(dir: &Path) -> Outcome {
    let start = Instant::now();
    let data = write_dataset(dir, "qm9-1000.jsonl", &qm9_like(1000, 0));
    let widths = Widths {
        node_in: 5,
        edge_in: DistanceExpansion::default().centers.len(),
        state_in: 0,
        out: 3,
    };
    let mut spec = ModelSpec::new(ModelKind::Schnet, Task::GraphRegression, widths, vec![32, 32]);
    spec.readout = Some(Readout::Mean);
    spec.activation = Activation::ShiftedSoftplus;
    let spec = write_spec(dir, "schnet.json", &spec);
    let extra = json!({
        "epochs": 50,
        "batch_size": 32,
        "split": [1.0, 0.0, 0.0],
        "target_names": ["homo", "lumo", "gap"],
        "distance_expansion": DistanceExpansion::default(),
        "optimizer": {"kind": "adam", "lr": 0.002},
        "output_dir": dir.join("qm9-out"),
    });
    let cfg = write_config(dir, "qm9.json", &spec, &data, extra);
    let init_dir = dir.join("qm9-init");
    let mut maes = Vec::new();
    for (args, ckpt) in [
        (vec!["--epochs", "0", "--output-dir", s(&init_dir)], init_dir.join("final.ckpt")),
        (vec![], dir.join("qm9-out/final.ckpt")),
    ] {
        let mut argv = vec!["train", "--config", s(&cfg)];
        argv.extend(args);
        let (code, _, err) = run(&argv);
        if code != 0 {
            return Err(format!("train exited {code}: {}", err.lines().last().unwrap_or("")));
        }
        let (code, out, err) = run(&["eval", "--ckpt", s(&ckpt), "--data", s(&data), "--split", "train"]);
        if code != 0 {
            return Err(format!("eval exited {code}: {}", err.lines().last().unwrap_or("")));
        }
        maes.push(serde_json::from_str::<Value>(out.trim()).unwrap());
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for t in ["homo", "lumo", "gap"] {
        let key = format!("mae.{t}");
        let (before, after) = (maes[0][&key].as_f64().unwrap(), maes[1][&key].as_f64().unwrap());
        let ratio = before / after;
        ok &= ratio >= 5.0;
        parts.push(format!("{t} {before:.3} -> {after:.3} ({ratio:.1}x)"));
    }
    let elapsed = start.elapsed();
    verdict(
        ok && elapsed < Duration::from_secs(900),
        format!("SchNet 50 epochs on 1000 molecules, training MAE {}, {}", parts.join(", "), secs(elapsed)),
    )
}

fn gcn_dense_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut norm_err, mut conv_err) = (0.0f64, 0.0f64);
    for k in 0..100 {
        let n = rng.gen_range(1..=15);
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let symmetric = k % 2 == 0;
                if i != j && (!symmetric || j < i) && rng.gen_bool(0.25) {
                    pairs.push([i, j]);
                    if symmetric {
                        pairs.push([j, i]);
                    }
                }
            }
        }
        let a = AdjacencyCsr::<f64>::from_pairs(n, &pairs, None).unwrap();
        let a_hat = gcn_normalize(&a, n).unwrap();
        let mut tilde = Array2::<f64>::eye(n);
        for p in &pairs {
            tilde[[p[0], p[1]]] += 1.0;
        }
        let degree: Vec<f64> = (0..n).map(|i| tilde.row(i).sum()).collect();
        let dense = Array2::from_shape_fn((n, n), |(i, j)| tilde[[i, j]] / (degree[i].sqrt() * degree[j].sqrt()));
        norm_err = norm_err.max(max_abs_diff(&a_hat.to_dense(), &dense));

        let mut store = ParamStore::new();
        let layer = Dense::new(&mut store, &mut rng, "gcn", 4, 3, Activation::Linear);
        let x = Array2::from_shape_simple_fn((n, 4), || rng.gen_range(-1.0..1.0));
        let mut tape = Tape::with_params(&store);
        let h = tape.constant(x.clone());
        let y = gcn_conv(&mut tape, h, &a_hat, &layer).unwrap();
        let oracle = dense.dot(&x).dot(&store.get(layer.weight).value) + &store.get(layer.bias).value;
        conv_err = conv_err.max(max_abs_diff(tape.value(y), &oracle));
    }
    verdict(
        norm_err <= 1e-12 && conv_err <= 1e-12,
        format!("100 graphs, max error normalize {norm_err:.2e}, conv {conv_err:.2e}"),
    )
}

fn unet_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    for _ in 0..100 {
        let sizes: Vec<usize> = (0..rng.gen_range(1..=5)).map(|_| rng.gen_range(1..=12)).collect();
        let node_graph: Vec<usize> = sizes.iter().enumerate().flat_map(|(g, &n)| vec![g; n]).collect();
        let total = node_graph.len();
        let ctx = GraphContext::new(sizes.len(), node_graph, vec![]);
        let width = rng.gen_range(1..=5);
        let x = Array2::from_shape_simple_fn((total, width), || rng.gen_range(-1.0..1.0));
        let p = Array2::from_shape_simple_fn((width, 1), || rng.gen_range(-1.0..1.0));
        let ratio = rng.gen_range(0.05..=1.0);
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let select = |p: Array2<f64>| {
            let mut tape = Tape::new();
            let h = tape.constant(x.clone());
            let pv = tape.constant(p);
            let pooled = topk_pool(&mut tape, &ctx, h, pv, ratio).unwrap();
            let restored = topk_unpool(&mut tape, pooled.h, &pooled.kept, total).unwrap();
            (pooled.kept.to_vec(), tape.value(pooled.h).clone(), tape.value(restored).clone())
        };
        let (kept, pooled, restored) = select(p.clone());
        let (kept_scaled, _, _) = select(&p * scale);
        let mut ok = kept == kept_scaled;
        ok &= kept.len() == sizes.iter().map(|&n| keep_count(ratio, n)).sum::<usize>();
        for (row, &orig) in kept.iter().enumerate() {
            ok &= restored.row(orig).iter().zip(pooled.row(row)).all(|(a, b)| a.to_bits() == b.to_bits());
        }
        ok &= (0..total).filter(|i| !kept.contains(i)).all(|i| restored.row(i).iter().all(|v| *v == 0.0));
        if !ok {
            failures += 1;
        }
    }
    verdict(
        failures == 0,
        format!("100 pool/unpool instances, {failures} with misplaced rows or scale-dependent keep sets"),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let data = write_dataset(dir, "det.jsonl", &mutag_like(16, 5));
    let widths = Widths {
        node_in: 7,
        edge_in: 4,
        state_in: 0,
        out: 2,
    };
    let spec = write_spec(dir, "det-mpn.json", &ModelSpec::new(ModelKind::Mpn, Task::GraphClassification, widths, vec![8]));
    let cfg = write_config(dir, "det.json", &spec, &data, json!({"epochs": 15, "batch_size": 4, "seed": 11}));
    let bin = env!("CARGO_BIN_EXE_raggednn");
    let mut artifacts = Vec::new();
    for run_dir in ["det-a", "det-b"] {
        let out = dir.join(run_dir);
        let status = Command::new(bin)
            .args(["train", "--config", s(&cfg), "--output-dir", s(&out)])
            .output()
            .unwrap();
        if !status.status.success() {
            return Err(format!("train exited {:?}", status.status.code()));
        }
        let read = |name: &str| std::fs::read(out.join(name)).unwrap();
        artifacts.push((read("metrics.jsonl"), read("final.ckpt")));
    }
    let same_metrics = artifacts[0].0 == artifacts[1].0;
    let same_ckpt = artifacts[0].1 == artifacts[1].1;
    verdict(
        same_metrics && same_ckpt,
        format!(
            "two CLI runs, metrics.jsonl identical: {same_metrics}, final.ckpt identical: {same_ckpt} ({} bytes)",
            artifacts[0].1.len()
        ),
    )
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("gradient suite", Box::new(gradient_suite)),
        ("batched vs loop", Box::new(batched_vs_loop)),
        ("permutation", Box::new(permutation_suite)),
        ("representation round trips", Box::new(representation_round_trips)),
        ("GCN node classification", Box::new(gcn_node_classification)),
        ("MUTAG overfit", Box::new(|| mutag_overfit(dir.path()))),
        ("QM9 regression", Box::new(|| qm9_regression(dir.path()))),
        ("GCN dense oracle", Box::new(gcn_dense_oracle)),
        ("unet structure", Box::new(unet_structure)),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let n = k + 1;
        match check() {
            Ok(detail) => println!("criterion {n} PASS [{name}]: {detail}"),
            Err(detail) => {
                println!("criterion {n} FAIL [{name}]: {detail}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
