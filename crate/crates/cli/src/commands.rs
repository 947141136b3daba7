use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use raggednn::data::{
    batch_records, expand_distances, load_jsonl_dataset, write_jsonl, DatasetSpec, DistanceExpansion, LabeledBatch, Task,
};
use raggednn::models::{Model, ModelSpec};
use raggednn::ragged::PaddedBatch;
use raggednn::train::{
    evaluate, load_checkpoint, save_checkpoint, split_batches, EpochRecord, LossKind, Metrics, Session, TrainSettings,
};
use raggednn::{Error, Result};

use crate::config::{load_dataset, DatasetSource, RunConfig};
use crate::gradcheck::{check_named, LAYER_NAMES, TOLERANCE};
use crate::{resolve_seed, ConvertArgs, EvalArgs, GradcheckArgs, SplitArg, TrainArgs};

/// Artifacts of a finished `train` run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub records: Vec<EpochRecord>,
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

pub fn train(args: &TrainArgs, err: &mut dyn Write) -> Result<TrainOutcome> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = args.lr {
        cfg.optimizer.lr = lr;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    let seed = resolve_seed(args.seed, cfg.seed)?;

    let spec = ModelSpec::load(&cfg.model)?;
    let expansion = cfg.distance_expansion.as_ref();
    let names = cfg.target_names.as_deref();
    let (dataset, records) = load_dataset(&cfg.dataset, expansion, names)?;
    for (what, task) in [("model spec", spec.task), ("dataset", dataset.task)] {
        if let Some(t) = cfg.task.filter(|t| *t != task) {
            return Err(Error::Config(format!("task: config says {t:?} but the {what} has {task:?}")));
        }
    }
    let validation = match &cfg.validation {
        Some(p) => {
            let (vspec, vrecords) = load_dataset(&DatasetSource::Jsonl(p.clone()), expansion, names)?;
            spec.check_dataset(&vspec)
                .map_err(|e| Error::Config(format!("validation {}: {e}", p.display())))?;
            Some(vrecords)
        }
        None => None,
    };

    let settings = TrainSettings {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        loss: cfg.loss.unwrap_or(LossKind::default_for(dataset.task)),
        optimizer: cfg.optimizer,
        seed,
        split: cfg.split,
        shuffle: cfg.shuffle,
    };
    let model = Model::new(spec)?;
    let mut session = Session::new(model, dataset, records, validation, settings)?;

    std::fs::create_dir_all(&cfg.output_dir).map_err(io(&cfg.output_dir))?;
    let metrics_path = cfg.output_dir.join("metrics.jsonl");
    let checkpoint_path = cfg.output_dir.join("final.ckpt");
    let mut metrics = BufWriter::new(File::create(&metrics_path).map_err(io(&metrics_path))?);
    let mut records = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let rec = session.run_epoch()?;
        let line = serde_json::to_string(&rec).map_err(|e| Error::Numeric(format!("metrics not serializable: {e}")))?;
        writeln!(metrics, "{line}").map_err(io(&metrics_path))?;
        let _ = writeln!(err, "epoch {:>4}  loss {:.6}  {}", rec.epoch, rec.loss, format_metrics(&rec.metric));
        records.push(rec);
    }
    metrics.flush().map_err(io(&metrics_path))?;

    let mut ckpt = session.checkpoint();
    ckpt.expansion = cfg.distance_expansion.clone();
    save_checkpoint(&checkpoint_path, &ckpt)?;
    let _ = writeln!(err, "wrote {} and {}", metrics_path.display(), checkpoint_path.display());
    Ok(TrainOutcome {
        metrics_path,
        checkpoint_path,
        records,
    })
}

fn format_metrics(m: &Metrics) -> String {
    m.iter().map(|(k, v)| format!("{k} {v:.6}")).collect::<Vec<_>>().join("  ")
}

/// Metrics of a checkpoint on a dataset.
pub fn eval_metrics(args: &EvalArgs) -> Result<Metrics> {
    if !args.ckpt.is_file() {
        return Err(Error::Config(format!("checkpoint {} does not exist", args.ckpt.display())));
    }
    let ckpt = load_checkpoint(&args.ckpt)?;
    let source = match (&args.data, &args.nodes, &args.edges) {
        (Some(d), _, _) => DatasetSource::Jsonl(d.clone()),
        (None, Some(n), Some(e)) => DatasetSource::Citation {
            nodes: n.clone(),
            edges: e.clone(),
        },
        _ => return Err(Error::Config("pass --data, or --nodes with --edges".into())),
    };
    for p in match &source {
        DatasetSource::Jsonl(p) => vec![p],
        DatasetSource::Citation { nodes, edges } => vec![nodes, edges],
    } {
        if !p.is_file() {
            return Err(Error::Config(format!("dataset {} does not exist", p.display())));
        }
    }
    let (mut data, records) = load_dataset(&source, ckpt.expansion.as_ref(), None)?;
    if data.task == Task::GraphRegression && data.num_targets == ckpt.dataset.num_targets {
        data = data.with_target_names(ckpt.dataset.target_names.clone())?;
    }
    ckpt.model.check_dataset(&data)?;
    let model = ckpt.to_model()?;
    let batch_size = ckpt.split.map_or(32, |s| s.batch_size);
    let batches: Vec<LabeledBatch<f64>> = match args.split {
        SplitArg::All => batch_records(&records, batch_size, false, 0)?,
        split => {
            let info = ckpt
                .split
                .ok_or_else(|| Error::Config("checkpoint records no training split".into()))?;
            let [train, val, test] = split_batches(&records, &data, info.fractions, info.seed, info.batch_size)?;
            match split {
                SplitArg::Train => train,
                SplitArg::Val => val,
                _ => test,
            }
        }
    };
    if batches.iter().all(|b| b.targets.count() == 0) {
        return Err(Error::Validation("no graphs to evaluate".into()));
    }
    evaluate(&model, &batches, &data)
}

pub fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let metrics = eval_metrics(args)?;
    let line = serde_json::to_string(&metrics).map_err(|e| Error::Numeric(e.to_string()))?;
    writeln!(out, "{line}").map_err(|e| Error::Numeric(format!("cannot write output: {e}")))
}

pub fn gradcheck(args: &GradcheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let seed = resolve_seed(args.seed, None)?;
    let names: Vec<&str> = match args.layer.as_str() {
        "all" => LAYER_NAMES.to_vec(),
        name if LAYER_NAMES.contains(&name) => vec![name],
        other => {
            return Err(Error::Config(format!(
                "unknown layer {other}; valid names: {}, all",
                LAYER_NAMES.join(", ")
            )))
        }
    };
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(|e| Error::Numeric(e.to_string()));
    w(out, "layer,max_rel_error,coordinates,status".into())?;
    let (mut worst, mut coords, mut failed) = (0.0f64, 0usize, Vec::new());
    for name in &names {
        let report = check_named(name, seed, args.eps)?;
        let ok = report.max_rel_error <= TOLERANCE;
        if !ok {
            failed.push(*name);
        }
        worst = worst.max(report.max_rel_error);
        coords += report.coordinates;
        w(out, format!("{name},{:e},{},{}", report.max_rel_error, report.coordinates, status(ok)))?;
    }
    if names.len() > 1 {
        w(out, format!("all,{worst:e},{coords},{}", status(failed.is_empty())))?;
    }
    if failed.is_empty() {
        let _ = writeln!(err, "max relative error {worst:e} within {TOLERANCE:e}");
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "relative error above {TOLERANCE:e} for {}",
            failed.join(", ")
        )))
    }
}

fn status(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// One row of the `convert --report` table.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BatchStats {
    pub graphs: usize,
    pub nodes: usize,
    pub edges: usize,
    pub padded_node_cells: usize,
    pub padded_edge_cells: usize,
}

impl BatchStats {
    /// Padded node slots per ragged node row (1 when both are zero).
    pub fn overhead(&self) -> f64 {
        if self.nodes == 0 {
            1.0
        } else {
            self.padded_node_cells as f64 / self.nodes as f64
        }
    }

    fn add(&mut self, o: &BatchStats) {
        self.graphs += o.graphs;
        self.nodes += o.nodes;
        self.edges += o.edges;
        self.padded_node_cells += o.padded_node_cells;
        self.padded_edge_cells += o.padded_edge_cells;
    }
}

/// Node and edge slots of each batch in ragged and zero-padded form.
pub fn batch_stats(batches: &[LabeledBatch<f64>]) -> Vec<BatchStats> {
    batches
        .iter()
        .map(|b| {
            let g = &b.graphs;
            let padded = PaddedBatch::to_padded(g.nodes(), 0.0);
            let max_edges = g.edge_index().row_splits().max_len();
            BatchStats {
                graphs: g.num_graphs(),
                nodes: g.total_nodes(),
                edges: g.total_edges(),
                padded_node_cells: padded.mask().len(),
                padded_edge_cells: g.num_graphs() * max_edges,
            }
        })
        .collect()
}

pub fn convert(args: &ConvertArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if args.batch_size == 0 {
        return Err(Error::Config("--batch-size must be at least 1".into()));
    }
    if !args.input.is_file() {
        return Err(Error::Config(format!("input {} does not exist", args.input.display())));
    }
    let (mut spec, mut records) = load_jsonl_dataset(&args.input)?;
    if args.expand_distances {
        let exp = DistanceExpansion::default();
        records = records.iter().map(|r| expand_distances(r, &exp)).collect::<Result<_>>()?;
        spec = DatasetSpec {
            label_names: spec.label_names,
            ..DatasetSpec::infer(&records)?
        };
    }
    let _ = writeln!(
        err,
        "{} graphs, task {:?}, node width {}, edge width {}",
        records.len(),
        spec.task,
        spec.node_width,
        spec.edge_width
    );
    if args.report {
        let batches = batch_records::<f64>(&records, args.batch_size, false, 0)?;
        let stats = batch_stats(&batches);
        let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(|e| Error::Numeric(e.to_string()));
        w(
            out,
            "batch,graphs,nodes,edges,padded_node_cells,ragged_node_cells,padded_edge_cells,ragged_edge_cells,overhead".into(),
        )?;
        let mut total = BatchStats::default();
        let row = |label: String, s: &BatchStats| {
            format!(
                "{label},{},{},{},{},{},{},{},{}",
                s.graphs,
                s.nodes,
                s.edges,
                s.padded_node_cells,
                s.nodes,
                s.padded_edge_cells,
                s.edges,
                s.overhead()
            )
        };
        for (k, s) in stats.iter().enumerate() {
            w(out, row(k.to_string(), s))?;
            total.add(s);
        }
        w(out, row("total".into(), &total))?;
    }
    if let Some(path) = &args.out {
        write_jsonl(path, &records)?;
        let _ = writeln!(err, "wrote {}", path.display());
    }
    Ok(())
}
