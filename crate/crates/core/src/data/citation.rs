use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use ndarray::Array2;

use super::{DatasetSpec, GraphRecord, Target};
use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads a citation network from two headerless TSV files:
/// `node_id \t f_1 ... f_F \t label` and `src_id \t dst_id`.
///
/// Node ids are remapped to `0..N` in file order. Class ids follow the
/// lexicographic order of the label strings. Every citation is stored in
/// both directions; repeated citations and self-citations are dropped.
pub fn load_citation_dataset(
    nodes_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
) -> Result<(DatasetSpec, GraphRecord)> {
    let nodes_path = nodes_path.as_ref();
    let edges_path = edges_path.as_ref();
    let nodes_text = read(nodes_path)?;
    let edges_text = read(edges_path)?;
    let where_ = |path: &Path, line: usize, msg: String| {
        Error::Parse(format!("{}: line {line}: {msg}", path.display()))
    };

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut features: Vec<f64> = Vec::new();
    let mut width = None;
    let mut raw_labels = Vec::new();
    for (k, line) in nodes_text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 {
            return Err(where_(nodes_path, k + 1, "expected node_id, features and label".into()));
        }
        let id = cols[0].to_string();
        let feats = &cols[1..cols.len() - 1];
        match width {
            None => width = Some(feats.len()),
            Some(w) if w != feats.len() => {
                return Err(where_(nodes_path, k + 1, format!("{} features, expected {w}", feats.len())))
            }
            _ => {}
        }
        for f in feats {
            features.push(
                f.trim()
                    .parse()
                    .map_err(|_| where_(nodes_path, k + 1, format!("bad feature value {f:?}")))?,
            );
        }
        raw_labels.push(cols[cols.len() - 1].trim().to_string());
        if index.insert(id.clone(), index.len()).is_some() {
            return Err(where_(nodes_path, k + 1, format!("duplicate node id {id:?}")));
        }
    }
    let n = index.len();
    let width = width.unwrap_or(0);

    let label_names: Vec<String> = raw_labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let class_of: BTreeMap<&str, usize> = label_names.iter().enumerate().map(|(c, l)| (l.as_str(), c)).collect();
    let labels = raw_labels.iter().map(|l| class_of[l.as_str()]).collect();

    let mut pairs = BTreeSet::new();
    for (k, line) in edges_text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(where_(edges_path, k + 1, "expected src_id and dst_id".into()));
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::Validation(format!("{}: line {}: unknown node id {id:?}", edges_path.display(), k + 1)))
        };
        let (src, dst) = (lookup(cols[0])?, lookup(cols[1])?);
        if src != dst {
            pairs.insert([dst, src]);
            pairs.insert([src, dst]);
        }
    }

    let record = GraphRecord {
        id: nodes_path.file_stem().map_or_else(|| "citation".into(), |s| s.to_string_lossy().into_owned()),
        node_features: Array2::from_shape_vec((n, width), features).expect("widths checked"),
        edge_index: pairs.into_iter().collect(),
        edge_features: None,
        positions: None,
        state: None,
        target: Target::NodeLabels(labels),
    };
    let mut spec = DatasetSpec::infer(std::slice::from_ref(&record))?;
    spec.num_classes = label_names.len();
    spec.label_names = label_names;
    Ok((spec, record))
}
