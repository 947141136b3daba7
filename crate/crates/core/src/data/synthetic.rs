//! Seeded synthetic datasets shaped like the usual benchmarks: a two-block
//! citation-style graph, MUTAG-style labelled molecules and QM9-style
//! molecules with 3D positions and orbital-energy targets (eV).
//!
//! The generating rules are simple and documented on each function so
//! that results on these sets are interpretable; none of them reproduces a
//! published dataset.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use super::{GraphRecord, Target, Task};
use crate::ragged::EdgePair;

/// Two-block stochastic block model with `n` nodes (first half block 0).
///
/// Each unordered pair is connected with probability `p_in` inside a block
/// and `p_out` across blocks, stored in both directions. Features are an
/// 8-wide block indicator (columns 0..4 for block 0, 4..8 for block 1) plus
/// Gaussian noise of standard deviation `noise`.
pub fn stochastic_block_model(n: usize, p_in: f64, p_out: f64, noise: f64, seed: u64) -> GraphRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = |i: usize| usize::from(i >= n / 2);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block(i) == block(j) { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push([i, j]);
                edges.push([j, i]);
            }
        }
    }
    edges.sort();
    let gauss = Normal::new(0.0, noise).expect("noise must be finite and non-negative");
    let features = Array2::from_shape_fn((n, 8), |(i, c)| {
        let indicator = if c / 4 == block(i) { 1.0 } else { 0.0 };
        indicator + gauss.sample(&mut rng)
    });
    GraphRecord {
        id: format!("sbm-{seed}"),
        node_features: features,
        edge_index: edges,
        edge_features: None,
        positions: None,
        state: None,
        target: Target::NodeLabels((0..n).map(block).collect()),
    }
}

/// Shape of the graphs drawn by [`random_graphs`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomGraphs {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub max_edges: usize,
    pub node_width: usize,
    pub edge_width: usize,
    pub state_width: usize,
    pub targets: usize,
    pub task: Task,
}

/// Graphs with uniform node counts, distinct non-loop directed edges and
/// standard normal features. Regression targets, graph labels or node
/// labels (below `targets` classes) follow `task`.
pub fn random_graphs(count: usize, shape: RandomGraphs, seed: u64) -> Vec<GraphRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    (0..count)
        .map(|k| {
            let n = rng.gen_range(shape.min_nodes..=shape.max_nodes);
            let mut candidates: Vec<EdgePair> = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| [i, j]))
                .collect();
            candidates.shuffle(&mut rng);
            let m = rng.gen_range(0..=shape.max_edges.min(candidates.len()));
            let mut edges = candidates[..m].to_vec();
            edges.sort();
            let mut normal = |rows: usize, cols: usize| Array2::from_shape_simple_fn((rows, cols), || gauss.sample(&mut rng));
            let node_features = normal(n, shape.node_width);
            let edge_features = (shape.edge_width > 0).then(|| normal(m, shape.edge_width));
            let state = (shape.state_width > 0).then(|| normal(1, shape.state_width).into_raw_vec_and_offset().0);
            let target = match shape.task {
                Task::GraphRegression => Target::Regression(normal(1, shape.targets).into_raw_vec_and_offset().0),
                Task::GraphClassification => Target::GraphLabel(rng.gen_range(0..shape.targets)),
                Task::NodeClassification => Target::NodeLabels((0..n).map(|_| rng.gen_range(0..shape.targets)).collect()),
            };
            GraphRecord {
                id: format!("random-{k}"),
                node_features,
                edge_index: edges,
                edge_features,
                positions: None,
                state,
                target,
            }
        })
        .collect()
}

const MUTAG_ATOMS: usize = 7; // C N O F I Cl Br
const BOND_TYPES: usize = 4; // aromatic single double triple

struct MoleculeBuilder {
    atoms: Vec<usize>,
    bonds: Vec<(usize, usize, usize)>,
}

impl MoleculeBuilder {
    fn atom(&mut self, kind: usize) -> usize {
        self.atoms.push(kind);
        self.atoms.len() - 1
    }

    fn bond(&mut self, a: usize, b: usize, kind: usize) {
        self.bonds.push((a, b, kind));
    }

    fn ring(&mut self, fuse_to: Option<(usize, usize)>) -> Vec<usize> {
        let mut ring: Vec<usize> = match fuse_to {
            Some((a, b)) => vec![a, b],
            None => vec![self.atom(0)],
        };
        while ring.len() < 6 {
            let next = self.atom(0);
            self.bond(*ring.last().unwrap(), next, 0);
            ring.push(next);
        }
        self.bond(ring[5], ring[0], 0);
        ring
    }

    fn into_record(self, id: String, label: usize) -> GraphRecord {
        let n = self.atoms.len();
        let mut nodes = Array2::zeros((n, MUTAG_ATOMS));
        for (i, &a) in self.atoms.iter().enumerate() {
            nodes[[i, a]] = 1.0;
        }
        let mut edges: Vec<(EdgePair, usize)> = Vec::new();
        for &(a, b, kind) in &self.bonds {
            edges.push(([a, b], kind));
            edges.push(([b, a], kind));
        }
        edges.sort();
        let mut edge_features = Array2::zeros((edges.len(), BOND_TYPES));
        for (k, (_, kind)) in edges.iter().enumerate() {
            edge_features[[k, *kind]] = 1.0;
        }
        GraphRecord {
            id,
            node_features: nodes,
            edge_index: edges.into_iter().map(|(p, _)| p).collect(),
            edge_features: Some(edge_features),
            positions: None,
            state: None,
            target: Target::GraphLabel(label),
        }
    }
}

/// Aromatic ring systems with substituents; label 1 exactly when the
/// molecule carries a nitro group (an N bonded to two O). Labels alternate
/// so classes are balanced. Node features are 7-wide one-hot atom types,
/// edge features 4-wide one-hot bond types.
pub fn mutag_like(count: usize, seed: u64) -> Vec<GraphRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let label = k % 2;
            let mut m = MoleculeBuilder {
                atoms: Vec::new(),
                bonds: Vec::new(),
            };
            let mut rings = vec![m.ring(None)];
            for _ in 0..rng.gen_range(0..3) {
                let host = &rings[rng.gen_range(0..rings.len())];
                let e = rng.gen_range(0..6);
                let fused = m.ring(Some((host[e], host[(e + 1) % 6])));
                rings.push(fused);
            }
            let carbons: Vec<usize> = rings.concat();
            let attach = |rng: &mut ChaCha8Rng| carbons[rng.gen_range(0..carbons.len())];
            if label == 1 {
                let c = attach(&mut rng);
                let n = m.atom(1);
                m.bond(c, n, 1);
                let o1 = m.atom(2);
                let o2 = m.atom(2);
                m.bond(n, o1, 2);
                m.bond(n, o2, 1);
            }
            for _ in 0..rng.gen_range(1..4) {
                let c = attach(&mut rng);
                match rng.gen_range(0..6) {
                    // amine
                    0 => {
                        let n = m.atom(1);
                        m.bond(c, n, 1);
                    }
                    // hydroxyl
                    1 => {
                        let o = m.atom(2);
                        m.bond(c, o, 1);
                    }
                    // carbonyl-like N=O, never a nitro group
                    2 => {
                        let n = m.atom(1);
                        let o = m.atom(2);
                        m.bond(c, n, 1);
                        m.bond(n, o, 2);
                    }
                    halogen => {
                        let x = m.atom([3, 4, 5, 6][halogen - 3 + rng.gen_range(0..2)]);
                        m.bond(c, x, 1);
                    }
                }
            }
            m.into_record(format!("mutag-{k}"), label)
        })
        .collect()
}

/// Target names of [`qm9_like`] in column order.
pub const QM9_TARGETS: [&str; 3] = ["homo", "lumo", "gap"];

/// Small molecules of 5 to 12 atoms (one-hot H C N O F) grown with bond
/// lengths in `[1.0, 1.6]` and no two atoms closer than 0.9.
///
/// With `env_i = Σ_j exp(−(d_ij − 1.5)² / 0.5)` over atoms within 4:
/// `homo = −7.0 + mean_i(a[t_i] + 0.5 tanh(env_i − 1.5))`,
/// `lumo = 2.0 + mean_i(b[t_i] − 0.4 env_i)`, `gap = lumo − homo`.
/// Edges are left empty; use a distance expansion to build them.
pub fn qm9_like(count: usize, seed: u64) -> Vec<GraphRecord> {
    const A: [f64; 5] = [0.9, 0.0, 1.2, -0.9, -1.8];
    const B: [f64; 5] = [3.0, -1.2, 0.6, -3.0, -1.8];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let n = rng.gen_range(5..=12);
            let mut pos: Vec<[f64; 3]> = vec![[0.0; 3]];
            while pos.len() < n {
                let anchor = pos[rng.gen_range(0..pos.len())];
                let dir: [f64; 3] = UnitSphere.sample(&mut rng);
                let len = rng.gen_range(1.0..1.6);
                let p = [0, 1, 2].map(|c| anchor[c] + len * dir[c]);
                if pos.iter().all(|q| dist(q, &p) >= 0.9) {
                    pos.push(p);
                }
            }
            let types: Vec<usize> = (0..n).map(|_| [0, 0, 1, 1, 1, 2, 3, 4][rng.gen_range(0..8)]).collect();
            let env: Vec<f64> = (0..n)
                .map(|i| {
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| dist(&pos[i], &pos[j]))
                        .filter(|&d| d <= 4.0)
                        .map(|d| (-(d - 1.5).powi(2) / 0.5).exp())
                        .sum()
                })
                .collect();
            let mean = |f: &dyn Fn(usize) -> f64| (0..n).map(f).sum::<f64>() / n as f64;
            let homo = -7.0 + mean(&|i| A[types[i]] + 0.5 * (env[i] - 1.5).tanh());
            let lumo = 2.0 + mean(&|i| B[types[i]] - 0.4 * env[i]);
            let mut nodes = Array2::zeros((n, 5));
            for (i, &t) in types.iter().enumerate() {
                nodes[[i, t]] = 1.0;
            }
            GraphRecord {
                id: format!("qm9-{k}"),
                node_features: nodes,
                edge_index: Vec::new(),
                edge_features: None,
                positions: Some(pos),
                state: None,
                target: Target::Regression(vec![homo, lumo, lumo - homo]),
            }
        })
        .collect()
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>().sqrt()
}
