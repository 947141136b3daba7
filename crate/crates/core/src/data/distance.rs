use serde::{Deserialize, Serialize};

use super::GraphRecord;
use crate::error::{ensure, Error, Result};
use crate::layers::gaussian_basis;

/// Radius graph plus Gaussian expansion of interatomic distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceExpansion {
    pub cutoff: f64,
    pub centers: Vec<f64>,
    pub gamma: f64,
}

impl Default for DistanceExpansion {
    /// 20 centers spaced uniformly on `[0, 4]`, `γ = 10`, cutoff 4.
    fn default() -> Self {
        Self::uniform(4.0, 20, 0.0, 4.0, 10.0)
    }
}

impl DistanceExpansion {
    pub fn uniform(cutoff: f64, count: usize, start: f64, stop: f64, gamma: f64) -> Self {
        let step = if count > 1 { (stop - start) / (count - 1) as f64 } else { 0.0 };
        Self {
            cutoff,
            centers: (0..count).map(|k| start + step * k as f64).collect(),
            gamma,
        }
    }
}

/// Replaces the edge set with every ordered pair `(i, j)`, `i ≠ j`, at
/// distance `≤ cutoff`, featurized by the Gaussian basis of the distance.
/// Pairs are ordered by receiver, then sender.
pub fn expand_distances(record: &GraphRecord, expansion: &DistanceExpansion) -> Result<GraphRecord> {
    ensure!(expansion.cutoff > 0.0, Contract, "cutoff radius must be positive, got {}", expansion.cutoff);
    let pos = record
        .positions
        .as_ref()
        .ok_or_else(|| Error::Contract(format!("graph {} has no positions", record.id)))?;
    let mut pairs = Vec::new();
    let mut dists = Vec::new();
    for (i, pi) in pos.iter().enumerate() {
        for (j, pj) in pos.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d <= expansion.cutoff {
                pairs.push([i, j]);
                dists.push(d);
            }
        }
    }
    let features = gaussian_basis(&dists, &expansion.centers, expansion.gamma)?;
    Ok(GraphRecord {
        edge_index: pairs,
        edge_features: Some(features),
        ..record.clone()
    })
}
