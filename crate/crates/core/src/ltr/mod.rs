//! Pointwise learning to rank with a random-forest regressor.

mod cv;
mod forest;
mod model_io;

pub use cv::{ablation_to_tsv, cross_validate, feature_ablation, AblationRow, CvResult};
pub use forest::{ForestModel, Node, Tree};
pub use model_io::{decode_model, encode_model, load_model, save_model};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::ranking::ScoredList;

/// Largest possible gain (number of assessors per query).
pub const DEFAULT_MAX_GAIN: f64 = 7.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split = ceil(fraction × n_features).
    pub max_features_fraction: f64,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 1000,
            max_features_fraction: 0.10,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be ≥ 1".into()));
        }
        let f = self.max_features_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "max_features_fraction must be in (0, 1], got {f}"
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument("min_samples_leaf must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Number of candidate features examined at each split.
    pub fn max_features(&self, n_features: usize) -> usize {
        let m = (self.max_features_fraction * n_features as f64 - 1e-9).ceil();
        (m.max(1.0) as usize).min(n_features.max(1))
    }
}

/// Dense row-major training matrix with one real target per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n_features: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(n_features: usize) -> Self {
        Dataset {
            n_features,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut d = Dataset::new(n_features);
        if rows.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} targets",
                rows.len(),
                y.len()
            )));
        }
        for (r, &t) in rows.iter().zip(y) {
            d.push(r, t)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, row: &[f64], target: f64) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::InvalidData(format!(
                "feature row has width {}, expected {}",
                row.len(),
                self.n_features
            )));
        }
        if !target.is_finite() || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite value in training data".into()));
        }
        self.x.extend_from_slice(row);
        self.y.push(target);
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, i: usize, f: usize) -> f64 {
        self.x[i * self.n_features + f]
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    /// Training data from labeled feature rows, target = gain / `max_gain`.
    pub fn from_table(table: &FeatureTable, max_gain: f64) -> Result<Self> {
        Self::from_table_rows(table, 0..table.rows.len(), max_gain)
    }

    pub(crate) fn from_table_rows(
        table: &FeatureTable,
        rows: impl IntoIterator<Item = usize>,
        max_gain: f64,
    ) -> Result<Self> {
        if !(max_gain > 0.0 && max_gain.is_finite()) {
            return Err(Error::InvalidArgument(format!("max gain must be positive, got {max_gain}")));
        }
        let mut d = Dataset::new(table.n_features);
        for i in rows {
            let r = &table.rows[i];
            let gain = r.target.ok_or_else(|| {
                Error::InvalidData(format!("row ({}, {}) has no target", r.qid, r.type_id))
            })?;
            d.push(&r.values, gain / max_gain)?;
        }
        Ok(d)
    }
}

/// Ranks the table rows of every query by predicted score.
pub fn predict_table(model: &ForestModel, table: &FeatureTable) -> Result<crate::eval::RunFile> {
    let mut run = crate::eval::RunFile::new("ltr");
    for (qid, rows) in table.groups() {
        let scored = rows
            .iter()
            .map(|&i| {
                let r = &table.rows[i];
                model.predict(&r.values).map(|s| (r.type_id.clone(), s))
            })
            .collect::<Result<Vec<_>>>()?;
        run.insert(qid, ScoredList::from_scores(scored)?)?;
    }
    Ok(run)
}
