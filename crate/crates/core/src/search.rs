//! Exhaustive grid search over RBM hyperparameters: one RBM + k-means is
//! trained per grid point and the point maximizing the validation selection
//! metric (weighted recall by default) wins. Ties break to the earlier grid
//! position.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

use crate::cluster::{
    assign_classes_by_size, classes_for, kmeans_fit, kmeans_predict, ClusterError,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::metrics::{MetricsError, MetricsReport, SelectionMetric};
use crate::rbm::{hidden_features, rbm_init, train, MinMaxScaler, RbmError, RbmHyper};
use crate::{derive_seed, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("grid axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("grid axis `{axis}` contains non-positive value")]
    NonPositive { axis: &'static str },
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("validation set contains only class {0}")]
    SingleClassValidation(u8),
    #[error("all {0} grid points failed to train")]
    AllPointsFailed(usize),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Rbm(#[from] RbmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Learning-rate axis: explicit list or a logspace descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateAxis {
    List(Vec<f64>),
    Logspace {
        lo_exp: f64,
        hi_exp: f64,
        count: usize,
    },
}

impl RateAxis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            RateAxis::List(v) => v.clone(),
            RateAxis::Logspace {
                lo_exp,
                hi_exp,
                count,
            } => logspace(*lo_exp, *hi_exp, *count),
        }
    }
}

/// `10^(lo + i*(hi-lo)/(count-1))` for `i = 0..count`.
pub fn logspace(lo_exp: f64, hi_exp: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![10f64.powf(lo_exp)];
    }
    (0..count)
        .map(|i| 10f64.powf(lo_exp + i as f64 * (hi_exp - lo_exp) / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub hidden_units: Vec<usize>,
    pub learning_rates: RateAxis,
    pub batch_sizes: Vec<usize>,
}

impl GridSpec {
    /// The published hyperparameter grid: 7 hidden sizes x logspace(-3,0,20)
    /// rates x 4 batch sizes = 560 points.
    pub fn full() -> GridSpec {
        GridSpec {
            hidden_units: vec![2, 20, 45, 70, 135, 170, 200],
            learning_rates: RateAxis::Logspace {
                lo_exp: -3.0,
                hi_exp: 0.0,
                count: 20,
            },
            batch_sizes: vec![8, 16, 64, 128],
        }
    }

    /// Desk-scale grid used by the synthetic benchmark.
    pub fn reduced() -> GridSpec {
        GridSpec {
            hidden_units: vec![2, 20],
            learning_rates: RateAxis::List(vec![0.01, 0.1]),
            batch_sizes: vec![8, 64],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

/// Cartesian product in lexicographic order: hidden, then rate, then batch.
pub fn build_grid(spec: &GridSpec) -> Result<Vec<GridPoint>, SearchError> {
    if spec.hidden_units.is_empty() {
        return Err(SearchError::EmptyAxis("hidden_units"));
    }
    if spec.batch_sizes.is_empty() {
        return Err(SearchError::EmptyAxis("batch_sizes"));
    }
    let rates = spec.learning_rates.values();
    if rates.is_empty() {
        return Err(SearchError::EmptyAxis("learning_rates"));
    }
    if spec.hidden_units.contains(&0) {
        return Err(SearchError::NonPositive {
            axis: "hidden_units",
        });
    }
    if spec.batch_sizes.contains(&0) {
        return Err(SearchError::NonPositive { axis: "batch_sizes" });
    }
    if rates.iter().any(|&r| r <= 0.0) {
        return Err(SearchError::NonPositive {
            axis: "learning_rates",
        });
    }
    let mut grid = Vec::with_capacity(spec.hidden_units.len() * rates.len() * spec.batch_sizes.len());
    for &h in &spec.hidden_units {
        for &r in &rates {
            for &b in &spec.batch_sizes {
                grid.push(GridPoint {
                    hidden_units: h,
                    learning_rate: r,
                    batch_size: b,
                });
            }
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub point: GridPoint,
    pub rbm_seed: u64,
    /// None when training diverged at this point.
    pub metrics: Option<MetricsReport>,
    pub failure: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub schema_version: u32,
    pub selection_metric: SelectionMetric,
    pub master_seed: u64,
    pub kmeans_seed: u64,
    pub epochs: usize,
    pub records: Vec<PointRecord>,
    pub best_index: usize,
}

impl SearchReport {
    pub fn best(&self) -> &PointRecord {
        &self.records[self.best_index]
    }

    /// Recompute the argmax from the records; used to cross-check a
    /// deserialized report against its stored best point.
    pub fn recompute_best(&self) -> Option<usize> {
        argmax_record(&self.records, self.selection_metric)
    }

    /// Flat one-row-per-point CSV for external plotting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "index,hidden_units,learning_rate,batch_size,status,selection_value,recall_pos,recall_weighted,f1_weighted,mce,wall_time_s"
        )?;
        for r in &self.records {
            let (status, sel, rp, rw, fw, mce) = match &r.metrics {
                Some(m) => (
                    "ok",
                    fmt(m.select(self.selection_metric)),
                    fmt(m.recall.pos),
                    fmt(m.recall.weighted),
                    fmt(m.f1.weighted),
                    fmt(m.mce),
                ),
                None => (
                    "failed",
                    "n/a".into(),
                    "n/a".into(),
                    "n/a".into(),
                    "n/a".into(),
                    "n/a".into(),
                ),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{:.3}",
                r.index,
                r.point.hidden_units,
                r.point.learning_rate,
                r.point.batch_size,
                status,
                sel,
                rp,
                rw,
                fw,
                mce,
                r.wall_time_s
            )?;
        }
        Ok(())
    }
}

fn fmt(v: Option<f64>) -> String {
    crate::metrics::fmt_opt(v)
}

fn argmax_record(records: &[PointRecord], metric: SelectionMetric) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for r in records {
        if let Some(value) = r.metrics.as_ref().and_then(|m| m.select(metric)) {
            match best {
                // strict > keeps the earliest grid position on ties
                Some((_, bv)) if value <= bv => {}
                _ => best = Some((r.index, value)),
            }
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    pub epochs: usize,
    pub master_seed: u64,
    pub kmeans_seed: u64,
    pub selection_metric: SelectionMetric,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            epochs: 20,
            master_seed: 1,
            kmeans_seed: 0,
            selection_metric: SelectionMetric::WeightedRecall,
        }
    }
}

/// Evaluate one grid point: scale, train an RBM, extract hidden features for
/// train and validation, cluster the training features, assign classes by
/// size, predict validation and score.
fn evaluate_point(
    train_x: &Array2<f64>,
    val_x: &Array2<f64>,
    val_labels: &[u8],
    point: GridPoint,
    rbm_seed: u64,
    cfg: &SearchConfig,
) -> Result<MetricsReport, SearchError> {
    let scaler = MinMaxScaler::fit(train_x)?;
    let train_scaled = scaler.apply(train_x)?;
    let val_scaled = scaler.apply(val_x)?;

    let hyper = RbmHyper {
        learning_rate: point.learning_rate,
        batch_size: point.batch_size,
        n_hidden: point.hidden_units,
        epochs: cfg.epochs,
    };
    let mut model = rbm_init(train_x.ncols(), point.hidden_units, rbm_seed, hyper)?;
    train(&mut model, &train_scaled)?;

    let train_h = hidden_features(&model, &train_scaled)?;
    let val_h = hidden_features(&model, &val_scaled)?;

    let (mut km, assignments) = kmeans_fit(&train_h, 2, cfg.kmeans_seed, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
    assign_classes_by_size(&mut km, &assignments)?;
    let val_clusters = kmeans_predict(&km, &val_h)?;
    let y_pred = classes_for(&km, &val_clusters).expect("classes assigned");
    Ok(MetricsReport::compute(val_labels, &y_pred)?)
}

/// Run the full grid. Points are evaluated concurrently; the report is
/// assembled in grid order, so results are independent of scheduling.
pub fn grid_search(
    train_x: &Array2<f64>,
    val_x: &Array2<f64>,
    val_labels: &[u8],
    spec: &GridSpec,
    cfg: &SearchConfig,
) -> Result<SearchReport, SearchError> {
    if val_labels.is_empty() {
        return Err(SearchError::EmptyValidation);
    }
    if val_labels.iter().all(|&l| l == val_labels[0]) {
        return Err(SearchError::SingleClassValidation(val_labels[0]));
    }
    let grid = build_grid(spec)?;
    let records: Vec<PointRecord> = grid
        .par_iter()
        .enumerate()
        .map(|(index, &point)| {
            let rbm_seed = derive_seed(cfg.master_seed, index as u64);
            let start = std::time::Instant::now();
            let result = evaluate_point(train_x, val_x, val_labels, point, rbm_seed, cfg);
            let wall_time_s = start.elapsed().as_secs_f64();
            match result {
                Ok(metrics) => PointRecord {
                    index,
                    point,
                    rbm_seed,
                    metrics: Some(metrics),
                    failure: None,
                    wall_time_s,
                },
                Err(e) => PointRecord {
                    index,
                    point,
                    rbm_seed,
                    metrics: None,
                    failure: Some(e.to_string()),
                    wall_time_s,
                },
            }
        })
        .collect();
    let best_index = argmax_record(&records, cfg.selection_metric)
        .ok_or(SearchError::AllPointsFailed(records.len()))?;
    Ok(SearchReport {
        schema_version: SCHEMA_VERSION,
        selection_metric: cfg.selection_metric,
        master_seed: cfg.master_seed,
        kmeans_seed: cfg.kmeans_seed,
        epochs: cfg.epochs,
        records,
        best_index,
    })
}
