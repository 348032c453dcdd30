//! Config-driven end-to-end runner: split, transform, optional RBM feature
//! learning, 2-means clustering, evaluation and the five-arm comparison.

use std::collections::BTreeMap;

use chrono::Datelike;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{
    assign_classes_by_size, classes_for, kmeans_fit, kmeans_predict, ClusterError,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::features::{Dataset, FeatureError, FeatureVector};
use crate::metrics::{MetricsError, MetricsReport, SelectionMetric};
use crate::rbm::RbmError;
use crate::search::{grid_search, GridPoint, GridSpec, SearchConfig, SearchError, SearchReport};
use crate::transform::{TransformError, TransformKind, TransformModel};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error at `{key}`: {reason}")]
    Config { key: &'static str, reason: String },
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Rbm(#[from] RbmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

impl PipelineError {
    /// True when the failure is a training divergence (CLI exit code 4).
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            PipelineError::Rbm(RbmError::Diverged { .. })
                | PipelineError::Search(SearchError::AllPointsFailed(_))
        )
    }

    /// True for config/validation failures (CLI exit code 2).
    pub fn is_config(&self) -> bool {
        matches!(self, PipelineError::Config { .. })
    }
}

/// Which Gaussianizing transform the arm applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TransformChoice {
    #[default]
    None,
    Zscore,
    Power,
}

impl TransformChoice {
    fn kind(self) -> TransformKind {
        match self {
            TransformChoice::None => TransformKind::Identity,
            TransformChoice::Zscore => TransformKind::Zscore,
            TransformChoice::Power => TransformKind::YeoJohnson,
        }
    }
}

/// RBM feature learning: off, fixed hyperparameters, or grid-searched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLearning {
    #[default]
    None,
    RbmFixed {
        hidden_units: usize,
        learning_rate: f64,
        batch_size: usize,
    },
    RbmGrid(GridSpec),
}

/// Flat, versioned pipeline configuration. CLI flags override these keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub transform: TransformChoice,
    pub feature_learning: FeatureLearning,
    pub kmeans_seed: u64,
    pub selection_metric: SelectionMetric,
    pub master_seed: u64,
    pub rbm_epochs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: SCHEMA_VERSION,
            transform: TransformChoice::None,
            feature_learning: FeatureLearning::None,
            kmeans_seed: 0,
            selection_metric: SelectionMetric::WeightedRecall,
            master_seed: 1,
            rbm_epochs: 20,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.rbm_epochs == 0 {
            return Err(PipelineError::Config {
                key: "rbm_epochs",
                reason: "must be >= 1".into(),
            });
        }
        if let FeatureLearning::RbmFixed {
            hidden_units,
            learning_rate,
            batch_size,
        } = &self.feature_learning
        {
            if *hidden_units == 0 || *batch_size == 0 || !(*learning_rate > 0.0) {
                return Err(PipelineError::Config {
                    key: "feature_learning",
                    reason: "fixed RBM hyperparameters must be positive".into(),
                });
            }
        }
        Ok(())
    }

    /// Canonical model name in the five-arm convention.
    pub fn arm_name(&self) -> String {
        let prefix = match self.transform {
            TransformChoice::None => "",
            TransformChoice::Zscore => "ZN_",
            TransformChoice::Power => "PT_",
        };
        let rbm = match self.feature_learning {
            FeatureLearning::None => "",
            _ => "RBM_",
        };
        format!("{prefix}{rbm}k-means")
    }
}

/// Semi-supervised split: labeled rows form the validation set, unlabeled
/// rows form the training set.
pub fn split_dataset(
    dataset: &Dataset,
) -> Result<(Vec<&FeatureVector>, Vec<&FeatureVector>), PipelineError> {
    let (val, train): (Vec<&FeatureVector>, Vec<&FeatureVector>) =
        dataset.rows.iter().partition(|r| r.label.is_some());
    if val.is_empty() {
        return Err(PipelineError::Data(
            "no labeled rows: validation set would be empty".into(),
        ));
    }
    if train.is_empty() {
        return Err(PipelineError::Data(
            "all rows labeled: the semi-supervised protocol requires unlabeled training mass"
                .into(),
        ));
    }
    Ok((train, val))
}

fn feature_matrix(rows: &[&FeatureVector]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), 4), |(i, j)| rows[i].fractions()[j])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_total: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub validation_positive: usize,
    pub validation_negative: usize,
}

/// One comparison row in the Table-2 shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRow {
    pub model: String,
    pub metrics: MetricsReport,
    pub chosen_hyperparameters: Option<GridPoint>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub config: PipelineConfig,
    pub dataset: DatasetSummary,
    pub rows: Vec<ArmRow>,
    /// Fitted transform parameters of the (last) executed arm.
    pub transform_model: Option<TransformModel>,
    pub search: Option<SearchReport>,
    pub total_wall_time_s: f64,
}

impl EvaluationReport {
    /// Copy with timing fields zeroed, for byte-identical determinism checks.
    pub fn without_timing(&self) -> EvaluationReport {
        let mut r = self.clone();
        r.total_wall_time_s = 0.0;
        for row in &mut r.rows {
            row.wall_time_s = 0.0;
        }
        if let Some(s) = &mut r.search {
            for rec in &mut s.records {
                rec.wall_time_s = 0.0;
            }
        }
        r
    }
}

fn summarize(train: &[&FeatureVector], val: &[&FeatureVector]) -> DatasetSummary {
    let pos = val.iter().filter(|r| r.label == Some(1)).count();
    DatasetSummary {
        n_total: train.len() + val.len(),
        n_train: train.len(),
        n_validation: val.len(),
        validation_positive: pos,
        validation_negative: val.len() - pos,
    }
}

/// Execute one configured arm on the dataset and evaluate on the labeled
/// validation rows. Deterministic for a fixed master seed.
pub fn run_pipeline(
    config: &PipelineConfig,
    dataset: &Dataset,
) -> Result<EvaluationReport, PipelineError> {
    config.validate()?;
    let start = std::time::Instant::now();
    let (train, val) = split_dataset(dataset)?;
    let summary = summarize(&train, &val);
    if summary.validation_positive == 0 || summary.validation_negative == 0 {
        return Err(PipelineError::Data(
            "validation rows must contain both classes".into(),
        ));
    }
    let val_labels: Vec<u8> = val.iter().map(|r| r.label.unwrap()).collect();

    let train_x = feature_matrix(&train);
    let val_x = feature_matrix(&val);

    let transform = TransformModel::fit(config.transform.kind(), &train_x)?;
    let train_t = transform.apply(&train_x)?;
    let val_t = transform.apply(&val_x)?;

    let arm_start = std::time::Instant::now();
    let (metrics, chosen, search) = match &config.feature_learning {
        FeatureLearning::None => {
            let (mut km, assignments) = kmeans_fit(
                &train_t,
                2,
                config.kmeans_seed,
                DEFAULT_MAX_ITER,
                DEFAULT_TOL,
            )?;
            assign_classes_by_size(&mut km, &assignments)?;
            let clusters = kmeans_predict(&km, &val_t)?;
            let y_pred = classes_for(&km, &clusters).expect("classes assigned");
            (MetricsReport::compute(&val_labels, &y_pred)?, None, None)
        }
        FeatureLearning::RbmFixed {
            hidden_units,
            learning_rate,
            batch_size,
        } => {
            let spec = GridSpec {
                hidden_units: vec![*hidden_units],
                learning_rates: crate::search::RateAxis::List(vec![*learning_rate]),
                batch_sizes: vec![*batch_size],
            };
            let report = run_search(config, &train_t, &val_t, &val_labels, &spec)?;
            let best = report.best().clone();
            (
                best.metrics.expect("best point succeeded"),
                Some(best.point),
                Some(report),
            )
        }
        FeatureLearning::RbmGrid(spec) => {
            let report = run_search(config, &train_t, &val_t, &val_labels, spec)?;
            let best = report.best().clone();
            (
                best.metrics.expect("best point succeeded"),
                Some(best.point),
                Some(report),
            )
        }
    };

    Ok(EvaluationReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        dataset: summary,
        rows: vec![ArmRow {
            model: config.arm_name(),
            metrics,
            chosen_hyperparameters: chosen,
            wall_time_s: arm_start.elapsed().as_secs_f64(),
        }],
        transform_model: Some(transform),
        search,
        total_wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn run_search(
    config: &PipelineConfig,
    train_t: &Array2<f64>,
    val_t: &Array2<f64>,
    val_labels: &[u8],
    spec: &GridSpec,
) -> Result<SearchReport, PipelineError> {
    let cfg = SearchConfig {
        epochs: config.rbm_epochs,
        master_seed: config.master_seed,
        kmeans_seed: config.kmeans_seed,
        selection_metric: config.selection_metric,
    };
    Ok(grid_search(train_t, val_t, val_labels, spec, &cfg)?)
}

/// The five experimental arms, in presentation order.
pub fn five_arms(base: &PipelineConfig, grid: &GridSpec) -> Vec<PipelineConfig> {
    let arm = |transform, feature_learning| PipelineConfig {
        transform,
        feature_learning,
        ..base.clone()
    };
    vec![
        arm(TransformChoice::None, FeatureLearning::None),
        arm(TransformChoice::Zscore, FeatureLearning::None),
        arm(TransformChoice::Power, FeatureLearning::None),
        arm(
            TransformChoice::Zscore,
            FeatureLearning::RbmGrid(grid.clone()),
        ),
        arm(
            TransformChoice::Power,
            FeatureLearning::RbmGrid(grid.clone()),
        ),
    ]
}

/// Run all five arms and collect a Table-2-shaped report.
pub fn compare(
    base: &PipelineConfig,
    grid: &GridSpec,
    dataset: &Dataset,
) -> Result<EvaluationReport, PipelineError> {
    let start = std::time::Instant::now();
    let mut rows = Vec::new();
    let mut last_transform = None;
    let mut last_search = None;
    let mut dataset_summary = None;
    for config in five_arms(base, grid) {
        let report = run_pipeline(&config, dataset)?;
        rows.extend(report.rows);
        last_transform = report.transform_model;
        if report.search.is_some() {
            last_search = report.search;
        }
        dataset_summary = Some(report.dataset);
    }
    Ok(EvaluationReport {
        schema_version: SCHEMA_VERSION,
        config: base.clone(),
        dataset: dataset_summary.expect("at least one arm ran"),
        rows,
        transform_model: last_transform,
        search: last_search,
        total_wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Table-2-shaped CSV for the comparison report.
pub fn write_compare_csv<W: std::io::Write>(
    report: &EvaluationReport,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(
        out,
        "model,recall,f1,mce,batch_size,learning_rate,hidden_units"
    )?;
    for row in &report.rows {
        let (bs, lr, h) = match row.chosen_hyperparameters {
            Some(p) => (
                p.batch_size.to_string(),
                format!("{}", p.learning_rate),
                p.hidden_units.to_string(),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.model,
            crate::metrics::fmt_opt(row.metrics.recall.weighted),
            crate::metrics::fmt_opt(row.metrics.f1.weighted),
            crate::metrics::fmt_opt(row.metrics.mce),
            bs,
            lr,
            h
        )?;
    }
    Ok(())
}

/// KPI grouping period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpiPeriod {
    Year,
    Month,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRow {
    pub period: String,
    pub mean_pct_silence: f64,
    pub call_count: usize,
}

/// Mean silence fraction per calendar period, sorted ascending.
pub fn kpi_report(dataset: &Dataset, period: KpiPeriod) -> Result<Vec<KpiRow>, PipelineError> {
    let missing: Vec<&str> = dataset
        .rows
        .iter()
        .filter(|r| r.date.is_none())
        .map(|r| r.call_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(PipelineError::Data(format!(
            "rows without timestamps: {}",
            missing.join(", ")
        )));
    }
    let mut groups: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for row in &dataset.rows {
        let date = row.date.unwrap();
        let key = match period {
            KpiPeriod::Year => format!("{}", date.year()),
            KpiPeriod::Month => format!("{}-{:02}", date.year(), date.month()),
        };
        let entry = groups.entry(key).or_insert((0.0, 0));
        entry.0 += row.pct_silence;
        entry.1 += 1;
    }
    Ok(groups
        .into_iter()
        .map(|(period, (sum, count))| KpiRow {
            period,
            mean_pct_silence: sum / count as f64,
            call_count: count,
        })
        .collect())
}
