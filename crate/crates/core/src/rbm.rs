//! Restricted Boltzmann machine with [0,1]-valued visible units, trained by
//! CD-1 contrastive divergence. Hidden activation probabilities serve as
//! learned features for the downstream clustering step.
//!
//! The negative-phase visible reconstruction uses probabilities (no
//! sampling); the positive-phase hidden state is sampled.

use ndarray::{Array1, Array2, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SCHEMA_VERSION;

/// Enumeration limit for the exact log-likelihood oracle.
pub const MAX_EXACT_UNITS: usize = 20;

#[derive(Debug, Error)]
pub enum RbmError {
    #[error("layer sizes must be >= 1 (got visible={visible}, hidden={hidden})")]
    ZeroDimension { visible: usize, hidden: usize },
    #[error("data has {got} columns, model expects {expected} visible units")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature {0} is constant; cannot min-max scale")]
    ConstantColumn(usize),
    #[error("training diverged at epoch {epoch}: non-finite parameter")]
    Diverged { epoch: usize },
    #[error("exact likelihood refused: {visible}+{hidden} units exceed {MAX_EXACT_UNITS}")]
    TooLargeForExact { visible: usize, hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbmHyper {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_hidden: usize,
    pub epochs: usize,
}

impl Default for RbmHyper {
    fn default() -> Self {
        RbmHyper {
            learning_rate: 0.01,
            batch_size: 8,
            n_hidden: 2,
            epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RbmModelJson", try_from = "RbmModelJson")]
pub struct RbmModel {
    pub n_visible: usize,
    pub n_hidden: usize,
    /// n_visible x n_hidden
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub c: Array1<f64>,
    pub hyper: RbmHyper,
    pub seed: u64,
}

/// Wire format: weight matrix row-major, versioned.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RbmModelJson {
    schema_version: u32,
    n_visible: usize,
    n_hidden: usize,
    w: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    hyperparameters: RbmHyper,
    seed: u64,
}

impl From<RbmModel> for RbmModelJson {
    fn from(m: RbmModel) -> Self {
        RbmModelJson {
            schema_version: SCHEMA_VERSION,
            n_visible: m.n_visible,
            n_hidden: m.n_hidden,
            w: m.w.iter().copied().collect(),
            b: m.b.to_vec(),
            c: m.c.to_vec(),
            hyperparameters: m.hyper,
            seed: m.seed,
        }
    }
}

impl TryFrom<RbmModelJson> for RbmModel {
    type Error = String;

    fn try_from(j: RbmModelJson) -> Result<Self, String> {
        let w = Array2::from_shape_vec((j.n_visible, j.n_hidden), j.w)
            .map_err(|e| e.to_string())?;
        if j.b.len() != j.n_visible || j.c.len() != j.n_hidden {
            return Err("bias lengths inconsistent with layer sizes".into());
        }
        Ok(RbmModel {
            n_visible: j.n_visible,
            n_hidden: j.n_hidden,
            w,
            b: Array1::from_vec(j.b),
            c: Array1::from_vec(j.c),
            hyper: j.hyperparameters,
            seed: j.seed,
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Initialize with W ~ N(0, 0.01^2) from the seeded generator, zero biases.
pub fn rbm_init(
    n_visible: usize,
    n_hidden: usize,
    seed: u64,
    hyper: RbmHyper,
) -> Result<RbmModel, RbmError> {
    if n_visible == 0 || n_hidden == 0 {
        return Err(RbmError::ZeroDimension {
            visible: n_visible,
            hidden: n_hidden,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.01).expect("valid std");
    let w = Array2::from_shape_fn((n_visible, n_hidden), |_| normal.sample(&mut rng));
    Ok(RbmModel {
        n_visible,
        n_hidden,
        w,
        b: Array1::zeros(n_visible),
        c: Array1::zeros(n_hidden),
        hyper,
        seed,
    })
}

/// Per-feature min/max scaling parameters fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub schema_version: u32,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Matrix with all entries in [0,1], suitable as RBM visible input.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledInput(pub Array2<f64>);

impl MinMaxScaler {
    pub fn fit(train: &Array2<f64>) -> Result<MinMaxScaler, RbmError> {
        let mut min = Vec::with_capacity(train.ncols());
        let mut max = Vec::with_capacity(train.ncols());
        for (j, col) in train.columns().into_iter().enumerate() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(lo < hi) {
                return Err(RbmError::ConstantColumn(j));
            }
            min.push(lo);
            max.push(hi);
        }
        Ok(MinMaxScaler {
            schema_version: SCHEMA_VERSION,
            min,
            max,
        })
    }

    /// Affine map to [0,1]; held-out values outside the fit range are clamped.
    pub fn apply(&self, x: &Array2<f64>) -> Result<ScaledInput, RbmError> {
        if x.ncols() != self.min.len() {
            return Err(RbmError::DimensionMismatch {
                expected: self.min.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            col.mapv_inplace(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0));
        }
        Ok(ScaledInput(out))
    }
}

/// One CD-1 epoch over shuffled mini-batches. Returns the mean squared
/// reconstruction error over all rows.
pub fn cd1_epoch(
    model: &mut RbmModel,
    data: &ScaledInput,
    rng: &mut ChaCha8Rng,
    epoch: usize,
) -> Result<f64, RbmError> {
    let x = &data.0;
    if x.ncols() != model.n_visible {
        return Err(RbmError::DimensionMismatch {
            expected: model.n_visible,
            got: x.ncols(),
        });
    }
    let n = x.nrows();
    let eps = model.hyper.learning_rate;
    let batch_size = model.hyper.batch_size.max(1);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut recon_sum = 0.0;
    for chunk in order.chunks(batch_size) {
        let bsz = chunk.len();
        let mut v = Array2::zeros((bsz, model.n_visible));
        for (r, &i) in chunk.iter().enumerate() {
            v.row_mut(r).assign(&x.row(i));
        }
        // positive phase
        let mut h_pos = v.dot(&model.w);
        h_pos += &model.c;
        h_pos.mapv_inplace(sigmoid);
        let h_sample = h_pos.mapv(|p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 });
        // negative phase: visible uses probabilities, no sampling
        let mut v_neg = h_sample.dot(&model.w.t());
        v_neg += &model.b;
        v_neg.mapv_inplace(sigmoid);
        let mut h_neg = v_neg.dot(&model.w);
        h_neg += &model.c;
        h_neg.mapv_inplace(sigmoid);

        let scale = eps / bsz as f64;
        let dw = v.t().dot(&h_pos) - v_neg.t().dot(&h_neg);
        model.w.scaled_add(scale, &dw);
        let dv = (&v - &v_neg).sum_axis(Axis(0));
        model.b.scaled_add(scale, &dv);
        let dh = (&h_pos - &h_neg).sum_axis(Axis(0));
        model.c.scaled_add(scale, &dh);

        recon_sum += (&v - &v_neg).mapv(|d| d * d).sum();
    }

    let finite = model.w.iter().all(|v| v.is_finite())
        && model.b.iter().all(|v| v.is_finite())
        && model.c.iter().all(|v| v.is_finite());
    if !finite {
        return Err(RbmError::Diverged { epoch });
    }
    Ok(recon_sum / n as f64)
}

/// Train for the configured number of epochs with an RNG derived from the
/// model seed. Returns per-epoch mean reconstruction errors.
pub fn train(model: &mut RbmModel, data: &ScaledInput) -> Result<Vec<f64>, RbmError> {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed.wrapping_add(1));
    let mut errors = Vec::with_capacity(model.hyper.epochs);
    for epoch in 1..=model.hyper.epochs {
        errors.push(cd1_epoch(model, data, &mut rng, epoch)?);
    }
    Ok(errors)
}

/// Hidden activation probabilities, row per sample. Deterministic.
pub fn hidden_features(model: &RbmModel, x: &ScaledInput) -> Result<Array2<f64>, RbmError> {
    if x.0.ncols() != model.n_visible {
        return Err(RbmError::DimensionMismatch {
            expected: model.n_visible,
            got: x.0.ncols(),
        });
    }
    let mut h = x.0.dot(&model.w);
    h += &model.c;
    h.mapv_inplace(sigmoid);
    Ok(h)
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Unnormalized log probability with hidden units summed out:
/// ln sum_h e^{-E(v,h)} = b'v + sum_j softplus((W'v + c)_j).
fn free_energy_neg(model: &RbmModel, v: &[f64]) -> f64 {
    let bv: f64 = model.b.iter().zip(v).map(|(b, x)| b * x).sum();
    let mut acc = bv;
    for j in 0..model.n_hidden {
        let act: f64 = (0..model.n_visible)
            .map(|i| model.w[[i, j]] * v[i])
            .sum::<f64>()
            + model.c[j];
        // softplus, stable for large |act|
        acc += if act > 30.0 { act } else { (1.0 + act.exp()).ln() };
    }
    acc
}

/// Exact dataset log-likelihood by enumeration over binary visible states.
/// Test oracle; refuses models beyond `MAX_EXACT_UNITS` total units.
pub fn exact_log_likelihood(model: &RbmModel, data: &ScaledInput) -> Result<f64, RbmError> {
    if model.n_visible + model.n_hidden > MAX_EXACT_UNITS {
        return Err(RbmError::TooLargeForExact {
            visible: model.n_visible,
            hidden: model.n_hidden,
        });
    }
    if data.0.ncols() != model.n_visible {
        return Err(RbmError::DimensionMismatch {
            expected: model.n_visible,
            got: data.0.ncols(),
        });
    }
    let nv = model.n_visible;
    let ln_z = log_sum_exp((0..(1usize << nv)).map(|bits| {
        let v: Vec<f64> = (0..nv).map(|i| ((bits >> i) & 1) as f64).collect();
        free_energy_neg(model, &v)
    }));
    let ll = data
        .0
        .rows()
        .into_iter()
        .map(|row| free_energy_neg(model, row.as_slice().unwrap()) - ln_z)
        .sum();
    Ok(ll)
}
