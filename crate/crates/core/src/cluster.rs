//! k-means clustering (k = 2 in the pipeline) with cluster-size-based class
//! assignment: the larger cluster is taken to be non-malpractice.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{derive_seed, SCHEMA_VERSION};

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const N_INIT: usize = 10;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("need at least k={k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("k must be >= 2, got {0}")]
    BadK(usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("model fitted on {expected} dims, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class assignment requires k = 2, model has k = {0}")]
    UnsupportedK(usize),
    #[error("empty assignment list")]
    EmptyAssignments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub schema_version: u32,
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// cluster id -> class (0 = non-malpractice, 1 = malpractice); set by
    /// [`assign_classes_by_size`].
    pub cluster_to_class: Option<Vec<u8>>,
    pub inertia: f64,
    pub seed: u64,
}

impl KMeansModel {
    fn centroid_array(&self) -> Array2<f64> {
        let d = self.centroids[0].len();
        let flat: Vec<f64> = self.centroids.iter().flatten().copied().collect();
        Array2::from_shape_vec((self.k, d), flat).expect("consistent centroid dims")
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(point, c);
        // strict < keeps the lowest id on ties
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    (best, best_d)
}

fn kmeans_pp_init(x: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let d = x.ncols();
    let mut centroids = Array2::zeros((k, d));
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).assign(&x.row(first));
    let mut dists: Vec<f64> = (0..n)
        .map(|i| sq_dist(x.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = dists.iter().sum();
        let idx = if total <= 0.0 {
            // all points coincide with chosen centroids
            rng.gen_range(0..n)
        } else {
            WeightedIndex::new(&dists).map(|w| w.sample(rng)).unwrap_or_else(|_| rng.gen_range(0..n))
        };
        centroids.row_mut(c).assign(&x.row(idx));
        for i in 0..n {
            let d2 = sq_dist(x.row(i), centroids.row(c));
            if d2 < dists[i] {
                dists[i] = d2;
            }
        }
    }
    centroids
}

struct LloydResult {
    centroids: Array2<f64>,
    assignments: Vec<usize>,
    inertia: f64,
}

fn lloyd(
    x: ArrayView2<f64>,
    mut centroids: Array2<f64>,
    max_iter: usize,
    tol: f64,
) -> LloydResult {
    let n = x.nrows();
    let k = centroids.nrows();
    let d = x.ncols();
    let mut assignments = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..max_iter {
        let mut new_inertia = 0.0;
        for i in 0..n {
            let (j, dist) = nearest(x.row(i), &centroids);
            assignments[i] = j;
            new_inertia += dist;
        }
        debug_assert!(
            new_inertia <= inertia * (1.0 + 1e-12) + 1e-12,
            "inertia increased: {inertia} -> {new_inertia}"
        );
        inertia = new_inertia;

        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let j = assignments[i];
            counts[j] += 1;
            let mut row = sums.row_mut(j);
            row += &x.row(i);
        }
        // Empty cluster: reseed to the point farthest from its own centroid.
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(x.row(a), centroids.row(assignments[a]))
                            .total_cmp(&sq_dist(x.row(b), centroids.row(assignments[b])))
                    })
                    .unwrap();
                sums.row_mut(j).assign(&x.row(far));
                counts[j] = 1;
            }
        }
        let mut movement: f64 = 0.0;
        for j in 0..k {
            let new_c: Array1<f64> = sums.row(j).mapv(|v| v / counts[j] as f64);
            movement = movement.max(sq_dist(new_c.view(), centroids.row(j)).sqrt());
            centroids.row_mut(j).assign(&new_c);
        }
        if movement < tol {
            break;
        }
    }
    // final assignment pass against the converged centroids
    let mut final_inertia = 0.0;
    for i in 0..n {
        let (j, dist) = nearest(x.row(i), &centroids);
        assignments[i] = j;
        final_inertia += dist;
    }
    LloydResult {
        centroids,
        assignments,
        inertia: final_inertia,
    }
}

/// Fit k-means with k-means++ initialization and `N_INIT` restarts; the
/// restart with the lowest inertia wins (ties by restart index).
pub fn kmeans_fit(
    x: &Array2<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(KMeansModel, Vec<usize>), ClusterError> {
    if k < 2 {
        return Err(ClusterError::BadK(k));
    }
    if x.nrows() < k {
        return Err(ClusterError::TooFewPoints { n: x.nrows(), k });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    let mut best: Option<LloydResult> = None;
    for restart in 0..N_INIT {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, restart as u64));
        let init = kmeans_pp_init(x.view(), k, &mut rng);
        let result = lloyd(x.view(), init, max_iter, tol);
        let better = match &best {
            None => true,
            Some(b) => result.inertia < b.inertia,
        };
        if better {
            best = Some(result);
        }
    }
    let best = best.unwrap();
    let model = KMeansModel {
        schema_version: SCHEMA_VERSION,
        k,
        centroids: best
            .centroids
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        cluster_to_class: None,
        inertia: best.inertia,
        seed,
    };
    Ok((model, best.assignments))
}

/// Assign each row to its nearest centroid; ties go to the lowest cluster id.
pub fn kmeans_predict(model: &KMeansModel, x: &Array2<f64>) -> Result<Vec<usize>, ClusterError> {
    let d = model.centroids[0].len();
    if x.nrows() > 0 && x.ncols() != d {
        return Err(ClusterError::DimensionMismatch {
            expected: d,
            got: x.ncols(),
        });
    }
    let centroids = model.centroid_array();
    Ok(x.rows()
        .into_iter()
        .map(|row| nearest(row, &centroids).0)
        .collect())
}

/// Size-based class assignment: larger cluster -> 0 (non-malpractice),
/// smaller -> 1. Exact tie: cluster 0 -> class 0.
pub fn assign_classes_by_size(
    model: &mut KMeansModel,
    train_assignments: &[usize],
) -> Result<(), ClusterError> {
    if model.k != 2 {
        return Err(ClusterError::UnsupportedK(model.k));
    }
    if train_assignments.is_empty() {
        return Err(ClusterError::EmptyAssignments);
    }
    let count0 = train_assignments.iter().filter(|&&a| a == 0).count();
    let count1 = train_assignments.len() - count0;
    let mapping = if count0 >= count1 {
        vec![0u8, 1u8]
    } else {
        vec![1u8, 0u8]
    };
    model.cluster_to_class = Some(mapping);
    Ok(())
}

/// Map predicted cluster ids to classes through the fitted assignment.
pub fn classes_for(model: &KMeansModel, cluster_ids: &[usize]) -> Option<Vec<u8>> {
    let map = model.cluster_to_class.as_ref()?;
    Some(cluster_ids.iter().map(|&c| map[c]).collect())
}
