//! Synthetic benchmark datasets: per-class Dirichlet draws over the four
//! feature fractions, mirroring the corpus proportions (3% malpractice,
//! ~2.2% labeled) at desk scale.

use chrono::{Duration, NaiveDate};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Dirichlet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Dataset, FeatureVector};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{name} must lie in (0,1), got {value}")]
    BadFraction { name: &'static str, value: f64 },
    #[error("Dirichlet concentrations must be positive")]
    BadConcentration,
}

/// Specification of a synthetic dataset.
///
/// Concentrations are ordered (speech, music, noise, silence); the
/// malpractice class concentrates mass on silence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_total: usize,
    pub malpractice_fraction: f64,
    pub alpha_malpractice: [f64; 4],
    pub alpha_normal: [f64; 4],
    pub labeled_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_total: 20_000,
            malpractice_fraction: 0.03,
            alpha_malpractice: [2.4, 1.0, 1.2, 3.0],
            alpha_normal: [4.2, 1.1, 1.3, 2.4],
            labeled_fraction: 0.022,
            seed: 1,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        for (name, value) in [
            ("malpractice_fraction", self.malpractice_fraction),
            ("labeled_fraction", self.labeled_fraction),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(SynthError::BadFraction { name, value });
            }
        }
        if self
            .alpha_malpractice
            .iter()
            .chain(&self.alpha_normal)
            .any(|&a| !(a > 0.0))
        {
            return Err(SynthError::BadConcentration);
        }
        Ok(())
    }
}

/// Evenly spread `count` marks over `total` slots; deterministic, exact.
fn spread(total: usize, count: usize) -> Vec<bool> {
    (0..total)
        .map(|i| (i + 1) * count / total > i * count / total)
        .collect()
}

/// Generate the dataset. Exactly `round(n_total * malpractice_fraction)`
/// malpractice rows and `round(n_total * labeled_fraction)` labeled rows,
/// stratified by class. Identical specs produce identical datasets.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Dataset, SynthError> {
    spec.validate()?;
    let n = spec.n_total;
    if n == 0 {
        return Ok(Dataset::default());
    }
    let n_mal = (n as f64 * spec.malpractice_fraction).round() as usize;
    let n_labeled = (n as f64 * spec.labeled_fraction).round() as usize;
    let labeled_mal = ((n_labeled as f64) * (n_mal as f64) / (n as f64)).round() as usize;
    let labeled_norm = n_labeled.saturating_sub(labeled_mal);

    let is_mal = spread(n, n_mal);
    let n_norm = n - n_mal;
    let mal_labeled_marks = spread(n_mal.max(1), labeled_mal.min(n_mal));
    let norm_labeled_marks = spread(n_norm.max(1), labeled_norm.min(n_norm));

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dir_mal = Dirichlet::new(&spec.alpha_malpractice).map_err(|_| SynthError::BadConcentration)?;
    let dir_norm = Dirichlet::new(&spec.alpha_normal).map_err(|_| SynthError::BadConcentration)?;

    let start_date = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
    let span_days = 5 * 365;

    let mut rows = Vec::with_capacity(n);
    let mut mal_seen = 0usize;
    let mut norm_seen = 0usize;
    for i in 0..n {
        let malpractice = is_mal[i];
        let fracs: Vec<f64> = if malpractice {
            dir_mal.sample(&mut rng)
        } else {
            dir_norm.sample(&mut rng)
        };
        let duration = rng.gen_range(30.0..300.0);
        let labeled = if malpractice {
            let l = mal_seen < mal_labeled_marks.len() && mal_labeled_marks[mal_seen];
            mal_seen += 1;
            l
        } else {
            let l = norm_seen < norm_labeled_marks.len() && norm_labeled_marks[norm_seen];
            norm_seen += 1;
            l
        };
        let date = start_date + Duration::days((i * span_days / n) as i64);
        rows.push(FeatureVector {
            call_id: format!("synth-{i:06}"),
            duration,
            pct_speech: fracs[0],
            pct_music: fracs[1],
            pct_noise: fracs[2],
            pct_silence: fracs[3],
            label: if labeled {
                Some(if malpractice { 1 } else { 0 })
            } else {
                None
            },
            date: Some(date),
        });
    }
    Ok(Dataset::new(rows).expect("generated ids are unique"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labeled_counts_and_spread() {
        let spec = SynthSpec {
            n_total: 1000,
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec).unwrap();
        assert_eq!(ds.rows.len(), 1000);
        assert_eq!(ds.labeled_count, 22);
        assert!(ds.rows.iter().any(|r| r.label == Some(1)));
        assert!(ds.rows.iter().any(|r| r.label == Some(0)));
        assert_eq!(spread(1000, 30).iter().filter(|&&b| b).count(), 30);
    }

    #[test]
    fn malpractice_rows_follow_rounding_rule() {
        // verify via a fully labeled variant
        let spec = SynthSpec {
            n_total: 1000,
            malpractice_fraction: 0.03,
            labeled_fraction: 0.999,
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec).unwrap();
        let mal = ds.rows.iter().filter(|r| r.label == Some(1)).count();
        let labeled = ds.labeled_count;
        // 999 labeled of 1000; 30 malpractice rows, 30*999/1000 rounds to 30
        assert_eq!(labeled, 999);
        assert_eq!(mal, 30);
    }

    #[test]
    fn empty_spec_gives_empty_dataset() {
        let spec = SynthSpec {
            n_total: 0,
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec).unwrap();
        assert!(ds.rows.is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec {
            n_total: 500,
            ..SynthSpec::default()
        };
        let a = synth_dataset(&spec).unwrap();
        let b = synth_dataset(&spec).unwrap();
        assert_eq!(a, b);
        let other = synth_dataset(&SynthSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn rows_are_valid_feature_vectors() {
        let spec = SynthSpec {
            n_total: 300,
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec).unwrap();
        for row in &ds.rows {
            row.validate().unwrap();
            assert!(row.date.is_some());
        }
    }

    #[test]
    fn invalid_fractions_rejected() {
        let spec = SynthSpec {
            malpractice_fraction: 0.0,
            ..SynthSpec::default()
        };
        assert!(synth_dataset(&spec).is_err());
        let spec = SynthSpec {
            labeled_fraction: 1.5,
            ..SynthSpec::default()
        };
        assert!(synth_dataset(&spec).is_err());
    }
}
