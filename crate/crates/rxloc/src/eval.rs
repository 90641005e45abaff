//! Dataset splits, error metrics and per-model comparison reports.
//!
//! Percent error is relative to the total line length, so a miss of the
//! same physical size counts the same anywhere along the line. RMSE is
//! computed in normalized units (targets scaled by total length); the km
//! figure is the normalized one times the length.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const DEFAULT_TEST_EVERY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPolicy {
    Systematic,
    SeededRandom,
}

impl SplitPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitPolicy::Systematic => "systematic",
            SplitPolicy::SeededRandom => "seeded-random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub policy: SplitPolicy,
}

impl DatasetSplit {
    /// Disjoint, covering, in-bounds, both sides non-empty.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::InvalidInput {
                what: "dataset split".into(),
                why: "train and test sets must both be non-empty".into(),
            });
        }
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(self.test.iter()) {
            if i >= n {
                return Err(Error::InvalidInput {
                    what: "dataset split".into(),
                    why: format!("index {i} out of bounds for {n} samples"),
                });
            }
            if seen[i] {
                return Err(Error::InvalidInput {
                    what: "dataset split".into(),
                    why: format!("index {i} assigned twice"),
                });
            }
            seen[i] = true;
        }
        if self.train.len() + self.test.len() != n {
            return Err(Error::InvalidInput {
                what: "dataset split".into(),
                why: format!(
                    "{} train + {} test does not cover {n} samples",
                    self.train.len(),
                    self.test.len()
                ),
            });
        }
        Ok(())
    }
}

/// Every `test_every`-th sample (0-based indices test_every-1, 2·test_every-1, …)
/// goes to the test set. 40 samples → 32/8, 50 → 40/10.
pub fn systematic_split(n: usize, test_every: usize) -> Result<DatasetSplit> {
    if test_every < 2 {
        return Err(Error::InvalidInput {
            what: "split".into(),
            why: format!("test_every must be at least 2, got {test_every}"),
        });
    }
    if n < test_every {
        return Err(Error::InvalidInput {
            what: "split".into(),
            why: format!("{n} samples cannot fill a 1-in-{test_every} split"),
        });
    }
    let mut train = Vec::with_capacity(n - n / test_every);
    let mut test = Vec::with_capacity(n / test_every);
    for i in 0..n {
        if (i + 1) % test_every == 0 {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    Ok(DatasetSplit {
        train,
        test,
        policy: SplitPolicy::Systematic,
    })
}

/// Same test-set size as the systematic split, membership drawn by a
/// seeded partial shuffle. Both sides come back sorted ascending.
pub fn seeded_random_split(n: usize, test_every: usize, seed: u64) -> Result<DatasetSplit> {
    // Reuse the systematic validation of n and test_every.
    let n_test = systematic_split(n, test_every)?.test.len();
    let mut pool: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(seed);
    for k in 0..n_test {
        let j = k + rng.next_below(n - k);
        pool.swap(k, j);
    }
    let mut test: Vec<usize> = pool[..n_test].to_vec();
    test.sort_unstable();
    let mut train: Vec<usize> = pool[n_test..].to_vec();
    train.sort_unstable();
    Ok(DatasetSplit {
        train,
        test,
        policy: SplitPolicy::SeededRandom,
    })
}

/// |actual − predicted| / total × 100.
pub fn percent_error(actual_km: f64, predicted_km: f64, total_km: f64) -> Result<f64> {
    if !(total_km > 0.0) {
        return Err(Error::InvalidInput {
            what: "percent error".into(),
            why: format!("total length must be positive, got {total_km}"),
        });
    }
    Ok((actual_km - predicted_km).abs() / total_km * 100.0)
}

/// √(Σ(xᵢ−yᵢ)²/n).
pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("rmse operands".into()));
    }
    let sum: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / x.len() as f64).sqrt())
}

/// One test-sample outcome for a model, in km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub actual_km: f64,
    pub predicted_km: f64,
    pub total_length_km: f64,
    pub percent_error: f64,
}

/// Per-model scores plus the km-space test records behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub model: String,
    pub train_rmse_norm: f64,
    pub test_rmse_norm: f64,
    pub records: Vec<EvalRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub total_length_km: f64,
    pub split_policy: String,
    pub n_train: usize,
    pub n_test: usize,
    /// Leaderboard: ascending test RMSE, ties by model name.
    pub models: Vec<ModelEval>,
    pub best_model: String,
}

impl EvalReport {
    pub fn best(&self) -> &ModelEval {
        &self.models[0]
    }
}

/// Anything that can score a raw feature vector in normalized units.
pub trait EvalModel {
    fn model_name(&self) -> &str;
    fn predict_norm(&self, features: &[f64]) -> Result<f64>;
}

fn predict_rows(
    model: &dyn EvalModel,
    features: &DMatrix<f64>,
    rows: &[usize],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len());
    let mut buf = vec![0.0; features.ncols()];
    for &r in rows {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = features[(r, c)];
        }
        let p = model.predict_norm(&buf).map_err(|e| Error::Model {
            model: model.model_name().to_string(),
            source: Box::new(e),
        })?;
        out.push(p);
    }
    Ok(out)
}

/// Score every model on the split, rank by test RMSE, and expand the
/// test-set predictions to km records.
pub fn evaluate(
    models: &[&dyn EvalModel],
    features: &DMatrix<f64>,
    targets_norm: &DVector<f64>,
    split: &DatasetSplit,
    dataset: &str,
    total_length_km: f64,
) -> Result<EvalReport> {
    if models.is_empty() {
        return Err(Error::EmptyInput("model list".into()));
    }
    if !(total_length_km > 0.0) {
        return Err(Error::InvalidInput {
            what: "evaluation".into(),
            why: format!("total length must be positive, got {total_length_km}"),
        });
    }
    if targets_norm.len() != features.nrows() {
        return Err(Error::LengthMismatch {
            left: features.nrows(),
            right: targets_norm.len(),
        });
    }
    split.validate(features.nrows())?;

    let gather = |rows: &[usize]| -> Vec<f64> { rows.iter().map(|&r| targets_norm[r]).collect() };
    let train_targets = gather(&split.train);
    let test_targets = gather(&split.test);

    let mut evals: Vec<ModelEval> = Vec::with_capacity(models.len());
    for m in models {
        let train_pred = predict_rows(*m, features, &split.train)?;
        let test_pred = predict_rows(*m, features, &split.test)?;
        let train_rmse_norm = rmse(&train_pred, &train_targets)?;
        let test_rmse_norm = rmse(&test_pred, &test_targets)?;
        let records = test_targets
            .iter()
            .zip(&test_pred)
            .map(|(&t, &p)| {
                let actual_km = t * total_length_km;
                let predicted_km = p * total_length_km;
                Ok(EvalRecord {
                    actual_km,
                    predicted_km,
                    total_length_km,
                    percent_error: percent_error(actual_km, predicted_km, total_length_km)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        evals.push(ModelEval {
            model: m.model_name().to_string(),
            train_rmse_norm,
            test_rmse_norm,
            records,
        });
    }
    evals.sort_by(|a, b| {
        a.test_rmse_norm
            .total_cmp(&b.test_rmse_norm)
            .then_with(|| a.model.cmp(&b.model))
    });
    let best_model = evals[0].model.clone();
    Ok(EvalReport {
        dataset: dataset.to_string(),
        total_length_km,
        split_policy: split.policy.as_str().to_string(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        models: evals,
        best_model,
    })
}
