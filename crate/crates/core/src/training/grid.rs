//! Learning-rate selection on a development split carved out of the
//! training corpus.

use crate::corpus::{Corpus, FeatureStore};
use crate::dataset::{build_train_set, make_dev_split, HoldoutPolicy};
use crate::eval::{evaluate_method, ElvisScorer, EvalFilters};
use crate::model::{ElvisModel, ModelConfig};
use crate::{Error, Result};

use super::{train, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub lr_grid: Vec<f64>,
    pub split_seed: u64,
    pub sample_seed: u64,
    pub holdout: HoldoutPolicy,
    /// Applied to the dev cases; unfiltered by default since dev users have
    /// fewer training photos than the final model's users.
    pub filters: EvalFilters,
    pub workers: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            lr_grid: vec![5e-3, 1e-3, 5e-4, 1e-4, 5e-5],
            split_seed: 0,
            sample_seed: 0,
            holdout: HoldoutPolicy::default(),
            filters: EvalFilters::NONE,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub lr: f64,
    pub median_percentile: Option<f64>,
    pub mean_percentile: Option<f64>,
    pub top10: Option<f64>,
    pub final_loss: Option<f64>,
    /// Set when training stopped on a non-finite value.
    pub diverged: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub entries: Vec<GridEntry>,
    pub best_lr: f64,
    pub dev_cases: usize,
}

impl GridReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        let mut s = String::from(
            "lr,median_percentile,mean_percentile,top10,final_loss,diverged,selected\n",
        );
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.lr,
                opt(e.median_percentile),
                opt(e.mean_percentile),
                opt(e.top10),
                opt(e.final_loss),
                e.diverged.is_some(),
                e.lr == self.best_lr,
            ));
        }
        s
    }
}

/// Train one model per learning rate on the dev-split remainder and keep the
/// rate with the lowest median dev percentile (ties: lower mean percentile,
/// then grid order). Rates whose training diverges are recorded and skipped.
///
/// The caller retrains on the full training corpus with the returned rate.
pub fn grid_search(
    train_corpus: &Corpus,
    store: &FeatureStore,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    grid: &GridConfig,
) -> Result<GridReport> {
    if grid.lr_grid.is_empty() {
        return Err(Error::Config("learning-rate grid is empty".into()));
    }
    for &lr in &grid.lr_grid {
        TrainConfig {
            base_lr: lr,
            ..train_cfg.clone()
        }
        .validate()?;
    }
    let (subtrain, dev) = make_dev_split(train_corpus, grid.split_seed, grid.holdout);
    if dev.is_empty() {
        return Err(Error::Invalid("dev split produced no cases".into()));
    }
    let set = build_train_set(&subtrain, grid.sample_seed)?;
    let users: Vec<String> = subtrain.users().iter().cloned().collect();

    let mut entries = Vec::with_capacity(grid.lr_grid.len());
    let mut best: Option<(f64, f64, f64)> = None;
    for &lr in &grid.lr_grid {
        let mut model = ElvisModel::<f32>::init_for_users(model_cfg.clone(), users.clone())?;
        let cfg = TrainConfig {
            base_lr: lr,
            ..train_cfg.clone()
        };
        let history = match train(&mut model, &set.pairs, store, &cfg) {
            Ok(h) => h,
            Err(Error::Diverged { step, reason }) => {
                log::warn!("lr {lr}: diverged at step {step} ({reason})");
                entries.push(GridEntry {
                    lr,
                    median_percentile: None,
                    mean_percentile: None,
                    top10: None,
                    final_loss: None,
                    diverged: Some(reason),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let scorer = ElvisScorer {
            model: &model,
            store,
        };
        let report = evaluate_method(&scorer, &dev, &grid.filters, 1, grid.workers)?;
        log::info!(
            "lr {lr}: dev median percentile {:.3}",
            report.median_percentile
        );
        let key = (report.median_percentile, report.mean_percentile);
        if best.is_none_or(|(m, a, _)| key.0 < m || (key.0 == m && key.1 < a)) {
            best = Some((key.0, key.1, lr));
        }
        entries.push(GridEntry {
            lr,
            median_percentile: Some(report.median_percentile),
            mean_percentile: Some(report.mean_percentile),
            top10: report.top_n.get(9).copied(),
            final_loss: history.epochs.last().map(|e| e.mean_loss),
            diverged: None,
        });
    }
    let (_, _, best_lr) =
        best.ok_or_else(|| Error::Invalid("every learning rate in the grid diverged".into()))?;
    Ok(GridReport {
        entries,
        best_lr,
        dev_cases: dev.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn setup() -> (Corpus, FeatureStore, ModelConfig, TrainConfig) {
        let (corpus, store, _) = generate(&SynthConfig {
            num_users: 30,
            num_items: 8,
            feature_dim: 8,
            seed: 4,
            ..SynthConfig::default()
        })
        .unwrap();
        let model = ModelConfig {
            feature_dim: 8,
            embed_dim: 8,
            hidden_dim: 16,
            ..ModelConfig::default()
        };
        let train = TrainConfig {
            epochs: 2,
            batch_size: 256,
            ..TrainConfig::default()
        };
        (corpus, store, model, train)
    }

    #[test]
    fn single_rate_grid() {
        let (c, s, m, t) = setup();
        let grid = GridConfig {
            lr_grid: vec![1e-3],
            ..GridConfig::default()
        };
        let r = grid_search(&c, &s, &m, &t, &grid).unwrap();
        assert_eq!(r.best_lr, 1e-3);
        assert_eq!(r.entries.len(), 1);
        assert!(r.dev_cases > 0);
    }

    #[test]
    fn divergent_rate_loses_and_empty_grid_fails() {
        let (c, s, m, t) = setup();
        let grid = GridConfig {
            lr_grid: vec![1e38, 1e-3],
            ..GridConfig::default()
        };
        let r = grid_search(&c, &s, &m, &t, &grid).unwrap();
        assert_eq!(r.best_lr, 1e-3);
        assert!(r.entries[0].diverged.is_some());
        assert!(grid.lr_grid.contains(&r.best_lr));
        let empty = GridConfig {
            lr_grid: vec![],
            ..GridConfig::default()
        };
        assert!(grid_search(&c, &s, &m, &t, &empty).is_err());
    }
}
