//! Seeded synthetic corpora with planted user tastes.
//!
//! Each user belongs to one of `clusters` taste clusters. Every photo the user
//! takes is its cluster's center plus isotropic Gaussian noise, so a model that
//! learns the user's cluster can tell the user's photos from other people's.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal};

use crate::corpus::{write_reviews, Corpus, FeatureStore, Review};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub clusters: usize,
    /// Reviews per user are `1 + Geometric(review_p)`, truncated at `num_items`.
    pub review_p: f64,
    /// Inclusive range.
    pub photos_per_review: (usize, usize),
    pub feature_dim: usize,
    /// Distance between any two cluster centers.
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_users: 200,
            num_items: 40,
            clusters: 4,
            review_p: 0.35,
            photos_per_review: (1, 4),
            feature_dim: 32,
            separation: 5.0,
            noise: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_users == 0 || self.num_items == 0 {
            return bad("num_users and num_items must be positive");
        }
        if self.clusters < 2 {
            return bad("at least two clusters are needed");
        }
        if self.feature_dim < self.clusters {
            return bad("feature_dim must be at least the number of clusters");
        }
        let (lo, hi) = self.photos_per_review;
        if lo == 0 || hi < lo {
            return bad("photos_per_review must be a non-empty range of positive counts");
        }
        if !(self.review_p > 0.0 && self.review_p <= 1.0) {
            return bad("review_p must be in (0, 1]");
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return bad("separation must be positive");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be non-negative");
        }
        Ok(())
    }
}

/// Centers sit on scaled basis vectors, so every pair is `separation` apart.
pub fn cluster_center(config: &SynthConfig, k: usize) -> Vec<f32> {
    let mut c = vec![0f32; config.feature_dim];
    c[k] = (config.separation / std::f64::consts::SQRT_2) as f32;
    c
}

pub struct Synthetic {
    pub corpus: Corpus,
    pub features: FeatureStore,
    /// User id to taste cluster.
    pub clusters: BTreeMap<String, usize>,
}

pub fn generate(config: &SynthConfig) -> Result<(Corpus, FeatureStore, BTreeMap<String, usize>)> {
    let s = generate_synthetic(config)?;
    Ok((s.corpus, s.features, s.clusters))
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<Synthetic> {
    config.validate()?;
    let mut rng = seed::rng(config.seed);
    let reviews_dist = Geometric::new(config.review_p).map_err(|e| Error::Config(e.to_string()))?;
    let noise = Normal::new(0.0, config.noise).map_err(|e| Error::Config(e.to_string()))?;
    let centers: Vec<Vec<f32>> = (0..config.clusters)
        .map(|k| cluster_center(config, k))
        .collect();

    let mut features = FeatureStore::new(config.feature_dim)?;
    let mut clusters = BTreeMap::new();
    let mut reviews = Vec::new();
    let (lo, hi) = config.photos_per_review;
    let mut photo_no = 0usize;

    for u in 0..config.num_users {
        let user = format!("u{u:05}");
        let cluster = u % config.clusters;
        clusters.insert(user.clone(), cluster);
        let n = (1 + reviews_dist.sample(&mut rng) as usize).min(config.num_items);
        let mut items = index::sample(&mut rng, config.num_items, n).into_vec();
        items.sort_unstable();
        for item in items {
            let count = rng.random_range(lo..=hi);
            let mut photo_ids = Vec::with_capacity(count);
            for _ in 0..count {
                let id = format!("p{photo_no:07}");
                photo_no += 1;
                let v: Vec<f32> = centers[cluster]
                    .iter()
                    .map(|&c| c + noise.sample(&mut rng) as f32)
                    .collect();
                features.insert(&id, &v)?;
                photo_ids.push(id);
            }
            reviews.push(Review {
                review_id: format!("r{:07}", reviews.len()),
                user_id: user.clone(),
                item_id: format!("i{item:04}"),
                timestamp: rng.random_range(0..1_000_000_000),
                rating: Some(rng.random_range(1..=5)),
                photo_ids,
            });
        }
    }
    Ok(Synthetic {
        corpus: Corpus::from_reviews(reviews)?,
        features,
        clusters,
    })
}

impl Synthetic {
    /// Writes `reviews.tsv`, `features.elvf` and `clusters.tsv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_reviews(&self.corpus, dir.join("reviews.tsv"))?;
        self.features.write_elvf(dir.join("features.elvf"))?;
        let mut s = String::new();
        for (u, k) in &self.clusters {
            writeln!(s, "{u}\t{k}").unwrap();
        }
        let path = dir.join("clusters.tsv");
        fs::write(&path, s).map_err(|e| Error::io(&path, e))
    }
}
