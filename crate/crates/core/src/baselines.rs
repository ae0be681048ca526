//! User-independent comparison methods: uniform random scores and distance
//! to the centroid of an item's photo codes.

use rand::Rng;

use crate::corpus::FeatureStore;
use crate::dataset::TestCase;
use crate::eval::Scorer;
use crate::{seed, Error, Result};

/// I.i.d. uniform `[0, 1)` scores, one per candidate.
pub fn random_scores(candidates: &[String], seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    candidates.iter().map(|_| rng.random::<f64>()).collect()
}

/// `-‖x_i − c‖₂` where `c` is the mean code of `photos`. Sorting by this score
/// descending is sorting by distance to the centroid ascending.
pub fn centroid_scores(photos: &[String], store: &FeatureStore) -> Result<Vec<f64>> {
    if photos.is_empty() {
        return Err(Error::Invalid("centroid of an empty photo set".into()));
    }
    let codes = photos
        .iter()
        .map(|f| store.require(f))
        .collect::<Result<Vec<_>>>()?;
    let mut centroid = vec![0f64; store.dim()];
    for code in &codes {
        for (c, &v) in centroid.iter_mut().zip(code.iter()) {
            *c += f64::from(v);
        }
    }
    let n = codes.len() as f64;
    centroid.iter_mut().for_each(|c| *c /= n);
    Ok(codes
        .iter()
        .map(|code| {
            let sq: f64 = code
                .iter()
                .zip(&centroid)
                .map(|(&v, c)| (f64::from(v) - c).powi(2))
                .sum();
            -sq.sqrt()
        })
        .collect())
}

pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn name(&self) -> &str {
        "random"
    }

    fn stochastic(&self) -> bool {
        true
    }

    fn score(&self, case: &TestCase, repetition: usize) -> Result<Vec<f64>> {
        let s = seed::derive(
            self.seed,
            &[
                repetition as u64,
                seed::hash_str(&case.user_id),
                seed::hash_str(&case.positive_photo_id),
            ],
        );
        Ok(random_scores(&case.candidate_photo_ids, s))
    }
}

/// Centroid over the candidate set shown at evaluation time.
pub struct CentroidScorer<'a> {
    pub store: &'a FeatureStore,
}

impl Scorer for CentroidScorer<'_> {
    fn name(&self) -> &str {
        "centroid"
    }

    fn score(&self, case: &TestCase, _repetition: usize) -> Result<Vec<f64>> {
        centroid_scores(&case.candidate_photo_ids, self.store)
    }
}
