//! Ranking evaluation of a scoring method over test cases.
//!
//! Each case ranks the candidate photos of an item for one user; the single
//! relevant photo is the one the user actually took. Two views are reported:
//! the share of cases whose photo lands in the top `n` (equal to Recall@n and
//! to `n × Precision@n` with one relevant photo), and the percentile position
//! `100 · (index − 1) / |R|`, which does not favour short rankings.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use num_rational::Ratio;
use rayon::prelude::*;

use crate::corpus::FeatureStore;
use crate::dataset::TestCase;
use crate::model::ElvisModel;
use crate::{Error, Result};

pub const TOP_N_MAX: usize = 10;
pub const STRATA_MAX: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    /// Descending score, ties by ascending photo id.
    pub order: Vec<String>,
    pub positive: String,
    /// 1-based.
    pub index_of_positive: usize,
}

impl Ranking {
    pub fn size(&self) -> usize {
        self.order.len()
    }
}

pub fn rank_candidates<'a>(
    scores: impl IntoIterator<Item = (&'a str, f64)>,
    positive: &str,
) -> Result<Ranking> {
    let mut scored: Vec<(&str, f64)> = scores.into_iter().collect();
    if let Some((f, _)) = scored.iter().find(|(_, s)| s.is_nan()) {
        return Err(Error::NanScore(f.to_string()));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if scored.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Invalid("duplicate candidate photo".into()));
    }
    let index = scored
        .iter()
        .position(|(f, _)| *f == positive)
        .ok_or_else(|| Error::Invalid(format!("positive {positive:?} not among candidates")))?;
    Ok(Ranking {
        order: scored.into_iter().map(|(f, _)| f.to_string()).collect(),
        positive: positive.to_string(),
        index_of_positive: index + 1,
    })
}

/// Percentile position of a 1-based `index` in a ranking of `size`; lower is better.
pub fn percentile(index: usize, size: usize) -> Result<f64> {
    if index == 0 || index > size {
        return Err(Error::IndexOutOfRange { index, size });
    }
    Ok(100.0 * (index - 1) as f64 / size as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalFilters {
    pub min_candidates: usize,
    pub min_user_train_photos: usize,
}

impl EvalFilters {
    pub const NONE: EvalFilters = EvalFilters {
        min_candidates: 0,
        min_user_train_photos: 0,
    };

    pub fn accepts(&self, size: usize, user_train_photos: usize) -> bool {
        size >= self.min_candidates && user_train_photos >= self.min_user_train_photos
    }
}

impl Default for EvalFilters {
    fn default() -> Self {
        EvalFilters {
            min_candidates: 10,
            min_user_train_photos: 10,
        }
    }
}

pub fn apply_filters(cases: &[TestCase], filters: &EvalFilters) -> Vec<TestCase> {
    cases
        .iter()
        .filter(|c| filters.accepts(c.size(), c.user_train_photo_count))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub user_id: String,
    pub item_id: String,
    pub positive_photo_id: String,
    pub size: usize,
    pub index: usize,
    pub percentile: f64,
    pub user_train_photo_count: usize,
}

fn as_percent(r: Ratio<u64>) -> f64 {
    100.0 * *r.numer() as f64 / *r.denom() as f64
}

/// Share of cases with the positive within the first `n` positions.
pub fn top_n_ratio(indices: impl IntoIterator<Item = usize>, n: usize) -> Result<Ratio<u64>> {
    let (mut hits, mut count) = (0u64, 0u64);
    for index in indices {
        count += 1;
        hits += u64::from(index <= n);
    }
    if count == 0 {
        return Err(Error::NoCases);
    }
    Ok(Ratio::new(hits, count))
}

/// Mean over rankings of `|top_n ∩ relevant| / |relevant|`.
pub fn recall_at_n(rankings: &[(Vec<String>, HashSet<String>)], n: usize) -> Result<Ratio<u64>> {
    if rankings.is_empty() {
        return Err(Error::NoCases);
    }
    let sum = rankings
        .iter()
        .fold(Ratio::from_integer(0u64), |acc, (order, rel)| {
            let hits = order.iter().take(n).filter(|f| rel.contains(*f)).count() as u64;
            acc + Ratio::new(hits, rel.len() as u64)
        });
    Ok(sum / rankings.len() as u64)
}

/// Mean over rankings of `|top_n ∩ relevant| / n`.
pub fn precision_at_n(rankings: &[(Vec<String>, HashSet<String>)], n: usize) -> Result<Ratio<u64>> {
    if rankings.is_empty() {
        return Err(Error::NoCases);
    }
    let sum = rankings
        .iter()
        .fold(Ratio::from_integer(0u64), |acc, (order, rel)| {
            let hits = order.iter().take(n).filter(|f| rel.contains(*f)).count() as u64;
            acc + Ratio::new(hits, n as u64)
        });
    Ok(sum / rankings.len() as u64)
}

/// Percentage of filtered cases in the top `n`, for `n = 1..=n_max`.
pub fn top_n_table(cases: &[CaseResult], n_max: usize, filters: &EvalFilters) -> Result<Vec<f64>> {
    let kept: Vec<usize> = cases
        .iter()
        .filter(|c| filters.accepts(c.size, c.user_train_photo_count))
        .map(|c| c.index)
        .collect();
    (1..=n_max)
        .map(|n| top_n_ratio(kept.iter().copied(), n).map(as_percent))
        .collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumRow {
    /// Minimum number of training photos of the case's user.
    pub x: usize,
    pub median: Option<f64>,
    pub mean: Option<f64>,
    pub count: usize,
}

/// Percentile statistics over cases whose user has at least `x` training photos.
pub fn stratified_percentiles(
    cases: &[CaseResult],
    xs: impl IntoIterator<Item = usize>,
) -> Vec<StratumRow> {
    xs.into_iter()
        .map(|x| {
            let mut p: Vec<f64> = cases
                .iter()
                .filter(|c| c.user_train_photo_count >= x)
                .map(|c| c.percentile)
                .collect();
            StratumRow {
                x,
                mean: mean(&p),
                median: median(&mut p),
                count: p.len(),
            }
        })
        .collect()
}

/// A ranking method: scores for `case.candidate_photo_ids`, in order.
pub trait Scorer: Sync {
    fn name(&self) -> &str;

    /// Stochastic scorers are evaluated over several seeded repetitions.
    fn stochastic(&self) -> bool {
        false
    }

    fn score(&self, case: &TestCase, repetition: usize) -> Result<Vec<f64>>;
}

/// The trained model: `Pr(u, f)` for the case's user and each candidate.
pub struct ElvisScorer<'a> {
    pub model: &'a ElvisModel<f32>,
    pub store: &'a FeatureStore,
}

impl Scorer for ElvisScorer<'_> {
    fn name(&self) -> &str {
        "elvis"
    }

    fn score(&self, case: &TestCase, _repetition: usize) -> Result<Vec<f64>> {
        let user = self.model.user_index(&case.user_id)?;
        self.model
            .score_photos(user, &case.candidate_photo_ids, self.store)
    }
}

pub fn evaluate_case(
    scorer: &dyn Scorer,
    case: &TestCase,
    repetition: usize,
) -> Result<CaseResult> {
    let scores = scorer.score(case, repetition)?;
    if scores.len() != case.size() {
        return Err(Error::Dimension {
            expected: case.size(),
            actual: scores.len(),
        });
    }
    let ranking = rank_candidates(
        case.candidate_photo_ids
            .iter()
            .map(String::as_str)
            .zip(scores),
        &case.positive_photo_id,
    )?;
    Ok(CaseResult {
        user_id: case.user_id.clone(),
        item_id: case.item_id.clone(),
        positive_photo_id: case.positive_photo_id.clone(),
        size: ranking.size(),
        index: ranking.index_of_positive,
        percentile: percentile(ranking.index_of_positive, ranking.size())?,
        user_train_photo_count: case.user_train_photo_count,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub repetitions: usize,
    pub filters: EvalFilters,
    /// Cases passing both filters.
    pub case_count: usize,
    /// Percentage in the top n, index `n - 1`; averaged over repetitions.
    pub top_n: Vec<f64>,
    pub median_percentile: f64,
    pub mean_percentile: f64,
    /// Per-case results of the first repetition, both filters applied.
    pub cases: Vec<CaseResult>,
    /// Percentile curves over cases passing the candidate filter only.
    pub strata: Vec<StratumRow>,
}

/// Rank every case, then aggregate top-n and percentile statistics. For
/// stochastic scorers the aggregates are averaged over `repetitions` runs.
///
/// Cases failing `min_candidates` are never scored. The user-photo threshold
/// applies to the summary; the stratified curves sweep it from 1 to 100.
pub fn evaluate_method(
    scorer: &dyn Scorer,
    cases: &[TestCase],
    filters: &EvalFilters,
    repetitions: usize,
    workers: usize,
) -> Result<EvalReport> {
    let candidate_filter = EvalFilters {
        min_user_train_photos: 0,
        ..*filters
    };
    let scored_cases = apply_filters(cases, &candidate_filter);
    if !scored_cases
        .iter()
        .any(|c| filters.accepts(c.size(), c.user_train_photo_count))
    {
        return Err(Error::NoCases);
    }
    let reps = if scorer.stochastic() {
        repetitions.max(1)
    } else {
        1
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Invalid(e.to_string()))?;

    let mut top_n = vec![0.0; TOP_N_MAX];
    let (mut med_sum, mut mean_sum) = (0.0, 0.0);
    let mut strata_sums: Vec<(Option<f64>, Option<f64>, usize)> = vec![(None, None, 0); STRATA_MAX];
    let mut first_cases = Vec::new();

    for rep in 0..reps {
        let results: Vec<CaseResult> = pool.install(|| {
            scored_cases
                .par_iter()
                .map(|c| evaluate_case(scorer, c, rep))
                .collect::<Result<Vec<_>>>()
        })?;
        let summary: Vec<CaseResult> = results
            .iter()
            .filter(|c| filters.accepts(c.size, c.user_train_photo_count))
            .cloned()
            .collect();
        for (acc, v) in top_n
            .iter_mut()
            .zip(top_n_table(&summary, TOP_N_MAX, &EvalFilters::NONE)?)
        {
            *acc += v;
        }
        let mut p: Vec<f64> = summary.iter().map(|c| c.percentile).collect();
        mean_sum += mean(&p).expect("summary is non-empty");
        med_sum += median(&mut p).expect("summary is non-empty");
        for (acc, row) in strata_sums
            .iter_mut()
            .zip(stratified_percentiles(&results, 1..=STRATA_MAX))
        {
            acc.0 = row.median.map(|m| acc.0.unwrap_or(0.0) + m);
            acc.1 = row.mean.map(|m| acc.1.unwrap_or(0.0) + m);
            acc.2 = row.count;
        }
        if rep == 0 {
            first_cases = summary;
        }
    }

    let r = reps as f64;
    Ok(EvalReport {
        method: scorer.name().to_string(),
        repetitions: reps,
        filters: *filters,
        case_count: first_cases.len(),
        top_n: top_n.into_iter().map(|v| v / r).collect(),
        median_percentile: med_sum / r,
        mean_percentile: mean_sum / r,
        cases: first_cases,
        strata: strata_sums
            .into_iter()
            .enumerate()
            .map(|(i, (med, mn, count))| StratumRow {
                x: i + 1,
                median: med.map(|v| v / r),
                mean: mn.map(|v| v / r),
                count,
            })
            .collect(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

impl EvalReport {
    /// Writes `topn.csv`, `cases.csv`, `strata.csv` and `summary.csv` into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))
        };

        let mut s = String::from("n,percentage\n");
        for (i, v) in self.top_n.iter().enumerate() {
            s.push_str(&format!("{},{v}\n", i + 1));
        }
        write("topn.csv", s)?;

        let mut s = String::from("user,item,size,index,percentile\n");
        for c in &self.cases {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                c.user_id, c.item_id, c.size, c.index, c.percentile
            ));
        }
        write("cases.csv", s)?;

        let mut s = String::from("x,median,mean,count\n");
        for r in &self.strata {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.x,
                opt(r.median),
                opt(r.mean),
                r.count
            ));
        }
        write("strata.csv", s)?;

        write(
            "summary.csv",
            format!(
                "method,repetitions,cases,min_candidates,min_user_photos,median_percentile,mean_percentile\n{},{},{},{},{},{},{}\n",
                self.method,
                self.repetitions,
                self.case_count,
                self.filters.min_candidates,
                self.filters.min_user_train_photos,
                self.median_percentile,
                self.mean_percentile
            ),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_basic_and_ties() {
        let r = rank_candidates([("f", 0.9), ("g", 0.1)], "f").unwrap();
        assert_eq!(r.index_of_positive, 1);
        let r = rank_candidates([("c", 0.5), ("a", 0.5), ("b", 0.5)], "b").unwrap();
        assert_eq!(r.order, ["a", "b", "c"]);
        assert_eq!(r.index_of_positive, 2);
        let shuffled = rank_candidates([("b", 0.5), ("c", 0.5), ("a", 0.5)], "b").unwrap();
        assert_eq!(shuffled, r);
        assert!(matches!(
            rank_candidates([("a", f64::NAN)], "a"),
            Err(Error::NanScore(_))
        ));
    }

    #[test]
    fn percentile_values() {
        assert_eq!(percentile(2, 2).unwrap(), 50.0);
        assert_eq!(percentile(2, 100).unwrap(), 1.0);
        assert_eq!(percentile(1, 7).unwrap(), 0.0);
        assert!(percentile(0, 3).is_err());
        assert!(percentile(4, 3).is_err());
    }

    fn result(size: usize, index: usize, photos: usize) -> CaseResult {
        CaseResult {
            user_id: "u".into(),
            item_id: "i".into(),
            positive_photo_id: "f".into(),
            size,
            index,
            percentile: percentile(index, size).unwrap(),
            user_train_photo_count: photos,
        }
    }

    #[test]
    fn top_n_step_function() {
        let t = top_n_table(&[result(12, 3, 0)], 10, &EvalFilters::NONE).unwrap();
        assert_eq!(
            t,
            [0.0, 0.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0]
        );
        assert!(matches!(
            top_n_table(&[result(5, 1, 0)], 10, &EvalFilters::default()),
            Err(Error::NoCases)
        ));
    }

    #[test]
    fn filters() {
        let mk = |size: usize, photos: usize| TestCase {
            user_id: "u".into(),
            positive_photo_id: "p0".into(),
            item_id: "i".into(),
            candidate_photo_ids: (0..size).map(|k| format!("p{k}")).collect(),
            user_train_photo_count: photos,
        };
        let cases = vec![mk(9, 20), mk(10, 10), mk(30, 9)];
        assert_eq!(apply_filters(&cases, &EvalFilters::NONE), cases);
        let kept = apply_filters(&cases, &EvalFilters::default());
        assert_eq!(kept, vec![mk(10, 10)]);
    }

    #[test]
    fn strata_nest() {
        let cases = vec![result(10, 1, 1), result(10, 5, 3), result(10, 10, 50)];
        let s = stratified_percentiles(&cases, 1..=100);
        assert_eq!(s[0].count, 3);
        assert_eq!(s[0].median, Some(40.0));
        assert!(s.windows(2).all(|w| w[0].count >= w[1].count));
        assert_eq!(s[99].count, 0);
        assert_eq!(s[99].median, None);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
