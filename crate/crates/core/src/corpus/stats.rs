use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::Corpus;
use crate::{Error, Result};

/// Dataset totals plus five distributions, each a map from a count to the
/// number of entities having that count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsReport {
    pub users: usize,
    pub items: usize,
    pub photos: usize,
    pub reviews: usize,
    pub items_by_photos: BTreeMap<usize, usize>,
    pub items_by_reviews: BTreeMap<usize, usize>,
    pub reviews_by_photos: BTreeMap<usize, usize>,
    pub users_by_reviews: BTreeMap<usize, usize>,
    pub users_by_photos: BTreeMap<usize, usize>,
}

fn histogram(counts: impl IntoIterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for c in counts {
        *h.entry(c).or_insert(0) += 1;
    }
    h
}

pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let mut reviews_per_item: BTreeMap<&str, usize> =
        corpus.items().iter().map(|i| (i.as_str(), 0)).collect();
    for r in corpus.reviews() {
        *reviews_per_item.get_mut(r.item_id.as_str()).unwrap() += 1;
    }
    StatsReport {
        users: corpus.users().len(),
        items: corpus.items().len(),
        photos: corpus.num_photos(),
        reviews: corpus.reviews().len(),
        items_by_photos: histogram(
            corpus
                .items()
                .iter()
                .map(|i| corpus.photos_of_item(i).len()),
        ),
        items_by_reviews: histogram(reviews_per_item.values().copied()),
        reviews_by_photos: histogram(corpus.reviews().iter().map(|r| r.photo_ids.len())),
        users_by_reviews: histogram(
            corpus
                .users()
                .iter()
                .map(|u| corpus.reviews_of_user(u).count()),
        ),
        users_by_photos: histogram(
            corpus
                .users()
                .iter()
                .map(|u| corpus.photos_of_user(u).len()),
        ),
    }
}

impl StatsReport {
    /// `(file stem, count column, entity column, histogram)` for each distribution.
    pub fn histograms(
        &self,
    ) -> [(
        &'static str,
        &'static str,
        &'static str,
        &BTreeMap<usize, usize>,
    ); 5] {
        [
            ("items_by_photos", "photos", "items", &self.items_by_photos),
            (
                "items_by_reviews",
                "reviews",
                "items",
                &self.items_by_reviews,
            ),
            (
                "reviews_by_photos",
                "photos",
                "reviews",
                &self.reviews_by_photos,
            ),
            (
                "users_by_reviews",
                "reviews",
                "users",
                &self.users_by_reviews,
            ),
            ("users_by_photos", "photos", "users", &self.users_by_photos),
        ]
    }

    /// Writes `totals.csv` and one CSV per histogram into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_table(&[("all", self)], dir.join("totals.csv"))?;
        for (stem, count_col, entity_col, h) in self.histograms() {
            let mut s = format!("{count_col},{entity_col}\n");
            for (c, n) in h {
                s.push_str(&format!("{c},{n}\n"));
            }
            let path = dir.join(format!("{stem}.csv"));
            fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Table with one row per named subset (`all`, `train`, `test`, ...).
pub fn write_table(rows: &[(&str, &StatsReport)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("set,users,items,photos,reviews\n");
    for (name, r) in rows {
        s.push_str(&format!(
            "{name},{},{},{},{}\n",
            r.users, r.items, r.photos, r.reviews
        ));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
