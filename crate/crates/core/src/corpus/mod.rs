//! Immutable users/items/reviews/photos graph and its on-disk formats.

mod features;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

pub use features::{load_features, FeatureStore};
pub use stats::{corpus_stats, write_table, StatsReport};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Review {
    pub review_id: String,
    pub user_id: String,
    pub item_id: String,
    /// Epoch seconds.
    pub timestamp: i64,
    pub rating: Option<i32>,
    pub photo_ids: Vec<String>,
}

/// Reviews plus the derived photo indexes `photos(u)`, `photos(it)`,
/// `photos(u, it)`, `author(f)` and `item_of(f)`.
///
/// Construction sorts reviews by id and every photo list by photo id, so two
/// corpora built from the same reviews in any order compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    reviews: Vec<Review>,
    users: BTreeSet<String>,
    items: BTreeSet<String>,
    user_reviews: BTreeMap<String, Vec<usize>>,
    user_photos: BTreeMap<String, Vec<String>>,
    item_photos: BTreeMap<String, Vec<String>>,
    pair_photos: BTreeMap<(String, String), Vec<String>>,
    photo_author: BTreeMap<String, String>,
    photo_item: BTreeMap<String, String>,
}

impl Corpus {
    pub fn from_reviews(mut reviews: Vec<Review>) -> Result<Self> {
        reviews.sort_by(|a, b| a.review_id.cmp(&b.review_id));
        for w in reviews.windows(2) {
            if w[0].review_id == w[1].review_id {
                return Err(Error::DuplicateReview(w[0].review_id.clone()));
            }
        }

        let mut corpus = Corpus::default();
        let mut photo_review: BTreeMap<&str, &str> = BTreeMap::new();
        for (idx, r) in reviews.iter().enumerate() {
            corpus.users.insert(r.user_id.clone());
            corpus.items.insert(r.item_id.clone());
            corpus
                .user_reviews
                .entry(r.user_id.clone())
                .or_default()
                .push(idx);
            for f in &r.photo_ids {
                if let Some(prev) = photo_review.insert(f, &r.review_id) {
                    if prev == r.review_id {
                        return Err(Error::DuplicatePhotoInReview {
                            review: r.review_id.clone(),
                            photo: f.clone(),
                        });
                    }
                    return Err(Error::PhotoOwnership {
                        photo: f.clone(),
                        first: prev.to_string(),
                        second: r.review_id.clone(),
                    });
                }
                corpus
                    .user_photos
                    .entry(r.user_id.clone())
                    .or_default()
                    .push(f.clone());
                corpus
                    .item_photos
                    .entry(r.item_id.clone())
                    .or_default()
                    .push(f.clone());
                corpus
                    .pair_photos
                    .entry((r.user_id.clone(), r.item_id.clone()))
                    .or_default()
                    .push(f.clone());
                corpus.photo_author.insert(f.clone(), r.user_id.clone());
                corpus.photo_item.insert(f.clone(), r.item_id.clone());
            }
        }
        for v in corpus
            .user_photos
            .values_mut()
            .chain(corpus.item_photos.values_mut())
            .chain(corpus.pair_photos.values_mut())
        {
            v.sort();
        }
        corpus.reviews = reviews;
        Ok(corpus)
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn into_reviews(self) -> Vec<Review> {
        self.reviews
    }

    pub fn users(&self) -> &BTreeSet<String> {
        &self.users
    }

    pub fn items(&self) -> &BTreeSet<String> {
        &self.items
    }

    pub fn num_photos(&self) -> usize {
        self.photo_author.len()
    }

    /// All photo ids in ascending order.
    pub fn photo_ids(&self) -> impl Iterator<Item = &str> {
        self.photo_author.keys().map(String::as_str)
    }

    pub fn reviews_of_user<'a>(&'a self, user: &str) -> impl Iterator<Item = &'a Review> + 'a {
        self.user_reviews
            .get(user)
            .into_iter()
            .flatten()
            .map(move |&i| &self.reviews[i])
    }

    pub fn photos_of_user(&self, user: &str) -> &[String] {
        self.user_photos.get(user).map_or(&[], Vec::as_slice)
    }

    pub fn photos_of_item(&self, item: &str) -> &[String] {
        self.item_photos.get(item).map_or(&[], Vec::as_slice)
    }

    pub fn photos_of_pair(&self, user: &str, item: &str) -> &[String] {
        self.pair_photos
            .get(&(user.to_string(), item.to_string()))
            .map_or(&[], Vec::as_slice)
    }

    pub fn author(&self, photo: &str) -> Option<&str> {
        self.photo_author.get(photo).map(String::as_str)
    }

    pub fn item_of(&self, photo: &str) -> Option<&str> {
        self.photo_item.get(photo).map(String::as_str)
    }

    pub fn contains_photo(&self, photo: &str) -> bool {
        self.photo_author.contains_key(photo)
    }
}

fn parse_line(line: &str) -> std::result::Result<Review, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 6 {
        return Err(format!(
            "expected 6 tab-separated fields, found {}",
            fields.len()
        ));
    }
    for (name, v) in [
        ("review_id", fields[0]),
        ("user_id", fields[1]),
        ("item_id", fields[2]),
    ] {
        if v.is_empty() {
            return Err(format!("empty {name}"));
        }
    }
    let timestamp = fields[3]
        .parse::<i64>()
        .map_err(|e| format!("bad timestamp {:?}: {e}", fields[3]))?;
    let rating = match fields[4] {
        "-" => None,
        r => Some(
            r.parse::<i32>()
                .map_err(|e| format!("bad rating {r:?}: {e}"))?,
        ),
    };
    let photo_ids = if fields[5].is_empty() {
        Vec::new()
    } else {
        let ids: Vec<String> = fields[5].split(',').map(str::to_string).collect();
        if ids.iter().any(String::is_empty) {
            return Err("empty photo id".into());
        }
        ids
    };
    Ok(Review {
        review_id: fields[0].to_string(),
        user_id: fields[1].to_string(),
        item_id: fields[2].to_string(),
        timestamp,
        rating,
        photo_ids,
    })
}

/// Parse reviews from a reader; `origin` only labels error messages.
pub fn parse_reviews(reader: impl BufRead, origin: &Path) -> Result<Corpus> {
    let mut reviews = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let review = parse_line(line).map_err(|msg| Error::Parse {
            path: origin.to_path_buf(),
            line: n + 1,
            msg,
        })?;
        reviews.push(review);
    }
    Corpus::from_reviews(reviews)
}

pub fn load_reviews(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reviews(BufReader::new(file), path)
}

pub fn write_reviews(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    for r in corpus.reviews() {
        let rating = r.rating.map_or_else(|| "-".to_string(), |v| v.to_string());
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.review_id,
            r.user_id,
            r.item_id,
            r.timestamp,
            rating,
            r.photo_ids.join(",")
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
