//! Training and test set construction from a corpus of reviews with photos.
//!
//! The pipeline is: keep reviews with photos and only the latest review per
//! (user, item); hold out one review per user with two or more reviews; pair
//! every training photo with negatives (photos by other users, half from the
//! same item and half from other items) while repeating the positive so both
//! labels are balanced; and turn every held-out photo into a ranking case
//! against the item's training photos taken by other users.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;

use crate::corpus::{Corpus, Review};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Positive,
    SameItemNegative,
    OtherItemNegative,
}

impl Origin {
    pub fn label(self) -> u8 {
        match self {
            Origin::Positive => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Positive => "positive",
            Origin::SameItemNegative => "same_item_negative",
            Origin::OtherItemNegative => "other_item_negative",
        })
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "positive" => Ok(Origin::Positive),
            "same_item_negative" => Ok(Origin::SameItemNegative),
            "other_item_negative" => Ok(Origin::OtherItemNegative),
            other => Err(format!("unknown origin {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub user_id: String,
    pub photo_id: String,
    pub label: u8,
    pub origin: Origin,
}

impl LabeledPair {
    fn new(user_id: &str, photo_id: &str, origin: Origin) -> Self {
        LabeledPair {
            user_id: user_id.to_string(),
            photo_id: photo_id.to_string(),
            label: origin.label(),
            origin,
        }
    }
}

/// One training positive with the negatives sampled for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveGroup {
    pub user_id: String,
    pub photo_id: String,
    pub item_id: String,
    pub copies: usize,
    pub same_item: Vec<String>,
    pub other_item: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainSet {
    pub pairs: Vec<LabeledPair>,
    pub seed: u64,
    pub groups: Vec<PositiveGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub user_id: String,
    pub positive_photo_id: String,
    pub item_id: String,
    /// Sorted by photo id; always contains the positive.
    pub candidate_photo_ids: Vec<String>,
    pub user_train_photo_count: usize,
}

impl TestCase {
    pub fn size(&self) -> usize {
        self.candidate_photo_ids.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum HoldoutPolicy {
    #[default]
    Random,
    MostRecent,
}

impl FromStr for HoldoutPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "random" => Ok(HoldoutPolicy::Random),
            "recent" | "most-recent" => Ok(HoldoutPolicy::MostRecent),
            other => Err(format!("unknown holdout policy {other:?}")),
        }
    }
}

/// Negatives drawn per training positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingConfig {
    pub same_item: usize,
    pub other_item: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            same_item: 10,
            other_item: 10,
        }
    }
}

fn newer(a: &Review, b: &Review) -> bool {
    (a.timestamp, &a.review_id) > (b.timestamp, &b.review_id)
}

/// Drop photo-less reviews and keep only the latest review per (user, item).
/// Timestamp ties go to the lexicographically largest review id.
pub fn filter_corpus(corpus: &Corpus) -> Corpus {
    let mut latest: BTreeMap<(&str, &str), &Review> = BTreeMap::new();
    for r in corpus.reviews().iter().filter(|r| !r.photo_ids.is_empty()) {
        latest
            .entry((&r.user_id, &r.item_id))
            .and_modify(|cur| {
                if newer(r, cur) {
                    *cur = r;
                }
            })
            .or_insert(r);
    }
    let kept = latest.into_values().cloned().collect();
    Corpus::from_reviews(kept).expect("subset of a valid corpus is valid")
}

/// Move one review of every user with at least two reviews into the test
/// corpus. Users with a single review stay entirely in training.
pub fn split_holdout(corpus: &Corpus, seed: u64, policy: HoldoutPolicy) -> (Corpus, Corpus) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for user in corpus.users() {
        let reviews: Vec<&Review> = corpus.reviews_of_user(user).collect();
        let held = if reviews.len() < 2 {
            None
        } else {
            match policy {
                HoldoutPolicy::Random => {
                    let mut rng = seed::rng(seed::derive(seed, &[seed::hash_str(user)]));
                    Some(rng.random_range(0..reviews.len()))
                }
                HoldoutPolicy::MostRecent => (0..reviews.len()).reduce(|best, i| {
                    if newer(reviews[i], reviews[best]) {
                        i
                    } else {
                        best
                    }
                }),
            }
        };
        for (i, r) in reviews.into_iter().enumerate() {
            if Some(i) == held {
                test.push(r.clone());
            } else {
                train.push(r.clone());
            }
        }
    }
    (
        Corpus::from_reviews(train).expect("subset of a valid corpus is valid"),
        Corpus::from_reviews(test).expect("subset of a valid corpus is valid"),
    )
}

/// Number of photos of items other than `item` taken by users other than `user`.
fn other_item_pool_size(corpus: &Corpus, user: &str, item: &str) -> usize {
    corpus.num_photos() + corpus.photos_of_pair(user, item).len()
        - corpus.photos_of_item(item).len()
        - corpus.photos_of_user(user).len()
}

fn sample_other_item<'a, R: Rng>(
    corpus: &'a Corpus,
    all_photos: &[&'a str],
    user: &str,
    item: &str,
    pool_size: usize,
    amount: usize,
    rng: &mut R,
) -> Vec<&'a str> {
    let eligible = |f: &str| corpus.author(f) != Some(user) && corpus.item_of(f) != Some(item);
    if amount == 0 {
        return Vec::new();
    }
    if amount * 4 >= pool_size {
        let pool: Vec<&str> = all_photos.iter().copied().filter(|f| eligible(f)).collect();
        debug_assert_eq!(pool.len(), pool_size);
        let mut picked: Vec<&str> = index::sample(rng, pool.len(), amount)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        picked.sort_unstable();
        return picked;
    }
    // Sparse rejection sampling: the pool is at least four times the draw.
    let mut seen = HashSet::with_capacity(amount);
    let mut picked = Vec::with_capacity(amount);
    while picked.len() < amount {
        let f = *all_photos.choose(rng).expect("pool is non-empty");
        if eligible(f) && seen.insert(f) {
            picked.push(f);
        }
    }
    picked.sort_unstable();
    picked
}

pub fn build_train_set(train: &Corpus, seed: u64) -> Result<TrainSet> {
    build_train_set_with(train, seed, SamplingConfig::default())
}

/// Sample negatives without replacement for every training positive and
/// repeat the positive `same_item + other_item` times. A pool that cannot
/// supply its share passes the shortfall to the other pool.
pub fn build_train_set_with(train: &Corpus, seed: u64, cfg: SamplingConfig) -> Result<TrainSet> {
    let target = cfg.same_item + cfg.other_item;
    let all_photos: Vec<&str> = train.photo_ids().collect();
    let mut rng = seed::rng(seed::derive(seed, &[0]));
    let mut groups = Vec::with_capacity(all_photos.len());

    for review in train.reviews() {
        let (user, item) = (review.user_id.as_str(), review.item_id.as_str());
        let same_pool: Vec<&str> = train
            .photos_of_item(item)
            .iter()
            .map(String::as_str)
            .filter(|f| train.author(f) != Some(user))
            .collect();
        let other_size = other_item_pool_size(train, user, item);

        let mut photos = review.photo_ids.clone();
        photos.sort();
        for photo in photos {
            let mut take_same = cfg.same_item.min(same_pool.len());
            let take_other = (target - take_same).min(other_size);
            take_same = (target - take_other).min(same_pool.len());
            if take_same + take_other == 0 && target > 0 {
                return Err(Error::NoNegativePool {
                    user: user.into(),
                    photo,
                });
            }
            let mut same: Vec<&str> = index::sample(&mut rng, same_pool.len(), take_same)
                .into_iter()
                .map(|i| same_pool[i])
                .collect();
            same.sort_unstable();
            let other = sample_other_item(
                train,
                &all_photos,
                user,
                item,
                other_size,
                take_other,
                &mut rng,
            );
            groups.push(PositiveGroup {
                user_id: user.to_string(),
                item_id: item.to_string(),
                copies: target,
                same_item: same.into_iter().map(str::to_string).collect(),
                other_item: other.into_iter().map(str::to_string).collect(),
                photo_id: photo,
            });
        }
    }

    let mut pairs = Vec::with_capacity(groups.len() * 2 * target);
    for g in &groups {
        for _ in 0..g.copies {
            pairs.push(LabeledPair::new(&g.user_id, &g.photo_id, Origin::Positive));
        }
        for f in &g.same_item {
            pairs.push(LabeledPair::new(&g.user_id, f, Origin::SameItemNegative));
        }
        for f in &g.other_item {
            pairs.push(LabeledPair::new(&g.user_id, f, Origin::OtherItemNegative));
        }
    }
    let mut shuffle_rng = seed::rng(seed::derive(seed, &[1]));
    pairs.shuffle(&mut shuffle_rng);
    Ok(TrainSet {
        pairs,
        seed,
        groups,
    })
}

/// One case per held-out photo: the photo plus every training photo of its
/// item not taken by the same user.
pub fn build_test_cases(train: &Corpus, test: &Corpus) -> Vec<TestCase> {
    let mut cases = Vec::new();
    for review in test.reviews() {
        let (user, item) = (&review.user_id, &review.item_id);
        let others: Vec<&String> = train
            .photos_of_item(item)
            .iter()
            .filter(|f| train.author(f) != Some(user.as_str()))
            .collect();
        let user_train_photo_count = train.photos_of_user(user).len();
        let mut photos = review.photo_ids.clone();
        photos.sort();
        for photo in photos {
            let mut candidates: Vec<String> = others.iter().map(|s| s.to_string()).collect();
            candidates.push(photo.clone());
            candidates.sort();
            cases.push(TestCase {
                user_id: user.clone(),
                positive_photo_id: photo,
                item_id: item.clone(),
                candidate_photo_ids: candidates,
                user_train_photo_count,
            });
        }
    }
    cases
}

/// Re-apply the hold-out procedure to a training corpus, giving a smaller
/// training corpus and development cases for model selection.
pub fn make_dev_split(train: &Corpus, seed: u64, policy: HoldoutPolicy) -> (Corpus, Vec<TestCase>) {
    let (subtrain, dev) = split_holdout(train, seed, policy);
    let cases = build_test_cases(&subtrain, &dev);
    (subtrain, cases)
}

pub fn write_pairs(pairs: &[LabeledPair], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    for p in pairs {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            p.user_id, p.photo_id, p.label, p.origin
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<LabeledPair>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", f.len())));
        }
        let origin: Origin = f[3].parse().map_err(parse_err)?;
        let label: u8 = f[2]
            .parse()
            .map_err(|e| parse_err(format!("bad label: {e}")))?;
        if label != origin.label() {
            return Err(parse_err(format!(
                "label {label} contradicts origin {origin}"
            )));
        }
        pairs.push(LabeledPair {
            user_id: f[0].into(),
            photo_id: f[1].into(),
            label,
            origin,
        });
    }
    Ok(pairs)
}

pub fn write_cases(cases: &[TestCase], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    for c in cases {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            c.user_id,
            c.positive_photo_id,
            c.item_id,
            c.candidate_photo_ids.join(",")
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Read cases back; the per-user training photo count is not part of the
/// file and is recomputed from `train`.
pub fn read_cases(path: impl AsRef<Path>, train: &Corpus) -> Result<Vec<TestCase>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cases = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 || f[3].is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: "expected 4 fields with a non-empty candidate list".into(),
            });
        }
        let mut candidates: Vec<String> = f[3].split(',').map(str::to_string).collect();
        candidates.sort();
        if candidates.binary_search(&f[1].to_string()).is_err() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: "positive photo missing from candidates".into(),
            });
        }
        cases.push(TestCase {
            user_id: f[0].into(),
            positive_photo_id: f[1].into(),
            item_id: f[2].into(),
            candidate_photo_ids: candidates,
            user_train_photo_count: train.photos_of_user(f[0]).len(),
        });
    }
    Ok(cases)
}
