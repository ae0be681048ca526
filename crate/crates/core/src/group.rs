//! Choosing the photos of an item for one user or for a group of users.
//!
//! For a group `S` the compatibility of photo `f` is `φ(S, f) = Σ_{u∈S} Pr(u, f)`;
//! the photos of an item are ordered by `φ` and the first one explains the
//! group's taste. A new user with no history can be shown the top photos of a
//! group of known users whose opinion matches the recommendation.

use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use crate::corpus::{Corpus, FeatureStore};
use crate::model::ElvisModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GroupScore {
    pub photo_id: String,
    pub phi: f64,
    /// `phi / |S|`, comparable across groups of different size.
    pub mean_phi: f64,
}

/// `φ(S, f)`, summed in the order of `users`.
pub fn compatibility(
    model: &ElvisModel<f32>,
    users: &[usize],
    photo: &str,
    store: &FeatureStore,
) -> Result<f64> {
    if users.is_empty() {
        return Err(Error::Invalid(
            "compatibility needs a non-empty group".into(),
        ));
    }
    let pairs: Vec<(usize, &str)> = users.iter().map(|&u| (u, photo)).collect();
    Ok(model.predict_scores(&pairs, store)?.into_iter().sum())
}

fn sort_desc<T>(items: &mut [T], key: impl Fn(&T) -> (f64, &str)) {
    items.sort_by(|a, b| {
        let (sa, ia) = key(a);
        let (sb, ib) = key(b);
        sb.total_cmp(&sa).then_with(|| ia.cmp(ib))
    });
}

fn item_photos<'a>(corpus: &'a Corpus, item: &str) -> Result<&'a [String]> {
    let photos = corpus.photos_of_item(item);
    if photos.is_empty() {
        return Err(Error::UnknownItem(item.to_string()));
    }
    Ok(photos)
}

/// The item's photos by `φ` descending (photo id breaks ties); the first
/// entry is the group's best photo.
pub fn rank_for_group(
    model: &ElvisModel<f32>,
    users: &[usize],
    item: &str,
    corpus: &Corpus,
    store: &FeatureStore,
) -> Result<Vec<GroupScore>> {
    let photos = item_photos(corpus, item)?;
    let size = users.len() as f64;
    let mut out = photos
        .iter()
        .map(|f| {
            let phi = compatibility(model, users, f, store)?;
            Ok(GroupScore {
                photo_id: f.clone(),
                phi,
                mean_phi: phi / size,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_desc(&mut out, |g| (g.phi, g.photo_id.as_str()));
    Ok(out)
}

/// Top `k` photos of `item` for a group of matched known users.
pub fn cold_start_explain(
    model: &ElvisModel<f32>,
    matched_users: &[usize],
    item: &str,
    corpus: &Corpus,
    store: &FeatureStore,
    k: usize,
) -> Result<Vec<GroupScore>> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    let mut ranked = rank_for_group(model, matched_users, item, corpus, store)?;
    ranked.truncate(k);
    Ok(ranked)
}

/// The item's photos ordered by `Pr(u, f)` for a single user.
pub fn rank_for_user(
    model: &ElvisModel<f32>,
    user: usize,
    item: &str,
    corpus: &Corpus,
    store: &FeatureStore,
) -> Result<Vec<(String, f64)>> {
    let photos = item_photos(corpus, item)?;
    let scores = model.score_photos(user, photos, store)?;
    let mut out: Vec<(String, f64)> = photos.iter().cloned().zip(scores).collect();
    sort_desc(&mut out, |(f, s)| (*s, f.as_str()));
    Ok(out)
}

/// How a group of users is selected from the corpus.
#[derive(Debug, Clone, PartialEq)]
pub enum UserSelector {
    /// Every user the model knows.
    All,
    /// Users who reviewed the item.
    Reviewers,
    /// Reviewers of the item whose rating is below the threshold.
    RatersBelow(i32),
    /// One user id per line.
    File(PathBuf),
}

impl FromStr for UserSelector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "all" => UserSelector::All,
            "reviewers" => UserSelector::Reviewers,
            _ => match s.strip_prefix("raters-below:") {
                Some(r) => UserSelector::RatersBelow(
                    r.parse()
                        .map_err(|e| format!("bad rating threshold {r:?}: {e}"))?,
                ),
                None => UserSelector::File(PathBuf::from(s)),
            },
        })
    }
}

impl UserSelector {
    /// Model row indices of the selected users, ascending. Users unknown to
    /// the model are skipped; an empty selection is an error.
    pub fn resolve(
        &self,
        model: &ElvisModel<f32>,
        corpus: &Corpus,
        item: &str,
    ) -> Result<Vec<usize>> {
        let ids: Vec<String> = match self {
            UserSelector::All => {
                return if model.config.num_users == 0 {
                    Err(Error::Invalid("model has no users".into()))
                } else {
                    Ok((0..model.config.num_users).collect())
                };
            }
            UserSelector::Reviewers => corpus
                .reviews()
                .iter()
                .filter(|r| r.item_id == item)
                .map(|r| r.user_id.clone())
                .collect(),
            UserSelector::RatersBelow(t) => corpus
                .reviews()
                .iter()
                .filter(|r| r.item_id == item && r.rating.is_some_and(|v| v < *t))
                .map(|r| r.user_id.clone())
                .collect(),
            UserSelector::File(path) => fs::read_to_string(path)
                .map_err(|e| Error::io(path, e))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        };
        let mut idx: Vec<usize> = ids
            .iter()
            .filter_map(|u| match model.user_index(u) {
                Ok(i) => Some(i),
                Err(_) => {
                    log::warn!("user {u:?} unknown to the model, skipped");
                    None
                }
            })
            .collect();
        idx.sort_unstable();
        idx.dedup();
        if idx.is_empty() {
            return Err(Error::Invalid("selected group is empty".into()));
        }
        Ok(idx)
    }
}
