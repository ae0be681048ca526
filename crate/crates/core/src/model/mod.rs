//! The authorship network.
//!
//! A user id is looked up in an embedding table, the photo's CNN code is
//! projected linearly to the same width, and the concatenation goes through
//! `hidden_layers` blocks of FC + ReLU + dropout before a final FC and a
//! sigmoid that yields `Pr(u, f)`.
//!
//! Parameters are generic over the float type: training runs in `f32`, the
//! gradient checks run the identical code in `f64`.

mod checkpoint;
mod kernels;
mod params;

use std::collections::HashMap;
use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use ndarray::{s, Array2, ArrayView2};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;

use crate::corpus::FeatureStore;
use crate::{seed, Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use params::{Dense, Params};

/// Logits are clamped to this magnitude before the sigmoid.
pub const LOGIT_CLAMP: f64 = 30.0;

const SCORE_CHUNK: usize = 256;

pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + MulAssign + Sum + Debug + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub num_users: usize,
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub hidden_layers: usize,
    pub dropout_rate: f64,
    /// Half-width of the uniform initialization of user embeddings.
    pub embed_init_scale: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_users: 0,
            feature_dim: 1536,
            embed_dim: 256,
            hidden_dim: 512,
            hidden_layers: 1,
            dropout_rate: 0.2,
            embed_init_scale: 0.05,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("num_users", self.num_users),
            ("feature_dim", self.feature_dim),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} not in [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.embed_init_scale >= 0.0 && self.embed_init_scale.is_finite()) {
            return Err(Error::Config(
                "embed_init_scale must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { dropout_seed: u64 },
}

#[derive(Debug, Clone)]
struct LayerCache<T> {
    pre: Array2<T>,
    /// Inverted-dropout multipliers (0 or 1/(1-rate)); `None` when rate is 0.
    mask: Option<Array2<T>>,
    out: Array2<T>,
}

/// Activations kept by a training-mode forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    users: Vec<usize>,
    features: Array2<T>,
    concat: Array2<T>,
    layers: Vec<LayerCache<T>>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElvisModel<T = f32> {
    pub config: ModelConfig,
    pub params: Params<T>,
    users: Vec<String>,
    user_index: HashMap<String, usize>,
}

pub(crate) fn sigmoid(logit: f64) -> f64 {
    let z = logit.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-z).exp())
}

fn uniform_fill<T: Real, R: Rng>(values: ndarray::ArrayViewMutD<'_, T>, bound: f64, rng: &mut R) {
    for v in values {
        let x = if bound > 0.0 {
            rng.random_range(-bound..bound)
        } else {
            0.0
        };
        *v = T::from_f64(x).expect("finite init value");
    }
}

/// Glorot bound for a layer.
fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl<T: Real> ElvisModel<T> {
    /// Model with every parameter zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = Params::zeros(&config);
        Ok(ElvisModel {
            config,
            params,
            users: Vec::new(),
            user_index: HashMap::new(),
        })
    }

    /// Seeded initialization: Glorot-uniform weights, uniform user embeddings
    /// in `±embed_init_scale`, zero biases.
    pub fn init(config: ModelConfig) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = seed::rng(model.config.seed);
        let scale = model.config.embed_init_scale;
        let p = &mut model.params;
        uniform_fill(p.user_embeddings.view_mut().into_dyn(), scale, &mut rng);
        for layer in std::iter::once(&mut p.projection)
            .chain(p.hidden.iter_mut())
            .chain(std::iter::once(&mut p.output))
        {
            let bound = glorot(layer.inputs(), layer.outputs());
            uniform_fill(layer.weight.view_mut().into_dyn(), bound, &mut rng);
        }
        Ok(model)
    }

    /// Initialize a model whose user rows are named by `users` (in order).
    pub fn init_for_users(mut config: ModelConfig, users: Vec<String>) -> Result<Self> {
        config.num_users = users.len();
        Self::init(config)?.with_users(users)
    }

    pub fn with_users(mut self, users: Vec<String>) -> Result<Self> {
        if users.len() != self.config.num_users {
            return Err(Error::Dimension {
                expected: self.config.num_users,
                actual: users.len(),
            });
        }
        let index: HashMap<String, usize> = users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i))
            .collect();
        if index.len() != users.len() {
            return Err(Error::Invalid("duplicate user in vocabulary".into()));
        }
        self.users = users;
        self.user_index = index;
        Ok(self)
    }

    /// Named users, empty for anonymous (index-only) models.
    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn user_index(&self, user_id: &str) -> Result<usize> {
        self.user_index
            .get(user_id)
            .copied()
            .ok_or_else(|| Error::UnknownUser(format!("{user_id:?}")))
    }

    /// Forward pass for a batch: `users[i]` paired with row `i` of `features`.
    /// Returns `Pr(u, f)` per row, plus the cache in training mode.
    pub fn forward_batch(
        &self,
        users: &[usize],
        features: ArrayView2<'_, T>,
        mode: Mode,
    ) -> Result<(Vec<f64>, Option<ForwardCache<T>>)> {
        let cfg = &self.config;
        if features.ncols() != cfg.feature_dim {
            return Err(Error::Dimension {
                expected: cfg.feature_dim,
                actual: features.ncols(),
            });
        }
        if features.nrows() != users.len() {
            return Err(Error::Dimension {
                expected: users.len(),
                actual: features.nrows(),
            });
        }
        if let Some(&u) = users.iter().find(|&&u| u >= cfg.num_users) {
            return Err(Error::UnknownUser(format!(
                "index {u} (model has {})",
                cfg.num_users
            )));
        }

        let batch = users.len();
        let projected = kernels::affine(features, &self.params.projection);
        let mut concat = Array2::zeros((batch, 2 * cfg.embed_dim));
        for (i, &u) in users.iter().enumerate() {
            concat
                .slice_mut(s![i, ..cfg.embed_dim])
                .assign(&self.params.user_embeddings.row(u));
        }
        concat.slice_mut(s![.., cfg.embed_dim..]).assign(&projected);

        let mut rng = match mode {
            Mode::Train { dropout_seed } if cfg.dropout_rate > 0.0 => Some(seed::rng(dropout_seed)),
            _ => None,
        };
        let keep_scale = T::from_f64(1.0 / (1.0 - cfg.dropout_rate)).unwrap();

        let mut layers: Vec<LayerCache<T>> = Vec::with_capacity(self.params.hidden.len());
        for layer in &self.params.hidden {
            let input = layers.last().map_or(concat.view(), |l| l.out.view());
            let pre = kernels::affine(input, layer);
            let mut out = pre.mapv(|v| if v > T::zero() { v } else { T::zero() });
            let mask = rng.as_mut().map(|rng| {
                let mask = Array2::from_shape_fn(out.raw_dim(), |_| {
                    if rng.random::<f64>() < cfg.dropout_rate {
                        T::zero()
                    } else {
                        keep_scale
                    }
                });
                out *= &mask;
                mask
            });
            layers.push(LayerCache { pre, mask, out });
        }

        let last = layers.last().map_or(concat.view(), |l| l.out.view());
        let logits = kernels::affine(last, &self.params.output);
        let probs: Vec<f64> = logits
            .iter()
            .map(|z| sigmoid(z.to_f64().unwrap_or(f64::NAN)))
            .collect();

        let cache = match mode {
            Mode::Eval => None,
            Mode::Train { .. } => Some(ForwardCache {
                users: users.to_vec(),
                features: features.to_owned(),
                concat,
                layers,
                probs: probs.clone(),
            }),
        };
        Ok((probs, cache))
    }

    /// Single-example forward pass.
    pub fn forward(
        &self,
        user: usize,
        features: &[T],
        mode: Mode,
    ) -> Result<(f64, Option<ForwardCache<T>>)> {
        let x = ArrayView2::from_shape((1, features.len()), features)
            .map_err(|e| Error::Invalid(e.to_string()))?;
        let (p, cache) = self.forward_batch(&[user], x, mode)?;
        Ok((p[0], cache))
    }

    /// Gradients of the mean binary cross-entropy over the cached batch.
    /// The gradient at the logit is `p - label` per example.
    pub fn backward(&self, cache: &ForwardCache<T>, labels: &[f64]) -> Result<Params<T>> {
        let batch = cache.users.len();
        if labels.len() != batch {
            return Err(Error::Dimension {
                expected: batch,
                actual: labels.len(),
            });
        }
        let embed = self.config.embed_dim;
        let mut grads = self.params.zeros_like();

        let scale = 1.0 / batch as f64;
        let d_logit = Array2::from_shape_fn((batch, 1), |(i, _)| {
            T::from_f64((cache.probs[i] - labels[i]) * scale).unwrap()
        });

        let last_in = cache
            .layers
            .last()
            .map_or(cache.concat.view(), |l| l.out.view());
        let mut d = kernels::affine_backward(
            last_in,
            &self.params.output,
            d_logit.view(),
            &mut grads.output,
            true,
        )
        .expect("input gradient requested");

        for (l, layer) in self.params.hidden.iter().enumerate().rev() {
            let lc = &cache.layers[l];
            if let Some(mask) = &lc.mask {
                d *= mask;
            }
            d.zip_mut_with(&lc.pre, |g, &z| {
                if z <= T::zero() {
                    *g = T::zero();
                }
            });
            let input = if l == 0 {
                cache.concat.view()
            } else {
                cache.layers[l - 1].out.view()
            };
            d = kernels::affine_backward(input, layer, d.view(), &mut grads.hidden[l], true)
                .expect("input gradient requested");
        }

        for (i, &u) in cache.users.iter().enumerate() {
            let mut row = grads.user_embeddings.row_mut(u);
            row += &d.slice(s![i, ..embed]);
        }
        kernels::affine_backward(
            cache.features.view(),
            &self.params.projection,
            d.slice(s![.., embed..]),
            &mut grads.projection,
            false,
        );
        Ok(grads)
    }

    /// Copy the codes of `photos` into a `len × feature_dim` matrix.
    pub fn gather_features<'a>(
        &self,
        photos: impl IntoIterator<Item = &'a str>,
        store: &FeatureStore,
    ) -> Result<Array2<T>> {
        let dim = self.config.feature_dim;
        if store.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: store.dim(),
            });
        }
        let mut data = Vec::new();
        let mut rows = 0;
        for f in photos {
            data.extend(store.require(f)?.iter().map(|&v| T::from_f32(v).unwrap()));
            rows += 1;
        }
        Ok(Array2::from_shape_vec((rows, dim), data).expect("rows × dim values"))
    }

    /// Eval-mode `Pr(u, f)` for each `(user index, photo id)` pair, in order.
    pub fn predict_scores(
        &self,
        pairs: &[(usize, &str)],
        store: &FeatureStore,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(SCORE_CHUNK) {
            let users: Vec<usize> = chunk.iter().map(|&(u, _)| u).collect();
            let x = self.gather_features(chunk.iter().map(|&(_, f)| f), store)?;
            out.extend(self.forward_batch(&users, x.view(), Mode::Eval)?.0);
        }
        Ok(out)
    }

    /// Eval-mode scores of several photos for one user.
    pub fn score_photos(
        &self,
        user: usize,
        photos: &[String],
        store: &FeatureStore,
    ) -> Result<Vec<f64>> {
        let pairs: Vec<(usize, &str)> = photos.iter().map(|f| (user, f.as_str())).collect();
        self.predict_scores(&pairs, store)
    }

    pub fn all_finite(&self) -> bool {
        self.params.all_finite()
    }
}

/// Model initialization (seeded); fails on an invalid config such as zero users.
pub fn init_model(config: ModelConfig) -> Result<ElvisModel<f32>> {
    ElvisModel::init(config)
}
