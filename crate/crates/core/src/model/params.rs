use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};

use super::{ModelConfig, Real};

/// Fully connected layer; `weight` is `inputs × outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }
}

/// Every trainable tensor of the network. Also used for gradients and for
/// the optimizer's moment estimates, which share the same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub user_embeddings: Array2<T>,
    pub projection: Dense<T>,
    pub hidden: Vec<Dense<T>>,
    pub output: Dense<T>,
}

impl<T: Real> Params<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let mut hidden = Vec::with_capacity(cfg.hidden_layers);
        let mut width = 2 * cfg.embed_dim;
        for _ in 0..cfg.hidden_layers {
            hidden.push(Dense::zeros(width, cfg.hidden_dim));
            width = cfg.hidden_dim;
        }
        Params {
            user_embeddings: Array2::zeros((cfg.num_users, cfg.embed_dim)),
            projection: Dense::zeros(cfg.feature_dim, cfg.embed_dim),
            hidden,
            output: Dense::zeros(width, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            user_embeddings: Array2::zeros(self.user_embeddings.raw_dim()),
            projection: Dense::zeros(self.projection.inputs(), self.projection.outputs()),
            hidden: self
                .hidden
                .iter()
                .map(|d| Dense::zeros(d.inputs(), d.outputs()))
                .collect(),
            output: Dense::zeros(self.output.inputs(), self.output.outputs()),
        }
    }

    /// Tensors in canonical (checkpoint) order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, T>)> {
        let mut out = vec![
            (
                "user_embeddings".to_string(),
                self.user_embeddings.view().into_dyn(),
            ),
            (
                "projection.weight".to_string(),
                self.projection.weight.view().into_dyn(),
            ),
            (
                "projection.bias".to_string(),
                self.projection.bias.view().into_dyn(),
            ),
        ];
        for (i, d) in self.hidden.iter().enumerate() {
            out.push((format!("hidden.{i}.weight"), d.weight.view().into_dyn()));
            out.push((format!("hidden.{i}.bias"), d.bias.view().into_dyn()));
        }
        out.push((
            "output.weight".to_string(),
            self.output.weight.view().into_dyn(),
        ));
        out.push((
            "output.bias".to_string(),
            self.output.bias.view().into_dyn(),
        ));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, T>)> {
        let Params {
            user_embeddings,
            projection,
            hidden,
            output,
        } = self;
        let mut out = vec![
            (
                "user_embeddings".to_string(),
                user_embeddings.view_mut().into_dyn(),
            ),
            (
                "projection.weight".to_string(),
                projection.weight.view_mut().into_dyn(),
            ),
            (
                "projection.bias".to_string(),
                projection.bias.view_mut().into_dyn(),
            ),
        ];
        for (i, d) in hidden.iter_mut().enumerate() {
            out.push((format!("hidden.{i}.weight"), d.weight.view_mut().into_dyn()));
            out.push((format!("hidden.{i}.bias"), d.bias.view_mut().into_dyn()));
        }
        out.push((
            "output.weight".to_string(),
            output.weight.view_mut().into_dyn(),
        ));
        out.push(("output.bias".to_string(), output.bias.view_mut().into_dyn()));
        out
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_zero()))
    }
}
