use crate::model::{Params, Real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Params<T>,
    pub v: Params<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &Params<T>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// Bias-corrected Adam update of one flat tensor at step `t` (1-based).
pub fn adam_update<T: Real>(
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    lr: f64,
    cfg: &AdamConfig,
) {
    let b1 = T::from_f64(cfg.beta1).unwrap();
    let b2 = T::from_f64(cfg.beta2).unwrap();
    let one = T::one();
    let c1 = T::from_f64(1.0 - cfg.beta1.powf(t as f64)).unwrap();
    let c2 = T::from_f64(1.0 - cfg.beta2.powf(t as f64)).unwrap();
    let lr = T::from_f64(lr).unwrap();
    let eps = T::from_f64(cfg.epsilon).unwrap();
    for (((p, &g), m), v) in theta
        .iter_mut()
        .zip(grad)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One Adam step over every parameter tensor. Fails without touching the
/// parameters when any gradient is non-finite.
pub fn adam_step<T: Real>(
    params: &mut Params<T>,
    grads: &Params<T>,
    state: &mut AdamState<T>,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let grads = grads.tensors();
    for (name, g) in &grads {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {name}")));
        }
    }
    state.t += 1;
    let t = state.t;
    let tensors = params.tensors_mut().into_iter().zip(grads);
    let moments = state.m.tensors_mut().into_iter().zip(state.v.tensors_mut());
    for (((name, mut p), (_, g)), ((_, mut m), (_, mut v))) in tensors.zip(moments) {
        if p.shape() != g.shape() {
            return Err(Error::Invalid(format!(
                "gradient shape mismatch for {name}"
            )));
        }
        adam_update(
            slice(p.as_slice_mut()),
            g.as_slice().expect("standard layout tensor"),
            slice(m.as_slice_mut()),
            slice(v.as_slice_mut()),
            t,
            lr,
            cfg,
        );
    }
    Ok(())
}

fn slice<T>(a: Option<&mut [T]>) -> &mut [T] {
    a.expect("standard layout tensor")
}
