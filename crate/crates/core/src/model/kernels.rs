//! Dense-layer kernels. Each output row depends only on the matching input
//! row and every row is reduced in the same order, so batched and one-by-one
//! evaluation agree bit for bit.

use ndarray::{Array2, ArrayView2, Axis};

use super::params::Dense;
use super::Real;

#[inline]
fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `x · W + b` for a batch of rows.
pub fn affine<T: Real>(x: ArrayView2<'_, T>, layer: &Dense<T>) -> Array2<T> {
    let (rows, outputs) = (x.nrows(), layer.outputs());
    let mut out = Array2::zeros((rows, outputs));
    let bias = layer.bias.as_slice().expect("contiguous bias");
    for (x_row, mut out_row) in x.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        let out_row = out_row.as_slice_mut().expect("contiguous output");
        out_row.copy_from_slice(bias);
        for (k, &xv) in x_row.iter().enumerate() {
            let w_row = layer.weight.row(k);
            axpy(out_row, xv, w_row.as_slice().expect("contiguous weight"));
        }
    }
    out
}

/// Accumulate `∂L/∂W` and `∂L/∂b` into `grad` and return `∂L/∂x` when asked.
pub fn affine_backward<T: Real>(
    x: ArrayView2<'_, T>,
    layer: &Dense<T>,
    d_out: ArrayView2<'_, T>,
    grad: &mut Dense<T>,
    want_input_grad: bool,
) -> Option<Array2<T>> {
    for (x_row, d_row) in x.axis_iter(Axis(0)).zip(d_out.axis_iter(Axis(0))) {
        let d_row = d_row.to_slice().expect("contiguous gradient");
        axpy(
            grad.bias.as_slice_mut().expect("contiguous bias"),
            T::one(),
            d_row,
        );
        for (k, &xv) in x_row.iter().enumerate() {
            if xv != T::zero() {
                let mut g_row = grad.weight.row_mut(k);
                axpy(g_row.as_slice_mut().expect("contiguous weight"), xv, d_row);
            }
        }
    }
    if !want_input_grad {
        return None;
    }
    let mut dx = Array2::zeros((x.nrows(), layer.inputs()));
    for (d_row, mut dx_row) in d_out.axis_iter(Axis(0)).zip(dx.axis_iter_mut(Axis(0))) {
        let d_row = d_row.to_slice().expect("contiguous gradient");
        for (k, v) in dx_row.iter_mut().enumerate() {
            *v = dot(
                d_row,
                layer.weight.row(k).as_slice().expect("contiguous weight"),
            );
        }
    }
    Some(dx)
}
