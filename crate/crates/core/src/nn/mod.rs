//! Differentiable building blocks with hand-written backward passes.

mod gradcheck;
mod layers;
mod loss;

pub use gradcheck::{finite_diff_check, relative_error};
pub use layers::{
    dense_layer_backward, dense_layer_forward, gcn_layer_backward, gcn_layer_backward_weights,
    gcn_layer_forward, gcn_layer_forward_owned, gcn_propagate, LayerCache,
};
pub use loss::{
    masked_class_loss, recon_loss_adjacency, recon_loss_feature, sigmoid_recon_entry, ReconMode,
    LOG_CLAMP,
};

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::optim::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivationKind {
    ReLU,
    RowSoftmax,
    Sigmoid,
    /// No nonlinearity.
    Identity,
}

impl ActivationKind {
    pub fn apply(self, pre: &DenseMatrix) -> DenseMatrix {
        match self {
            ActivationKind::ReLU => pre.map(|v| v.max(0.0)),
            ActivationKind::Sigmoid => pre.map(sigmoid),
            ActivationKind::RowSoftmax => row_softmax(pre),
            ActivationKind::Identity => pre.clone(),
        }
    }

    /// Gradient with respect to the pre-activation given the gradient with
    /// respect to the output.
    pub fn backward(
        self,
        pre: &DenseMatrix,
        out: &DenseMatrix,
        grad_out: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        if pre.shape() != grad_out.shape() || out.shape() != grad_out.shape() {
            return Err(Error::dim(
                "activation backward",
                format!("pre {:?}, grad {:?}", pre.shape(), grad_out.shape()),
            ));
        }
        let mut g = grad_out.clone();
        match self {
            ActivationKind::Identity => {}
            ActivationKind::ReLU => {
                for (gv, &p) in g.values_mut().iter_mut().zip(pre.values()) {
                    if p <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            ActivationKind::Sigmoid => {
                for (gv, &y) in g.values_mut().iter_mut().zip(out.values()) {
                    *gv *= y * (1.0 - y);
                }
            }
            ActivationKind::RowSoftmax => {
                for i in 0..g.n_rows() {
                    let y = out.row(i);
                    let row = g.row_mut(i);
                    let inner: f64 = row.iter().zip(y).map(|(a, b)| a * b).sum();
                    for (gv, &yv) in row.iter_mut().zip(y) {
                        *gv = yv * (*gv - inner);
                    }
                }
            }
        }
        Ok(g)
    }
}

#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn row_softmax(z: &DenseMatrix) -> DenseMatrix {
    let mut out = z.clone();
    for i in 0..out.n_rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Inverted dropout. Returns the masked input and the per-entry scale
/// (`0` or `1 / (1 - rate)`) needed by the backward pass.
pub fn dropout(
    h: &DenseMatrix,
    rate: f64,
    stream: &mut RandomStream,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    let keep = 1.0 / (1.0 - rate);
    let mut mask = DenseMatrix::zeros(h.n_rows(), h.n_cols());
    for m in mask.values_mut() {
        *m = if stream.next_f64() < rate { 0.0 } else { keep };
    }
    let dropped = h.hadamard(&mask)?;
    Ok((dropped, mask))
}

/// Inverted dropout without a mask, for inputs that need no gradient.
/// Only nonzero entries draw from `stream`; dropping a zero is a no-op, so
/// sparse inputs are cheap.
pub fn dropout_input(h: &DenseMatrix, rate: f64, stream: &mut RandomStream) -> Result<DenseMatrix> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    let keep = 1.0 / (1.0 - rate);
    let mut out = h.clone();
    for v in out.values_mut() {
        if *v != 0.0 {
            *v = if stream.next_f64() < rate {
                0.0
            } else {
                *v * keep
            };
        }
    }
    Ok(out)
}
