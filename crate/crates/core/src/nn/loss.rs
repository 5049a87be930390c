use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Lower clamp applied to every logarithm argument.
pub const LOG_CLAMP: f64 = 1e-12;

/// Reconstruction cross-entropy flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconMode {
    /// `-Σ t·log p`: only positive targets contribute.
    #[default]
    OneSided,
    /// `-Σ [t·log p + (1 - t)·log(1 - p)]` over every entry.
    FullBce,
}

#[inline]
fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_CLAMP).ln()
}

/// Mean cross-entropy over the masked rows of a row-stochastic matrix.
///
/// The returned gradient is taken with respect to the softmax logits,
/// `(H2 - Y) / |mask|` on masked rows and zero elsewhere.
pub fn masked_class_loss(
    probs: &DenseMatrix,
    labels: &[Option<usize>],
    mask: &[usize],
) -> Result<(f64, DenseMatrix)> {
    if mask.is_empty() {
        return Err(Error::Argument(
            "classification loss over an empty mask".into(),
        ));
    }
    if labels.len() != probs.n_rows() {
        return Err(Error::dim(
            "masked_class_loss",
            format!("{} labels for {} rows", labels.len(), probs.n_rows()),
        ));
    }
    let inv = 1.0 / mask.len() as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(probs.n_rows(), probs.n_cols());
    for &i in mask {
        if i >= probs.n_rows() {
            return Err(Error::Argument(format!("mask index {i} out of range")));
        }
        let label = labels[i]
            .filter(|&l| l < probs.n_cols())
            .ok_or_else(|| Error::Argument(format!("node {i} in mask has no valid label")))?;
        let row = probs.row(i);
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Argument(format!("row {i} sums to {total}, not 1")));
        }
        loss -= clamped_ln(row[label]);
        let g = grad.row_mut(i);
        for (gv, &p) in g.iter_mut().zip(row) {
            *gv = p * inv;
        }
        g[label] -= inv;
    }
    Ok((loss * inv, grad))
}

/// Loss contribution and derivatives for one entry whose prediction is
/// `sigmoid(logit)`, scaled by `scale`. Returns
/// `(loss, d loss / d logit, d loss / d target)`.
#[inline]
pub fn sigmoid_recon_entry(
    logit: f64,
    target: f64,
    scale: f64,
    mode: ReconMode,
) -> (f64, f64, f64) {
    let p = sigmoid(logit);
    let lp = clamped_ln(p);
    let mut loss = -scale * target * lp;
    let mut d_logit = if p >= LOG_CLAMP {
        -scale * target * (1.0 - p)
    } else {
        0.0
    };
    let mut d_target = -scale * lp;
    if mode == ReconMode::FullBce {
        let q = 1.0 - p;
        let lq = clamped_ln(q);
        loss -= scale * (1.0 - target) * lq;
        if q >= LOG_CLAMP {
            d_logit += scale * (1.0 - target) * p;
        }
        d_target += scale * lq;
    }
    (loss, d_logit, d_target)
}

fn entry_pred(t: f64, p: f64, scale: f64, mode: ReconMode) -> (f64, f64) {
    let mut loss = 0.0;
    let mut grad = 0.0;
    if t != 0.0 {
        loss -= scale * t * clamped_ln(p);
        if p >= LOG_CLAMP {
            grad -= scale * t / p;
        }
    }
    if mode == ReconMode::FullBce {
        let q = 1.0 - p;
        loss -= scale * (1.0 - t) * clamped_ln(q);
        if q >= LOG_CLAMP {
            grad += scale * (1.0 - t) / q;
        }
    }
    (loss, grad)
}

/// Adjacency reconstruction error against a (normalized) sparse target,
/// averaged over all `n · m` entries. Gradient is with respect to `pred`.
pub fn recon_loss_adjacency(
    target: &SparseMatrix,
    pred: &DenseMatrix,
    mode: ReconMode,
) -> Result<(f64, DenseMatrix)> {
    if target.shape() != pred.shape() {
        return Err(Error::dim(
            "recon_loss_adjacency",
            format!("target {:?}, pred {:?}", target.shape(), pred.shape()),
        ));
    }
    let scale = 1.0 / (pred.n_rows() * pred.n_cols()) as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(pred.n_rows(), pred.n_cols());
    for i in 0..pred.n_rows() {
        let (cols, vals) = target.row(i);
        let mut next = 0;
        for j in 0..pred.n_cols() {
            let t = if next < cols.len() && cols[next] == j {
                next += 1;
                vals[next - 1]
            } else {
                0.0
            };
            if t == 0.0 && mode == ReconMode::OneSided {
                continue;
            }
            let (l, g) = entry_pred(t, pred.get(i, j), scale, mode);
            loss += l;
            grad.set(i, j, g);
        }
    }
    Ok((loss, grad))
}

/// Feature reconstruction error against a 0/1 feature matrix, averaged over
/// all `n · d` entries. Gradient is with respect to `xhat`.
pub fn recon_loss_feature(
    x: &DenseMatrix,
    xhat: &DenseMatrix,
    mode: ReconMode,
) -> Result<(f64, DenseMatrix)> {
    if x.shape() != xhat.shape() {
        return Err(Error::dim(
            "recon_loss_feature",
            format!("X {:?}, Xhat {:?}", x.shape(), xhat.shape()),
        ));
    }
    let scale = 1.0 / (x.n_rows() * x.n_cols()) as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(x.n_rows(), x.n_cols());
    for (k, (&t, &p)) in x.values().iter().zip(xhat.values()).enumerate() {
        if t == 0.0 && mode == ReconMode::OneSided {
            continue;
        }
        let (l, g) = entry_pred(t, p, scale, mode);
        loss += l;
        grad.values_mut()[k] = g;
    }
    Ok((loss, grad))
}
