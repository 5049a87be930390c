use std::sync::Arc;

use super::ActivationKind;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::{spmm, spmm_t, SparseMatrix};

/// Intermediates a layer keeps for its backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub input: DenseMatrix,
    /// Graph operator of a convolution layer; `None` for dense layers.
    pub operator: Option<Arc<SparseMatrix>>,
    pub pre_activation: DenseMatrix,
    pub output: DenseMatrix,
    pub activation: ActivationKind,
}

impl LayerCache {
    fn grad_pre(&self, grad_out: &DenseMatrix) -> Result<DenseMatrix> {
        if grad_out.shape() != self.output.shape() {
            return Err(Error::dim(
                "layer backward",
                format!(
                    "grad {:?} vs output {:?}",
                    grad_out.shape(),
                    self.output.shape()
                ),
            ));
        }
        self.activation
            .backward(&self.pre_activation, &self.output, grad_out)
    }
}

/// `act(S · H · W)`. The product is associated so that the sparse operator
/// multiplies the narrower of `H` and `H · W`.
pub fn gcn_layer_forward(
    s: &Arc<SparseMatrix>,
    h: &DenseMatrix,
    w: &DenseMatrix,
    act: ActivationKind,
) -> Result<(DenseMatrix, LayerCache)> {
    gcn_layer_forward_owned(s, h.clone(), w, act)
}

/// Same as [`gcn_layer_forward`] but moves `h` into the cache.
pub fn gcn_layer_forward_owned(
    s: &Arc<SparseMatrix>,
    h: DenseMatrix,
    w: &DenseMatrix,
    act: ActivationKind,
) -> Result<(DenseMatrix, LayerCache)> {
    let pre = gcn_pre_activation(s, &h, w)?;
    let out = act.apply(&pre);
    let cache = LayerCache {
        input: h,
        operator: Some(Arc::clone(s)),
        pre_activation: pre,
        output: out.clone(),
        activation: act,
    };
    Ok((out, cache))
}

/// Inference-only `act(S · H · W)`; keeps nothing for a backward pass.
pub fn gcn_propagate(
    s: &SparseMatrix,
    h: &DenseMatrix,
    w: &DenseMatrix,
    act: ActivationKind,
) -> Result<DenseMatrix> {
    Ok(act.apply(&gcn_pre_activation(s, h, w)?))
}

fn gcn_pre_activation(s: &SparseMatrix, h: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    if s.n_cols() != h.n_rows() || h.n_cols() != w.n_rows() {
        return Err(Error::dim(
            "gcn_layer_forward",
            format!("S {:?}, H {:?}, W {:?}", s.shape(), h.shape(), w.shape()),
        ));
    }
    if h.n_cols() > w.n_cols() {
        spmm(s, &h.matmul(w)?)
    } else {
        spmm(s, h)?.matmul(w)
    }
}

fn propagate_back(cache: &LayerCache, grad_out: &DenseMatrix) -> Result<DenseMatrix> {
    let g = cache.grad_pre(grad_out)?;
    let s = cache
        .operator
        .as_ref()
        .ok_or_else(|| Error::Argument("gcn backward on a cache without an operator".into()))?;
    spmm_t(s, &g)
}

/// Returns `(grad_H, grad_W)`.
pub fn gcn_layer_backward(
    cache: &LayerCache,
    w: &DenseMatrix,
    grad_out: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let t = propagate_back(cache, grad_out)?;
    let grad_w = cache.input.t_matmul(&t)?;
    let grad_h = t.matmul_t(w)?;
    Ok((grad_h, grad_w))
}

/// Weight gradient only, for layers whose input is data.
pub fn gcn_layer_backward_weights(
    cache: &LayerCache,
    grad_out: &DenseMatrix,
) -> Result<DenseMatrix> {
    let t = propagate_back(cache, grad_out)?;
    cache.input.t_matmul(&t)
}

/// `act(H · W + 1 · bᵀ)` with `b` a `1 × f` row.
pub fn dense_layer_forward(
    h: &DenseMatrix,
    w: &DenseMatrix,
    b: Option<&DenseMatrix>,
    act: ActivationKind,
) -> Result<(DenseMatrix, LayerCache)> {
    let mut pre = h.matmul(w)?;
    if let Some(b) = b {
        if b.n_rows() != 1 || b.n_cols() != w.n_cols() {
            return Err(Error::dim(
                "dense_layer_forward",
                format!("bias {:?} for {} outputs", b.shape(), w.n_cols()),
            ));
        }
        for i in 0..pre.n_rows() {
            for (p, bv) in pre.row_mut(i).iter_mut().zip(b.values()) {
                *p += bv;
            }
        }
    }
    let out = act.apply(&pre);
    let cache = LayerCache {
        input: h.clone(),
        operator: None,
        pre_activation: pre,
        output: out.clone(),
        activation: act,
    };
    Ok((out, cache))
}

/// Returns `(grad_H, grad_W, grad_b)`; `grad_b` is a `1 × f` row.
pub fn dense_layer_backward(
    cache: &LayerCache,
    w: &DenseMatrix,
    grad_out: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let g = cache.grad_pre(grad_out)?;
    let grad_w = cache.input.t_matmul(&g)?;
    let grad_h = g.matmul_t(w)?;
    let grad_b = DenseMatrix::from_vec(1, g.n_cols(), g.column_sums())?;
    Ok((grad_h, grad_w, grad_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_diff_check;
    use crate::optim::RandomStream;
    use crate::sparse::{add_self_loops, sym_normalize};

    fn random(n: usize, m: usize, s: &mut RandomStream) -> DenseMatrix {
        DenseMatrix::from_vec(n, m, (0..n * m).map(|_| s.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    fn random_operator(n: usize, s: &mut RandomStream) -> Arc<SparseMatrix> {
        let mut t = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if s.next_f64() < 0.4 {
                    t.push((i, j, 1.0));
                    t.push((j, i, 1.0));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        Arc::new(sym_normalize(&add_self_loops(&a).unwrap()).unwrap())
    }

    /// Scalar test functional: Σ C ⊙ layer(H, W).
    fn functional(out: &DenseMatrix, c: &DenseMatrix) -> f64 {
        out.dot(c).unwrap()
    }

    #[test]
    fn identity_composition() {
        let h = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0], vec![0.0, 1.0]]);
        let s = Arc::new(SparseMatrix::identity(3));
        let (out, _) =
            gcn_layer_forward(&s, &h, &DenseMatrix::identity(2), ActivationKind::Identity).unwrap();
        assert_eq!(out, h);
        let (relu, _) =
            gcn_layer_forward(&s, &h, &DenseMatrix::identity(2), ActivationKind::ReLU).unwrap();
        assert!(relu.values().iter().all(|&v| v >= 0.0));
        let (dense, _) = dense_layer_forward(
            &h,
            &DenseMatrix::identity(2),
            None,
            ActivationKind::Identity,
        )
        .unwrap();
        assert_eq!(dense, h);
    }

    #[test]
    fn constant_logits_give_uniform_rows() {
        let h = DenseMatrix::zeros(3, 4);
        let b = DenseMatrix::filled(1, 5, 1.0);
        let (out, _) = dense_layer_forward(
            &h,
            &DenseMatrix::zeros(4, 5),
            Some(&b),
            ActivationKind::RowSoftmax,
        )
        .unwrap();
        assert!(out.values().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn forward_matches_dense_composition() {
        let mut st = RandomStream::new(11);
        let s = random_operator(6, &mut st);
        for (d_in, d_out) in [(5, 3), (2, 4)] {
            let h = random(6, d_in, &mut st);
            let w = random(d_in, d_out, &mut st);
            for act in [
                ActivationKind::ReLU,
                ActivationKind::Sigmoid,
                ActivationKind::RowSoftmax,
            ] {
                let (out, _) = gcn_layer_forward(&s, &h, &w, act).unwrap();
                let oracle = act.apply(&s.to_dense().matmul(&h).unwrap().matmul(&w).unwrap());
                assert!(out.max_abs_diff(&oracle).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut st = RandomStream::new(2);
        let s = random_operator(4, &mut st);
        let h = random(4, 3, &mut st);
        let w = random(3, 2, &mut st);
        let (_, cache) = gcn_layer_forward(&s, &h, &w, ActivationKind::Sigmoid).unwrap();
        let (gh, gw) = gcn_layer_backward(&cache, &w, &DenseMatrix::zeros(4, 2)).unwrap();
        assert!(gh.values().iter().all(|&v| v == 0.0));
        assert!(gw.values().iter().all(|&v| v == 0.0));
        let (_, dcache) = dense_layer_forward(&h, &w, None, ActivationKind::ReLU).unwrap();
        let (a, b, c) = dense_layer_backward(&dcache, &w, &DenseMatrix::zeros(4, 2)).unwrap();
        assert!(a
            .values()
            .iter()
            .chain(b.values())
            .chain(c.values())
            .all(|&v| v == 0.0));
    }

    #[test]
    fn identity_operator_reduces_to_matmul_gradient() {
        let mut st = RandomStream::new(5);
        let s = Arc::new(SparseMatrix::identity(4));
        let h = random(4, 3, &mut st);
        let w = random(3, 2, &mut st);
        let g = random(4, 2, &mut st);
        let (_, cache) = gcn_layer_forward(&s, &h, &w, ActivationKind::Identity).unwrap();
        let (_, gw) = gcn_layer_backward(&cache, &w, &g).unwrap();
        assert!(gw.max_abs_diff(&h.t_matmul(&g).unwrap()).unwrap() < 1e-15);
        let (_, dcache) = dense_layer_forward(&h, &w, None, ActivationKind::Identity).unwrap();
        let (_, _, gb) = dense_layer_backward(&dcache, &w, &g).unwrap();
        assert_eq!(gb.values(), &g.column_sums()[..]);
    }

    #[test]
    fn gcn_backward_matches_finite_differences() {
        let mut st = RandomStream::new(21);
        let s = random_operator(5, &mut st);
        let h = random(5, 4, &mut st);
        let w = random(4, 3, &mut st);
        let c = random(5, 3, &mut st);
        for act in [
            ActivationKind::Identity,
            ActivationKind::ReLU,
            ActivationKind::Sigmoid,
            ActivationKind::RowSoftmax,
        ] {
            let (_, cache) = gcn_layer_forward(&s, &h, &w, act).unwrap();
            let (gh, gw) = gcn_layer_backward(&cache, &w, &c).unwrap();
            let f_w =
                |w2: &DenseMatrix| functional(&gcn_layer_forward(&s, &h, w2, act).unwrap().0, &c);
            let f_h =
                |h2: &DenseMatrix| functional(&gcn_layer_forward(&s, h2, &w, act).unwrap().0, &c);
            assert!(finite_diff_check(f_w, &w, &gw, 1e-5) <= 1e-4, "{act:?} W");
            assert!(finite_diff_check(f_h, &h, &gh, 1e-5) <= 1e-4, "{act:?} H");
            let gw_only = gcn_layer_backward_weights(&cache, &c).unwrap();
            assert_eq!(gw_only, gw);
        }
    }

    #[test]
    fn dense_backward_matches_finite_differences() {
        let mut st = RandomStream::new(8);
        let h = random(6, 4, &mut st);
        let w = random(4, 3, &mut st);
        let b = random(1, 3, &mut st);
        let c = random(6, 3, &mut st);
        for act in [
            ActivationKind::ReLU,
            ActivationKind::Sigmoid,
            ActivationKind::RowSoftmax,
        ] {
            let (_, cache) = dense_layer_forward(&h, &w, Some(&b), act).unwrap();
            let (gh, gw, gb) = dense_layer_backward(&cache, &w, &c).unwrap();
            let f = |h2: &DenseMatrix, w2: &DenseMatrix, b2: &DenseMatrix| {
                functional(&dense_layer_forward(h2, w2, Some(b2), act).unwrap().0, &c)
            };
            assert!(finite_diff_check(|x| f(x, &w, &b), &h, &gh, 1e-5) <= 1e-4);
            assert!(finite_diff_check(|x| f(&h, x, &b), &w, &gw, 1e-5) <= 1e-4);
            assert!(finite_diff_check(|x| f(&h, &w, x), &b, &gb, 1e-5) <= 1e-4);
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let s = Arc::new(SparseMatrix::identity(3));
        let h = DenseMatrix::zeros(2, 2);
        assert!(
            gcn_layer_forward(&s, &h, &DenseMatrix::zeros(2, 2), ActivationKind::ReLU).is_err()
        );
        let h = DenseMatrix::zeros(3, 2);
        assert!(
            gcn_layer_forward(&s, &h, &DenseMatrix::zeros(3, 2), ActivationKind::ReLU).is_err()
        );
        let (_, cache) =
            gcn_layer_forward(&s, &h, &DenseMatrix::zeros(2, 2), ActivationKind::ReLU).unwrap();
        assert!(
            gcn_layer_backward(&cache, &DenseMatrix::zeros(2, 2), &DenseMatrix::zeros(3, 3))
                .is_err()
        );
        assert!(dense_layer_forward(
            &h,
            &DenseMatrix::zeros(2, 2),
            Some(&DenseMatrix::zeros(1, 3)),
            ActivationKind::Identity
        )
        .is_err());
    }
}
