use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::decoder::{decoder_loss, DecoderEval, DecoderGrads, DecoderParams, ReconTarget};
use super::{ForwardResult, Model};
use crate::data::{HomoGraph, Splits};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::nn::{
    dropout, dropout_input, gcn_layer_backward, gcn_layer_backward_weights,
    gcn_layer_forward_owned, gcn_propagate, masked_class_loss, row_softmax, ActivationKind,
    LayerCache, ReconMode,
};
use crate::optim::{glorot_init, ParamSet, RandomStream};
use crate::sparse::{add_self_loops, spmm, spmm_t, sym_normalize, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoSettings {
    pub d1: usize,
    pub gamma: f64,
    pub dropout: f64,
    pub decoder_layers: usize,
    pub recon_mode: ReconMode,
    pub decoder_eval: DecoderEval,
}

impl Default for HomoSettings {
    fn default() -> Self {
        Self {
            d1: 18,
            gamma: 10.0,
            dropout: 0.5,
            decoder_layers: 1,
            recon_mode: ReconMode::OneSided,
            decoder_eval: DecoderEval::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoParams {
    pub w0: DenseMatrix,
    pub w1: DenseMatrix,
    pub decoder: DecoderParams,
}

impl HomoParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            w0: DenseMatrix::zeros(self.w0.n_rows(), self.w0.n_cols()),
            w1: DenseMatrix::zeros(self.w1.n_rows(), self.w1.n_cols()),
            decoder: self.decoder.zeros_like(),
        }
    }
}

impl ParamSet for HomoParams {
    fn tensors(&self) -> Vec<&DenseMatrix> {
        let mut t = vec![&self.w0, &self.w1];
        t.extend(self.decoder.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut t = vec![&mut self.w0, &mut self.w1];
        t.extend(self.decoder.tensors_mut());
        t
    }

    fn names(&self) -> Vec<String> {
        let mut n = vec!["W0".to_string(), "W1".to_string()];
        n.extend(self.decoder.names());
        n
    }

    fn decays(&self) -> Vec<bool> {
        vec![true; self.tensors().len()]
    }
}

/// A homogeneous graph bound to its propagation operator
/// `D^{-1/2} (A + I) D^{-1/2}`, which is also the reconstruction target.
#[derive(Debug, Clone)]
pub struct HomoModel {
    pub graph: Arc<HomoGraph>,
    pub operator: Arc<SparseMatrix>,
    pub settings: HomoSettings,
    target: ReconTarget,
}

impl HomoModel {
    pub fn new(graph: Arc<HomoGraph>, settings: HomoSettings) -> Result<Self> {
        if !(0.0..1.0).contains(&settings.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                settings.dropout
            )));
        }
        if settings.gamma.is_nan() || settings.gamma < 0.0 {
            return Err(Error::Config(format!(
                "gamma must be non-negative, got {}",
                settings.gamma
            )));
        }
        if settings.d1 == 0 {
            return Err(Error::Config("d1 must be positive".into()));
        }
        let operator = Arc::new(sym_normalize(&add_self_loops(&graph.adjacency)?)?);
        let n = graph.n();
        let target = ReconTarget {
            matrix: (*operator).clone(),
            scale: 1.0 / (n as f64 * n as f64),
        };
        Ok(Self {
            graph,
            operator,
            settings,
            target,
        })
    }
}

#[derive(Debug, Clone)]
pub struct HomoTrace {
    layer1: LayerCache,
    hidden_mask: Option<DenseMatrix>,
    layer2: LayerCache,
    grad_logits: DenseMatrix,
    decoder: Option<DecoderGrads>,
}

fn maybe_dropout(
    h: &DenseMatrix,
    rate: f64,
    training: bool,
    stream: &mut RandomStream,
) -> Result<(DenseMatrix, Option<DenseMatrix>)> {
    if training && rate > 0.0 {
        let (d, m) = dropout(h, rate, stream)?;
        Ok((d, Some(m)))
    } else {
        Ok((h.clone(), None))
    }
}

/// `H1 = ReLU(S·X·W0)`, `H2 = softmax(S·H1·W1)`, decoder `sigmoid(S·H1·Wa)`.
/// Dropout is applied to `X` and `H1` only when `training`.
pub fn homo_forward(
    model: &HomoModel,
    params: &HomoParams,
    training: bool,
    stream: &mut RandomStream,
) -> Result<ForwardResult<HomoTrace>> {
    let st = &model.settings;
    let s = &model.operator;
    let g = &model.graph;
    let x_in = if training && st.dropout > 0.0 {
        dropout_input(&g.features, st.dropout, stream)?
    } else {
        g.features.clone()
    };
    let (h1, layer1) = gcn_layer_forward_owned(s, x_in, &params.w0, ActivationKind::ReLU)?;
    let (h1_in, hidden_mask) = maybe_dropout(&h1, st.dropout, training, stream)?;
    let (logits, layer2) =
        gcn_layer_forward_owned(s, h1_in.clone(), &params.w1, ActivationKind::Identity)?;
    let h2 = row_softmax(&logits);
    let (class_loss, grad_logits) = masked_class_loss(&h2, &g.labels, &g.splits.train)?;

    let z = spmm(s, &h1_in)?;
    let want = training && st.gamma != 0.0;
    let dec = decoder_loss(
        s,
        &z,
        &params.decoder,
        std::slice::from_ref(&model.target),
        st.recon_mode,
        st.decoder_eval,
        want,
    )?;
    Ok(ForwardResult {
        h1,
        h2,
        class_loss,
        recon_loss: dec.loss,
        total_loss: class_loss + st.gamma * dec.loss,
        trace: HomoTrace {
            layer1,
            hidden_mask,
            layer2,
            grad_logits,
            decoder: dec.grads,
        },
    })
}

/// Gradients of `total_loss` for every parameter.
pub fn homo_backward(
    model: &HomoModel,
    params: &HomoParams,
    result: &ForwardResult<HomoTrace>,
) -> Result<HomoParams> {
    let tr = &result.trace;
    let gamma = model.settings.gamma;
    let mut grads = params.zeros_like();
    let (mut g_h1_in, g_w1) = gcn_layer_backward(&tr.layer2, &params.w1, &tr.grad_logits)?;
    grads.w1 = g_w1;
    if gamma != 0.0 {
        let mut dec = tr.decoder.clone().ok_or_else(|| {
            Error::Argument("backward needs a forward pass run with training = true".into())
        })?;
        dec.scale(gamma);
        g_h1_in.add_assign(&spmm_t(&model.operator, &dec.input)?)?;
        grads.decoder = dec.params;
    }
    let g_h1 = match &tr.hidden_mask {
        Some(mask) => g_h1_in.hadamard(mask)?,
        None => g_h1_in,
    };
    grads.w0 = gcn_layer_backward_weights(&tr.layer1, &g_h1)?;
    Ok(grads)
}

impl Model for HomoModel {
    type Params = HomoParams;
    type Trace = HomoTrace;

    fn init_params(&self, stream: &mut RandomStream) -> Result<HomoParams> {
        let g = &self.graph;
        let d1 = self.settings.d1;
        let w0 = glorot_init(g.features.n_cols(), d1, stream);
        let w1 = glorot_init(d1, g.num_classes(), stream);
        let decoder = DecoderParams::init(d1, d1, &[g.n()], self.settings.decoder_layers, stream)?;
        Ok(HomoParams { w0, w1, decoder })
    }

    fn forward(
        &self,
        params: &HomoParams,
        training: bool,
        stream: &mut RandomStream,
    ) -> Result<ForwardResult<HomoTrace>> {
        homo_forward(self, params, training, stream)
    }

    fn backward(
        &self,
        params: &HomoParams,
        result: &ForwardResult<HomoTrace>,
    ) -> Result<HomoParams> {
        homo_backward(self, params, result)
    }

    fn predict(&self, params: &HomoParams) -> Result<DenseMatrix> {
        let s = &self.operator;
        let h1 = gcn_propagate(s, &self.graph.features, &params.w0, ActivationKind::ReLU)?;
        let logits = gcn_propagate(s, &h1, &params.w1, ActivationKind::Identity)?;
        Ok(row_softmax(&logits))
    }

    fn labels(&self) -> &[Option<usize>] {
        &self.graph.labels
    }

    fn splits(&self) -> &Splits {
        &self.graph.splits
    }

    fn num_classes(&self) -> usize {
        self.graph.num_classes()
    }

    fn gamma(&self) -> f64 {
        self.settings.gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gcn_layer_forward;
    use crate::synthetic::toy_homo;

    fn model(gamma: f64, layers: usize) -> (HomoModel, HomoParams) {
        let g = Arc::new(toy_homo(9, 5, 3, 4));
        let settings = HomoSettings {
            d1: 6,
            gamma,
            decoder_layers: layers,
            ..HomoSettings::default()
        };
        let m = HomoModel::new(g, settings).unwrap();
        let p = m.init_params(&mut RandomStream::new(11)).unwrap();
        (m, p)
    }

    fn run(m: &HomoModel, p: &HomoParams) -> (ForwardResult<HomoTrace>, HomoParams) {
        let r = homo_forward(m, p, true, &mut RandomStream::new(5)).unwrap();
        let g = homo_backward(m, p, &r).unwrap();
        (r, g)
    }

    #[test]
    fn total_loss_decomposes() {
        for layers in [1, 2] {
            let (m, p) = model(3.5, layers);
            let (r, _) = run(&m, &p);
            assert!((r.total_loss - (r.class_loss + 3.5 * r.recon_loss)).abs() <= 1e-12);
            for i in 0..r.h2.n_rows() {
                assert!((r.h2.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_gamma_is_a_plain_gcn() {
        let (m, p) = model(0.0, 1);
        let (r, grads) = run(&m, &p);

        let s = &m.operator;
        let mut stream = RandomStream::new(5);
        let x = dropout_input(&m.graph.features, 0.5, &mut stream).unwrap();
        let (h1, c1) = gcn_layer_forward(s, &x, &p.w0, ActivationKind::ReLU).unwrap();
        let (h1d, mask) = dropout(&h1, 0.5, &mut stream).unwrap();
        let (logits, c2) = gcn_layer_forward(s, &h1d, &p.w1, ActivationKind::Identity).unwrap();
        let h2 = row_softmax(&logits);
        let (loss, g_logits) =
            masked_class_loss(&h2, &m.graph.labels, &m.graph.splits.train).unwrap();
        let (g_h1d, g_w1) = gcn_layer_backward(&c2, &p.w1, &g_logits).unwrap();
        let g_w0 = gcn_layer_backward_weights(&c1, &g_h1d.hadamard(&mask).unwrap()).unwrap();

        assert_eq!(r.class_loss.to_bits(), loss.to_bits());
        assert_eq!(r.h2, h2);
        assert_eq!(grads.w0, g_w0);
        assert_eq!(grads.w1, g_w1);
        assert!(grads.decoder.outputs[0].values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_are_affine_in_gamma() {
        let grads = |gamma| {
            let (m, p) = model(gamma, 2);
            run(&m, &p).1
        };
        let (g0, g1, g3) = (grads(0.0), grads(1.0), grads(3.0));
        for ((a, b), c) in g0.tensors().iter().zip(g1.tensors()).zip(g3.tensors()) {
            for ((x0, x1), x3) in a.values().iter().zip(b.values()).zip(c.values()) {
                let predicted = x0 + 3.0 * (x1 - x0);
                assert!((predicted - x3).abs() <= 1e-9 * (1.0 + x3.abs()));
            }
        }
    }

    #[test]
    fn predict_matches_inference_forward() {
        let (m, p) = model(2.0, 1);
        let r = homo_forward(&m, &p, false, &mut RandomStream::new(0)).unwrap();
        assert_eq!(m.predict(&p).unwrap(), r.h2);
        assert!(r.trace.decoder.is_none());
    }

    #[test]
    fn rejects_bad_settings() {
        let g = Arc::new(toy_homo(5, 3, 2, 0));
        for settings in [
            HomoSettings {
                dropout: 1.0,
                ..HomoSettings::default()
            },
            HomoSettings {
                gamma: -1.0,
                ..HomoSettings::default()
            },
            HomoSettings {
                d1: 0,
                ..HomoSettings::default()
            },
        ] {
            assert!(matches!(
                HomoModel::new(Arc::clone(&g), settings),
                Err(Error::Config(_))
            ));
        }
    }
}
