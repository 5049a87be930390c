use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::decoder::{decoder_loss, DecoderEval, DecoderGrads, DecoderParams, ReconTarget};
use super::{ForwardResult, Model};
use crate::data::{HeteroGraph, Splits};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::nn::{
    dense_layer_backward, dense_layer_forward, masked_class_loss, row_softmax, softmax_in_place,
    ActivationKind, LayerCache, ReconMode,
};
use crate::optim::{glorot_init, ParamSet, RandomStream};
use crate::sparse::{
    add_self_loops, row_normalize, sp_sp_matmul, spmm, spmm_t, weighted_sum, SparseMatrix,
};

/// Which matrix the heterogeneous decoder reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantKind {
    /// The feature matrix.
    #[serde(rename = "x")]
    AegX,
    /// The learned combined adjacency.
    #[serde(rename = "h")]
    AegH,
    /// The sum of all edge-type adjacencies.
    #[serde(rename = "a")]
    AegA,
    /// Every edge-type adjacency, one decoder head each.
    #[serde(rename = "s")]
    AegS,
}

impl VariantKind {
    pub const ALL: [VariantKind; 4] = [
        VariantKind::AegX,
        VariantKind::AegH,
        VariantKind::AegA,
        VariantKind::AegS,
    ];

    pub fn short(self) -> &'static str {
        match self {
            VariantKind::AegX => "x",
            VariantKind::AegH => "h",
            VariantKind::AegA => "a",
            VariantKind::AegS => "s",
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VariantKind::AegX => "AEG_X",
            VariantKind::AegH => "AEG_H",
            VariantKind::AegA => "AEG_A",
            VariantKind::AegS => "AEG_S",
        };
        f.write_str(s)
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().trim_start_matches("aeg_") {
            "x" => Ok(VariantKind::AegX),
            "h" => Ok(VariantKind::AegH),
            "a" => Ok(VariantKind::AegA),
            "s" => Ok(VariantKind::AegS),
            _ => Err(Error::Config(format!(
                "unknown variant '{s}' (expected x, h, a or s)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroSettings {
    pub d0: usize,
    pub d1: usize,
    pub channels: usize,
    pub variant: VariantKind,
    pub gamma: f64,
    pub decoder_layers: usize,
    pub recon_mode: ReconMode,
    pub decoder_eval: DecoderEval,
    /// Row-normalize adjacency targets (`false` keeps raw values).
    pub normalize_targets: bool,
}

impl Default for HeteroSettings {
    fn default() -> Self {
        Self {
            d0: 128,
            d1: 64,
            channels: 2,
            variant: VariantKind::AegX,
            gamma: 1.0,
            decoder_layers: 1,
            recon_mode: ReconMode::OneSided,
            decoder_eval: DecoderEval::Auto,
            normalize_targets: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroParams {
    /// `2·C × K`; row `2i` holds the first-layer weights of channel `i`,
    /// row `2i + 1` the second-layer weights.
    pub channel_weights: DenseMatrix,
    /// `d × d0/C`, shared by all channels.
    pub w_aggre: DenseMatrix,
    pub w0: DenseMatrix,
    pub w1: DenseMatrix,
    /// `1 × f`.
    pub b: DenseMatrix,
    pub decoder: DecoderParams,
}

impl HeteroParams {
    pub fn zeros_like(&self) -> Self {
        let z = |m: &DenseMatrix| DenseMatrix::zeros(m.n_rows(), m.n_cols());
        Self {
            channel_weights: z(&self.channel_weights),
            w_aggre: z(&self.w_aggre),
            w0: z(&self.w0),
            w1: z(&self.w1),
            b: z(&self.b),
            decoder: self.decoder.zeros_like(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channel_weights.n_rows() / 2
    }
}

impl ParamSet for HeteroParams {
    fn tensors(&self) -> Vec<&DenseMatrix> {
        let mut t = vec![
            &self.channel_weights,
            &self.w_aggre,
            &self.w0,
            &self.w1,
            &self.b,
        ];
        t.extend(self.decoder.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut t = vec![
            &mut self.channel_weights,
            &mut self.w_aggre,
            &mut self.w0,
            &mut self.w1,
            &mut self.b,
        ];
        t.extend(self.decoder.tensors_mut());
        t
    }

    fn names(&self) -> Vec<String> {
        let mut n: Vec<String> = ["channel_weights", "W_aggre", "W0", "W1", "b"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        n.extend(self.decoder.names());
        n
    }

    fn decays(&self) -> Vec<bool> {
        let mut d = vec![true, true, true, true, false];
        d.extend(self.decoder.tensors().iter().map(|_| true));
        d
    }
}

fn softmax_row(w: &DenseMatrix, r: usize) -> Vec<f64> {
    let mut v = w.row(r).to_vec();
    softmax_in_place(&mut v);
    v
}

struct Transform {
    /// Per channel: softmax weights and the two mixed adjacencies.
    mixes: Vec<(Vec<f64>, Vec<f64>, SparseMatrix, SparseMatrix)>,
    /// Per channel `A^i + I`; all share one sparsity pattern.
    channel_adjs: Vec<SparseMatrix>,
    combined: SparseMatrix,
}

fn transform(adjs: &[SparseMatrix], channel_weights: &DenseMatrix) -> Result<Transform> {
    let k = adjs.len();
    if k == 0 {
        return Err(Error::Argument(
            "heterogeneous transform needs at least one adjacency".into(),
        ));
    }
    let n = adjs[0].n_rows();
    if adjs.iter().any(|a| a.shape() != (n, n)) {
        return Err(Error::dim(
            "hetero_transform",
            "adjacencies must all be n × n",
        ));
    }
    if channel_weights.n_cols() != k
        || channel_weights.n_rows() == 0
        || !channel_weights.n_rows().is_multiple_of(2)
    {
        return Err(Error::dim(
            "hetero_transform",
            format!(
                "channel weights {:?} for {k} edge types",
                channel_weights.shape()
            ),
        ));
    }
    let refs: Vec<&SparseMatrix> = adjs.iter().collect();
    let mut mixes = Vec::new();
    let mut channel_adjs = Vec::new();
    for c in 0..channel_weights.n_rows() / 2 {
        let w1 = softmax_row(channel_weights, 2 * c);
        let w2 = softmax_row(channel_weights, 2 * c + 1);
        let q1 = weighted_sum(&refs, &w1)?;
        let q2 = weighted_sum(&refs, &w2)?;
        channel_adjs.push(add_self_loops(&sp_sp_matmul(&q1, &q2)?)?);
        mixes.push((w1, w2, q1, q2));
    }
    let crefs: Vec<&SparseMatrix> = channel_adjs.iter().collect();
    let combined = weighted_sum(&crefs, &vec![1.0; crefs.len()])?;
    Ok(Transform {
        mixes,
        channel_adjs,
        combined,
    })
}

/// Per-channel `A^i + I` with `A^i = (Σ_k w1_k A_k)(Σ_k w2_k A_k)` and the
/// softmax-normalized weights of channel `i`, plus their sum.
pub fn hetero_transform(
    adjs: &[SparseMatrix],
    channel_weights: &DenseMatrix,
) -> Result<(Vec<SparseMatrix>, SparseMatrix)> {
    let t = transform(adjs, channel_weights)?;
    Ok((t.channel_adjs, t.combined))
}

/// Column-concatenation over channels of `ReLU(rownorm(Ã^i) · X · W)`.
pub fn hetero_aggregate(
    channel_adjs: &[SparseMatrix],
    x: &DenseMatrix,
    w_aggre: &DenseMatrix,
) -> Result<DenseMatrix> {
    let xw = x.matmul(w_aggre)?;
    let blocks = channel_adjs
        .iter()
        .map(|a| Ok(spmm(&row_normalize(a)?, &xw)?.map(|v| v.max(0.0))))
        .collect::<Result<Vec<_>>>()?;
    DenseMatrix::hconcat(&blocks)
}

/// The constant reconstruction targets (everything except the learned
/// combined adjacency of `AegH`).
fn fixed_targets(
    graph: &HeteroGraph,
    variant: VariantKind,
    normalize: bool,
) -> Result<Vec<ReconTarget>> {
    let n = graph.n() as f64;
    let adj_target = |a: SparseMatrix| -> Result<SparseMatrix> {
        if normalize {
            row_normalize(&add_self_loops(&a)?)
        } else {
            Ok(a)
        }
    };
    Ok(match variant {
        VariantKind::AegX => vec![ReconTarget {
            matrix: SparseMatrix::from_dense(&graph.features),
            scale: 1.0 / (n * graph.features.n_cols() as f64),
        }],
        VariantKind::AegH => Vec::new(),
        VariantKind::AegA => {
            let refs: Vec<&SparseMatrix> = graph.adjacencies.iter().collect();
            let all = weighted_sum(&refs, &vec![1.0; refs.len()])?;
            vec![ReconTarget {
                matrix: adj_target(all)?,
                scale: 1.0 / (n * n),
            }]
        }
        VariantKind::AegS => {
            let k = graph.adjacencies.len() as f64;
            graph
                .adjacencies
                .iter()
                .map(|a| {
                    Ok(ReconTarget {
                        matrix: adj_target(a.clone())?,
                        scale: 1.0 / (n * n * k),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    })
}

/// Reconstruction targets of `variant`; `combined` is `Ã_H`, used by
/// `AegH` only. Targets are row-normalized with self-loops.
pub fn recon_target(
    graph: &HeteroGraph,
    variant: VariantKind,
    combined: &SparseMatrix,
) -> Result<Vec<SparseMatrix>> {
    if variant == VariantKind::AegH {
        return Ok(vec![row_normalize(combined)?]);
    }
    Ok(fixed_targets(graph, variant, true)?
        .into_iter()
        .map(|t| t.matrix)
        .collect())
}

/// A heterogeneous graph bound to its model settings and constant targets.
#[derive(Debug, Clone)]
pub struct HeteroModel {
    pub graph: Arc<HeteroGraph>,
    pub settings: HeteroSettings,
    targets: Vec<ReconTarget>,
}

impl HeteroModel {
    pub fn new(graph: Arc<HeteroGraph>, settings: HeteroSettings) -> Result<Self> {
        if settings.channels == 0 || settings.d0 == 0 || settings.d1 == 0 {
            return Err(Error::Config("d0, d1 and channels must be positive".into()));
        }
        if !settings.d0.is_multiple_of(settings.channels) {
            return Err(Error::Config(format!(
                "d0 = {} is not divisible by the channel count {}",
                settings.d0, settings.channels
            )));
        }
        if settings.gamma.is_nan() || settings.gamma < 0.0 {
            return Err(Error::Config(format!(
                "gamma must be non-negative, got {}",
                settings.gamma
            )));
        }
        if graph.adjacencies.is_empty() {
            return Err(Error::Config(
                "heterogeneous model needs at least one edge type".into(),
            ));
        }
        let targets = fixed_targets(&graph, settings.variant, settings.normalize_targets)?;
        Ok(Self {
            graph,
            settings,
            targets,
        })
    }

    fn output_widths(&self) -> Vec<usize> {
        let n = self.graph.n();
        match self.settings.variant {
            VariantKind::AegX => vec![self.graph.features.n_cols()],
            VariantKind::AegH | VariantKind::AegA => vec![n],
            VariantKind::AegS => vec![n; self.graph.adjacencies.len()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeteroTrace {
    mixes: Vec<(Vec<f64>, Vec<f64>, SparseMatrix, SparseMatrix)>,
    channel_adjs: Vec<SparseMatrix>,
    channel_ops: Vec<SparseMatrix>,
    combined: SparseMatrix,
    combined_op: SparseMatrix,
    xw: DenseMatrix,
    pre0: Vec<DenseMatrix>,
    h0: DenseMatrix,
    layer1: LayerCache,
    layer2: LayerCache,
    grad_logits: DenseMatrix,
    decoder: Option<DecoderGrads>,
}

/// Encoder, classifier and decoder of the heterogeneous model. There is no
/// dropout, so `training` only controls whether decoder gradients are kept.
pub fn hetero_forward(
    model: &HeteroModel,
    params: &HeteroParams,
    training: bool,
) -> Result<ForwardResult<HeteroTrace>> {
    let st = &model.settings;
    let g = &model.graph;
    let tf = transform(&g.adjacencies, &params.channel_weights)?;
    if tf
        .channel_adjs
        .iter()
        .any(|a| !a.same_pattern(&tf.combined))
    {
        return Err(Error::Numerical(
            "channel adjacencies do not share a sparsity pattern".into(),
        ));
    }
    if params.w_aggre.n_cols() * tf.channel_adjs.len() != params.w0.n_rows() {
        return Err(Error::dim(
            "hetero_forward",
            format!(
                "W_aggre {:?} with {} channels feeding W0 {:?}",
                params.w_aggre.shape(),
                tf.channel_adjs.len(),
                params.w0.shape()
            ),
        ));
    }
    let channel_ops = tf
        .channel_adjs
        .iter()
        .map(row_normalize)
        .collect::<Result<Vec<_>>>()?;
    let xw = g.features.matmul(&params.w_aggre)?;
    let pre0 = channel_ops
        .iter()
        .map(|p| spmm(p, &xw))
        .collect::<Result<Vec<_>>>()?;
    let h0 = DenseMatrix::hconcat(
        &pre0
            .iter()
            .map(|p| p.map(|v| v.max(0.0)))
            .collect::<Vec<_>>(),
    )?;
    let combined_op = row_normalize(&tf.combined)?;
    let z = spmm(&combined_op, &h0)?;

    let (h1, layer1) = dense_layer_forward(&z, &params.w0, None, ActivationKind::ReLU)?;
    let (logits, layer2) =
        dense_layer_forward(&h1, &params.w1, Some(&params.b), ActivationKind::Identity)?;
    let h2 = row_softmax(&logits);
    let (class_loss, grad_logits) = masked_class_loss(&h2, &g.labels, &g.splits.train)?;

    let learned;
    let targets: &[ReconTarget] = if st.variant == VariantKind::AegH {
        let n = g.n() as f64;
        learned = [ReconTarget {
            matrix: if st.normalize_targets {
                combined_op.clone()
            } else {
                tf.combined.clone()
            },
            scale: 1.0 / (n * n),
        }];
        &learned
    } else {
        &model.targets
    };
    let want = training && st.gamma != 0.0;
    let dec = decoder_loss(
        &combined_op,
        &z,
        &params.decoder,
        targets,
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
        trace: HeteroTrace {
            mixes: tf.mixes,
            channel_adjs: tf.channel_adjs,
            channel_ops,
            combined: tf.combined,
            combined_op,
            xw,
            pre0,
            h0,
            layer1,
            layer2,
            grad_logits,
            decoder: dec.grads,
        },
    })
}

/// Gradient with respect to the values of `a` given the gradient with
/// respect to the values of `p = rownorm(a)`.
fn row_normalize_backward(a: &SparseMatrix, p: &SparseMatrix, g_p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nnz()];
    for i in 0..a.n_rows() {
        let (lo, hi) = (a.row_ptr()[i], a.row_ptr()[i + 1]);
        let r: f64 = a.values()[lo..hi].iter().sum();
        let inner: f64 = (lo..hi).map(|k| g_p[k] * p.values()[k]).sum();
        for k in lo..hi {
            out[k] = (g_p[k] - inner) / r;
        }
    }
    out
}

fn add_into(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

/// `w ⊙ (g - ⟨g, w⟩)`: pulls a gradient on softmax outputs back to logits.
fn softmax_backward(w: &[f64], g: &[f64]) -> Vec<f64> {
    let inner: f64 = w.iter().zip(g).map(|(a, b)| a * b).sum();
    w.iter().zip(g).map(|(wv, gv)| wv * (gv - inner)).collect()
}

/// Gradients of `total_loss` for every parameter, including the channel
/// weights through both sparse mixing layers.
pub fn hetero_backward(
    model: &HeteroModel,
    params: &HeteroParams,
    result: &ForwardResult<HeteroTrace>,
) -> Result<HeteroParams> {
    let tr = &result.trace;
    let st = &model.settings;
    let g = &model.graph;
    let mut grads = params.zeros_like();

    let (g_h1, g_w1, g_b) = dense_layer_backward(&tr.layer2, &params.w1, &tr.grad_logits)?;
    grads.w1 = g_w1;
    grads.b = g_b;
    let (mut g_z, g_w0, _) = dense_layer_backward(&tr.layer1, &params.w0, &g_h1)?;
    grads.w0 = g_w0;

    let mut g_combined_op = vec![0.0; tr.combined.nnz()];
    let mut g_combined = vec![0.0; tr.combined.nnz()];
    if st.gamma != 0.0 {
        let mut dec = tr.decoder.clone().ok_or_else(|| {
            Error::Argument("backward needs a forward pass run with training = true".into())
        })?;
        dec.scale(st.gamma);
        g_z.add_assign(&dec.input)?;
        if let Some(op) = &dec.operator {
            add_into(&mut g_combined_op, op);
        }
        if st.variant == VariantKind::AegH {
            if st.normalize_targets {
                add_into(&mut g_combined_op, &dec.targets[0]);
            } else {
                add_into(&mut g_combined, &dec.targets[0]);
            }
        }
        grads.decoder = dec.params;
    }
    add_into(
        &mut g_combined_op,
        &tr.combined_op.sampled_product(&g_z, &tr.h0)?,
    );
    add_into(
        &mut g_combined,
        &row_normalize_backward(&tr.combined, &tr.combined_op, &g_combined_op),
    );

    let g_h0 = spmm_t(&tr.combined_op, &g_z)?;
    let width = params.w_aggre.n_cols();
    let mut g_xw = DenseMatrix::zeros(tr.xw.n_rows(), tr.xw.n_cols());
    let refs: Vec<&SparseMatrix> = g.adjacencies.iter().collect();
    for (c, (op, adj)) in tr.channel_ops.iter().zip(&tr.channel_adjs).enumerate() {
        let out = tr.pre0[c].map(|v| v.max(0.0));
        let g_pre = ActivationKind::ReLU.backward(
            &tr.pre0[c],
            &out,
            &g_h0.column_block(c * width, width)?,
        )?;
        g_xw.add_assign(&spmm_t(op, &g_pre)?)?;
        let g_op = op.sampled_product(&g_pre, &tr.xw)?;
        let mut g_adj = row_normalize_backward(adj, op, &g_op);
        add_into(&mut g_adj, &g_combined);
        let g_adj = adj.with_values(g_adj)?;

        let (w1, w2, q1, q2) = &tr.mixes[c];
        let mut g_w1 = Vec::with_capacity(refs.len());
        let mut g_w2 = Vec::with_capacity(refs.len());
        for a_k in &refs {
            g_w1.push(sp_sp_matmul(a_k, q2)?.pattern_dot(&g_adj)?);
            g_w2.push(sp_sp_matmul(q1, a_k)?.pattern_dot(&g_adj)?);
        }
        grads
            .channel_weights
            .row_mut(2 * c)
            .copy_from_slice(&softmax_backward(w1, &g_w1));
        grads
            .channel_weights
            .row_mut(2 * c + 1)
            .copy_from_slice(&softmax_backward(w2, &g_w2));
    }
    grads.w_aggre = g.features.t_matmul(&g_xw)?;
    Ok(grads)
}

impl Model for HeteroModel {
    type Params = HeteroParams;
    type Trace = HeteroTrace;

    fn init_params(&self, stream: &mut RandomStream) -> Result<HeteroParams> {
        let st = &self.settings;
        let g = &self.graph;
        let k = g.adjacencies.len();
        let channel_weights = glorot_init(2 * st.channels, k, stream);
        let w_aggre = glorot_init(g.features.n_cols(), st.d0 / st.channels, stream);
        let w0 = glorot_init(st.d0, st.d1, stream);
        let w1 = glorot_init(st.d1, g.num_classes(), stream);
        let b = DenseMatrix::zeros(1, g.num_classes());
        let decoder = DecoderParams::init(
            st.d0,
            st.d1,
            &self.output_widths(),
            st.decoder_layers,
            stream,
        )?;
        Ok(HeteroParams {
            channel_weights,
            w_aggre,
            w0,
            w1,
            b,
            decoder,
        })
    }

    fn forward(
        &self,
        params: &HeteroParams,
        training: bool,
        _stream: &mut RandomStream,
    ) -> Result<ForwardResult<HeteroTrace>> {
        hetero_forward(self, params, training)
    }

    fn backward(
        &self,
        params: &HeteroParams,
        result: &ForwardResult<HeteroTrace>,
    ) -> Result<HeteroParams> {
        hetero_backward(self, params, result)
    }

    fn predict(&self, params: &HeteroParams) -> Result<DenseMatrix> {
        let g = &self.graph;
        let (channel_adjs, combined) = hetero_transform(&g.adjacencies, &params.channel_weights)?;
        let h0 = hetero_aggregate(&channel_adjs, &g.features, &params.w_aggre)?;
        let z = spmm(&row_normalize(&combined)?, &h0)?;
        let (h1, _) = dense_layer_forward(&z, &params.w0, None, ActivationKind::ReLU)?;
        let (logits, _) =
            dense_layer_forward(&h1, &params.w1, Some(&params.b), ActivationKind::Identity)?;
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
    use crate::synthetic::toy_hetero;

    fn dense_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let (n, m, p) = (a.n_rows(), a.n_cols(), b.n_cols());
        let mut out = DenseMatrix::zeros(n, p);
        for i in 0..n {
            for j in 0..p {
                let mut s = 0.0;
                for k in 0..m {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn settings(variant: VariantKind) -> HeteroSettings {
        HeteroSettings {
            d0: 8,
            d1: 6,
            channels: 2,
            variant,
            gamma: 1.5,
            ..HeteroSettings::default()
        }
    }

    fn run(
        graph: HeteroGraph,
        s: HeteroSettings,
    ) -> (HeteroModel, ForwardResult<HeteroTrace>, HeteroParams) {
        let m = HeteroModel::new(Arc::new(graph), s).unwrap();
        let p = m.init_params(&mut RandomStream::new(2)).unwrap();
        let r = hetero_forward(&m, &p, true).unwrap();
        let g = hetero_backward(&m, &p, &r).unwrap();
        (m, r, g)
    }

    #[test]
    fn one_type_one_channel_is_squared_adjacency() {
        let g = toy_hetero(7, 1, 3, 2, 8);
        let (_, combined) = hetero_transform(&g.adjacencies, &DenseMatrix::zeros(2, 1)).unwrap();
        let a = g.adjacencies[0].to_dense();
        let mut expected = dense_matmul(&a, &a);
        for i in 0..7 {
            expected.set(i, i, expected.get(i, i) + 1.0);
        }
        assert!(combined.to_dense().max_abs_diff(&expected).unwrap() <= 1e-12);
    }

    #[test]
    fn equal_weights_average_the_adjacencies() {
        let g = toy_hetero(6, 3, 3, 2, 1);
        let weights = DenseMatrix::filled(4, 3, 0.7);
        let t = transform(&g.adjacencies, &weights).unwrap();
        let mut mean = DenseMatrix::zeros(6, 6);
        for a in &g.adjacencies {
            mean.axpy(1.0 / 3.0, &a.to_dense()).unwrap();
        }
        for (w1, w2, q1, q2) in &t.mixes {
            assert!(w1.iter().chain(w2).all(|&w| w == 1.0 / 3.0));
            assert_eq!(q1.to_dense(), mean);
            assert_eq!(q2.to_dense(), mean);
        }
    }

    #[test]
    fn aggregate_matches_dense_oracle() {
        let g = toy_hetero(6, 2, 4, 2, 3);
        let mut s = RandomStream::new(9);
        let weights = glorot_init(4, 2, &mut s);
        let w = glorot_init(4, 3, &mut s);
        let (channels, _) = hetero_transform(&g.adjacencies, &weights).unwrap();
        let h0 = hetero_aggregate(&channels, &g.features, &w).unwrap();
        assert_eq!(h0.shape(), (6, 6));
        let xw = dense_matmul(&g.features, &w);
        for (c, a) in channels.iter().enumerate() {
            let a = a.to_dense();
            let mut p = a.clone();
            for i in 0..6 {
                let r: f64 = a.row(i).iter().sum();
                p.row_mut(i).iter_mut().for_each(|v| *v /= r);
            }
            let block = dense_matmul(&p, &xw).map(|v| v.max(0.0));
            let got = h0.column_block(3 * c, 3).unwrap();
            assert!(got.max_abs_diff(&block).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn invariants_hold_for_every_variant() {
        for variant in VariantKind::ALL {
            let (m, r, g) = run(toy_hetero(8, 2, 6, 3, 4), settings(variant));
            let gamma = m.settings.gamma;
            assert!((r.total_loss - (r.class_loss + gamma * r.recon_loss)).abs() <= 1e-12);
            assert!(r.recon_loss >= 0.0 && r.class_loss >= 0.0);
            for i in 0..r.h2.n_rows() {
                assert!((r.h2.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            // softmax is shift invariant, so each row's gradient sums to zero
            for i in 0..g.channel_weights.n_rows() {
                assert!(g.channel_weights.row(i).iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn per_type_target_with_one_type_equals_all_types() {
        let (_, ra, ga) = run(toy_hetero(8, 1, 6, 3, 5), settings(VariantKind::AegA));
        let (_, rs, gs) = run(toy_hetero(8, 1, 6, 3, 5), settings(VariantKind::AegS));
        assert_eq!(ra.recon_loss.to_bits(), rs.recon_loss.to_bits());
        assert_eq!(ga, gs);
    }

    #[test]
    fn predict_matches_inference_forward() {
        let g = toy_hetero(8, 2, 6, 3, 6);
        let m = HeteroModel::new(Arc::new(g), settings(VariantKind::AegH)).unwrap();
        let p = m.init_params(&mut RandomStream::new(3)).unwrap();
        let r = hetero_forward(&m, &p, false).unwrap();
        assert_eq!(m.predict(&p).unwrap(), r.h2);
    }

    #[test]
    fn rejects_indivisible_width() {
        let g = Arc::new(toy_hetero(5, 2, 3, 2, 0));
        let s = HeteroSettings {
            d0: 9,
            channels: 2,
            ..HeteroSettings::default()
        };
        assert!(matches!(HeteroModel::new(g, s), Err(Error::Config(_))));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in VariantKind::ALL {
            assert_eq!(v.short().parse::<VariantKind>().unwrap(), v);
            assert_eq!(v.to_string().parse::<VariantKind>().unwrap(), v);
        }
        assert!("q".parse::<VariantKind>().is_err());
    }
}
