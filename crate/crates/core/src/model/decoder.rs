//! GCN decoder `sigmoid(P · Z · Wa)` (or its two-layer form) scored against
//! sparse reconstruction targets without materializing the full output.

use serde::{Deserialize, Serialize};

use crate::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::nn::{sigmoid_recon_entry, ActivationKind, ReconMode};
use crate::optim::{glorot_init, RandomStream};
use crate::sparse::{spmm, spmm_t, SparseMatrix};

pub const DEFAULT_BLOCK_ROWS: usize = 256;

/// How the `n × m` decoder output is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderEval {
    /// `Positives` for the one-sided loss, `Blocked` otherwise.
    #[default]
    Auto,
    /// Dense logits, `rows` rows at a time.
    Blocked { rows: usize },
    /// Logits only at stored target entries. Exact for the one-sided loss,
    /// whose other entries contribute neither loss nor gradient.
    Positives,
}

/// A reconstruction target and the factor its summed entry losses are
/// multiplied by.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconTarget {
    pub matrix: SparseMatrix,
    pub scale: f64,
}

/// Decoder weights: an optional hidden layer and one output matrix per
/// target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    pub hidden: Option<DenseMatrix>,
    pub outputs: Vec<DenseMatrix>,
}

impl DecoderParams {
    /// `layers` is 1 or 2; the hidden layer (when present) has `hidden_width`
    /// units.
    pub fn init(
        input_width: usize,
        hidden_width: usize,
        output_widths: &[usize],
        layers: usize,
        stream: &mut RandomStream,
    ) -> Result<Self> {
        let (hidden, last_in) = match layers {
            1 => (None, input_width),
            2 => (
                Some(glorot_init(input_width, hidden_width, stream)),
                hidden_width,
            ),
            other => {
                return Err(Error::Config(format!(
                    "decoder layers must be 1 or 2, got {other}"
                )))
            }
        };
        let outputs = output_widths
            .iter()
            .map(|&m| glorot_init(last_in, m, stream))
            .collect();
        Ok(Self { hidden, outputs })
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &DenseMatrix| DenseMatrix::zeros(m.n_rows(), m.n_cols());
        Self {
            hidden: self.hidden.as_ref().map(z),
            outputs: self.outputs.iter().map(z).collect(),
        }
    }

    pub fn layers(&self) -> usize {
        if self.hidden.is_some() {
            2
        } else {
            1
        }
    }

    pub(crate) fn tensors(&self) -> Vec<&DenseMatrix> {
        self.hidden.iter().chain(self.outputs.iter()).collect()
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        self.hidden
            .iter_mut()
            .chain(self.outputs.iter_mut())
            .collect()
    }

    pub(crate) fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let out_base = if self.hidden.is_some() {
            names.push("Wa1".to_string());
            "Wa2"
        } else {
            "Wa"
        };
        if self.outputs.len() == 1 {
            names.push(out_base.to_string());
        } else {
            names.extend((0..self.outputs.len()).map(|k| format!("{out_base}[{k}]")));
        }
        names
    }

    fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            t.scale(alpha);
        }
    }
}

/// Gradients of the (unweighted) reconstruction loss.
#[derive(Debug, Clone)]
pub struct DecoderGrads {
    /// With respect to the decoder input `Z`.
    pub input: DenseMatrix,
    pub params: DecoderParams,
    /// With respect to each target's stored values.
    pub targets: Vec<Vec<f64>>,
    /// With respect to the operator's stored values (two-layer form only).
    pub operator: Option<Vec<f64>>,
}

impl DecoderGrads {
    pub fn scale(&mut self, alpha: f64) {
        self.input.scale(alpha);
        self.params.scale(alpha);
        for t in &mut self.targets {
            t.iter_mut().for_each(|v| *v *= alpha);
        }
        if let Some(op) = &mut self.operator {
            op.iter_mut().for_each(|v| *v *= alpha);
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecoderOutput {
    pub loss: f64,
    pub grads: Option<DecoderGrads>,
}

/// Scores the decoder whose input `z` is already propagated (`z = P · H`).
/// The two-layer form is `sigmoid(P · ReLU(z · Wa1) · Wa2)`.
pub fn decoder_loss(
    op: &SparseMatrix,
    z: &DenseMatrix,
    params: &DecoderParams,
    targets: &[ReconTarget],
    mode: ReconMode,
    eval: DecoderEval,
    want_grads: bool,
) -> Result<DecoderOutput> {
    if params.outputs.len() != targets.len() {
        return Err(Error::dim(
            "decoder_loss",
            format!(
                "{} output matrices for {} targets",
                params.outputs.len(),
                targets.len()
            ),
        ));
    }
    let hidden = match &params.hidden {
        Some(wa1) => {
            let pre = z.matmul(wa1)?;
            let act = ActivationKind::ReLU.apply(&pre);
            let propagated = spmm(op, &act)?;
            Some((pre, act, propagated))
        }
        None => None,
    };
    let zf = hidden.as_ref().map(|h| &h.2).unwrap_or(z);

    let mut loss = 0.0;
    let mut g_zf = want_grads.then(|| DenseMatrix::zeros(zf.n_rows(), zf.n_cols()));
    let mut g_outputs = Vec::new();
    let mut g_targets = Vec::new();
    for (wa, target) in params.outputs.iter().zip(targets) {
        let part = score_target(zf, wa, target, mode, eval, want_grads)?;
        loss += part.loss;
        if let (Some(acc), Some((gz, gw, gt))) = (g_zf.as_mut(), part.grads) {
            acc.add_assign(&gz)?;
            g_outputs.push(gw);
            g_targets.push(gt);
        }
    }
    let Some(g_zf) = g_zf else {
        return Ok(DecoderOutput { loss, grads: None });
    };

    let grads = match (&params.hidden, hidden) {
        (Some(wa1), Some((pre, act, _))) => {
            let operator = op.sampled_product(&g_zf, &act)?;
            let g_act = spmm_t(op, &g_zf)?;
            let g_pre = ActivationKind::ReLU.backward(&pre, &act, &g_act)?;
            DecoderGrads {
                input: g_pre.matmul_t(wa1)?,
                params: DecoderParams {
                    hidden: Some(z.t_matmul(&g_pre)?),
                    outputs: g_outputs,
                },
                targets: g_targets,
                operator: Some(operator),
            }
        }
        _ => DecoderGrads {
            input: g_zf,
            params: DecoderParams {
                hidden: None,
                outputs: g_outputs,
            },
            targets: g_targets,
            operator: None,
        },
    };
    Ok(DecoderOutput {
        loss,
        grads: Some(grads),
    })
}

struct Scored {
    loss: f64,
    grads: Option<(DenseMatrix, DenseMatrix, Vec<f64>)>,
}

fn score_target(
    z: &DenseMatrix,
    wa: &DenseMatrix,
    target: &ReconTarget,
    mode: ReconMode,
    eval: DecoderEval,
    want_grads: bool,
) -> Result<Scored> {
    let t = &target.matrix;
    if z.n_cols() != wa.n_rows() || t.shape() != (z.n_rows(), wa.n_cols()) {
        return Err(Error::dim(
            "decoder",
            format!(
                "Z {:?}, Wa {:?}, target {:?}",
                z.shape(),
                wa.shape(),
                t.shape()
            ),
        ));
    }
    match (eval, mode) {
        (DecoderEval::Auto, ReconMode::OneSided)
        | (DecoderEval::Positives, ReconMode::OneSided) => {
            score_positives(z, wa, target, mode, want_grads)
        }
        (DecoderEval::Positives, ReconMode::FullBce) => Err(Error::Config(
            "positive-entry decoder evaluation requires the one-sided loss".into(),
        )),
        (DecoderEval::Auto, ReconMode::FullBce) => {
            score_blocked(z, wa, target, mode, DEFAULT_BLOCK_ROWS, want_grads)
        }
        (DecoderEval::Blocked { rows }, _) => score_blocked(z, wa, target, mode, rows, want_grads),
    }
}

fn score_positives(
    z: &DenseMatrix,
    wa: &DenseMatrix,
    target: &ReconTarget,
    mode: ReconMode,
    want_grads: bool,
) -> Result<Scored> {
    let t = &target.matrix;
    let wa_t = wa.transpose();
    let mut loss = 0.0;
    let mut g_z = DenseMatrix::zeros(z.n_rows(), z.n_cols());
    let mut g_wa_t = DenseMatrix::zeros(wa_t.n_rows(), wa_t.n_cols());
    let mut g_t = vec![0.0; if want_grads { t.nnz() } else { 0 }];
    for i in 0..t.n_rows() {
        let start = t.row_ptr()[i];
        let (cols, vals) = t.row(i);
        let zi = z.row(i);
        for (k, (&j, &tv)) in cols.iter().zip(vals).enumerate() {
            let (l, du, dt) = sigmoid_recon_entry(dot(zi, wa_t.row(j)), tv, target.scale, mode);
            loss += l;
            if want_grads {
                g_t[start + k] = dt;
                if du != 0.0 {
                    for (g, w) in g_z.row_mut(i).iter_mut().zip(wa_t.row(j)) {
                        *g += du * w;
                    }
                    for (g, zv) in g_wa_t.row_mut(j).iter_mut().zip(zi) {
                        *g += du * zv;
                    }
                }
            }
        }
    }
    Ok(Scored {
        loss,
        grads: want_grads.then(|| (g_z, g_wa_t.transpose(), g_t)),
    })
}

fn score_blocked(
    z: &DenseMatrix,
    wa: &DenseMatrix,
    target: &ReconTarget,
    mode: ReconMode,
    rows: usize,
    want_grads: bool,
) -> Result<Scored> {
    if rows == 0 {
        return Err(Error::Config("decoder block size must be positive".into()));
    }
    let t = &target.matrix;
    let (n, m) = t.shape();
    let mut loss = 0.0;
    let mut g_z = DenseMatrix::zeros(z.n_rows(), z.n_cols());
    let mut g_wa = DenseMatrix::zeros(wa.n_rows(), wa.n_cols());
    let mut g_t = vec![0.0; if want_grads { t.nnz() } else { 0 }];
    // a zero target adds nothing to the one-sided loss, so only stored
    // entries need scoring and only they carry gradient
    let dense_grad = mode == ReconMode::FullBce;
    let h = z.n_cols();
    let mut logits = DenseMatrix::zeros(0, 0);
    let mut r0 = 0;
    while r0 < n {
        let r1 = (r0 + rows).min(n);
        let z_blk = z.row_block(r0, r1);
        z_blk.matmul_into(wa, &mut logits)?;
        let mut g_blk = DenseMatrix::zeros(if dense_grad { r1 - r0 } else { 0 }, m);
        for i in r0..r1 {
            let start = t.row_ptr()[i];
            let (cols, vals) = t.row(i);
            let lrow = logits.row(i - r0);
            if dense_grad {
                let grow = g_blk.row_mut(i - r0);
                let mut next = 0;
                for j in 0..m {
                    let stored = next < cols.len() && cols[next] == j;
                    let tv = if stored { vals[next] } else { 0.0 };
                    let (l, du, dt) = sigmoid_recon_entry(lrow[j], tv, target.scale, mode);
                    loss += l;
                    grow[j] = du;
                    if stored {
                        if want_grads {
                            g_t[start + next] = dt;
                        }
                        next += 1;
                    }
                }
            } else {
                for (e, (&j, &tv)) in cols.iter().zip(vals).enumerate() {
                    let (l, du, dt) = sigmoid_recon_entry(lrow[j], tv, target.scale, mode);
                    loss += l;
                    if want_grads {
                        g_t[start + e] = dt;
                        let zi = z.row(i);
                        let gz = g_z.row_mut(i);
                        for k in 0..h {
                            let w = &mut g_wa.values_mut()[k * m + j];
                            *w += zi[k] * du;
                            gz[k] += du * wa.values()[k * m + j];
                        }
                    }
                }
            }
        }
        if want_grads && dense_grad {
            g_wa.add_assign(&z_blk.t_matmul(&g_blk)?)?;
            let gz_blk = g_blk.matmul_t(wa)?;
            for i in r0..r1 {
                g_z.row_mut(i).copy_from_slice(gz_blk.row(i - r0));
            }
        }
        r0 = r1;
    }
    Ok(Scored {
        loss,
        grads: want_grads.then_some((g_z, g_wa, g_t)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_diff_check, recon_loss_adjacency, ActivationKind};
    use crate::sparse::{add_self_loops, sym_normalize};

    fn toy(seed: u64, n: usize, h: usize) -> (SparseMatrix, DenseMatrix) {
        let mut s = RandomStream::new(seed);
        let mut trip = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if s.next_f64() < 0.3 {
                    trip.push((i, j, 1.0));
                    trip.push((j, i, 1.0));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let op = sym_normalize(&add_self_loops(&a).unwrap()).unwrap();
        let z = DenseMatrix::from_vec(n, h, (0..n * h).map(|_| s.uniform(-1.0, 1.0)).collect())
            .unwrap();
        (op, z)
    }

    fn monolithic(
        z: &DenseMatrix,
        wa: &DenseMatrix,
        target: &SparseMatrix,
        mode: ReconMode,
    ) -> (f64, DenseMatrix, DenseMatrix) {
        let logits = z.matmul(wa).unwrap();
        let pred = ActivationKind::Sigmoid.apply(&logits);
        let (loss, g_pred) = recon_loss_adjacency(target, &pred, mode).unwrap();
        let g_logits = ActivationKind::Sigmoid
            .backward(&logits, &pred, &g_pred)
            .unwrap();
        (
            loss,
            z.t_matmul(&g_logits).unwrap(),
            g_logits.matmul_t(wa).unwrap(),
        )
    }

    #[test]
    fn blocked_and_positive_routes_match_monolithic() {
        for seed in 0..5 {
            let n = 13;
            let (op, z) = toy(seed, n, 4);
            let mut s = RandomStream::new(100 + seed);
            let params = DecoderParams::init(4, 3, &[n], 1, &mut s).unwrap();
            let target = ReconTarget {
                matrix: op.clone(),
                scale: 1.0 / (n * n) as f64,
            };
            for mode in [ReconMode::OneSided, ReconMode::FullBce] {
                let (loss, g_wa, g_z) = monolithic(&z, &params.outputs[0], &op, mode);
                let mut evals = vec![
                    DecoderEval::Blocked { rows: 4 },
                    DecoderEval::Blocked { rows: 256 },
                    DecoderEval::Auto,
                ];
                if mode == ReconMode::OneSided {
                    evals.push(DecoderEval::Positives);
                }
                for eval in evals {
                    let out = decoder_loss(
                        &op,
                        &z,
                        &params,
                        std::slice::from_ref(&target),
                        mode,
                        eval,
                        true,
                    )
                    .unwrap();
                    let g = out.grads.unwrap();
                    assert!((out.loss - loss).abs() <= 1e-10, "{eval:?} {mode:?}");
                    assert!(g.params.outputs[0].max_abs_diff(&g_wa).unwrap() <= 1e-10);
                    assert!(g.input.max_abs_diff(&g_z).unwrap() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn positives_reject_full_bce() {
        let (op, z) = toy(1, 5, 2);
        let params = DecoderParams::init(2, 2, &[5], 1, &mut RandomStream::new(0)).unwrap();
        let target = ReconTarget {
            matrix: op.clone(),
            scale: 1.0,
        };
        let r = decoder_loss(
            &op,
            &z,
            &params,
            &[target],
            ReconMode::FullBce,
            DecoderEval::Positives,
            false,
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn two_layer_gradients_match_finite_differences() {
        let n = 7;
        let (op, z) = toy(9, n, 3);
        let params = DecoderParams::init(3, 4, &[n, n], 2, &mut RandomStream::new(4)).unwrap();
        let targets = vec![
            ReconTarget {
                matrix: op.clone(),
                scale: 0.5,
            },
            ReconTarget {
                matrix: SparseMatrix::identity(n),
                scale: 0.25,
            },
        ];
        for mode in [ReconMode::OneSided, ReconMode::FullBce] {
            let loss = |p: &DecoderParams, z: &DenseMatrix, op: &SparseMatrix| {
                decoder_loss(op, z, p, &targets, mode, DecoderEval::Auto, false)
                    .unwrap()
                    .loss
            };
            let g = decoder_loss(&op, &z, &params, &targets, mode, DecoderEval::Auto, true)
                .unwrap()
                .grads
                .unwrap();
            let err = finite_diff_check(|x| loss(&params, x, &op), &z, &g.input, 1e-5);
            assert!(err <= 1e-6, "input {err}");
            let hidden = params.hidden.clone().unwrap();
            let err = finite_diff_check(
                |x| {
                    let mut p = params.clone();
                    p.hidden = Some(x.clone());
                    loss(&p, &z, &op)
                },
                &hidden,
                g.params.hidden.as_ref().unwrap(),
                1e-5,
            );
            assert!(err <= 1e-6, "hidden {err}");
            for k in 0..2 {
                let err = finite_diff_check(
                    |x| {
                        let mut p = params.clone();
                        p.outputs[k] = x.clone();
                        loss(&p, &z, &op)
                    },
                    &params.outputs[k],
                    &g.params.outputs[k],
                    1e-5,
                );
                assert!(err <= 1e-6, "output {k} {err}");
            }
            let vals = DenseMatrix::from_vec(1, op.nnz(), op.values().to_vec()).unwrap();
            let g_op = DenseMatrix::from_vec(1, op.nnz(), g.operator.clone().unwrap()).unwrap();
            let err = finite_diff_check(
                |x| loss(&params, &z, &op.with_values(x.values().to_vec()).unwrap()),
                &vals,
                &g_op,
                1e-5,
            );
            assert!(err <= 1e-6, "operator {err}");
        }
    }

    #[test]
    fn target_gradient_matches_finite_differences() {
        let n = 6;
        let (op, z) = toy(3, n, 3);
        let params = DecoderParams::init(3, 3, &[n], 1, &mut RandomStream::new(2)).unwrap();
        for (mode, eval) in [
            (ReconMode::OneSided, DecoderEval::Positives),
            (ReconMode::FullBce, DecoderEval::Blocked { rows: 2 }),
        ] {
            let tgt = |vals: &[f64]| ReconTarget {
                matrix: op.with_values(vals.to_vec()).unwrap(),
                scale: 0.1,
            };
            let g = decoder_loss(&op, &z, &params, &[tgt(op.values())], mode, eval, true)
                .unwrap()
                .grads
                .unwrap();
            let p = DenseMatrix::from_vec(1, op.nnz(), op.values().to_vec()).unwrap();
            let a = DenseMatrix::from_vec(1, op.nnz(), g.targets[0].clone()).unwrap();
            let err = finite_diff_check(
                |x| {
                    decoder_loss(&op, &z, &params, &[tgt(x.values())], mode, eval, false)
                        .unwrap()
                        .loss
                },
                &p,
                &a,
                1e-5,
            );
            assert!(err <= 1e-6, "{mode:?} {err}");
        }
    }
}
