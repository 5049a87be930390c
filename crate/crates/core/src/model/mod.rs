//! Full forward and backward passes of the homogeneous and heterogeneous
//! models.

mod decoder;
mod hetero;
mod homo;

pub use decoder::{
    decoder_loss, DecoderEval, DecoderGrads, DecoderOutput, DecoderParams, ReconTarget,
    DEFAULT_BLOCK_ROWS,
};
pub use hetero::{
    hetero_aggregate, hetero_backward, hetero_forward, hetero_transform, recon_target, HeteroModel,
    HeteroParams, HeteroSettings, HeteroTrace, VariantKind,
};
pub use homo::{homo_backward, homo_forward, HomoModel, HomoParams, HomoSettings, HomoTrace};

use crate::data::Splits;
use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::optim::{ParamSet, RandomStream};

/// Output of a forward pass. `trace` holds what the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardResult<T> {
    pub h1: DenseMatrix,
    /// Row-stochastic class probabilities.
    pub h2: DenseMatrix,
    pub class_loss: f64,
    pub recon_loss: f64,
    pub total_loss: f64,
    pub trace: T,
}

/// What the training harness needs from a model bound to a dataset.
pub trait Model: Send + Sync {
    type Params: ParamSet + Clone + Send + Sync + std::fmt::Debug;
    type Trace;

    fn init_params(&self, stream: &mut RandomStream) -> Result<Self::Params>;

    /// `stream` supplies dropout masks when `training` is set.
    fn forward(
        &self,
        params: &Self::Params,
        training: bool,
        stream: &mut RandomStream,
    ) -> Result<ForwardResult<Self::Trace>>;

    fn backward(
        &self,
        params: &Self::Params,
        result: &ForwardResult<Self::Trace>,
    ) -> Result<Self::Params>;

    /// Inference-mode class probabilities; the decoder is skipped.
    fn predict(&self, params: &Self::Params) -> Result<DenseMatrix>;

    fn labels(&self) -> &[Option<usize>];
    fn splits(&self) -> &Splits;
    fn num_classes(&self) -> usize;
    fn gamma(&self) -> f64;
}
