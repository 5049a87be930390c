//! Seeded random streams, Glorot initialization and the Adam update.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Deterministic random stream: ChaCha8 keyed by a 64-bit seed. Floats are
/// built from the top 53 bits of each word so the sequence is identical on
/// every platform.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for a named purpose (initialization, dropout, ...).
    pub fn derive(&self, stream_id: u64) -> RandomStream {
        RandomStream::new(splitmix64(self.seed ^ splitmix64(stream_id)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Entries uniform in `[-L, L]` with `L = sqrt(6 / (n_in + n_out))`.
pub fn glorot_init(n_in: usize, n_out: usize, stream: &mut RandomStream) -> DenseMatrix {
    let limit = glorot_limit(n_in, n_out);
    let values = (0..n_in * n_out)
        .map(|_| stream.uniform(-limit, limit))
        .collect();
    DenseMatrix::from_vec(n_in, n_out, values).expect("length matches by construction")
}

pub fn glorot_limit(n_in: usize, n_out: usize) -> f64 {
    (6.0 / (n_in + n_out) as f64).sqrt()
}

/// A fixed, ordered collection of trainable matrices. Gradients use the
/// same type so parameters and gradients line up by position.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&DenseMatrix>;
    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix>;
    fn names(&self) -> Vec<String>;
    /// Whether weight decay applies to each tensor (biases are excluded).
    fn decays(&self) -> Vec<bool>;
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<DenseMatrix>,
    pub v: Vec<DenseMatrix>,
    pub t: u64,
}

impl AdamState {
    pub fn new<P: ParamSet + ?Sized>(params: &P) -> Self {
        let zeros: Vec<DenseMatrix> = params
            .tensors()
            .iter()
            .map(|p| DenseMatrix::zeros(p.n_rows(), p.n_cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One Adam step with L2 weight decay added to the gradient before the
/// moment update. Fails without touching anything when a gradient entry is
/// not finite.
pub fn adam_step<P: ParamSet + ?Sized>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if lr.is_nan() || lr <= 0.0 {
        return Err(Error::Argument(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    let names = params.names();
    let decays = params.decays();
    let grads = grads.tensors();
    for (name, g) in names.iter().zip(&grads) {
        if let Some(pos) = g.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient for {name} at flat index {pos} (step {})",
                state.t + 1
            )));
        }
    }
    let mut tensors = params.tensors_mut();
    if tensors.len() != grads.len() || tensors.len() != state.m.len() {
        return Err(Error::dim(
            "adam_step",
            "parameter, gradient and state counts differ",
        ));
    }
    for (p, g) in tensors.iter().zip(&grads) {
        if p.shape() != g.shape() {
            return Err(Error::dim(
                "adam_step",
                format!("{:?} vs {:?}", p.shape(), g.shape()),
            ));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for (idx, p) in tensors.iter_mut().enumerate() {
        let wd = if decays[idx] { weight_decay } else { 0.0 };
        let g = grads[idx].values();
        let m = state.m[idx].values_mut();
        let v = state.v[idx].values_mut();
        for (k, w) in p.values_mut().iter_mut().enumerate() {
            let gk = g[k] + wd * *w;
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * gk;
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}
