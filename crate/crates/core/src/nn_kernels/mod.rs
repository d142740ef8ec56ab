//! Desk-scale learnable kernels with hand-written gradients.
//!
//! * [`channel_attention`]: `Q = F·W_Q`, `K = F·W_K`, `V = F·W_V`,
//!   `A = softmax(Kᵀ·Q)` normalized over each column, output `V·A`.
//! * [`mlp_forward`] / [`mlp_train`]: the per-point encoder/decoder that
//!   reduces 96 → 32 and 192 → 64 wide latents.
//! * [`joint_l1`]: per-channel mean absolute error weighted 6:1:1.
//!
//! [`gradcheck`] holds the central-difference machinery used to verify the
//! analytic gradients.

mod attention;
mod checkpoint;
pub mod gradcheck;
mod mlp;

pub use attention::{
    attention_fusion, channel_attention, channel_attention_grad, channel_attention_trace, column_softmax,
    AttentionGrads, AttentionParams, AttentionTrace,
};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, JSGP_MAGIC};
pub use mlp::{
    mlp_backward, mlp_forward, mlp_loss, mlp_train, mlp_train_from, relu_margin, Dense, DenseGrad, MlpGrads, MlpParams,
    TrainConfig, TrainReport,
};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pc_io::Yuv;

/// `M × D_f` feature matrix: one row per point, one column per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(Matrix);

impl FeatureMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(Error::Shape(format!("feature matrix is {}x{}", data.rows(), data.cols())));
        }
        if !data.is_finite() {
            return Err(Error::Numeric("feature matrix has non-finite entries".into()));
        }
        Ok(Self(data))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl AsRef<Matrix> for FeatureMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

pub const LOSS_WEIGHTS: [f64; 3] = [6.0 / 8.0, 1.0 / 8.0, 1.0 / 8.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    pub l_y: f64,
    pub l_u: f64,
    pub l_v: f64,
    pub l_joint: f64,
}

impl LossReport {
    pub fn from_channels(l_y: f64, l_u: f64, l_v: f64) -> Self {
        Self { l_y, l_u, l_v, l_joint: (6.0 * l_y + l_u + l_v) / 8.0 }
    }
}

/// Per-channel L1 and the 6:1:1 joint loss.
pub fn joint_l1(pred: &[Yuv], target: &[Yuv]) -> Result<LossReport> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    if pred.is_empty() {
        return Err(Error::Shape("joint_l1 of zero points".into()));
    }
    let mut sums = [0.0; 3];
    for (p, t) in pred.iter().zip(target) {
        for ch in 0..3 {
            sums[ch] += (p[ch] - t[ch]).abs();
        }
    }
    let n = pred.len() as f64;
    Ok(LossReport::from_channels(sums[0] / n, sums[1] / n, sums[2] / n))
}
