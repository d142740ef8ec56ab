use rand::Rng;

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Square projection weights, each `D_f × D_f`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

impl AttentionParams {
    pub fn new(w_q: Matrix, w_k: Matrix, w_v: Matrix) -> Result<Self> {
        let d = w_q.rows();
        for (name, w) in [("W_Q", &w_q), ("W_K", &w_k), ("W_V", &w_v)] {
            if w.shape() != (d, d) {
                return Err(Error::Shape(format!("{name} is {}x{}, expected {d}x{d}", w.rows(), w.cols())));
            }
            if !w.is_finite() {
                return Err(Error::Numeric(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self { w_q, w_k, w_v })
    }

    /// Uniform entries in `[−scale, scale]`.
    pub fn random<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut draw = || Matrix::from_fn(dim, dim, |_, _| rng.gen_range(-scale..=scale));
        Self { w_q: draw(), w_k: draw(), w_v: draw() }
    }

    pub fn dim(&self) -> usize {
        self.w_q.rows()
    }
}

/// Softmax down each column: every column of the result sums to one.
pub fn column_softmax(scores: &Matrix) -> Matrix {
    let (rows, cols) = scores.shape();
    let mut out = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let max = (0..rows).map(|r| scores[(r, c)]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for r in 0..rows {
            let e = (scores[(r, c)] - max).exp();
            out[(r, c)] = e;
            total += e;
        }
        for r in 0..rows {
            out[(r, c)] /= total;
        }
    }
    out
}

/// `Aᵀ·B` where each entry sums its `M` products in sorted order, so the
/// result does not depend on the order of the rows.
fn contract_rows(a: &Matrix, b: &Matrix) -> Matrix {
    let mut terms = vec![0.0; a.rows()];
    Matrix::from_fn(a.cols(), b.cols(), |i, j| {
        for (m, t) in terms.iter_mut().enumerate() {
            *t = a[(m, i)] * b[(m, j)];
        }
        terms.sort_unstable_by(f64::total_cmp);
        terms.iter().sum()
    })
}

/// Every intermediate of one attention pass.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTrace {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    /// `Kᵀ·Q`, `D_f × D_f`.
    pub scores: Matrix,
    /// Column-softmax of `scores`.
    pub attention: Matrix,
    /// `V·A`, `M × D_f`.
    pub output: Matrix,
}

fn check_shapes(f: &FeatureMatrix, p: &AttentionParams) -> Result<()> {
    if f.cols() != p.dim() {
        return Err(Error::Shape(format!("features have {} channels, attention weights {}", f.cols(), p.dim())));
    }
    Ok(())
}

pub fn channel_attention_trace(f: &FeatureMatrix, p: &AttentionParams) -> Result<AttentionTrace> {
    check_shapes(f, p)?;
    let x = f.matrix();
    let q = x.matmul(&p.w_q);
    let k = x.matmul(&p.w_k);
    let v = x.matmul(&p.w_v);
    let scores = contract_rows(&k, &q);
    let attention = column_softmax(&scores);
    let output = v.matmul(&attention);
    if !output.is_finite() {
        return Err(Error::Numeric("attention output is not finite".into()));
    }
    Ok(AttentionTrace { q, k, v, scores, attention, output })
}

pub fn channel_attention(f: &FeatureMatrix, p: &AttentionParams) -> Result<FeatureMatrix> {
    FeatureMatrix::new(channel_attention_trace(f, p)?.output)
}

/// Attention output added element-wise to caller-supplied embedded features.
pub fn attention_fusion(f: &FeatureMatrix, p: &AttentionParams, embedded: &FeatureMatrix) -> Result<FeatureMatrix> {
    let out = channel_attention_trace(f, p)?.output;
    if embedded.matrix().shape() != out.shape() {
        return Err(Error::Shape(format!(
            "embedded features are {}x{}, attention output {}x{}",
            embedded.rows(),
            embedded.cols(),
            out.rows(),
            out.cols()
        )));
    }
    FeatureMatrix::new(out.add(embedded.matrix()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionGrads {
    pub d_input: Matrix,
    pub d_w_q: Matrix,
    pub d_w_k: Matrix,
    pub d_w_v: Matrix,
}

/// Back-propagates `upstream = ∂L/∂output` through [`channel_attention`].
pub fn channel_attention_grad(f: &FeatureMatrix, p: &AttentionParams, upstream: &Matrix) -> Result<AttentionGrads> {
    let t = channel_attention_trace(f, p)?;
    if upstream.shape() != t.output.shape() {
        return Err(Error::Shape(format!(
            "upstream gradient is {}x{}, output {}x{}",
            upstream.rows(),
            upstream.cols(),
            t.output.rows(),
            t.output.cols()
        )));
    }
    let x = f.matrix();
    // output = V·A
    let d_v = upstream.matmul(&t.attention.transpose());
    let d_a = t.v.t_matmul(upstream);
    // column softmax: dS[:, j] = A[:, j] ⊙ (dA[:, j] − ⟨A[:, j], dA[:, j]⟩)
    let d = t.attention.rows();
    let mut d_s = Matrix::zeros(d, d);
    for j in 0..d {
        let dot: f64 = (0..d).map(|i| t.attention[(i, j)] * d_a[(i, j)]).sum();
        for i in 0..d {
            d_s[(i, j)] = t.attention[(i, j)] * (d_a[(i, j)] - dot);
        }
    }
    // S = Kᵀ·Q
    let d_k = t.q.matmul(&d_s.transpose());
    let d_q = t.k.matmul(&d_s);

    let d_w_q = x.t_matmul(&d_q);
    let d_w_k = x.t_matmul(&d_k);
    let d_w_v = x.t_matmul(&d_v);
    let d_input =
        d_q.matmul(&p.w_q.transpose()).add(&d_k.matmul(&p.w_k.transpose())).add(&d_v.matmul(&p.w_v.transpose()));
    Ok(AttentionGrads { d_input, d_w_q, d_w_k, d_w_v })
}
