//! Central finite differences and tolerance bookkeeping, plus seeded
//! random instances for the attention and MLP gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{channel_attention, channel_attention_grad, mlp_backward, mlp_forward, relu_margin};
use super::{AttentionParams, Dense, FeatureMatrix, MlpParams};
use crate::linalg::Matrix;

/// Default perturbation for central differences.
pub const STEP: f64 = 1e-5;
/// Relative tolerance for analytic-vs-numeric agreement.
pub const RTOL: f64 = 1e-4;
/// Absolute floor so that gradients indistinguishable from zero are not
/// judged by a relative error of two rounding residues.
pub const ATOL: f64 = 1e-8;

/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every coordinate.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Agreement {
    /// Worst `|a − n| / max(|a|, |n|)` among entries above the absolute floor.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub worst_index: Option<usize>,
    pub passed: bool,
}

/// Entry-wise `|a − n| ≤ rtol · max(|a|, |n|) + atol`.
pub fn compare(analytic: &[f64], numeric: &[f64], rtol: f64, atol: f64) -> Agreement {
    assert_eq!(analytic.len(), numeric.len());
    let mut out = Agreement { max_rel_err: 0.0, max_abs_err: 0.0, worst_index: None, passed: true };
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let diff = (a - n).abs();
        let scale = a.abs().max(n.abs());
        out.max_abs_err = out.max_abs_err.max(diff);
        if diff > rtol * scale + atol {
            out.passed = false;
        }
        if diff > atol {
            let rel = diff / scale;
            if rel > out.max_rel_err {
                out.max_rel_err = rel;
                out.worst_index = Some(i);
            }
        }
    }
    out
}

impl Agreement {
    /// Worst case of both.
    pub fn merge(self, other: Agreement) -> Agreement {
        let (max_rel_err, worst_index) = if other.max_rel_err > self.max_rel_err {
            (other.max_rel_err, other.worst_index)
        } else {
            (self.max_rel_err, self.worst_index)
        };
        Agreement {
            max_rel_err,
            max_abs_err: self.max_abs_err.max(other.max_abs_err),
            worst_index,
            passed: self.passed && other.passed,
        }
    }
}

fn layer_mut(q: &mut MlpParams, li: usize) -> &mut Dense {
    let n_enc = q.encoder.len();
    if li < n_enc {
        &mut q.encoder[li]
    } else {
        &mut q.decoder[li - n_enc]
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Attention gradients of `⟨G, output⟩` on a random 4×3 instance, checked
/// for the input and all three weights.
pub fn check_attention_instance(seed: u64) -> Agreement {
    let (m, d) = (4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform(&mut rng, m, d);
    let p = AttentionParams::new(uniform(&mut rng, d, d), uniform(&mut rng, d, d), uniform(&mut rng, d, d))
        .expect("square finite weights");
    let g = uniform(&mut rng, m, d);
    let analytic =
        channel_attention_grad(&FeatureMatrix::new(x.clone()).expect("finite"), &p, &g).expect("consistent shapes");
    let loss = |x: &Matrix, p: &AttentionParams| {
        let out = channel_attention(&FeatureMatrix::new(x.clone()).expect("finite"), p).expect("consistent shapes");
        dot(out.matrix().as_slice(), g.as_slice())
    };
    let wrt_input =
        central_difference(|v| loss(&Matrix::from_vec(m, d, v.to_vec()).expect("same size"), &p), x.as_slice(), STEP);
    let mut out = compare(analytic.d_input.as_slice(), &wrt_input, RTOL, ATOL);
    for (which, grad) in [(0, &analytic.d_w_q), (1, &analytic.d_w_k), (2, &analytic.d_w_v)] {
        let base = [&p.w_q, &p.w_k, &p.w_v][which];
        let numeric = central_difference(
            |v| {
                let mut q = p.clone();
                let w = Matrix::from_vec(d, d, v.to_vec()).expect("same size");
                *[&mut q.w_q, &mut q.w_k, &mut q.w_v][which] = w;
                loss(&x, &q)
            },
            base.as_slice(),
            STEP,
        );
        out = out.merge(compare(grad.as_slice(), &numeric, RTOL, ATOL));
    }
    out
}

/// MLP gradients of `⟨G, reconstruction⟩ + ⟨H, latent⟩` on a random
/// `6 → 4 → 2 → 4 → 6` reducer with random biases. Inputs are redrawn until
/// every ReLU pre-activation is at least 1e−3 from the kink.
pub fn check_mlp_instance(seed: u64) -> Agreement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = [6, 4, 2, 4, 6];
    let mut layers: Vec<Dense> = widths
        .windows(2)
        .map(|w| {
            let weight = uniform(&mut rng, w[1], w[0]);
            let bias = (0..w[1]).map(|_| rng.gen_range(-0.5..0.5)).collect();
            Dense::new(weight, bias).expect("finite layer")
        })
        .collect();
    let decoder = layers.split_off(2);
    let p = MlpParams::new(layers, decoder).expect("chained widths");
    let mut x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..1000 {
        if relu_margin(&x, &p).expect("width 6") > 1e-3 {
            break;
        }
        x = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    }
    let g: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let h: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let analytic = mlp_backward(&x, &p, &g, Some(&h)).expect("consistent shapes");
    let loss = |x: &[f64], p: &MlpParams| {
        let (latent, recon) = mlp_forward(x, p).expect("consistent shapes");
        dot(&recon, &g) + dot(&latent, &h)
    };
    let mut out = compare(&analytic.d_input, &central_difference(|v| loss(v, &p), &x, STEP), RTOL, ATOL);
    let grads: Vec<_> = analytic.encoder.iter().chain(&analytic.decoder).collect();
    for (li, grad) in grads.into_iter().enumerate() {
        let mut probe = p.clone();
        let w = layer_mut(&mut probe, li).weight.clone();
        let numeric_w = central_difference(
            |v| {
                let mut q = p.clone();
                layer_mut(&mut q, li).weight = Matrix::from_vec(w.rows(), w.cols(), v.to_vec()).expect("same size");
                loss(&x, &q)
            },
            w.as_slice(),
            STEP,
        );
        out = out.merge(compare(grad.weight.as_slice(), &numeric_w, RTOL, ATOL));
        let b = layer_mut(&mut probe, li).bias.clone();
        let numeric_b = central_difference(
            |v| {
                let mut q = p.clone();
                layer_mut(&mut q, li).bias = v.to_vec();
                loss(&x, &q)
            },
            &b,
            STEP,
        );
        out = out.merge(compare(&grad.bias, &numeric_b, RTOL, ATOL));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_derivative() {
        let g = central_difference(|x| x[0].powi(3) + 2.0 * x[1], &[2.0, -1.0], STEP);
        assert!((g[0] - 12.0).abs() < 1e-8);
        assert!((g[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn seeded_instances_agree() {
        for seed in 0..10 {
            assert!(check_attention_instance(seed).passed, "attention seed {seed}");
            assert!(check_mlp_instance(seed).passed, "mlp seed {seed}");
        }
    }

    #[test]
    fn compare_flags_mismatch() {
        assert!(compare(&[1.0, 0.0], &[1.00001, 1e-10], RTOL, ATOL).passed);
        let bad = compare(&[1.0, 2.0], &[1.0, 2.1], RTOL, ATOL);
        assert!(!bad.passed);
        assert_eq!(bad.worst_index, Some(1));
    }
}
