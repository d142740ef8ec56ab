use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Affine layer `y = W·x + b` with `W` stored `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Shape(format!(
                "bias of length {} for a {}x{} weight",
                bias.len(),
                weight.rows(),
                weight.cols()
            )));
        }
        if weight.rows() == 0 || weight.cols() == 0 {
            return Err(Error::Shape("empty dense layer".into()));
        }
        if !weight.is_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric("dense layer has non-finite parameters".into()));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Matrix::zeros(outputs, inputs), bias: vec![0.0; outputs] }
    }

    /// He-uniform weights, zero bias.
    pub fn he_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        Self {
            weight: Matrix::from_fn(outputs, inputs, |_, _| rng.gen_range(-limit..=limit)),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weight.matvec(x);
        for (v, b) in y.iter_mut().zip(&self.bias) {
            *v += b;
        }
        y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseGrad {
    fn zeros_like(layer: &Dense) -> Self {
        Self { weight: Matrix::zeros(layer.outputs(), layer.inputs()), bias: vec![0.0; layer.outputs()] }
    }
}

/// Encoder and decoder stacks. ReLU sits between consecutive layers of each
/// stack; the last layer of each stack is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub encoder: Vec<Dense>,
    pub decoder: Vec<Dense>,
}

impl MlpParams {
    pub fn new(encoder: Vec<Dense>, decoder: Vec<Dense>) -> Result<Self> {
        if encoder.is_empty() || decoder.is_empty() {
            return Err(Error::Shape("encoder and decoder need at least one layer each".into()));
        }
        let chain: Vec<&Dense> = encoder.iter().chain(&decoder).collect();
        for pair in chain.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape(format!(
                    "layer emits {} values but the next expects {}",
                    pair[0].outputs(),
                    pair[1].inputs()
                )));
            }
        }
        let (i, o) = (encoder[0].inputs(), decoder[decoder.len() - 1].outputs());
        if i != o {
            return Err(Error::Shape(format!("decoder reconstructs {o} values from {i} inputs")));
        }
        Ok(Self { encoder, decoder })
    }

    /// `3K → 2K' → K' → 2K' → 3K` with `K' = 3K / 3`, He-uniform weights.
    pub fn reducer(input_width: usize, seed: u64) -> Result<Self> {
        if input_width == 0 || !input_width.is_multiple_of(3) {
            return Err(Error::Shape(format!("reducer input width {input_width} is not a positive multiple of 3")));
        }
        let latent = input_width / 3;
        let hidden = 2 * latent;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(
            vec![Dense::he_uniform(input_width, hidden, &mut rng), Dense::he_uniform(hidden, latent, &mut rng)],
            vec![Dense::he_uniform(latent, hidden, &mut rng), Dense::he_uniform(hidden, input_width, &mut rng)],
        )
    }

    pub fn input_width(&self) -> usize {
        self.encoder[0].inputs()
    }

    pub fn latent_width(&self) -> usize {
        self.encoder[self.encoder.len() - 1].outputs()
    }

    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.encoder.iter().chain(&self.decoder)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(|l| l.weight.as_slice().len() + l.bias.len()).sum()
    }
}

/// Pre-activations of every layer, encoder first.
struct Pass {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

fn run_stack(stack: &[Dense], x: &[f64], pass: &mut Pass) -> Vec<f64> {
    let mut h = x.to_vec();
    for (i, layer) in stack.iter().enumerate() {
        let z = layer.forward(&h);
        pass.inputs.push(h);
        h = if i + 1 < stack.len() { relu(&z) } else { z.clone() };
        pass.pre.push(z);
    }
    h
}

fn forward_pass(x: &[f64], p: &MlpParams) -> Result<(Vec<f64>, Vec<f64>, Pass)> {
    if x.len() != p.input_width() {
        return Err(Error::Shape(format!("input of width {} for an encoder expecting {}", x.len(), p.input_width())));
    }
    let mut pass = Pass { inputs: Vec::new(), pre: Vec::new() };
    let latent = run_stack(&p.encoder, x, &mut pass);
    let recon = run_stack(&p.decoder, &latent, &mut pass);
    Ok((latent, recon, pass))
}

/// Returns `(latent, reconstruction)`.
pub fn mlp_forward(x: &[f64], p: &MlpParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let (latent, recon, _) = forward_pass(x, p)?;
    Ok((latent, recon))
}

/// Smallest `|z|` over pre-activations that feed a ReLU. Finite differences
/// are only meaningful when this exceeds the probe step.
pub fn relu_margin(x: &[f64], p: &MlpParams) -> Result<f64> {
    let (_, _, pass) = forward_pass(x, p)?;
    let n_enc = p.encoder.len();
    let total = pass.pre.len();
    Ok(pass
        .pre
        .iter()
        .enumerate()
        .filter(|&(i, _)| i + 1 != n_enc && i + 1 != total)
        .flat_map(|(_, z)| z.iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub encoder: Vec<DenseGrad>,
    pub decoder: Vec<DenseGrad>,
    pub d_input: Vec<f64>,
}

impl MlpGrads {
    pub fn zeros_like(p: &MlpParams) -> Self {
        Self {
            encoder: p.encoder.iter().map(DenseGrad::zeros_like).collect(),
            decoder: p.decoder.iter().map(DenseGrad::zeros_like).collect(),
            d_input: vec![0.0; p.input_width()],
        }
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseGrad> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    fn accumulate(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers_mut().zip(other.encoder.iter().chain(&other.decoder)) {
            for (x, y) in a.weight.as_mut_slice().iter_mut().zip(b.weight.as_slice()) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
        for (x, y) in self.d_input.iter_mut().zip(&other.d_input) {
            *x += y;
        }
    }
}

/// Back-propagates upstream gradients on the reconstruction and, optionally,
/// on the latent.
pub fn mlp_backward(x: &[f64], p: &MlpParams, d_recon: &[f64], d_latent: Option<&[f64]>) -> Result<MlpGrads> {
    let (latent, recon, pass) = forward_pass(x, p)?;
    if d_recon.len() != recon.len() {
        return Err(Error::Shape(format!(
            "reconstruction gradient of width {} for output width {}",
            d_recon.len(),
            recon.len()
        )));
    }
    if let Some(g) = d_latent {
        if g.len() != latent.len() {
            return Err(Error::Shape(format!(
                "latent gradient of width {} for latent width {}",
                g.len(),
                latent.len()
            )));
        }
    }
    let n_enc = p.encoder.len();
    let layers: Vec<&Dense> = p.layers().collect();
    let mut grads: Vec<DenseGrad> = Vec::with_capacity(layers.len());
    // gradient with respect to the output of the current layer
    let mut g = d_recon.to_vec();
    for idx in (0..layers.len()).rev() {
        let layer = layers[idx];
        let last_in_stack = idx + 1 == n_enc || idx + 1 == layers.len();
        if idx + 1 == n_enc {
            if let Some(dl) = d_latent {
                for (a, b) in g.iter_mut().zip(dl) {
                    *a += b;
                }
            }
        }
        let dz: Vec<f64> = if last_in_stack {
            g.clone()
        } else {
            g.iter().zip(&pass.pre[idx]).map(|(&gi, &z)| if z > 0.0 { gi } else { 0.0 }).collect()
        };
        let input = &pass.inputs[idx];
        let weight = Matrix::from_fn(layer.outputs(), layer.inputs(), |r, c| dz[r] * input[c]);
        g = layer.weight.t_matvec(&dz);
        grads.push(DenseGrad { weight, bias: dz });
    }
    grads.reverse();
    let decoder = grads.split_off(n_enc);
    Ok(MlpGrads { encoder: grads, decoder, d_input: g })
}

fn check_samples(samples: &[Vec<f64>], width: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Shape("no training samples".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.len() != width) {
        return Err(Error::Shape(format!("sample of width {} for model width {width}", s.len())));
    }
    Ok(())
}

/// Mean absolute reconstruction error over every sample and component.
pub fn mlp_loss(p: &MlpParams, samples: &[Vec<f64>]) -> Result<f64> {
    check_samples(samples, p.input_width())?;
    let mut total = 0.0;
    for s in samples {
        let (_, recon) = mlp_forward(s, p)?;
        total += recon.iter().zip(s).map(|(r, x)| (r - x).abs()).sum::<f64>();
    }
    Ok(total / (samples.len() * p.input_width()) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 500, learning_rate: 1e-2, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Lowest-loss iterate seen.
    pub params: MlpParams,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Loss before each step, then once more after the last.
    pub history: Vec<f64>,
    pub best_step: usize,
}

/// Full-batch gradient descent on mean L1 from a seeded reducer.
pub fn mlp_train(samples: &[Vec<f64>], cfg: &TrainConfig) -> Result<TrainReport> {
    let width = samples.first().map_or(0, Vec::len);
    let init = MlpParams::reducer(width, cfg.seed)?;
    mlp_train_from(init, samples, cfg)
}

/// As [`mlp_train`], starting from the given parameters.
pub fn mlp_train_from(mut params: MlpParams, samples: &[Vec<f64>], cfg: &TrainConfig) -> Result<TrainReport> {
    check_samples(samples, params.input_width())?;
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(Error::Config(format!("learning rate {} must be positive", cfg.learning_rate)));
    }
    let count = (samples.len() * params.input_width()) as f64;
    let scale = 1.0 / count;
    let mut history = Vec::with_capacity(cfg.steps + 1);
    let mut best = (f64::INFINITY, 0, params.clone());
    for step in 0..=cfg.steps {
        let mut grads = MlpGrads::zeros_like(&params);
        let mut total = 0.0;
        for s in samples {
            let (_, recon) = mlp_forward(s, &params)?;
            total += recon.iter().zip(s).map(|(r, x)| (r - x).abs()).sum::<f64>();
            let d: Vec<f64> = recon
                .iter()
                .zip(s)
                .map(|(r, x)| {
                    // sign(0) = 0 keeps a perfect fit in place.
                    if r > x {
                        scale
                    } else if r < x {
                        -scale
                    } else {
                        0.0
                    }
                })
                .collect();
            grads.accumulate(&mlp_backward(s, &params, &d, None)?);
        }
        let loss = total / count;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("training loss diverged at step {step}")));
        }
        history.push(loss);
        if loss < best.0 {
            best = (loss, step, params.clone());
        }
        if step == cfg.steps || loss == 0.0 {
            break;
        }
        let lr = cfg.learning_rate;
        let layers = params.encoder.iter_mut().chain(params.decoder.iter_mut());
        for (layer, g) in layers.zip(grads.layers_mut()) {
            for (w, dw) in layer.weight.as_mut_slice().iter_mut().zip(g.weight.as_slice()) {
                *w -= lr * dw;
            }
            for (b, db) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * db;
            }
        }
    }
    let (final_loss, best_step, params) = best;
    Ok(TrainReport { params, initial_loss: history[0], final_loss, history, best_step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn_kernels::gradcheck::{central_difference, compare, ATOL, RTOL, STEP};

    fn identity_rig(width: usize) -> MlpParams {
        let id = || Dense::new(Matrix::identity(width), vec![0.0; width]).unwrap();
        MlpParams::new(vec![id()], vec![id()]).unwrap()
    }

    #[test]
    fn reducer_widths() {
        for (w, k) in [(96, 32), (192, 64)] {
            let p = MlpParams::reducer(w, 1).unwrap();
            assert_eq!(p.latent_width(), k);
            let x: Vec<f64> = (0..w).map(|i| i as f64 * 0.1).collect();
            let (latent, recon) = mlp_forward(&x, &p).unwrap();
            assert_eq!((latent.len(), recon.len()), (k, w));
        }
        assert!(MlpParams::reducer(95, 1).is_err());
    }

    #[test]
    fn zero_parameters_give_zero_outputs() {
        let p =
            MlpParams::new(vec![Dense::zeros(6, 4), Dense::zeros(4, 2)], vec![Dense::zeros(2, 4), Dense::zeros(4, 6)])
                .unwrap();
        let (l, r) = mlp_forward(&[1.0, -2.0, 3.0, 0.5, 7.0, -1.0], &p).unwrap();
        assert!(l.iter().chain(&r).all(|&v| v == 0.0));
    }

    #[test]
    fn identity_rig_reconstructs() {
        let x = [1.5, -2.0, 0.0, 4.25];
        let (_, r) = mlp_forward(&x, &identity_rig(4)).unwrap();
        assert_eq!(r, x);
    }

    #[test]
    fn shape_validation() {
        assert!(MlpParams::new(vec![Dense::zeros(6, 2)], vec![Dense::zeros(3, 6)]).is_err());
        assert!(MlpParams::new(vec![Dense::zeros(6, 2)], vec![Dense::zeros(2, 5)]).is_err());
        assert!(Dense::new(Matrix::zeros(2, 3), vec![0.0]).is_err());
        assert!(mlp_forward(&[1.0], &identity_rig(2)).is_err());
        assert!(mlp_loss(&identity_rig(2), &[]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = MlpParams::reducer(6, 11).unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gr: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gl: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |x: &[f64], p: &MlpParams| {
            let (l, r) = mlp_forward(x, p).unwrap();
            r.iter().zip(&gr).map(|(a, b)| a * b).sum::<f64>() + l.iter().zip(&gl).map(|(a, b)| a * b).sum::<f64>()
        };
        let g = mlp_backward(&x, &p, &gr, Some(&gl)).unwrap();
        let num = central_difference(|v| loss(v, &p), &x, STEP);
        assert!(compare(&g.d_input, &num, RTOL, ATOL).passed);
        let w = p.encoder[0].weight.clone();
        let num_w = central_difference(
            |v| {
                let mut q = p.clone();
                q.encoder[0].weight = Matrix::from_vec(w.rows(), w.cols(), v.to_vec()).unwrap();
                loss(&x, &q)
            },
            w.as_slice(),
            STEP,
        );
        assert!(compare(g.encoder[0].weight.as_slice(), &num_w, RTOL, ATOL).passed);
    }

    #[test]
    fn overfitting_one_sample_is_monotone() {
        let x: Vec<f64> = (0..6).map(|i| (i as f64 - 2.5) * 0.4).collect();
        let samples = vec![x; 4];
        let cfg = TrainConfig { steps: 10, learning_rate: 1e-3, seed: 3 };
        let r = mlp_train(&samples, &cfg).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 || w[1] == 0.0, "{:?}", r.history);
        }
        assert!(r.final_loss < r.initial_loss);
    }

    #[test]
    fn zero_samples_train_to_zero() {
        let r = mlp_train(&vec![vec![0.0; 9]; 5], &TrainConfig::default()).unwrap();
        assert_eq!(r.final_loss, 0.0);
        assert_eq!(r.initial_loss, 0.0);
    }

    #[test]
    fn random_samples_improve_and_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let samples: Vec<Vec<f64>> = (0..100).map(|_| (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let cfg = TrainConfig { steps: 500, learning_rate: 0.05, seed: 2 };
        let a = mlp_train(&samples, &cfg).unwrap();
        let b = mlp_train(&samples, &cfg).unwrap();
        assert!(a.final_loss < a.initial_loss);
        assert_eq!(a.params, b.params);
        assert_eq!(a.final_loss, mlp_loss(&a.params, &samples).unwrap());
    }
}
