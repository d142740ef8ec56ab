//! Channel attention over a block's features, fused with an embedding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pcgft::nn_kernels::{
    attention_fusion, channel_attention_grad, channel_attention_trace, AttentionParams, FeatureMatrix,
};
use pcgft::Matrix;

fn main() -> pcgft::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let features = FeatureMatrix::new(Matrix::from_fn(5, 4, |r, c| ((r * 4 + c) as f64 * 0.37).sin()))?;
    let params = AttentionParams::random(4, 0.6, &mut rng);

    let trace = channel_attention_trace(&features, &params)?;
    println!("attention matrix (columns sum to 1):");
    for r in 0..4 {
        println!("  {:.4?}", trace.attention.row(r));
    }

    let embedded = FeatureMatrix::new(Matrix::from_fn(5, 4, |r, _| r as f64 * 0.1))?;
    let fused = attention_fusion(&features, &params, &embedded)?;
    println!("fused row 0: {:.4?}", fused.matrix().row(0));

    let upstream = Matrix::from_fn(5, 4, |_, _| 1.0);
    let grads = channel_attention_grad(&features, &params, &upstream)?;
    println!("|dL/dW_Q| max {:.4}", grads.d_w_q.max_abs());
    println!("|dL/dF| max {:.4}", grads.d_input.max_abs());

    let check = pcgft::nn_kernels::gradcheck::check_attention_instance(3);
    println!("finite-difference agreement: {} (worst rel {:.2e})", check.passed, check.max_rel_err);
    Ok(())
}
