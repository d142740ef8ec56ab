//! Train the 96 → 32 → 96 reducer on latents from a real encode.

use pcgft::nn_kernels::{load_checkpoint, mlp_forward, mlp_train, save_checkpoint, TrainConfig};
use pcgft::pc_io::textured_cylinder;
use pcgft::pipeline::{encode_cloud, PipelineConfig};

fn main() -> pcgft::Result<()> {
    let pc = textured_cylinder(8, 16.0, 20, 4);
    let encoded = encode_cloud(&pc, &PipelineConfig::default())?;
    // bring coefficient sums into a unit range
    let samples: Vec<Vec<f64>> =
        encoded.file.latents.iter().take(200).map(|l| l.as_flat().iter().map(|v| v / 255.0).collect()).collect();
    println!("{} samples of width {}", samples.len(), samples[0].len());

    let cfg = TrainConfig { steps: 300, learning_rate: 0.05, seed: 1 };
    let report = mlp_train(&samples, &cfg)?;
    println!("mean L1 {:.5} -> {:.5} (best at step {})", report.initial_loss, report.final_loss, report.best_step);
    let (latent, recon) = mlp_forward(&samples[0], &report.params)?;
    println!("latent width {}, reconstruction width {}", latent.len(), recon.len());

    let path = std::env::temp_dir().join("pcgft_reducer.jsgp");
    save_checkpoint(&report.params, &path)?;
    let restored = load_checkpoint(&path)?;
    println!("checkpoint {} restored intact: {}", path.display(), restored == report.params);
    Ok(())
}
