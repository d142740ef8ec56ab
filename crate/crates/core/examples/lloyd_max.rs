//! Fit a frequency codebook and bin one block's coefficients.

use pcgft::gft::SpectralCoeffs;
use pcgft::latent::{assemble_latent, bin_assignment, lloyd_max_fit, QuantizerConfig};

fn main() -> pcgft::Result<()> {
    let samples = [0.0, 1.0, 2.0, 9.0, 10.0, 11.0];
    let fit = lloyd_max_fit(&samples, &QuantizerConfig::new(2, 11.0))?;
    println!("centroids {:?} after {} iterations", fit.quantizer.centroids(), fit.iterations);
    println!("mse history {:?}", fit.mse_history);

    // Eigenvalues of several blocks pooled into one 8-bin codebook.
    let pooled: Vec<f64> = (0..40).map(|i| (i % 8) as f64 * 0.9 + (i / 8) as f64 * 0.05).collect();
    let f_max = pooled.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let fit = lloyd_max_fit(&pooled, &QuantizerConfig::new(8, f_max))?;
    println!("\n8-bin codebook {:.3?}", fit.quantizer.centroids());
    println!("quantizer mse {:.5}", fit.mse());

    let freqs = vec![0.0, 0.9, 1.85, 4.5];
    let coeffs = SpectralCoeffs {
        channels: [vec![300.0, -12.0, 4.0, 1.5], vec![250.0, 3.0, -1.0, 0.0], vec![260.0, 0.5, 0.5, -2.0]],
        frequencies: freqs.clone(),
    };
    let latent = assemble_latent(&coeffs, &fit.quantizer);
    println!("\nbins {:?}", bin_assignment(&freqs, &fit.quantizer));
    println!("Z_y {:?}", latent.channel(0));
    println!("latent width {}", latent.width());
    Ok(())
}
