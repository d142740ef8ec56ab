//! Graph Fourier transform of per-block Y, U, V signals.
//!
//! Analysis is `z = Vᵀ·x` and synthesis `x = V·z`, where the columns of `V`
//! are the Laplacian eigenvectors in ascending-eigenvalue order. With `V`
//! orthonormal the pair is an exact inverse and preserves energy per
//! channel. All three channels share the block's one spectrum.

use crate::error::{Error, Result};
use crate::pc_io::Yuv;
use crate::spectral_graph::Spectrum;

/// Frequency responses of one block, coefficient `k` paired with
/// `frequencies[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    /// `[z_y, z_u, z_v]`.
    pub channels: [Vec<f64>; 3],
    pub frequencies: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn n(&self) -> usize {
        self.frequencies.len()
    }

    pub fn z_y(&self) -> &[f64] {
        &self.channels[0]
    }

    pub fn z_u(&self) -> &[f64] {
        &self.channels[1]
    }

    pub fn z_v(&self) -> &[f64] {
        &self.channels[2]
    }
}

pub fn gft_forward(spectrum: &Spectrum, attrs: &[Yuv]) -> Result<SpectralCoeffs> {
    let n = spectrum.n();
    if attrs.len() != n {
        return Err(Error::Shape(format!("GFT of {} samples with a {n}-node spectrum", attrs.len())));
    }
    let v = spectrum.eigenvectors();
    let channels = std::array::from_fn(|ch| {
        let signal: Vec<f64> = attrs.iter().map(|a| a[ch]).collect();
        v.t_matvec(&signal)
    });
    Ok(SpectralCoeffs { channels, frequencies: spectrum.eigenvalues().to_vec() })
}

pub fn gft_inverse(spectrum: &Spectrum, coeffs: &SpectralCoeffs) -> Result<Vec<Yuv>> {
    let n = spectrum.n();
    if coeffs.channels.iter().any(|c| c.len() != n) {
        return Err(Error::Shape(format!(
            "inverse GFT of {:?} coefficients with a {n}-node spectrum",
            coeffs.channels.each_ref().map(Vec::len)
        )));
    }
    let v = spectrum.eigenvectors();
    let [y, u, w] = coeffs.channels.each_ref().map(|z| v.matvec(z));
    Ok((0..n).map(|i| [y[i], u[i], w[i]]).collect())
}
