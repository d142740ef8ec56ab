//! Lloyd-Max binning of graph frequencies and fixed-width latent vectors.
//!
//! A block's GFT coefficients are indexed by their eigenvalue. A scalar
//! Lloyd-Max quantizer fitted on the eigenvalue axis splits frequencies into
//! `K` bins; each bin of the latent holds the sum of the coefficients whose
//! frequency falls in it. Three channels of `K` bins give the 96-wide (2³
//! blocks, K = 32) or 192-wide (4³ blocks, K = 64) latent per coarse point.

mod file;

pub use file::{deserialize_latents, serialize_latents, LatentFile, Precision, GFTL_HEADER_LEN, GFTL_MAGIC};

use crate::error::{Error, Result};
use crate::gft::SpectralCoeffs;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantizerConfig {
    pub bins: usize,
    /// Centroids start evenly spaced over `[−f_max, f_max]`.
    pub f_max: f64,
    pub max_iters: usize,
    /// Stop once no centroid moves by this much.
    pub tol: f64,
}

impl QuantizerConfig {
    pub const DEFAULT_MAX_ITERS: usize = 300;
    pub const DEFAULT_TOL: f64 = 1e-10;

    pub fn new(bins: usize, f_max: f64) -> Self {
        Self { bins, f_max, max_iters: Self::DEFAULT_MAX_ITERS, tol: Self::DEFAULT_TOL }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::Config("quantizer needs at least one bin".into()));
        }
        if !(self.f_max > 0.0 && self.f_max.is_finite()) {
            return Err(Error::Config(format!("f_max must be positive, got {}", self.f_max)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    /// Evenly spaced over `[−f_max, f_max]`, endpoints included; a single
    /// bin starts at 0.
    pub fn initial_centroids(&self) -> Vec<f64> {
        let k = self.bins;
        if k == 1 {
            return vec![0.0];
        }
        (0..k).map(|i| -self.f_max + 2.0 * self.f_max * i as f64 / (k - 1) as f64).collect()
    }
}

/// Fitted scalar quantizer.
#[derive(Clone, Debug, PartialEq)]
pub struct LloydMaxQuantizer {
    centroids: Vec<f64>,
    boundaries: Vec<f64>,
}

impl LloydMaxQuantizer {
    /// Builds a quantizer from explicit centroids (sorted on the way in).
    pub fn from_centroids(mut centroids: Vec<f64>) -> Result<Self> {
        if centroids.is_empty() || centroids.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("centroids must be finite and non-empty".into()));
        }
        centroids.sort_by(f64::total_cmp);
        let boundaries = centroids.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self { centroids, boundaries })
    }

    pub fn bins(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Nearest centroid; a value exactly on a boundary goes to the lower bin.
    pub fn bin_index(&self, f: f64) -> usize {
        self.boundaries.partition_point(|&b| b < f)
    }

    pub fn quantize(&self, f: f64) -> f64 {
        self.centroids[self.bin_index(f)]
    }

    pub fn mse(&self, samples: &[f64]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        samples.iter().map(|&x| (x - self.quantize(x)).powi(2)).sum::<f64>() / samples.len() as f64
    }
}

pub fn bin_index(q: &LloydMaxQuantizer, f: f64) -> usize {
    q.bin_index(f)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LloydMaxFit {
    pub quantizer: LloydMaxQuantizer,
    /// Distortion of the centroids at the start of each iteration, plus the
    /// final centroids as the last entry.
    pub mse_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LloydMaxFit {
    pub fn mse(&self) -> f64 {
        *self.mse_history.last().expect("history is never empty")
    }
}

/// Alternates nearest-centroid assignment and recentering until no centroid
/// moves more than `cfg.tol` or `cfg.max_iters` is hit. Empty bins keep their
/// centroid.
pub fn lloyd_max_fit(samples: &[f64], cfg: &QuantizerConfig) -> Result<LloydMaxFit> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("cannot fit a quantizer to zero samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite quantizer sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut q = LloydMaxQuantizer::from_centroids(cfg.initial_centroids())?;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let cells = cells(&sorted, &q);
        history.push(distortion(&sorted, &cells, q.centroids()));
        let next: Vec<f64> = cells
            .iter()
            .zip(q.centroids())
            .map(
                |(range, &c)| {
                    if range.is_empty() {
                        c
                    } else {
                        sorted[range.clone()].iter().sum::<f64>() / range.len() as f64
                    }
                },
            )
            .collect();
        let moved = next.iter().zip(q.centroids()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        q = LloydMaxQuantizer::from_centroids(next)?;
        iterations += 1;
        if moved < cfg.tol {
            converged = true;
            break;
        }
    }
    let final_cells = cells(&sorted, &q);
    history.push(distortion(&sorted, &final_cells, q.centroids()));
    Ok(LloydMaxFit { quantizer: q, mse_history: history, iterations, converged })
}

/// Index ranges of `sorted` owned by each bin.
fn cells(sorted: &[f64], q: &LloydMaxQuantizer) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::with_capacity(q.bins());
    let mut start = 0;
    for &b in q.boundaries() {
        let end = start + sorted[start..].partition_point(|&x| x <= b);
        out.push(start..end);
        start = end;
    }
    out.push(start..sorted.len());
    out
}

fn distortion(sorted: &[f64], cells: &[std::ops::Range<usize>], centroids: &[f64]) -> f64 {
    let sse: f64 = cells
        .iter()
        .zip(centroids)
        .map(|(r, &c)| sorted[r.clone()].iter().map(|x| (x - c) * (x - c)).sum::<f64>())
        .sum();
    sse / sorted.len() as f64
}

/// Binned spectral coefficients of one block: `3 × bins` values, Y bins
/// first, then U, then V.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector {
    bins: usize,
    values: Vec<f64>,
}

impl LatentVector {
    pub fn zeros(bins: usize) -> Self {
        Self { bins, values: vec![0.0; 3 * bins] }
    }

    pub fn from_flat(bins: usize, values: Vec<f64>) -> Result<Self> {
        if bins == 0 || values.len() != 3 * bins {
            return Err(Error::Shape(format!("{} values for a {bins}-bin latent", values.len())));
        }
        Ok(Self { bins, values })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Flattened width, `3 · bins`.
    pub fn width(&self) -> usize {
        self.values.len()
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.values[ch * self.bins..(ch + 1) * self.bins]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [f64] {
        &mut self.values[ch * self.bins..(ch + 1) * self.bins]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }
}

/// Sums each channel's coefficients into the bin of their frequency, in
/// ascending coefficient order.
pub fn assemble_latent(coeffs: &SpectralCoeffs, q: &LloydMaxQuantizer) -> LatentVector {
    let mut latent = LatentVector::zeros(q.bins());
    for (k, &f) in coeffs.frequencies.iter().enumerate() {
        let b = q.bin_index(f);
        for ch in 0..3 {
            latent.channel_mut(ch)[b] += coeffs.channels[ch][k];
        }
    }
    latent
}

/// Which bin each of a block's frequencies falls in.
pub fn bin_assignment(frequencies: &[f64], q: &LloydMaxQuantizer) -> Vec<usize> {
    frequencies.iter().map(|&f| q.bin_index(f)).collect()
}

/// Lossy inverse of [`assemble_latent`]: every frequency of a bin receives
/// an equal share of that bin's sum. Exact when each bin holds at most one of
/// the block's frequencies.
pub fn split_latent(latent: &LatentVector, frequencies: &[f64], q: &LloydMaxQuantizer) -> Result<[Vec<f64>; 3]> {
    if latent.bins() != q.bins() {
        return Err(Error::Shape(format!("latent has {} bins, quantizer {}", latent.bins(), q.bins())));
    }
    let assign = bin_assignment(frequencies, q);
    let mut counts = vec![0usize; q.bins()];
    for &b in &assign {
        counts[b] += 1;
    }
    Ok(std::array::from_fn(|ch| assign.iter().map(|&b| latent.channel(ch)[b] / counts[b] as f64).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fit(samples: &[f64], bins: usize, f_max: f64) -> LloydMaxFit {
        lloyd_max_fit(samples, &QuantizerConfig::new(bins, f_max)).unwrap()
    }

    #[test]
    fn two_symmetric_clusters() {
        let f = fit(&[-1.0, 1.0], 2, 1.0);
        assert_eq!(f.quantizer.centroids(), &[-1.0, 1.0]);
        assert_eq!(f.mse(), 0.0);
        assert!(f.converged);
    }

    #[test]
    fn constant_samples_collapse_onto_one_centroid() {
        let f = fit(&[2.5; 9], 4, 3.0);
        assert_eq!(f.mse(), 0.0);
        assert!(f.quantizer.centroids().contains(&2.5));
    }

    #[test]
    fn well_separated_pairs() {
        // Brute force over the five contiguous 2-way splits of the sorted
        // samples picks {0,1,2} | {9,10,11} with centroids 1 and 10.
        let f = fit(&[0.0, 1.0, 2.0, 9.0, 10.0, 11.0], 2, 11.0);
        assert_eq!(f.quantizer.centroids(), &[1.0, 10.0]);
    }

    #[test]
    fn bin_index_edges_and_ties() {
        let q = LloydMaxQuantizer::from_centroids(vec![10.0, 1.0]).unwrap();
        assert_eq!(q.boundaries(), &[5.5]);
        assert_eq!(bin_index(&q, -100.0), 0);
        assert_eq!(bin_index(&q, 100.0), 1);
        assert_eq!(bin_index(&q, 5.5), 0);
        assert_eq!(bin_index(&q, 5.5 + 1e-12), 1);
    }

    #[test]
    fn empty_bins_are_frozen() {
        let cfg = QuantizerConfig::new(4, 3.0);
        let f = lloyd_max_fit(&[2.0, 3.0], &cfg).unwrap();
        // Initial centroids −3, −1, 1, 3: the two negative ones never win a sample.
        assert_eq!(&f.quantizer.centroids()[..2], &[-3.0, -1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(lloyd_max_fit(&[], &QuantizerConfig::new(2, 1.0)).is_err());
        assert!(lloyd_max_fit(&[1.0], &QuantizerConfig::new(0, 1.0)).is_err());
        assert!(lloyd_max_fit(&[1.0], &QuantizerConfig::new(2, 0.0)).is_err());
        assert!(lloyd_max_fit(&[f64::NAN], &QuantizerConfig::new(2, 1.0)).is_err());
    }

    fn coeffs(freqs: Vec<f64>, y: Vec<f64>) -> SpectralCoeffs {
        let n = freqs.len();
        SpectralCoeffs { channels: [y, vec![1.0; n], vec![0.0; n]], frequencies: freqs }
    }

    #[test]
    fn single_coefficient_block() {
        let q = LloydMaxQuantizer::from_centroids(vec![0.0, 1.0, 2.0]).unwrap();
        let l = assemble_latent(&coeffs(vec![0.0], vec![7.5]), &q);
        assert_eq!(l.channel(0), &[7.5, 0.0, 0.0]);
        assert_eq!(l.width(), 9);
    }

    #[test]
    fn straddling_two_node_block() {
        // Frequencies {0, 2w} with 2w = 1.6 past the 0/2 boundary at 1.0.
        let q = LloydMaxQuantizer::from_centroids(vec![0.0, 2.0]).unwrap();
        let l = assemble_latent(&coeffs(vec![0.0, 1.6], vec![3.0, -4.0]), &q);
        assert_eq!(l.channel(0), &[3.0, -4.0]);
        let split = split_latent(&l, &[0.0, 1.6], &q).unwrap();
        assert_eq!(split[0], vec![3.0, -4.0]);
    }

    #[test]
    fn collisions_split_evenly() {
        let q = LloydMaxQuantizer::from_centroids(vec![0.0]).unwrap();
        let l = assemble_latent(&coeffs(vec![0.0, 0.4], vec![3.0, 5.0]), &q);
        assert_eq!(l.channel(0), &[8.0]);
        assert_eq!(split_latent(&l, &[0.0, 0.4], &q).unwrap()[0], vec![4.0, 4.0]);
    }

    proptest! {
        #[test]
        fn mse_never_increases(
            samples in proptest::collection::vec(-50.0f64..50.0, 1..120),
            bins in 1usize..12,
        ) {
            let f_max = samples.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-3);
            let fit = fit(&samples, bins, f_max);
            for w in fit.mse_history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", fit.mse_history);
            }
            prop_assert!((fit.quantizer.mse(&samples) - fit.mse()).abs() <= 1e-9);
        }

        #[test]
        fn binning_preserves_channel_sums(
            pairs in proptest::collection::vec((0.0f64..20.0, -100.0f64..100.0), 1..64),
            bins in 1usize..40,
        ) {
            let (freqs, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let q = fit(&freqs, bins, 20.0).quantizer;
            let l = assemble_latent(&coeffs(freqs.clone(), y.clone()), &q);
            prop_assert!((l.channel(0).iter().sum::<f64>() - y.iter().sum::<f64>()).abs() <= 1e-9);
            prop_assert!((l.channel(1).iter().sum::<f64>() - freqs.len() as f64).abs() <= 1e-9);
            let used: std::collections::BTreeSet<usize> = bin_assignment(&freqs, &q).into_iter().collect();
            for b in 0..q.bins() {
                if !used.contains(&b) {
                    prop_assert_eq!(l.channel(0)[b], 0.0);
                }
            }
        }
    }
}
