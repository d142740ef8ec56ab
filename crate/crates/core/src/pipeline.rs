//! End-to-end encode and diagnostic decode.
//!
//! Encoding runs: downscale → kd patches over the coarse cloud → one voxel
//! block per coarse point → graph → eigendecomposition → GFT → a global
//! Lloyd-Max fit over every block's frequencies → binned latents.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gft::{gft_forward, gft_inverse, SpectralCoeffs};
use crate::latent::{
    assemble_latent, bin_assignment, lloyd_max_fit, split_latent, LatentFile, LloydMaxQuantizer, Precision,
    QuantizerConfig,
};
use crate::pc_io::{ColorPreset, Coord, PointCloud, Yuv};
use crate::spectral_graph::{build_graph, eigendecompose, laplacian, Alpha, DistanceMode, Spectrum};
use crate::voxel_grid::{downscale_levels, extract_blocks, extract_blocks_from, kd_partition, BlockSize, VoxelBlock};

pub const DEFAULT_KD_DEPTH: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineConfig {
    pub block_size: BlockSize,
    pub bins: usize,
    pub alpha: Alpha,
    pub distance: DistanceMode,
    pub kd_depth: u32,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub seed: u64,
    pub color_matrix: ColorPreset,
    /// Allow a bin count other than the block size's default.
    pub force: bool,
    pub precision: Precision,
}

impl PipelineConfig {
    pub fn new(block_size: BlockSize) -> Self {
        Self {
            block_size,
            bins: block_size.default_bins(),
            alpha: Alpha::Auto,
            distance: DistanceMode::Color,
            kd_depth: DEFAULT_KD_DEPTH,
            threads: 0,
            seed: 0,
            color_matrix: ColorPreset::default(),
            force: false,
            precision: Precision::F32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.block_size.default_bins();
        if self.bins == 0 {
            return Err(Error::Config("bin count must be positive".into()));
        }
        if self.bins != expected && !self.force {
            return Err(Error::Config(format!(
                "{} bins with block size {} (expected {expected}; pass --force to override)",
                self.bins, self.block_size
            )));
        }
        if self.kd_depth > 20 {
            return Err(Error::Config(format!("kd depth {} is too large", self.kd_depth)));
        }
        Ok(())
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::new(BlockSize::Two)
    }
}

/// One block with its graph spectrum.
#[derive(Clone, Debug)]
pub struct AnalyzedBlock {
    pub block: VoxelBlock,
    pub spectrum: Spectrum,
}

fn block_attrs(pc: &PointCloud, block: &VoxelBlock) -> Vec<Yuv> {
    if pc.has_attributes() {
        block.point_indices.iter().map(|&i| pc.attrs()[i]).collect()
    } else {
        Vec::new()
    }
}

fn analyze(pc: &PointCloud, block: VoxelBlock, cfg: &PipelineConfig) -> Result<AnalyzedBlock> {
    let attrs = block_attrs(pc, &block);
    let graph = build_graph(&block, &attrs, cfg.alpha, cfg.distance);
    let spectrum = eigendecompose(&laplacian(&graph))?;
    Ok(AnalyzedBlock { block, spectrum })
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn check_input(pc: &PointCloud, cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    if pc.is_empty() {
        return Err(Error::InvalidCloud("empty point cloud".into()));
    }
    if cfg.distance == DistanceMode::Color && !pc.has_attributes() {
        return Err(Error::InvalidCloud("color distance needs point attributes".into()));
    }
    Ok(())
}

/// Spectra of every block, in lexicographic origin order, with the coarse
/// cloud whose points they collapse to.
pub fn analyze_blocks(pc: &PointCloud, cfg: &PipelineConfig) -> Result<(PointCloud, Vec<AnalyzedBlock>, usize)> {
    check_input(pc, cfg)?;
    let (parents, map) = downscale_levels(pc, cfg.block_size.levels())?;
    let patches = kd_partition(&parents, cfg.kd_depth);
    let index_of: HashMap<Coord, usize> = pc.coords().iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let pool = thread_pool(cfg.threads)?;
    let per_patch: Vec<Vec<AnalyzedBlock>> = pool.install(|| {
        patches
            .par_iter()
            .map(|patch| {
                let children =
                    patch.indices.iter().flat_map(|&p| map.children_of(parents.coords()[p])).map(|c| index_of[c]);
                extract_blocks_from(pc, children, cfg.block_size)
                    .into_iter()
                    .map(|b| analyze(pc, b, cfg))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut blocks: Vec<AnalyzedBlock> = per_patch.into_iter().flatten().collect();
    blocks.sort_by_key(|b| b.block.origin);
    if blocks.len() != parents.len() || blocks.iter().zip(parents.coords()).any(|(b, &p)| b.block.parent() != p) {
        return Err(Error::Numeric("voxel blocks do not line up with the downscaled cloud".into()));
    }
    Ok((parents, blocks, patches.len()))
}

/// Lloyd-Max fit over every block's eigenvalues, `f_max = max |λ|`.
pub fn fit_global_quantizer(blocks: &[AnalyzedBlock], bins: usize) -> Result<crate::latent::LloydMaxFit> {
    let samples: Vec<f64> = blocks.iter().flat_map(|b| b.spectrum.eigenvalues().iter().copied()).collect();
    let f_max = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let f_max = if f_max > 0.0 { f_max } else { 1.0 };
    lloyd_max_fit(&samples, &QuantizerConfig::new(bins, f_max))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodeStats {
    pub points: usize,
    pub bit_depth: u8,
    pub parents: usize,
    pub patches: usize,
    pub blocks: usize,
    pub mean_block_size: f64,
    pub bins: usize,
    pub quantizer_mse: f64,
    pub quantizer_iterations: usize,
    pub quantizer_converged: bool,
}

impl fmt::Display for EncodeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "points={}", self.points)?;
        writeln!(f, "bit_depth={}", self.bit_depth)?;
        writeln!(f, "parents={}", self.parents)?;
        writeln!(f, "patches={}", self.patches)?;
        writeln!(f, "blocks={}", self.blocks)?;
        writeln!(f, "mean_block_size={:.6}", self.mean_block_size)?;
        writeln!(f, "bins={}", self.bins)?;
        writeln!(f, "quantizer_mse={:.9e}", self.quantizer_mse)?;
        writeln!(f, "quantizer_iterations={}", self.quantizer_iterations)?;
        write!(f, "quantizer_converged={}", self.quantizer_converged)
    }
}

#[derive(Clone, Debug)]
pub struct Encoded {
    pub file: LatentFile,
    pub quantizer: LloydMaxQuantizer,
    pub stats: EncodeStats,
}

pub fn encode_cloud(pc: &PointCloud, cfg: &PipelineConfig) -> Result<Encoded> {
    if !pc.has_attributes() {
        return Err(Error::InvalidCloud("encoding needs point attributes".into()));
    }
    let (parents, blocks, patches) = analyze_blocks(pc, cfg)?;
    let fit = fit_global_quantizer(&blocks, cfg.bins)?;
    let latents = blocks
        .iter()
        .map(|b| {
            let coeffs = gft_forward(&b.spectrum, &block_attrs(pc, &b.block))?;
            Ok(assemble_latent(&coeffs, &fit.quantizer))
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = EncodeStats {
        points: pc.len(),
        bit_depth: pc.bit_depth(),
        parents: parents.len(),
        patches,
        blocks: blocks.len(),
        mean_block_size: pc.len() as f64 / blocks.len() as f64,
        bins: cfg.bins,
        quantizer_mse: fit.mse(),
        quantizer_iterations: fit.iterations,
        quantizer_converged: fit.converged,
    };
    let file = LatentFile::new(parents, latents, cfg.block_size, cfg.bins)?.with_precision(cfg.precision);
    Ok(Encoded { file, quantizer: fit.quantizer, stats })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeStats {
    pub points: usize,
    pub blocks: usize,
    /// Bins, summed over blocks, that received more than one frequency and
    /// were split equally.
    pub shared_bins: usize,
}

impl fmt::Display for DecodeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "points={}", self.points)?;
        writeln!(f, "blocks={}", self.blocks)?;
        write!(f, "shared_bins={}", self.shared_bins)
    }
}

/// Rebuilds attributes on `reference`'s geometry from binned latents.
///
/// The block graphs come from `reference` (its colors, in color mode), and
/// the quantizer is refitted exactly as the encoder fitted it. Each bin's sum
/// is shared equally among the frequencies that fell into it, so the result
/// is exact only when no bin of a block holds two frequencies.
pub fn decode_latents(
    file: &LatentFile,
    reference: &PointCloud,
    cfg: &PipelineConfig,
) -> Result<(PointCloud, DecodeStats)> {
    let cfg = PipelineConfig { block_size: file.block_size, bins: file.bins, force: true, ..*cfg };
    let (parents, blocks, _) = analyze_blocks(reference, &cfg)?;
    if parents.coords() != file.cloud.coords() {
        return Err(Error::Shape(format!(
            "reference geometry collapses to {} points, latent file has {}",
            parents.len(),
            file.cloud.len()
        )));
    }
    let fit = fit_global_quantizer(&blocks, file.bins)?;
    let mut attrs = vec![[0.0; 3]; reference.len()];
    let mut shared_bins = 0;
    for (b, latent) in blocks.iter().zip(&file.latents) {
        let freqs = b.spectrum.eigenvalues();
        let mut counts = vec![0usize; file.bins];
        for k in bin_assignment(freqs, &fit.quantizer) {
            counts[k] += 1;
        }
        shared_bins += counts.iter().filter(|&&c| c > 1).count();
        let coeffs =
            SpectralCoeffs { channels: split_latent(latent, freqs, &fit.quantizer)?, frequencies: freqs.to_vec() };
        for (&i, yuv) in b.block.point_indices.iter().zip(gft_inverse(&b.spectrum, &coeffs)?) {
            attrs[i] = yuv;
        }
    }
    let stats = DecodeStats { points: reference.len(), blocks: blocks.len(), shared_bins };
    Ok((PointCloud::new(reference.coords().to_vec(), attrs, reference.bit_depth())?, stats))
}

/// Blocks of `pc` without the patch and downscale bookkeeping.
pub fn analyze_cloud_blocks(pc: &PointCloud, cfg: &PipelineConfig) -> Result<Vec<AnalyzedBlock>> {
    check_input(pc, cfg)?;
    extract_blocks(pc, cfg.block_size).into_iter().map(|b| analyze(pc, b, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(base: f64) -> PointCloud {
        let mut coords = Vec::new();
        let mut attrs = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    coords.push([x, y, z]);
                    attrs.push([base + (x * 4 + y * 2 + z) as f64 * 7.0, 128.0 - x as f64, 128.0 + z as f64]);
                }
            }
        }
        PointCloud::new(coords, attrs, 2).unwrap()
    }

    #[test]
    fn eight_point_cube_is_one_record() {
        let e = encode_cloud(&cube(10.0), &PipelineConfig::default()).unwrap();
        assert_eq!(e.file.latents.len(), 1);
        assert_eq!(e.file.cloud.coords(), &[[0, 0, 0]]);
        assert_eq!(e.stats.blocks, 1);
        assert_eq!(e.stats.mean_block_size, 8.0);
        assert_eq!(e.file.latents[0].width(), 96);
    }

    #[test]
    fn empty_cloud_is_rejected() {
        let err = encode_cloud(&PointCloud::empty(4), &PipelineConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "empty point cloud");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bins_must_match_block_size_unless_forced() {
        let mut cfg = PipelineConfig { bins: 64, ..PipelineConfig::default() };
        assert!(matches!(encode_cloud(&cube(0.0), &cfg), Err(Error::Config(_))));
        cfg.force = true;
        assert_eq!(encode_cloud(&cube(0.0), &cfg).unwrap().file.bins, 64);
    }

    #[test]
    fn constant_color_decodes_exactly() {
        let coords: Vec<Coord> = (0..6).flat_map(|x| (0..3).map(move |y| [x, y, 1])).collect();
        let attrs = vec![[90.0, 120.0, 140.0]; coords.len()];
        let pc = PointCloud::new(coords, attrs, 3).unwrap();
        for bins in [2, 5, 32] {
            let cfg = PipelineConfig { bins, force: true, precision: Precision::F64, ..PipelineConfig::default() };
            let e = encode_cloud(&pc, &cfg).unwrap();
            let (out, _) = decode_latents(&e.file, &pc, &cfg).unwrap();
            for (a, b) in out.attrs().iter().zip(pc.attrs()) {
                for ch in 0..3 {
                    assert!((a[ch] - b[ch]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn forced_collision_splits_equally() {
        // Two points in one 2³ cell, one bin: both coefficients share the bin.
        let pc =
            PointCloud::new(vec![[0, 0, 0], [1, 0, 0]], vec![[10.0, 128.0, 128.0], [30.0, 128.0, 128.0]], 2).unwrap();
        let cfg = PipelineConfig { bins: 1, force: true, precision: Precision::F64, ..PipelineConfig::default() };
        let e = encode_cloud(&pc, &cfg).unwrap();
        let (out, stats) = decode_latents(&e.file, &pc, &cfg).unwrap();
        assert_eq!(stats.shared_bins, 1);
        // Eigenvectors (1, 1)/√2 and (1, −1)/√2: z = (40, −20)/√2, the bin
        // holds 20/√2, each coefficient gets 10/√2, so x = (10, 0).
        assert!((out.attrs()[0][0] - 10.0).abs() < 1e-9);
        assert!(out.attrs()[1][0].abs() < 1e-9);
    }

    #[test]
    fn decode_rejects_mismatched_reference() {
        let e = encode_cloud(&cube(0.0), &PipelineConfig::default()).unwrap();
        let other = PointCloud::new(vec![[2, 2, 2]], vec![[0.0; 3]], 2).unwrap();
        assert!(decode_latents(&e.file, &other, &PipelineConfig::default()).is_err());
    }
}
