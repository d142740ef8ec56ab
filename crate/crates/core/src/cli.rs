//! The `pcgft` command-line tool.
//!
//! Every subcommand reports through [`run`], which returns the process exit
//! code: 0 success, 2 parse, 3 config, 4 numeric, 5 I/O.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gft::{gft_forward, gft_inverse};
use crate::latent::{deserialize_latents, lloyd_max_fit, serialize_latents, LatentFile, Precision, QuantizerConfig};
use crate::linalg::Matrix;
use crate::metrics::{bd_rate, cloud_psnr, read_rd_csv, PEAK_8BIT};
use crate::nn_kernels::gradcheck::{check_attention_instance, check_mlp_instance};
use crate::nn_kernels::{joint_l1, LOSS_WEIGHTS};
use crate::pc_io::{
    read_ply_with, write_ply_with, ColorMatrix, ColorPreset, ColorSpace, PlyEncoding, PointCloud, ReadOptions,
};
use crate::pipeline::{decode_latents, encode_cloud, PipelineConfig, DEFAULT_KD_DEPTH};
use crate::spectral_graph::{eigendecompose, graph_from_features, laplacian, Alpha, DistanceMode};
use crate::voxel_grid::{downscale_levels, BlockSize};

#[derive(Debug, Parser)]
#[command(name = "pcgft", version, about = "Graph Fourier latents for point-cloud attributes")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Edge decay rate: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    pub alpha: String,
    /// Graph distance: color or geometry.
    #[arg(long, default_value = "color")]
    pub distance: String,
    /// kd-tree depth; the coarse cloud splits into 2^depth patches.
    #[arg(long, default_value_t = DEFAULT_KD_DEPTH)]
    pub kd_depth: u32,
    /// RGB ↔ YUV matrix: bt709 or bt601.
    #[arg(long, default_value = "bt709")]
    pub color_matrix: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PLY → GFTL latent file.
    Encode {
        input: PathBuf,
        output: PathBuf,
        /// Voxel block edge: 2 or 4.
        #[arg(long, default_value_t = 2)]
        block_size: u32,
        /// Frequency bins per channel (default 32 for 2, 64 for 4).
        #[arg(long)]
        bins: Option<usize>,
        /// Accept a bin count other than the block size's default.
        #[arg(long)]
        force: bool,
        /// Store coefficients as f64 instead of f32.
        #[arg(long)]
        f64: bool,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// GFTL + reference PLY → PLY. Diagnostic only: a bin shared by several
    /// frequencies is split equally among them, which is lossy.
    Decode {
        input: PathBuf,
        reference: PathBuf,
        output: PathBuf,
        /// Write RGB instead of YUV.
        #[arg(long)]
        rgb: bool,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Drop one bit of geometry per level; writes the coarse PLY and a
    /// `child -> parent` map.
    Downscale {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        levels: u8,
        /// Scale-map path (default: `<output>.map`).
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, default_value = "bt709")]
        color_matrix: String,
    },
    /// Copy each latent to the finer points that map onto it.
    Unpool {
        #[arg(long)]
        latents: PathBuf,
        #[arg(long)]
        children: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Bits between the children and the latent geometry.
        #[arg(long, default_value_t = 1)]
        levels: u8,
    },
    /// PSNR of two clouds with identical geometry.
    Psnr {
        reference: PathBuf,
        test: PathBuf,
        #[arg(long, default_value_t = PEAK_8BIT)]
        peak: f64,
        #[arg(long, default_value = "bt709")]
        color_matrix: String,
    },
    /// BD-rate of a test curve against an anchor, both `bpp,psnr` CSVs.
    Bdrate { anchor: PathBuf, test: PathBuf },
    /// Gradient, orthonormality and quantizer self-tests.
    Selfcheck {
        /// Random instances per suite.
        #[arg(long, default_value_t = 100)]
        instances: u64,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn read_cloud(path: &Path, preset: ColorPreset) -> Result<PointCloud> {
    read_ply_with(path, &ReadOptions { bit_depth: None, color_matrix: ColorMatrix::from_preset(preset) })
}

fn pipeline_config(cli: &Cli, block_size: BlockSize, graph: &GraphArgs) -> Result<PipelineConfig> {
    Ok(PipelineConfig {
        alpha: graph.alpha.parse::<Alpha>()?,
        distance: graph.distance.parse::<DistanceMode>()?,
        kd_depth: graph.kd_depth,
        threads: cli.threads,
        seed: cli.seed,
        color_matrix: graph.color_matrix.parse()?,
        ..PipelineConfig::new(block_size)
    })
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Encode { input, output, block_size, bins, force, f64, graph } => {
            let size = BlockSize::from_edge(*block_size)?;
            let mut cfg = pipeline_config(cli, size, graph)?;
            cfg.bins = bins.unwrap_or(size.default_bins());
            cfg.force = *force;
            cfg.precision = if *f64 { Precision::F64 } else { Precision::F32 };
            cfg.validate()?;
            let pc = read_cloud(input, cfg.color_matrix)?;
            let encoded = encode_cloud(&pc, &cfg)?;
            serialize_latents(&encoded.file, output)?;
            writeln!(out, "{}", encoded.stats).map_err(io_err)?;
            writeln!(out, "bytes={}", encoded.file.encoded_len()).map_err(io_err)?;
            Ok(0)
        }
        Command::Decode { input, reference, output, rgb, graph } => {
            let file = deserialize_latents(input)?;
            let cfg = pipeline_config(cli, file.block_size, graph)?;
            let pc = read_cloud(reference, cfg.color_matrix)?;
            let (decoded, stats) = decode_latents(&file, &pc, &cfg)?;
            let space = if *rgb { ColorSpace::Rgb } else { ColorSpace::Yuv };
            write_ply_with(
                &decoded,
                output,
                space,
                PlyEncoding::BinaryLittleEndian,
                &ColorMatrix::from_preset(cfg.color_matrix),
            )?;
            writeln!(out, "{stats}").map_err(io_err)?;
            Ok(0)
        }
        Command::Downscale { input, output, levels, map, color_matrix } => {
            let pc = read_cloud(input, color_matrix.parse()?)?;
            let (coarse, scale) = downscale_levels(&pc, *levels)?;
            write_ply_with(&coarse, output, ColorSpace::Yuv, PlyEncoding::BinaryLittleEndian, &ColorMatrix::default())?;
            let map_path = map.clone().unwrap_or_else(|| {
                let mut p = output.clone().into_os_string();
                p.push(".map");
                PathBuf::from(p)
            });
            std::fs::write(&map_path, scale.to_sidecar()).map_err(|e| Error::io(&map_path, e))?;
            writeln!(out, "points={}", pc.len()).map_err(io_err)?;
            writeln!(out, "bit_depth={}", scale.source_bit_depth()).map_err(io_err)?;
            writeln!(out, "parents={}", coarse.len()).map_err(io_err)?;
            writeln!(out, "parent_bit_depth={}", coarse.bit_depth()).map_err(io_err)?;
            writeln!(out, "map={}", map_path.display()).map_err(io_err)?;
            Ok(0)
        }
        Command::Unpool { latents, children, out: output, levels } => {
            let file = deserialize_latents(latents)?;
            let child_cloud = read_cloud(children, ColorPreset::default())?;
            let depth = file.cloud.bit_depth() as u32 + *levels as u32;
            let depth =
                u8::try_from(depth).map_err(|_| Error::Config(format!("child bit depth {depth} is too large")))?;
            let child_geometry = PointCloud::geometry(child_cloud.coords().to_vec(), depth)
                .map_err(|e| Error::Config(format!("children do not fit {depth} bits: {e}")))?;
            let (_, map) = downscale_levels(&child_geometry, *levels)?;
            let copied = crate::voxel_grid::unpool(&child_geometry, file.cloud.coords(), &file.latents, &map)?;
            let unpooled =
                LatentFile::new(child_geometry, copied, file.block_size, file.bins)?.with_precision(file.precision);
            serialize_latents(&unpooled, output)?;
            writeln!(out, "parents={}", file.cloud.len()).map_err(io_err)?;
            writeln!(out, "children={}", unpooled.cloud.len()).map_err(io_err)?;
            Ok(0)
        }
        Command::Psnr { reference, test, peak, color_matrix } => {
            let preset = color_matrix.parse()?;
            let r = cloud_psnr(&read_cloud(reference, preset)?, &read_cloud(test, preset)?, *peak)?;
            writeln!(out, "y_psnr={}", r.y).map_err(io_err)?;
            writeln!(out, "u_psnr={}", r.u).map_err(io_err)?;
            writeln!(out, "v_psnr={}", r.v).map_err(io_err)?;
            writeln!(out, "yuv611_psnr={}", r.yuv_611).map_err(io_err)?;
            writeln!(out, "y_mse={:.9e}", r.mse[0]).map_err(io_err)?;
            Ok(0)
        }
        Command::Bdrate { anchor, test } => {
            let r = bd_rate(&read_rd_csv(anchor)?, &read_rd_csv(test)?)?;
            writeln!(out, "bd_rate={r:.6}").map_err(io_err)?;
            Ok(0)
        }
        Command::Selfcheck { instances } => {
            let report = selfcheck(cli.seed, *instances);
            for (name, ok, detail) in &report {
                writeln!(out, "{name}={} {detail}", if *ok { "pass" } else { "FAIL" }).map_err(io_err)?;
            }
            Ok(if report.iter().all(|r| r.1) { 0 } else { 4 })
        }
    }
}

/// Runs every self-test suite; one `(name, passed, detail)` per suite.
pub fn selfcheck(seed: u64, instances: u64) -> Vec<(&'static str, bool, String)> {
    let mut report = Vec::new();

    let mut worst = 0.0f64;
    let mut ok = true;
    for i in 0..instances {
        let a = check_attention_instance(seed.wrapping_add(i));
        ok &= a.passed;
        worst = worst.max(a.max_rel_err);
    }
    report.push(("attention_grad", ok, format!("max_rel_err={worst:.3e}")));

    let (mut worst, mut ok) = (0.0f64, true);
    for i in 0..instances {
        let a = check_mlp_instance(seed.wrapping_add(i));
        ok &= a.passed;
        worst = worst.max(a.max_rel_err);
    }
    report.push(("mlp_grad", ok, format!("max_rel_err={worst:.3e}")));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ortho, mut roundtrip, mut ok) = (0.0f64, 0.0f64, true);
    for i in 0..instances {
        let n = rng.gen_range(1..=64);
        let feats: Vec<[f64; 3]> = (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(0.0..255.0))).collect();
        let mode = if i % 2 == 0 { DistanceMode::Color } else { DistanceMode::Geometry };
        let spectrum = match eigendecompose(&laplacian(&graph_from_features(&feats, Alpha::Auto, mode))) {
            Ok(s) => s,
            Err(_) => {
                ok = false;
                continue;
            }
        };
        let v = spectrum.eigenvectors();
        ortho = ortho.max(v.t_matmul(v).sub(&Matrix::identity(n)).max_abs());
        let back = gft_forward(&spectrum, &feats).and_then(|z| gft_inverse(&spectrum, &z));
        match back {
            Ok(x) => {
                for (a, b) in x.iter().zip(&feats) {
                    for ch in 0..3 {
                        roundtrip = roundtrip.max((a[ch] - b[ch]).abs());
                    }
                }
            }
            Err(_) => ok = false,
        }
    }
    ok &= ortho <= 1e-9 && roundtrip <= 1e-8;
    report.push(("orthonormality", ok, format!("max_ortho_err={ortho:.3e} max_roundtrip_err={roundtrip:.3e}")));

    let mut ok = true;
    for _ in 0..instances {
        let n = rng.gen_range(1..=40);
        let samples: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let f_max = samples.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-9);
        match lloyd_max_fit(&samples, &QuantizerConfig::new(rng.gen_range(1..=8), f_max)) {
            Ok(fit) => ok &= fit.mse_history.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            Err(_) => ok = false,
        }
    }
    report.push(("lloyd_max_monotone", ok, String::new()));

    let ok = joint_l1(&[[8.0, 0.0, 0.0]], &[[0.0; 3]]).is_ok_and(|r| r.l_joint == 6.0)
        && joint_l1(&[[8.0; 3]], &[[0.0; 3]]).is_ok_and(|r| r.l_joint == 8.0)
        && LOSS_WEIGHTS.iter().sum::<f64>() == 1.0;
    report.push(("joint_loss", ok, String::new()));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("pcgft").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["frobnicate"]).0, 2);
        assert_eq!(run_args(&["encode"]).0, 2);
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("selfcheck"));
    }

    #[test]
    fn bad_block_size_is_config() {
        let (code, _, err) = run_args(&["encode", "a.ply", "b.gftl", "--block-size", "3"]);
        assert_eq!(code, 3, "{err}");
        assert_eq!(run_args(&["encode", "a.ply", "b.gftl", "--distance", "taxicab"]).0, 3);
        assert_eq!(run_args(&["encode", "a.ply", "b.gftl", "--bins", "17"]).0, 3);
    }

    #[test]
    fn missing_input_is_io() {
        assert_eq!(run_args(&["encode", "/nonexistent/in.ply", "/tmp/x.gftl"]).0, 5);
    }

    #[test]
    fn selfcheck_passes() {
        let (code, out, _) = run_args(&["selfcheck", "--instances", "10"]);
        assert_eq!(code, 0, "{out}");
        assert_eq!(out.lines().count(), 5);
    }
}
