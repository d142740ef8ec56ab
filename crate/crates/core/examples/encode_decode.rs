//! Full path through the library: PLY → latents → GFTL → decoded PLY.

use pcgft::latent::{deserialize_latents, serialize_latents};
use pcgft::metrics::{bpp, cloud_psnr, PEAK_8BIT};
use pcgft::pc_io::{read_ply, textured_cylinder, write_ply, ColorSpace};
use pcgft::pipeline::{decode_latents, encode_cloud, PipelineConfig};
use pcgft::voxel_grid::BlockSize;

fn main() -> pcgft::Result<()> {
    let dir = std::env::temp_dir().join("pcgft_encode_decode");
    std::fs::create_dir_all(&dir).map_err(|e| pcgft::Error::Io { path: dir.clone(), source: e })?;
    let ply = dir.join("cylinder.ply");
    write_ply(&textured_cylinder(10, 30.0, 48, 2), &ply, ColorSpace::Rgb)?;
    let pc = read_ply(&ply)?;

    for size in [BlockSize::Two, BlockSize::Four] {
        let cfg = PipelineConfig { threads: 4, ..PipelineConfig::new(size) };
        let encoded = encode_cloud(&pc, &cfg)?;
        let gftl = dir.join(format!("cylinder_{size}.gftl"));
        serialize_latents(&encoded.file, &gftl)?;
        println!("block size {size}\n{}", encoded.stats);

        let file = deserialize_latents(&gftl)?;
        let (decoded, stats) = decode_latents(&file, &pc, &cfg)?;
        let q = cloud_psnr(&pc, &decoded, PEAK_8BIT)?;
        let bits = 8 * file.encoded_len() as u64;
        println!("shared_bins={}", stats.shared_bins);
        println!("y_psnr={} yuv611_psnr={}", q.y, q.yuv_611);
        println!("bpp={:.3}\n", bpp(bits, pc.len() as u64)?);
    }
    Ok(())
}
