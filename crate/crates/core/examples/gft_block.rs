//! One 2³ block: graph, Laplacian spectrum, forward and inverse GFT.

use pcgft::gft::{gft_forward, gft_inverse};
use pcgft::pc_io::rgb_to_yuv;
use pcgft::spectral_graph::{build_graph, eigendecompose, laplacian, Alpha, DistanceMode};
use pcgft::voxel_grid::extract_blocks;
use pcgft::voxel_grid::BlockSize;
use pcgft::PointCloud;

fn main() -> pcgft::Result<()> {
    let coords = vec![[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 1, 1]];
    let rgb = [
        [200.0, 40.0, 40.0],
        [190.0, 50.0, 45.0],
        [60.0, 160.0, 70.0],
        [70.0, 150.0, 80.0],
        [210.0, 35.0, 50.0],
        [40.0, 60.0, 200.0],
    ];
    let pc = PointCloud::new(coords, rgb.iter().map(|&c| rgb_to_yuv(c)).collect(), 1)?;
    let block = &extract_blocks(&pc, BlockSize::Two)[0];

    for mode in [DistanceMode::Color, DistanceMode::Geometry] {
        let graph = build_graph(block, pc.attrs(), Alpha::Auto, mode);
        let spectrum = eigendecompose(&laplacian(&graph))?;
        let z = gft_forward(&spectrum, pc.attrs())?;
        let back = gft_inverse(&spectrum, &z)?;
        let err =
            back.iter().zip(pc.attrs()).flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs())).fold(0.0, f64::max);

        println!("{mode} distance, alpha = {:.4}, {} Jacobi sweeps", graph.alpha(), spectrum.sweeps());
        println!("  {:>10} {:>10} {:>10} {:>10}", "lambda", "Z_y", "Z_u", "Z_v");
        for k in 0..spectrum.n() {
            println!(
                "  {:>10.4} {:>10.3} {:>10.3} {:>10.3}",
                spectrum.eigenvalues()[k],
                z.z_y()[k],
                z.z_u()[k],
                z.z_v()[k]
            );
        }
        println!("  inverse error {err:.2e}");
    }
    Ok(())
}
