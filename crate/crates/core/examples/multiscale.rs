//! Downscale a 10-bit cloud by one and two bits, then unpool back.

use pcgft::pc_io::textured_cylinder;
use pcgft::voxel_grid::{downscale_coords, downscale_levels, extract_blocks, kd_partition, unpool, BlockSize};

fn main() -> pcgft::Result<()> {
    let pc = textured_cylinder(10, 40.0, 64, 1);
    println!("input: {} points, {} bits", pc.len(), pc.bit_depth());

    let (half, map) = downscale_coords(&pc)?;
    let (quarter, map2) = downscale_levels(&pc, 2)?;
    println!("one level:  {} points, {} bits", half.len(), half.bit_depth());
    println!("two levels: {} points, {} bits", quarter.len(), quarter.bit_depth());

    let blocks2 = extract_blocks(&pc, BlockSize::Two);
    let blocks4 = extract_blocks(&pc, BlockSize::Four);
    println!("2³ blocks {} (one per parent: {})", blocks2.len(), blocks2.len() == half.len());
    println!("4³ blocks {} (one per parent: {})", blocks4.len(), blocks4.len() == quarter.len());

    let patches = kd_partition(&half, 3);
    let sizes: Vec<usize> = patches.iter().map(|p| p.indices.len()).collect();
    println!("kd patches of the coarse cloud: {sizes:?}");

    let ids: Vec<usize> = (0..half.len()).collect();
    let inherited = unpool(&pc, half.coords(), &ids, &map)?;
    let c = pc.coords()[100];
    println!("child {c:?} -> parent {:?}", half.coords()[inherited[100]]);
    println!("child {c:?} -> grandparent {:?}", map2.map_coord(c));

    let sidecar = map.to_sidecar();
    for line in sidecar.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
