//! Deterministic test clouds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{rgb_to_yuv, Coord, PointCloud, Yuv};

/// A voxelized open cylinder shell centred in an `n`-bit grid, textured with
/// smooth stripes plus seeded noise of ±4 levels per RGB channel.
///
/// Radius and height are in voxels and must fit the grid.
pub fn textured_cylinder(bit_depth: u8, radius: f64, height: u32, seed: u64) -> PointCloud {
    let side = 1u32 << bit_depth;
    let centre = side as f64 / 2.0;
    assert!(radius > 0.0 && centre + radius < side as f64 && height < side, "cylinder must fit the grid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = (2.0 * std::f64::consts::PI * radius * 2.0).ceil() as usize;
    let z0 = (side - height) / 2;
    let mut coords: Vec<Coord> = Vec::new();
    let mut attrs: Vec<Yuv> = Vec::new();
    for z in z0..z0 + height {
        for s in 0..steps {
            let theta = 2.0 * std::f64::consts::PI * s as f64 / steps as f64;
            let x = (centre + radius * theta.cos()).floor() as u32;
            let y = (centre + radius * theta.sin()).floor() as u32;
            let h = (z - z0) as f64 / height as f64;
            let base = [
                128.0 + 90.0 * (3.0 * theta).sin(),
                128.0 + 80.0 * (6.0 * h).cos(),
                128.0 + 60.0 * (2.0 * theta + 4.0 * h).sin(),
            ];
            let rgb = base.map(|c: f64| (c + rng.gen_range(-4.0..=4.0)).clamp(0.0, 255.0).round());
            coords.push([x, y, z]);
            attrs.push(rgb_to_yuv(rgb));
        }
    }
    PointCloud::voxelized(coords, attrs, Some(bit_depth)).expect("coordinates fit the grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = textured_cylinder(10, 20.0, 16, 7);
        let b = textured_cylinder(10, 20.0, 16, 7);
        assert_eq!(a, b);
        assert_eq!(a.bit_depth(), 10);
        assert!(a.len() > 1000);
        assert!(a.attrs().iter().flatten().all(|v| (0.0..=255.0).contains(v)));
        assert_ne!(a, textured_cylinder(10, 20.0, 16, 8));
    }
}
