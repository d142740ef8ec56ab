//! Spatial organization: kd-tree patches, fixed-size voxel blocks, the
//! `n → n−1` bit coordinate mapping and parent → child unpooling.

mod kdtree;
mod scale;

pub use kdtree::{kd_partition, Aabb, Patch};
pub use scale::{downscale_coord, downscale_coords, downscale_levels, unpool, ScaleMap};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::pc_io::{Coord, PointCloud};

/// Edge length of a cubic voxel block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockSize {
    /// 2×2×2 cells; one cell per point of the cloud one bit coarser.
    Two,
    /// 4×4×4 cells; one cell per point of the cloud two bits coarser.
    Four,
}

impl BlockSize {
    pub fn edge(self) -> u32 {
        match self {
            BlockSize::Two => 2,
            BlockSize::Four => 4,
        }
    }

    /// Largest possible block population.
    pub fn capacity(self) -> usize {
        (self.edge() as usize).pow(3)
    }

    /// Frequency bins per channel: 32 for 2³ blocks, 64 for 4³.
    pub fn default_bins(self) -> usize {
        match self {
            BlockSize::Two => 32,
            BlockSize::Four => 64,
        }
    }

    /// Flattened latent width, three channels of `default_bins`.
    pub fn latent_width(self) -> usize {
        3 * self.default_bins()
    }

    /// How many single-bit downscales separate a block from its parent point.
    pub fn levels(self) -> u8 {
        match self {
            BlockSize::Two => 1,
            BlockSize::Four => 2,
        }
    }

    pub fn from_edge(edge: u32) -> Result<Self, Error> {
        match edge {
            2 => Ok(BlockSize::Two),
            4 => Ok(BlockSize::Four),
            other => Err(Error::Config(format!("block size must be 2 or 4, got {other}"))),
        }
    }
}

impl fmt::Display for BlockSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.edge())
    }
}

impl FromStr for BlockSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let edge = s.parse().map_err(|_| Error::Config(format!("block size must be 2 or 4, got `{s}`")))?;
        Self::from_edge(edge)
    }
}

/// The occupied voxels of one aligned cubic cell.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelBlock {
    pub origin: Coord,
    pub size: BlockSize,
    /// Indices into the source cloud, ascending.
    pub point_indices: Vec<usize>,
    /// Member coordinates minus `origin`, parallel to `point_indices`.
    pub local_coords: Vec<Coord>,
}

impl VoxelBlock {
    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }

    /// Coordinate of the coarse point this cell collapses to.
    pub fn parent(&self) -> Coord {
        let e = self.size.edge();
        self.origin.map(|v| v / e)
    }
}

#[inline]
pub fn block_origin(c: Coord, size: BlockSize) -> Coord {
    let e = size.edge();
    c.map(|v| v / e * e)
}

/// Groups every point of `pc` into the cell `floor(c / size) · size`.
/// Blocks come out in lexicographic origin order.
pub fn extract_blocks(pc: &PointCloud, size: BlockSize) -> Vec<VoxelBlock> {
    extract_blocks_from(pc, 0..pc.len(), size)
}

/// [`extract_blocks`] restricted to a subset of point indices.
pub fn extract_blocks_from(
    pc: &PointCloud,
    indices: impl IntoIterator<Item = usize>,
    size: BlockSize,
) -> Vec<VoxelBlock> {
    let coords = pc.coords();
    let mut cells: BTreeMap<Coord, Vec<usize>> = BTreeMap::new();
    for i in indices {
        cells.entry(block_origin(coords[i], size)).or_default().push(i);
    }
    cells
        .into_iter()
        .map(|(origin, mut point_indices)| {
            point_indices.sort_unstable();
            let local_coords = point_indices
                .iter()
                .map(|&i| {
                    let c = coords[i];
                    [c[0] - origin[0], c[1] - origin[1], c[2] - origin[2]]
                })
                .collect();
            VoxelBlock { origin, size, point_indices, local_coords }
        })
        .collect()
}
