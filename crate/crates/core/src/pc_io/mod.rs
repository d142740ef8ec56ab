//! Point clouds: the canonical in-memory type, color conversion and PLY I/O.

mod color;
mod ply;
mod synthetic;

pub use color::{rgb_to_yuv, yuv_to_rgb, ColorMatrix, ColorPreset};
pub use ply::{read_ply, read_ply_with, write_ply, write_ply_with, ColorSpace, PlyEncoding, ReadOptions};
pub use synthetic::textured_cylinder;

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Integer voxel coordinate.
pub type Coord = [u32; 3];

/// Per-point Y, U, V (real valued, nominally `[0, 255]`).
pub type Yuv = [f64; 3];

pub const MAX_BIT_DEPTH: u8 = 16;

/// A voxelized point cloud.
///
/// `attrs` is either empty (geometry only, e.g. a downscaled level whose
/// attributes are replaced by spectral latents) or has one entry per
/// coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    coords: Vec<Coord>,
    attrs: Vec<Yuv>,
    bit_depth: u8,
}

impl PointCloud {
    /// Validating constructor. Rejects duplicates; see [`PointCloud::voxelized`]
    /// for the merging variant.
    pub fn new(coords: Vec<Coord>, attrs: Vec<Yuv>, bit_depth: u8) -> Result<Self> {
        if !(1..=MAX_BIT_DEPTH).contains(&bit_depth) {
            return Err(Error::InvalidCloud(format!("bit depth {bit_depth} outside [1, {MAX_BIT_DEPTH}]")));
        }
        if !attrs.is_empty() && attrs.len() != coords.len() {
            return Err(Error::InvalidCloud(format!("{} coordinates but {} attributes", coords.len(), attrs.len())));
        }
        let limit = max_coord(bit_depth);
        if let Some(c) = coords.iter().find(|c| c.iter().any(|&v| v > limit)) {
            return Err(Error::InvalidCloud(format!("coordinate {c:?} exceeds {bit_depth}-bit range")));
        }
        let mut seen = HashMap::with_capacity(coords.len());
        for (i, c) in coords.iter().enumerate() {
            if let Some(j) = seen.insert(*c, i) {
                return Err(Error::InvalidCloud(format!("duplicate coordinate {c:?} at points {j} and {i}")));
            }
        }
        Ok(Self { coords, attrs, bit_depth })
    }

    pub fn geometry(coords: Vec<Coord>, bit_depth: u8) -> Result<Self> {
        Self::new(coords, Vec::new(), bit_depth)
    }

    /// Builds a cloud from raw samples, collapsing duplicate coordinates.
    ///
    /// The first occurrence keeps its position; its attributes become the
    /// mean over all duplicates. `bit_depth = None` infers the smallest depth
    /// covering the largest coordinate.
    pub fn voxelized(coords: Vec<Coord>, attrs: Vec<Yuv>, bit_depth: Option<u8>) -> Result<Self> {
        if !attrs.is_empty() && attrs.len() != coords.len() {
            return Err(Error::InvalidCloud(format!("{} coordinates but {} attributes", coords.len(), attrs.len())));
        }
        let has_attrs = !attrs.is_empty();
        let mut slot: HashMap<Coord, usize> = HashMap::with_capacity(coords.len());
        let mut out_coords = Vec::with_capacity(coords.len());
        let mut sums: Vec<(Yuv, usize)> = Vec::new();
        for (i, c) in coords.iter().enumerate() {
            match slot.get(c) {
                Some(&k) if has_attrs => {
                    let (sum, n) = &mut sums[k];
                    for ch in 0..3 {
                        sum[ch] += attrs[i][ch];
                    }
                    *n += 1;
                }
                Some(_) => {}
                None => {
                    slot.insert(*c, out_coords.len());
                    out_coords.push(*c);
                    if has_attrs {
                        sums.push((attrs[i], 1));
                    }
                }
            }
        }
        let out_attrs = sums.into_iter().map(|(s, n)| if n == 1 { s } else { s.map(|v| v / n as f64) }).collect();
        let depth = match bit_depth {
            Some(d) => d,
            None => infer_bit_depth(&out_coords)?,
        };
        Self::new(out_coords, out_attrs, depth)
    }

    pub fn empty(bit_depth: u8) -> Self {
        Self { coords: Vec::new(), attrs: Vec::new(), bit_depth }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn attrs(&self) -> &[Yuv] {
        &self.attrs
    }

    pub fn has_attributes(&self) -> bool {
        !self.attrs.is_empty() || self.coords.is_empty()
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    /// Same geometry with new attributes.
    pub fn with_attrs(&self, attrs: Vec<Yuv>) -> Result<Self> {
        if attrs.len() != self.coords.len() {
            return Err(Error::Shape(format!("{} attributes for {} points", attrs.len(), self.coords.len())));
        }
        Ok(Self { coords: self.coords.clone(), attrs, bit_depth: self.bit_depth })
    }

    /// One channel (0 = Y, 1 = U, 2 = V) as a flat vector.
    pub fn channel(&self, ch: usize) -> Vec<f64> {
        self.attrs.iter().map(|a| a[ch]).collect()
    }

    pub fn into_parts(self) -> (Vec<Coord>, Vec<Yuv>, u8) {
        (self.coords, self.attrs, self.bit_depth)
    }
}

#[inline]
pub fn max_coord(bit_depth: u8) -> u32 {
    ((1u64 << bit_depth) - 1) as u32
}

/// Smallest `n ≥ 1` with every component in `[0, 2^n − 1]`.
pub fn infer_bit_depth(coords: &[Coord]) -> Result<u8> {
    let max = coords.iter().flatten().copied().max().unwrap_or(0);
    let bits = (32 - max.leading_zeros()).max(1) as u8;
    if bits > MAX_BIT_DEPTH {
        return Err(Error::InvalidCloud(format!("coordinate {max} overflows {MAX_BIT_DEPTH} bits")));
    }
    Ok(bits)
}
