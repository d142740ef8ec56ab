//! `GFTL` latent files.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "GFTL"
//!      4     1  version (1)
//!      5     1  block size (2 or 4)
//!      6     2  bins K, u16 LE
//!      8     8  point count, u64 LE
//!     16     1  bit depth of the coarse cloud
//!     17     1  flags: bit 0 = f64 coefficients, bit 1 = non-default K
//!     18    14  reserved, zero
//! then per point: 3 × i32 LE coordinate, 3K coefficients (f32 LE, or f64 LE
//! with flag bit 0), channel-major Y, U, V.
//! ```

use std::path::Path;

use super::LatentVector;
use crate::error::{Error, Result};
use crate::pc_io::PointCloud;
use crate::voxel_grid::BlockSize;

pub const GFTL_MAGIC: &[u8; 4] = b"GFTL";
pub const GFTL_HEADER_LEN: usize = 32;
const VERSION: u8 = 1;
const FLAG_F64: u8 = 1;
const FLAG_CUSTOM_BINS: u8 = 2;

/// On-disk coefficient width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    fn bytes(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

/// Coarse geometry plus one latent per point.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentFile {
    pub block_size: BlockSize,
    pub bins: usize,
    pub precision: Precision,
    /// Geometry-only cloud; point `i` owns `latents[i]`.
    pub cloud: PointCloud,
    pub latents: Vec<LatentVector>,
}

impl LatentFile {
    pub fn new(cloud: PointCloud, latents: Vec<LatentVector>, block_size: BlockSize, bins: usize) -> Result<Self> {
        if cloud.len() != latents.len() {
            return Err(Error::Shape(format!("{} points but {} latents", cloud.len(), latents.len())));
        }
        if bins == 0 || bins > u16::MAX as usize {
            return Err(Error::Config(format!("bin count {bins} does not fit the file format")));
        }
        if let Some(l) = latents.iter().find(|l| l.bins() != bins) {
            return Err(Error::Shape(format!("latent with {} bins in a {bins}-bin file", l.bins())));
        }
        if cloud.coords().iter().flatten().any(|&v| v > i32::MAX as u32) {
            return Err(Error::Config("coordinate does not fit in i32".into()));
        }
        Ok(Self { block_size, bins, precision: Precision::F32, cloud, latents })
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn record_len(&self) -> usize {
        12 + 3 * self.bins * self.precision.bytes()
    }

    pub fn encoded_len(&self) -> usize {
        GFTL_HEADER_LEN + self.cloud.len() * self.record_len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(GFTL_MAGIC);
        out.push(VERSION);
        out.push(self.block_size.edge() as u8);
        out.extend_from_slice(&(self.bins as u16).to_le_bytes());
        out.extend_from_slice(&(self.cloud.len() as u64).to_le_bytes());
        out.push(self.cloud.bit_depth());
        let mut flags = 0;
        if self.precision == Precision::F64 {
            flags |= FLAG_F64;
        }
        if self.bins != self.block_size.default_bins() {
            flags |= FLAG_CUSTOM_BINS;
        }
        out.push(flags);
        out.resize(GFTL_HEADER_LEN, 0);

        for (c, latent) in self.cloud.coords().iter().zip(&self.latents) {
            for v in c {
                out.extend_from_slice(&(*v as i32).to_le_bytes());
            }
            for &v in latent.as_flat() {
                match self.precision {
                    Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                    Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < GFTL_HEADER_LEN {
            return Err(Error::LatentFormat(format!("truncated header ({} of {GFTL_HEADER_LEN} bytes)", bytes.len())));
        }
        if &bytes[..4] != GFTL_MAGIC {
            return Err(Error::LatentFormat("bad magic, not a GFTL file".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::LatentFormat(format!("unsupported version {}", bytes[4])));
        }
        let block_size = BlockSize::from_edge(bytes[5] as u32)
            .map_err(|_| Error::LatentFormat(format!("invalid block size {}", bytes[5])))?;
        let bins = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let bit_depth = bytes[16];
        let flags = bytes[17];
        if flags & !(FLAG_F64 | FLAG_CUSTOM_BINS) != 0 {
            return Err(Error::LatentFormat(format!("unknown flags {flags:#04x}")));
        }
        if bins == 0 || (flags & FLAG_CUSTOM_BINS == 0 && bins != block_size.default_bins()) {
            return Err(Error::LatentFormat(format!(
                "{bins} bins do not match block size {block_size} (expected {})",
                block_size.default_bins()
            )));
        }
        let precision = if flags & FLAG_F64 != 0 { Precision::F64 } else { Precision::F32 };
        let record = 12 + 3 * bins * precision.bytes();
        let body = &bytes[GFTL_HEADER_LEN..];
        let expected = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(record))
            .ok_or_else(|| Error::LatentFormat(format!("implausible point count {count}")))?;
        if body.len() < expected {
            return Err(Error::LatentFormat(format!(
                "truncated: {count} records need {expected} bytes, found {}",
                body.len()
            )));
        }
        if body.len() > expected {
            return Err(Error::LatentFormat(format!("{} trailing bytes", body.len() - expected)));
        }

        let mut coords = Vec::with_capacity(count as usize);
        let mut latents = Vec::with_capacity(count as usize);
        for rec in body.chunks_exact(record) {
            let mut c = [0u32; 3];
            for (k, slot) in c.iter_mut().enumerate() {
                let v = i32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
                *slot = u32::try_from(v).map_err(|_| Error::LatentFormat(format!("negative coordinate {v}")))?;
            }
            coords.push(c);
            let values = match precision {
                Precision::F32 => {
                    rec[12..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect()
                }
                Precision::F64 => {
                    rec[12..].chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect()
                }
            };
            latents.push(LatentVector::from_flat(bins, values)?);
        }
        let cloud = PointCloud::geometry(coords, bit_depth)
            .map_err(|e| Error::LatentFormat(format!("invalid geometry: {e}")))?;
        Ok(Self { block_size, bins, precision, cloud, latents })
    }
}

pub fn serialize_latents(file: &LatentFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, file.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn deserialize_latents(path: impl AsRef<Path>) -> Result<LatentFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    LatentFile::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_point(bins: usize, size: BlockSize) -> LatentFile {
        let cloud = PointCloud::geometry(vec![[3, 2, 1]], 9).unwrap();
        let latent = LatentVector::from_flat(bins, (0..3 * bins).map(|i| i as f64 * 0.5).collect()).unwrap();
        LatentFile::new(cloud, vec![latent], size, bins).unwrap()
    }

    #[test]
    fn empty_file_is_bare_header() {
        let f = LatentFile::new(PointCloud::empty(9), vec![], BlockSize::Two, 32).unwrap();
        let bytes = f.to_bytes();
        assert_eq!(bytes.len(), 32);
        assert_eq!(&bytes[..4], b"GFTL");
        assert_eq!(LatentFile::from_bytes(&bytes).unwrap(), f);
    }

    #[test]
    fn single_record_size() {
        let f = one_point(32, BlockSize::Two);
        assert_eq!(f.to_bytes().len(), 32 + 12 + 3 * 32 * 4);
        assert_eq!(f.clone().with_precision(Precision::F64).to_bytes().len(), 32 + 12 + 3 * 32 * 8);
        assert_eq!(LatentFile::from_bytes(&f.to_bytes()).unwrap(), f);
    }

    #[test]
    fn format_errors() {
        let good = one_point(64, BlockSize::Four).to_bytes();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(LatentFile::from_bytes(&bad_magic), Err(Error::LatentFormat(m)) if m.contains("magic")));
        assert!(
            matches!(LatentFile::from_bytes(&good[..good.len() - 1]), Err(Error::LatentFormat(m)) if m.contains("truncated"))
        );
        assert!(LatentFile::from_bytes(&good[..20]).is_err());
        let mut wrong_k = good.clone();
        wrong_k[6] = 32;
        assert!(matches!(LatentFile::from_bytes(&wrong_k), Err(Error::LatentFormat(m)) if m.contains("block size")));
        let mut neg = good.clone();
        neg[32 + 3] = 0x80;
        assert!(LatentFile::from_bytes(&neg).is_err());
    }

    #[test]
    fn custom_bin_count_is_flagged() {
        let f = one_point(1, BlockSize::Two);
        let bytes = f.to_bytes();
        assert_eq!(bytes[17] & FLAG_CUSTOM_BINS, FLAG_CUSTOM_BINS);
        assert_eq!(LatentFile::from_bytes(&bytes).unwrap(), f);
    }

    proptest! {
        #[test]
        fn f32_values_round_trip_bit_exactly(
            raw in proptest::collection::vec(proptest::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 96), 0..20),
        ) {
            let coords: Vec<[u32; 3]> = (0..raw.len() as u32).map(|i| [i, 2 * i, 511 - i]).collect();
            let cloud = PointCloud::geometry(coords, 9).unwrap();
            let latents: Vec<LatentVector> = raw
                .iter()
                .map(|r| LatentVector::from_flat(32, r.iter().map(|&v| v as f64).collect()).unwrap())
                .collect();
            let f = LatentFile::new(cloud, latents, BlockSize::Two, 32).unwrap();
            let bytes = f.to_bytes();
            let back = LatentFile::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back.to_bytes(), &bytes);
            for (a, b) in back.latents.iter().zip(&f.latents) {
                for (x, y) in a.as_flat().iter().zip(b.as_flat()) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
