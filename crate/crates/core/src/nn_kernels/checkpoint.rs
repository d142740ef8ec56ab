//! `JSGP` parameter checkpoints.
//!
//! ```text
//! "JSGP" | version u8 | layer count u32 | encoder layer count u32
//! per layer: rows u32 | cols u32 | rows·cols f64 (row-major) | rows f64 bias
//! ```
//! All integers and floats little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::mlp::{Dense, MlpParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const JSGP_MAGIC: [u8; 4] = *b"JSGP";
const VERSION: u8 = 1;
const MAX_LAYER_VALUES: usize = 1 << 28;

pub fn write_checkpoint<W: Write>(p: &MlpParams, mut w: W) -> std::io::Result<()> {
    w.write_all(&JSGP_MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&((p.encoder.len() + p.decoder.len()) as u32).to_le_bytes())?;
    w.write_all(&(p.encoder.len() as u32).to_le_bytes())?;
    for layer in p.layers() {
        w.write_all(&(layer.outputs() as u32).to_le_bytes())?;
        w.write_all(&(layer.inputs() as u32).to_le_bytes())?;
        for v in layer.weight.as_slice().iter().chain(&layer.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(read_exact(r)?) as usize)
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| Ok(f64::from_le_bytes(read_exact(r)?))).collect()
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<MlpParams> {
    let magic: [u8; 4] = read_exact(&mut r)?;
    if magic != JSGP_MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
    }
    let [version] = read_exact::<_, 1>(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let total = read_u32(&mut r)?;
    let n_enc = read_u32(&mut r)?;
    if n_enc == 0 || n_enc >= total {
        return Err(Error::Checkpoint(format!("{n_enc} encoder layers out of {total}")));
    }
    let mut layers = Vec::with_capacity(total.min(64));
    for _ in 0..total {
        let rows = read_u32(&mut r)?;
        let cols = read_u32(&mut r)?;
        let count = rows.checked_mul(cols).filter(|&c| c <= MAX_LAYER_VALUES);
        let Some(count) = count else {
            return Err(Error::Checkpoint(format!("implausible layer shape {rows}x{cols}")));
        };
        let weight = Matrix::from_vec(rows, cols, read_f64s(&mut r, count)?)?;
        let bias = read_f64s(&mut r, rows)?;
        layers.push(Dense::new(weight, bias).map_err(|e| Error::Checkpoint(e.to_string()))?);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    let decoder = layers.split_off(n_enc);
    MlpParams::new(layers, decoder).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_checkpoint(p: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(p, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpParams> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes(p: &MlpParams) -> Vec<u8> {
        let mut out = Vec::new();
        write_checkpoint(p, &mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = MlpParams::reducer(96, 4).unwrap();
        let b = bytes(&p);
        let expected_len = 13 + p.layers().map(|l| 8 + 8 * (l.weight.as_slice().len() + l.bias.len())).sum::<usize>();
        assert_eq!(b.len(), expected_len);
        assert_eq!(&b[..4], b"JSGP");
        assert_eq!(read_checkpoint(&b[..]).unwrap(), p);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reducer.jsgp");
        let p = MlpParams::reducer(12, 1).unwrap();
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), p);
    }

    #[test]
    fn rejects_corruption() {
        let b = bytes(&MlpParams::reducer(6, 0).unwrap());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&bad[..]), Err(Error::Checkpoint(_))));
        assert!(read_checkpoint(&b[..b.len() - 1]).is_err());
        let mut long = b.clone();
        long.push(0);
        assert!(read_checkpoint(&long[..]).is_err());
        let mut ver = b;
        ver[4] = 9;
        assert!(read_checkpoint(&ver[..]).is_err());
    }
}
