//! PLY reader/writer (ASCII and binary little-endian 1.0).
//!
//! Vertices carry `x y z` (any numeric type, integral values) and either
//! `red green blue` or `Y U V`. Other elements and extra vertex properties are
//! skipped. Big-endian files are rejected.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{infer_bit_depth, ColorMatrix, Coord, PointCloud, Yuv, MAX_BIT_DEPTH};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorSpace {
    /// `uchar red green blue`, converted through the color matrix.
    Rgb,
    /// `double Y U V`, stored verbatim.
    Yuv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ReadOptions {
    /// Overrides the inferred bit depth. Must still cover every coordinate.
    pub bit_depth: Option<u8>,
    pub color_matrix: ColorMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::Ply(format!("unknown property type `{other}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    /// From a `comment bit_depth N` line, as emitted by the writer.
    bit_depth: Option<u8>,
}

/// Where the interesting vertex properties live.
struct VertexLayout {
    xyz: [usize; 3],
    color: Option<(ColorSpace, [usize; 3])>,
}

fn parse_header<R: BufRead>(reader: &mut R) -> Result<Header> {
    let mut line = String::new();
    let mut next_line = |line: &mut String| -> Result<bool> {
        line.clear();
        let n = reader.read_line(line).map_err(|e| Error::Ply(format!("reading header: {e}")))?;
        Ok(n > 0)
    };

    if !next_line(&mut line)? || line.trim_end() != "ply" {
        return Err(Error::Ply("missing `ply` magic line".into()));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut bit_depth = None;
    loop {
        if !next_line(&mut line)? {
            return Err(Error::Ply("header ended without `end_header`".into()));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["end_header"] => break,
            ["comment", "bit_depth", d] => bit_depth = d.parse().ok(),
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, version] => {
                if *version != "1.0" {
                    return Err(Error::Ply(format!("unsupported PLY version {version}")));
                }
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(Error::Ply("binary_big_endian is not supported; convert to little-endian".into()))
                    }
                    other => return Err(Error::Ply(format!("unknown format `{other}`"))),
                });
            }
            ["element", name, count] => {
                let count = count.parse().map_err(|_| Error::Ply(format!("bad element count `{count}`")))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            ["property", "list", count, item, _name] => {
                let el = elements.last_mut().ok_or_else(|| Error::Ply("property before any element".into()))?;
                el.props.push(Property::List { count: Scalar::parse(count)?, item: Scalar::parse(item)? });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| Error::Ply("property before any element".into()))?;
                el.props.push(Property::Scalar { name: name.to_string(), ty: Scalar::parse(ty)? });
            }
            _ => return Err(Error::Ply(format!("malformed header line `{}`", line.trim_end()))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::Ply("missing `format` line".into()))?;
    Ok(Header { encoding, elements, bit_depth })
}

fn vertex_layout(el: &Element) -> Result<VertexLayout> {
    let find = |name: &str| el.props.iter().position(|p| matches!(p, Property::Scalar { name: n, .. } if n == name));
    if el.props.iter().any(|p| matches!(p, Property::List { .. })) {
        return Err(Error::Ply("list properties on vertices are not supported".into()));
    }
    let xyz = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => return Err(Error::Ply("vertex element lacks x, y, z".into())),
    };
    let color = if let (Some(y), Some(u), Some(v)) = (find("Y"), find("U"), find("V")) {
        Some((ColorSpace::Yuv, [y, u, v]))
    } else if let (Some(r), Some(g), Some(b)) = (find("red"), find("green"), find("blue")) {
        Some((ColorSpace::Rgb, [r, g, b]))
    } else {
        let partial = ["Y", "U", "V", "red", "green", "blue"].iter().any(|n| find(n).is_some());
        if partial {
            return Err(Error::Ply("incomplete color property set".into()));
        }
        None
    };
    Ok(VertexLayout { xyz, color })
}

/// Reads a PLY file with default options (inferred bit depth, BT.709).
pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_ply_with(path, &ReadOptions::default())
}

pub fn read_ply_with(path: impl AsRef<Path>, opts: &ReadOptions) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply_from(BufReader::new(file), opts)
}

pub(crate) fn read_ply_from<R: BufRead>(mut reader: R, opts: &ReadOptions) -> Result<PointCloud> {
    let header = parse_header(&mut reader)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::Ply("no vertex element".into()))?;
    let layout = vertex_layout(&header.elements[vertex_pos])?;

    let mut body = match header.encoding {
        PlyEncoding::Ascii => Body::Ascii(AsciiTokens::new(reader)),
        PlyEncoding::BinaryLittleEndian => Body::Binary(reader),
    };

    for el in &header.elements[..vertex_pos] {
        for _ in 0..el.count {
            body.skip_row(el)?;
        }
    }

    let vertex = &header.elements[vertex_pos];
    let mut coords = Vec::with_capacity(vertex.count);
    let mut attrs = Vec::with_capacity(if layout.color.is_some() { vertex.count } else { 0 });
    let mut row = vec![0.0; vertex.props.len()];
    for i in 0..vertex.count {
        body.read_row(vertex, &mut row).map_err(|e| Error::Ply(format!("vertex {i}: {e}")))?;
        let mut c: Coord = [0; 3];
        for (k, &col) in layout.xyz.iter().enumerate() {
            c[k] = to_coord(row[col]).map_err(|e| Error::Ply(format!("vertex {i}: {e}")))?;
        }
        coords.push(c);
        if let Some((space, cols)) = layout.color {
            let raw: Yuv = cols.map(|col| row[col]);
            attrs.push(match space {
                ColorSpace::Yuv => raw,
                ColorSpace::Rgb => opts.color_matrix.rgb_to_yuv(raw),
            });
        }
    }

    let needed = infer_bit_depth(&coords)?;
    let bit_depth = match (opts.bit_depth, header.bit_depth) {
        (Some(d), _) => {
            if d < needed || d > MAX_BIT_DEPTH {
                return Err(Error::InvalidCloud(format!(
                    "bit depth override {d} cannot hold coordinates needing {needed} bits"
                )));
            }
            d
        }
        (None, Some(d)) if (needed..=MAX_BIT_DEPTH).contains(&d) => d,
        (None, _) => needed,
    };
    PointCloud::voxelized(coords, attrs, Some(bit_depth))
}

fn to_coord(v: f64) -> std::result::Result<u32, String> {
    if !v.is_finite() || v < 0.0 {
        return Err(format!("coordinate {v} is not a non-negative number"));
    }
    let r = v.round();
    if (v - r).abs() > 1e-6 {
        return Err(format!("coordinate {v} is not voxelized (non-integer)"));
    }
    if r > ((1u32 << MAX_BIT_DEPTH) - 1) as f64 {
        return Err(format!("coordinate {v} overflows {MAX_BIT_DEPTH} bits"));
    }
    Ok(r as u32)
}

enum Body<R> {
    Ascii(AsciiTokens<R>),
    Binary(R),
}

impl<R: BufRead> Body<R> {
    fn read_row(&mut self, el: &Element, out: &mut [f64]) -> std::result::Result<(), String> {
        for (slot, prop) in out.iter_mut().zip(&el.props) {
            match prop {
                Property::Scalar { ty, .. } => *slot = self.scalar(*ty)?,
                Property::List { .. } => unreachable!("vertex lists rejected by layout"),
            }
        }
        Ok(())
    }

    fn skip_row(&mut self, el: &Element) -> Result<()> {
        for prop in &el.props {
            let r = match prop {
                Property::Scalar { ty, .. } => self.scalar(*ty).map(drop),
                Property::List { count, item } => {
                    self.scalar(*count).and_then(|n| (0..n as usize).try_for_each(|_| self.scalar(*item).map(drop)))
                }
            };
            r.map_err(|e| Error::Ply(format!("element `{}`: {e}", el.name)))?;
        }
        Ok(())
    }

    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String> {
        match self {
            Body::Ascii(tokens) => {
                let tok = tokens.next()?.ok_or("unexpected end of data")?;
                tok.parse::<f64>().map_err(|_| format!("bad number `{tok}`"))
            }
            Body::Binary(r) => {
                let mut buf = [0u8; 8];
                let n = ty.size();
                r.read_exact(&mut buf[..n]).map_err(|_| "unexpected end of data".to_string())?;
                Ok(ty.decode_le(&buf[..n]))
            }
        }
    }
}

struct AsciiTokens<R> {
    reader: R,
    line: String,
    pos: usize,
}

impl<R: BufRead> AsciiTokens<R> {
    fn new(reader: R) -> Self {
        Self { reader, line: String::new(), pos: 0 }
    }

    fn next(&mut self) -> std::result::Result<Option<String>, String> {
        loop {
            let rest = &self.line[self.pos..];
            let trimmed = rest.trim_start();
            if !trimmed.is_empty() {
                let start = self.pos + (rest.len() - trimmed.len());
                let len = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
                self.pos = start + len;
                return Ok(Some(self.line[start..start + len].to_string()));
            }
            self.line.clear();
            self.pos = 0;
            let n = self.reader.read_line(&mut self.line).map_err(|e| e.to_string())?;
            if n == 0 {
                return Ok(None);
            }
        }
    }
}

/// Writes binary little-endian PLY.
pub fn write_ply(pc: &PointCloud, path: impl AsRef<Path>, color_space: ColorSpace) -> Result<()> {
    write_ply_with(pc, path, color_space, PlyEncoding::BinaryLittleEndian, &ColorMatrix::default())
}

/// Geometry-only clouds are written without color properties regardless of
/// `color_space`.
pub fn write_ply_with(
    pc: &PointCloud,
    path: impl AsRef<Path>,
    color_space: ColorSpace,
    encoding: PlyEncoding,
    matrix: &ColorMatrix,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_ply_to(&mut w, pc, color_space, encoding, matrix).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_ply_to<W: Write>(
    w: &mut W,
    pc: &PointCloud,
    color_space: ColorSpace,
    encoding: PlyEncoding,
    matrix: &ColorMatrix,
) -> std::io::Result<()> {
    let colored = !pc.attrs().is_empty();
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply\nformat {format} 1.0")?;
    writeln!(w, "comment bit_depth {}", pc.bit_depth())?;
    writeln!(w, "element vertex {}", pc.len())?;
    writeln!(w, "property int x\nproperty int y\nproperty int z")?;
    if colored {
        match color_space {
            ColorSpace::Rgb => writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue")?,
            ColorSpace::Yuv => writeln!(w, "property double Y\nproperty double U\nproperty double V")?,
        }
    }
    writeln!(w, "end_header")?;

    for (i, c) in pc.coords().iter().enumerate() {
        let rgb = match (colored, color_space) {
            (true, ColorSpace::Rgb) => Some(matrix.yuv_to_rgb(pc.attrs()[i]).map(|v| v.round() as u8)),
            _ => None,
        };
        match encoding {
            PlyEncoding::Ascii => {
                write!(w, "{} {} {}", c[0], c[1], c[2])?;
                if let Some(rgb) = rgb {
                    write!(w, " {} {} {}", rgb[0], rgb[1], rgb[2])?;
                } else if colored {
                    let a = pc.attrs()[i];
                    write!(w, " {} {} {}", a[0], a[1], a[2])?;
                }
                writeln!(w)?;
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in c {
                    w.write_all(&(*v as i32).to_le_bytes())?;
                }
                if let Some(rgb) = rgb {
                    w.write_all(&rgb)?;
                } else if colored {
                    for v in pc.attrs()[i] {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
    }
    Ok(())
}
