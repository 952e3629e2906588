//! PLY reader and writer (ASCII and binary little-endian, format 1.0).
//!
//! Only `vertex` positions and `face` index lists are kept. Other
//! properties and elements are skipped with a warning.

use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::Point3;
use thiserror::Error;

use crate::pointcloud::{PointCloud, TriangleMesh};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("not a PLY file (missing 'ply' magic line)")]
    NotPly,
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PLY format: {0}")]
    UnsupportedFormat(String),
    #[error("unsupported PLY element or property type: {0}")]
    UnsupportedType(String),
    #[error("truncated PLY payload while reading {0}")]
    Truncated(String),
    #[error("invalid PLY data: {0}")]
    InvalidValue(String),
    #[error("PLY I/O: {0}")]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, PlyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Contents of a PLY file: a mesh when faces are present, otherwise a cloud.
#[derive(Debug, Clone, PartialEq)]
pub enum PlyData {
    Cloud(PointCloud),
    Mesh(TriangleMesh),
}

impl PlyData {
    pub fn cloud(&self) -> &PointCloud {
        match self {
            PlyData::Cloud(c) => c,
            PlyData::Mesh(m) => m.cloud(),
        }
    }

    pub fn into_cloud(self) -> PointCloud {
        match self {
            PlyData::Cloud(c) => c,
            PlyData::Mesh(m) => m.into_parts().0,
        }
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        match self {
            PlyData::Cloud(_) => &[],
            PlyData::Mesh(m) => m.triangles(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
            other => return Err(PlyError::UnsupportedType(other.to_string())),
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

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if !bytes.starts_with(b"ply\n") && !bytes.starts_with(b"ply\r\n") {
        return Err(PlyError::NotPly);
    }
    let mut offset = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut first = true;
    loop {
        let rest = &bytes[offset..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| PlyError::MalformedHeader("missing end_header".into()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| PlyError::MalformedHeader("header is not valid text".into()))?
            .trim_end_matches('\r');
        offset += nl + 1;
        if first {
            first = false;
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, version] => {
                if *version != "1.0" {
                    return Err(PlyError::UnsupportedFormat(format!("version {version}")));
                }
                format = Some(match *fmt {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(PlyError::UnsupportedFormat(other.to_string())),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| PlyError::MalformedHeader(format!("bad element count in {line:?}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| PlyError::MalformedHeader("property before element".into()))?;
                let count = Scalar::parse(count)?;
                if !count.is_integer() {
                    return Err(PlyError::UnsupportedType(format!("list count type for {name}")));
                }
                element.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::List {
                        count,
                        item: Scalar::parse(item)?,
                    },
                });
            }
            ["property", ty, name] => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| PlyError::MalformedHeader("property before element".into()))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::Scalar(Scalar::parse(ty)?),
                });
            }
            ["end_header"] => break,
            _ => return Err(PlyError::MalformedHeader(format!("unrecognized line {line:?}"))),
        }
    }
    let format = format.ok_or_else(|| PlyError::MalformedHeader("missing format line".into()))?;
    Ok(Header {
        format,
        elements,
        body_offset: offset,
    })
}

/// Sequential value source over the payload.
trait ValueReader {
    fn read(&mut self, ty: Scalar, what: &str) -> Result<f64>;
}

struct BinaryReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl ValueReader for BinaryReader<'_> {
    fn read(&mut self, ty: Scalar, what: &str) -> Result<f64> {
        let size = ty.size();
        let bytes = self
            .data
            .get(self.pos..self.pos + size)
            .ok_or_else(|| PlyError::Truncated(what.to_string()))?;
        self.pos += size;
        Ok(match ty {
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(bytes.try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(bytes.try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(bytes.try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(bytes.try_into().unwrap()),
        })
    }
}

struct AsciiReader<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl ValueReader for AsciiReader<'_> {
    fn read(&mut self, ty: Scalar, what: &str) -> Result<f64> {
        let tok = self
            .tokens
            .next()
            .ok_or_else(|| PlyError::Truncated(what.to_string()))?;
        let v: f64 = tok
            .parse()
            .map_err(|_| PlyError::InvalidValue(format!("{tok:?} in {what}")))?;
        if ty.is_integer() && v.fract() != 0.0 {
            return Err(PlyError::InvalidValue(format!("{tok:?} is not an integer in {what}")));
        }
        Ok(v)
    }
}

pub fn read_ply_bytes(bytes: &[u8]) -> Result<PlyData> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_offset..];
    match header.format {
        PlyFormat::BinaryLittleEndian => {
            let mut reader = BinaryReader { data: body, pos: 0 };
            read_body(&header, &mut reader)
        }
        PlyFormat::Ascii => {
            let text =
                std::str::from_utf8(body).map_err(|_| PlyError::InvalidValue("ASCII payload is not text".into()))?;
            let mut reader = AsciiReader {
                tokens: text.split_ascii_whitespace(),
            };
            read_body(&header, &mut reader)
        }
    }
}

fn read_body(header: &Header, reader: &mut dyn ValueReader) -> Result<PlyData> {
    let mut points: Option<Vec<Point3<f64>>> = None;
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut saw_faces = false;

    for element in &header.elements {
        match element.name.as_str() {
            "vertex" => {
                let slot = |axis: &str| {
                    element
                        .properties
                        .iter()
                        .position(|p| p.name == axis && matches!(p.kind, PropertyKind::Scalar(_)))
                        .ok_or_else(|| PlyError::MalformedHeader(format!("vertex element lacks scalar '{axis}'")))
                };
                let (ix, iy, iz) = (slot("x")?, slot("y")?, slot("z")?);
                for p in &element.properties {
                    if !["x", "y", "z"].contains(&p.name.as_str()) {
                        warn!("skipping unknown vertex property '{}'", p.name);
                    }
                }
                let mut pts = Vec::with_capacity(element.count);
                let mut row = vec![0.0; element.properties.len()];
                for v in 0..element.count {
                    for (k, prop) in element.properties.iter().enumerate() {
                        row[k] = read_property(reader, prop, &format!("vertex {v}"))?.unwrap_or(0.0);
                    }
                    pts.push(Point3::new(row[ix], row[iy], row[iz]));
                }
                points = Some(pts);
            }
            "face" => {
                saw_faces = true;
                let list_slot = element
                    .properties
                    .iter()
                    .position(|p| {
                        (p.name == "vertex_indices" || p.name == "vertex_index")
                            && matches!(p.kind, PropertyKind::List { .. })
                    })
                    .ok_or_else(|| PlyError::MalformedHeader("face element lacks vertex_indices list".into()))?;
                for (k, p) in element.properties.iter().enumerate() {
                    if k != list_slot {
                        warn!("skipping unknown face property '{}'", p.name);
                    }
                }
                let mut skipped = 0usize;
                for f in 0..element.count {
                    let what = format!("face {f}");
                    for (k, prop) in element.properties.iter().enumerate() {
                        if k != list_slot {
                            read_property(reader, prop, &what)?;
                            continue;
                        }
                        let PropertyKind::List { count, item } = prop.kind else {
                            unreachable!()
                        };
                        let n = reader.read(count, &what)?;
                        if n < 0.0 {
                            return Err(PlyError::InvalidValue(format!("negative list length in {what}")));
                        }
                        let mut idx = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            let v = reader.read(item, &what)?;
                            if v < 0.0 || v.fract() != 0.0 {
                                return Err(PlyError::InvalidValue(format!("bad vertex index {v} in {what}")));
                            }
                            idx.push(v as usize);
                        }
                        if idx.len() < 3 {
                            skipped += 1;
                            continue;
                        }
                        // fan triangulation for polygons
                        for j in 1..idx.len() - 1 {
                            let tri = [idx[0], idx[j], idx[j + 1]];
                            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                                skipped += 1;
                            } else {
                                triangles.push(tri);
                            }
                        }
                    }
                }
                if skipped > 0 {
                    warn!("skipped {skipped} degenerate faces");
                }
            }
            other => {
                warn!("skipping unknown element '{other}'");
                for i in 0..element.count {
                    for prop in &element.properties {
                        read_property(reader, prop, &format!("{other} {i}"))?;
                    }
                }
            }
        }
    }

    let points = points.ok_or_else(|| PlyError::MalformedHeader("no vertex element".into()))?;
    let n = points.len();
    if let Some(bad) = triangles.iter().flatten().find(|&&i| i >= n) {
        return Err(PlyError::InvalidValue(format!(
            "face index {bad} out of range (n = {n})"
        )));
    }
    let cloud = PointCloud::new(points).map_err(|e| PlyError::InvalidValue(e.to_string()))?;
    if saw_faces && !triangles.is_empty() {
        let mesh = TriangleMesh::new(cloud, triangles).map_err(|e| PlyError::InvalidValue(e.to_string()))?;
        Ok(PlyData::Mesh(mesh))
    } else {
        Ok(PlyData::Cloud(cloud))
    }
}

/// Reads one property; scalars return their value, lists are consumed.
fn read_property(reader: &mut dyn ValueReader, prop: &Property, what: &str) -> Result<Option<f64>> {
    match prop.kind {
        PropertyKind::Scalar(ty) => reader.read(ty, what).map(Some),
        PropertyKind::List { count, item } => {
            let n = reader.read(count, what)?;
            for _ in 0..n.max(0.0) as usize {
                reader.read(item, what)?;
            }
            Ok(None)
        }
    }
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PlyData> {
    read_ply_bytes(&fs::read(path)?)
}

/// Serializes positions as `double` and faces as `uchar`/`int` lists.
pub fn write_ply<W: Write>(mut out: W, cloud: &PointCloud, triangles: &[[usize; 3]], format: PlyFormat) -> Result<()> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        out,
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        cloud.len()
    )?;
    if !triangles.is_empty() {
        write!(
            out,
            "element face {}\nproperty list uchar int vertex_indices\n",
            triangles.len()
        )?;
    }
    out.write_all(b"end_header\n")?;
    match format {
        PlyFormat::Ascii => {
            for p in cloud.points() {
                writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z)?;
            }
            for t in triangles {
                writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let mut buf = Vec::with_capacity(cloud.len() * 24 + triangles.len() * 13);
            for p in cloud.points() {
                for c in [p.x, p.y, p.z] {
                    buf.extend_from_slice(&c.to_le_bytes());
                }
            }
            for t in triangles {
                buf.push(3);
                for &i in t {
                    let i = i32::try_from(i)
                        .map_err(|_| PlyError::InvalidValue(format!("vertex index {i} exceeds int range")))?;
                    buf.extend_from_slice(&i.to_le_bytes());
                }
            }
            out.write_all(&buf)?;
        }
    }
    Ok(())
}

pub fn save_ply(data: &PlyData, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
    let mut bytes = Vec::new();
    write_ply(&mut bytes, data.cloud(), data.triangles(), format)?;
    crate::io::write_atomic(path.as_ref(), &bytes)?;
    Ok(())
}
