use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::instances::{LabeledPoint, LabeledPointCloud};
use crate::vocabulary::ClassId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
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
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
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

    fn read_le(self, b: &[u8]) -> f64 {
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

#[derive(Clone, Debug, PartialEq)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let err = |m: String| Error::parse(path, m);
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut offset = 0;
    let mut line_no = 0;
    loop {
        let rest = &bytes[offset..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err("unterminated PLY header".into()))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| err(format!("line {}: header is not text", line_no + 1)))?
            .trim_end_matches('\r')
            .trim();
        offset += end + 1;
        line_no += 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(err("missing `ply` magic".into()));
            }
            continue;
        }
        match tokens.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(err(format!("unsupported PLY format `{other}`"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| err(format!("line {line_no}: bad element count `{count}`")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(format!("line {line_no}: property before element")))?;
                let ty = |t: &str| Scalar::parse(t).ok_or_else(|| err(format!("line {line_no}: unknown type `{t}`")));
                el.properties.push(Property::List {
                    name: name.to_string(),
                    count: ty(count)?,
                    item: ty(item)?,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(format!("line {line_no}: property before element")))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty).ok_or_else(|| err(format!("line {line_no}: unknown type `{ty}`")))?,
                });
            }
            ["end_header"] => break,
            _ => return Err(err(format!("line {line_no}: unexpected header line `{line}`"))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| err("missing format line".into()))?,
        elements,
        body_offset: offset,
    })
}

/// Reads element rows as f64 values, list properties skipped.
struct BodyReader<'a> {
    format: PlyFormat,
    bytes: &'a [u8],
    pos: usize,
    tokens: std::str::SplitAsciiWhitespace<'a>,
    path: &'a Path,
}

impl<'a> BodyReader<'a> {
    fn new(format: PlyFormat, bytes: &'a [u8], path: &'a Path) -> Result<Self> {
        let text = match format {
            PlyFormat::Ascii => std::str::from_utf8(bytes).map_err(|_| Error::parse(path, "ASCII body is not text"))?,
            PlyFormat::BinaryLittleEndian => "",
        };
        Ok(BodyReader {
            format,
            bytes,
            pos: 0,
            tokens: text.split_ascii_whitespace(),
            path,
        })
    }

    fn value(&mut self, ty: Scalar) -> Result<f64> {
        match self.format {
            PlyFormat::Ascii => {
                let tok = self
                    .tokens
                    .next()
                    .ok_or_else(|| Error::parse(self.path, "unexpected end of PLY data"))?;
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(self.path, format!("bad number `{tok}` in PLY data")))
            }
            PlyFormat::BinaryLittleEndian => {
                let n = ty.size();
                let b = self
                    .bytes
                    .get(self.pos..self.pos + n)
                    .ok_or_else(|| Error::parse(self.path, "unexpected end of PLY data"))?;
                self.pos += n;
                Ok(ty.read_le(b))
            }
        }
    }

    fn row(&mut self, props: &[Property], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for p in props {
            match p {
                Property::Scalar { ty, .. } => out.push(self.value(*ty)?),
                Property::List { count, item, .. } => {
                    let n = self.value(*count)?;
                    if !(n >= 0.0 && n.fract() == 0.0) {
                        return Err(Error::parse(self.path, format!("bad list length {n}")));
                    }
                    for _ in 0..n as usize {
                        self.value(*item)?;
                    }
                    out.push(f64::NAN);
                }
            }
        }
        Ok(())
    }
}

fn scalar_index(el: &Element, name: &str, path: &Path) -> Result<Option<(usize, Scalar)>> {
    match el.properties.iter().position(|p| p.name() == name) {
        None => Ok(None),
        Some(i) => match &el.properties[i] {
            Property::Scalar { ty, .. } => Ok(Some((i, *ty))),
            Property::List { .. } => Err(Error::parse(path, format!("property `{name}` must be a scalar"))),
        },
    }
}

/// Parses the `vertex` element: `x`, `y`, `z` and an integer `class_id`
/// are required, an integer `instance_id` is optional, other properties
/// and elements are ignored.
pub fn parse_labeled_cloud(bytes: &[u8], path: &Path) -> Result<LabeledPointCloud> {
    let header = parse_header(bytes, path)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::parse(path, "missing `vertex` element"))?;
    let vertex = &header.elements[vertex_pos];
    let required = |name: &str| -> Result<(usize, Scalar)> {
        scalar_index(vertex, name, path)?
            .ok_or_else(|| Error::parse(path, format!("missing required vertex property `{name}`")))
    };
    let (x, y, z) = (required("x")?, required("y")?, required("z")?);
    let class = required("class_id")?;
    let instance = scalar_index(vertex, "instance_id", path)?;
    for (name, (_, ty)) in [("class_id", class)].into_iter().chain(instance.map(|i| ("instance_id", i))) {
        if !ty.is_integer() {
            return Err(Error::parse(path, format!("property `{name}` must have an integer type")));
        }
    }

    let mut reader = BodyReader::new(header.format, &bytes[header.body_offset..], path)?;
    let mut row = Vec::new();
    for el in &header.elements[..vertex_pos] {
        for _ in 0..el.count {
            reader.row(&el.properties, &mut row)?;
        }
    }
    let mut points = Vec::with_capacity(vertex.count);
    for i in 0..vertex.count {
        reader.row(&vertex.properties, &mut row)?;
        let class_id = row[class.0];
        if !(0.0..=u16::MAX as f64).contains(&class_id) {
            return Err(Error::parse(path, format!("vertex {i}: class_id {class_id} out of range")));
        }
        let instance_id = match instance {
            Some((k, _)) if row[k] >= 0.0 && row[k] <= u32::MAX as f64 => Some(row[k] as u32),
            Some((k, _)) => return Err(Error::parse(path, format!("vertex {i}: instance_id {} out of range", row[k]))),
            None => None,
        };
        points.push(LabeledPoint {
            position: Point::new(row[x.0], row[y.0], row[z.0]),
            class_id: ClassId(class_id as u16),
            instance_id,
        });
    }
    Ok(LabeledPointCloud::new(points))
}

pub fn load_labeled_cloud(path: &Path) -> Result<LabeledPointCloud> {
    parse_labeled_cloud(&read_bytes(path)?, path)
}

/// Writes doubles for coordinates, `ushort` class ids and, when every point
/// carries one, `ushort` instance ids.
pub fn save_labeled_cloud(cloud: &LabeledPointCloud, path: &Path, format: PlyFormat) -> Result<()> {
    let with_ids = !cloud.points.is_empty() && cloud.points.iter().all(|p| p.instance_id.is_some());
    if !with_ids && cloud.points.iter().any(|p| p.instance_id.is_some()) {
        return Err(Error::parse(path, "either all or no points must carry an instance id"));
    }
    let ids: Vec<u16> = if with_ids {
        cloud
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let id = p.instance_id.expect("checked");
                u16::try_from(id).map_err(|_| Error::parse(path, format!("point {i}: instance id {id} exceeds 65535")))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let format_name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {format_name} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty ushort class_id\n",
        cloud.len()
    )
    .into_bytes();
    if with_ids {
        out.extend_from_slice(b"property ushort instance_id\n");
    }
    out.extend_from_slice(b"end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let pos = p.position;
        match format {
            PlyFormat::Ascii => {
                let mut line = format!("{} {} {} {}", pos.x, pos.y, pos.z, p.class_id.0);
                if with_ids {
                    line.push_str(&format!(" {}", ids[i]));
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
            PlyFormat::BinaryLittleEndian => {
                for v in [pos.x, pos.y, pos.z] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&p.class_id.0.to_le_bytes());
                if with_ids {
                    out.extend_from_slice(&ids[i].to_le_bytes());
                }
            }
        }
    }
    write_bytes(path, &out)
}
