//! Binary little-endian PLY reader/writer for trained Gaussian scenes.
//!
//! Stored values are pre-activation: opacity is a logit, scales are natural
//! logs and the quaternion (w, x, y, z) is unnormalized.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::scene::{Gaussian3D, GaussianSet, SH_COEFFS};

/// Properties every vertex must carry, in canonical write order.
pub fn expected_properties() -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..45).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Property {
    name: String,
    ty: ScalarType,
    offset: usize,
}

struct Header {
    vertex_count: usize,
    properties: Vec<Property>,
    stride: usize,
}

fn header_err(line: usize, message: impl Into<String>) -> Error {
    Error::PlyHeader {
        line,
        message: message.into(),
    }
}

fn parse_header(reader: &mut impl BufRead) -> Result<Header> {
    let mut line_no = 0;
    let mut next_line = |reader: &mut dyn BufRead| -> Result<(usize, String)> {
        let mut buf = Vec::new();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io("<ply header>", e))?;
        line_no += 1;
        if n == 0 {
            return Err(header_err(
                line_no,
                "unexpected end of file before end_header",
            ));
        }
        let text =
            String::from_utf8(buf).map_err(|_| header_err(line_no, "header is not valid UTF-8"))?;
        Ok((line_no, text.trim_end_matches(['\n', '\r']).to_string()))
    };

    let (n, magic) = next_line(reader)?;
    if magic.trim() != "ply" {
        return Err(header_err(
            n,
            format!("expected `ply` magic, found `{magic}`"),
        ));
    }

    let mut vertex: Option<(usize, Vec<Property>, usize)> = None;
    let mut in_vertex = false;
    let mut seen_format = false;
    loop {
        let (n, line) = next_line(reader)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, ver] => {
                if *fmt != "binary_little_endian" {
                    return Err(header_err(
                        n,
                        format!("unsupported format `{fmt}`; only binary_little_endian"),
                    ));
                }
                if *ver != "1.0" {
                    return Err(header_err(n, format!("unsupported version `{ver}`")));
                }
                seen_format = true;
            }
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| header_err(n, format!("invalid element count `{count}`")))?;
                if *name == "vertex" {
                    if vertex.is_some() {
                        return Err(header_err(n, "duplicate vertex element"));
                    }
                    vertex = Some((count, Vec::new(), 0));
                    in_vertex = true;
                } else {
                    if vertex.is_none() && count > 0 {
                        return Err(header_err(
                            n,
                            format!("element `{name}` precedes vertex data"),
                        ));
                    }
                    in_vertex = false;
                }
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(header_err(
                        n,
                        "list properties are not supported on vertices",
                    ));
                }
            }
            ["property", ty, name] => {
                if in_vertex {
                    let ty = ScalarType::parse(ty)
                        .ok_or_else(|| header_err(n, format!("unknown property type `{ty}`")))?;
                    let (_, props, stride) = vertex.as_mut().unwrap();
                    props.push(Property {
                        name: name.to_string(),
                        ty,
                        offset: *stride,
                    });
                    *stride += ty.size();
                }
            }
            ["end_header"] => break,
            _ => return Err(header_err(n, format!("unrecognized header line `{line}`"))),
        }
    }
    if !seen_format {
        return Err(header_err(line_no, "missing format line"));
    }
    let (vertex_count, properties, stride) =
        vertex.ok_or_else(|| header_err(line_no, "no vertex element"))?;
    Ok(Header {
        vertex_count,
        properties,
        stride,
    })
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Reads a scene from any reader positioned at the start of a PLY file.
pub fn read_ply(reader: impl Read) -> Result<GaussianSet> {
    let mut reader = BufReader::new(reader);
    let header = parse_header(&mut reader)?;

    let expected = expected_properties();
    let missing: Vec<String> = expected
        .iter()
        .filter(|name| !header.properties.iter().any(|p| &p.name == *name))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::PlySchema { missing, expected });
    }
    let slots: Vec<&Property> = expected
        .iter()
        .map(|name| header.properties.iter().find(|p| &p.name == name).unwrap())
        .collect();

    let mut record = vec![0u8; header.stride];
    let mut values = vec![0.0f64; slots.len()];
    let mut gaussians = Vec::with_capacity(header.vertex_count);
    for index in 0..header.vertex_count {
        reader
            .read_exact(&mut record)
            .map_err(|_| Error::PlyTruncated {
                expected: header.vertex_count,
                read: index,
            })?;
        for (v, p) in values.iter_mut().zip(&slots) {
            *v = p.ty.read(&record[p.offset..]);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    index,
                    property: p.name.clone(),
                });
            }
        }
        let mut sh = [0.0; SH_COEFFS];
        sh.copy_from_slice(&values[6..54]);
        let q = Quaternion::new(values[58], values[59], values[60], values[61]);
        if q.norm() == 0.0 {
            return Err(Error::NonFinite {
                index,
                property: "rot (zero quaternion)".into(),
            });
        }
        gaussians.push(Gaussian3D {
            position: Vector3::new(values[0], values[1], values[2]),
            scale: Vector3::new(values[55].exp(), values[56].exp(), values[57].exp()),
            rotation: UnitQuaternion::from_quaternion(q),
            opacity: logistic(values[54]),
            sh,
        });
    }
    Ok(GaussianSet {
        gaussians,
        sh_degree: 3,
    })
}

pub fn load_ply(path: &Path) -> Result<GaussianSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply(file)
}

/// Writes pre-activation values; opacity is kept strictly inside (0, 1) so
/// the logit stays finite.
pub fn write_ply(set: &GaussianSet, mut w: impl Write) -> std::io::Result<()> {
    let names = expected_properties();
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", set.len()));
    for name in &names {
        header.push_str(&format!("property float {name}\n"));
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;

    let mut buf = Vec::with_capacity(set.len() * names.len() * 4);
    for g in &set.gaussians {
        let o = g.opacity.clamp(1e-7, 1.0 - 1e-7);
        let q = g.rotation.quaternion();
        let mut vals = Vec::with_capacity(names.len());
        vals.extend([g.position.x, g.position.y, g.position.z, 0.0, 0.0, 0.0]);
        vals.extend_from_slice(&g.sh);
        vals.push((o / (1.0 - o)).ln());
        vals.extend([g.scale.x.ln(), g.scale.y.ln(), g.scale.z.ln()]);
        vals.extend([q.w, q.i, q.j, q.k]);
        for v in vals {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)
}

pub fn save_ply(set: &GaussianSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_ply(set, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
