//! PCD v0.7 reader/writer (ASCII and little-endian binary).
//!
//! Supported fields: x y z, optional rgb (packed float or unsigned int),
//! optional normal_x/normal_y/normal_z. Compressed PCD is rejected.

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::math::Vec3;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
enum FieldType {
    F,
    U,
    I,
}

#[derive(Debug, Clone)]
struct FieldDef {
    name: String,
    size: usize,
    ty: FieldType,
    count: usize,
}

struct Header {
    fields: Vec<FieldDef>,
    width: usize,
    height: usize,
    points: usize,
    data: String,
    header_len: usize,
    header_lines: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let mut fields: Vec<FieldDef> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut types: Vec<FieldType> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut width = None;
    let mut height = None;
    let mut points = None;
    let mut data = None;

    let mut pos = 0usize;
    let mut line_no = 0usize;
    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i)
            .unwrap_or(bytes.len());
        let line = std::str::from_utf8(&bytes[pos..end]).map_err(|_| {
            Error::parse(path, format!("line {}", line_no + 1), "non-UTF8 header line")
        })?;
        line_no += 1;
        let next = end + 1;
        let line = line.trim_end_matches('\r');
        let mut tok = line.split_whitespace();
        let key = match tok.next() {
            Some(k) => k,
            None => {
                pos = next;
                continue;
            }
        };
        match key {
            "#" | "VERSION" => {}
            "FIELDS" => {
                for name in tok {
                    fields.push(FieldDef {
                        name: name.to_string(),
                        size: 4,
                        ty: FieldType::F,
                        count: 1,
                    });
                }
            }
            "SIZE" => {
                for t in tok {
                    sizes.push(t.parse().map_err(|_| {
                        Error::parse(path, format!("line {line_no}"), "bad SIZE entry")
                    })?);
                }
            }
            "TYPE" => {
                for t in tok {
                    types.push(match t {
                        "F" => FieldType::F,
                        "U" => FieldType::U,
                        "I" => FieldType::I,
                        other => {
                            return Err(Error::parse(
                                path,
                                format!("line {line_no}"),
                                format!("unsupported field type {other}"),
                            ))
                        }
                    });
                }
            }
            "COUNT" => {
                for t in tok {
                    counts.push(t.parse().map_err(|_| {
                        Error::parse(path, format!("line {line_no}"), "bad COUNT entry")
                    })?);
                }
            }
            "WIDTH" => {
                width = Some(tok.next().unwrap_or("").parse().map_err(|_| {
                    Error::parse(path, format!("line {line_no}"), "bad WIDTH")
                })?)
            }
            "HEIGHT" => {
                height = Some(tok.next().unwrap_or("").parse().map_err(|_| {
                    Error::parse(path, format!("line {line_no}"), "bad HEIGHT")
                })?)
            }
            "VIEWPOINT" => {}
            "POINTS" => {
                points = Some(tok.next().unwrap_or("").parse().map_err(|_| {
                    Error::parse(path, format!("line {line_no}"), "bad POINTS")
                })?)
            }
            "DATA" => {
                data = Some(tok.next().unwrap_or("").to_string());
                pos = next;
                break;
            }
            other => {
                return Err(Error::parse(
                    path,
                    format!("line {line_no}"),
                    format!("unknown header keyword {other}"),
                ))
            }
        }
        pos = next;
    }

    let data = data.ok_or_else(|| {
        Error::parse(path, format!("line {line_no}"), "missing DATA declaration")
    })?;
    if fields.is_empty() {
        return Err(Error::parse(path, format!("line {line_no}"), "missing FIELDS"));
    }
    if sizes.len() != fields.len() || types.len() != fields.len() {
        return Err(Error::parse(
            path,
            format!("line {line_no}"),
            "SIZE/TYPE length does not match FIELDS",
        ));
    }
    if !counts.is_empty() && counts.len() != fields.len() {
        return Err(Error::parse(
            path,
            format!("line {line_no}"),
            "COUNT length does not match FIELDS",
        ));
    }
    for (i, f) in fields.iter_mut().enumerate() {
        f.size = sizes[i];
        f.ty = types[i];
        f.count = counts.get(i).copied().unwrap_or(1);
        if f.count != 1 {
            return Err(Error::Unsupported {
                path: path.to_path_buf(),
                message: format!("field {} has COUNT {} (only 1 supported)", f.name, f.count),
            });
        }
    }

    let width = width.ok_or_else(|| Error::parse(path, "header", "missing WIDTH"))?;
    let height = height.ok_or_else(|| Error::parse(path, "header", "missing HEIGHT"))?;
    let points = points.unwrap_or(width * height);
    if width * height != points {
        return Err(Error::parse(
            path,
            "header",
            format!("WIDTH {width} x HEIGHT {height} != POINTS {points}"),
        ));
    }

    Ok(Header {
        fields,
        width,
        height,
        points,
        data,
        header_len: pos,
        header_lines: line_no,
    })
}

fn read_scalar_le(ty: FieldType, size: usize, raw: &[u8]) -> Option<f64> {
    match (ty, size) {
        (FieldType::F, 4) => Some(f32::from_le_bytes(raw.try_into().ok()?) as f64),
        (FieldType::F, 8) => Some(f64::from_le_bytes(raw.try_into().ok()?)),
        (FieldType::U, 1) => Some(raw[0] as f64),
        (FieldType::U, 2) => Some(u16::from_le_bytes(raw.try_into().ok()?) as f64),
        (FieldType::U, 4) => Some(u32::from_le_bytes(raw.try_into().ok()?) as f64),
        (FieldType::I, 1) => Some(raw[0] as i8 as f64),
        (FieldType::I, 2) => Some(i16::from_le_bytes(raw.try_into().ok()?) as f64),
        (FieldType::I, 4) => Some(i32::from_le_bytes(raw.try_into().ok()?) as f64),
        _ => None,
    }
}

/// Raw per-field value: numeric plus, for rgb, the packed bit pattern.
#[derive(Clone, Copy)]
struct FieldValue {
    num: f64,
    bits: u32,
}

fn assemble_points(
    path: &Path,
    header: &Header,
    rows: Vec<Vec<FieldValue>>,
) -> Result<PointCloud> {
    let idx = |name: &str| header.fields.iter().position(|f| f.name == name);
    let ix = idx("x").ok_or_else(|| Error::parse(path, "header", "missing field x"))?;
    let iy = idx("y").ok_or_else(|| Error::parse(path, "header", "missing field y"))?;
    let iz = idx("z").ok_or_else(|| Error::parse(path, "header", "missing field z"))?;
    let irgb = idx("rgb").or_else(|| idx("rgba"));
    let inx = idx("normal_x");
    let iny = idx("normal_y");
    let inz = idx("normal_z");

    let mut points = Vec::with_capacity(rows.len());
    for row in rows {
        let x = row[ix].num;
        let y = row[iy].num;
        let z = row[iz].num;
        let mut p = if x.is_finite() && y.is_finite() && z.is_finite() {
            Point3::new(x, y, z)
        } else {
            Point3::invalid()
        };
        if let Some(ir) = irgb {
            let packed = row[ir].bits;
            p.rgb = Some([
                ((packed >> 16) & 0xff) as u8,
                ((packed >> 8) & 0xff) as u8,
                (packed & 0xff) as u8,
            ]);
        }
        if let (Some(a), Some(b), Some(c)) = (inx, iny, inz) {
            let n = Vec3::new(row[a].num, row[b].num, row[c].num);
            if n.is_finite() && n.norm() > 1e-12 {
                // keep already-unit normals untouched so binary round
                // trips are bitwise exact
                p.normal = Some(if (n.norm() - 1.0).abs() <= 1e-9 {
                    n
                } else {
                    n.normalized()
                });
            }
        }
        points.push(p);
    }

    if header.height > 1 {
        PointCloud::organized(points, header.width, header.height)
    } else {
        let dense = points.iter().all(|p: &Point3| p.is_valid());
        Ok(PointCloud {
            points,
            width: header.width,
            height: 1,
            dense,
        })
    }
}

pub fn load_pcd(path: &Path) -> Result<PointCloud> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &bytes)?;

    match header.data.as_str() {
        "ascii" => {
            let body = std::str::from_utf8(&bytes[header.header_len..]).map_err(|_| {
                Error::parse(path, "body", "non-UTF8 ASCII body")
            })?;
            let mut rows = Vec::with_capacity(header.points);
            for (off, line) in body.lines().enumerate() {
                let line_no = header.header_lines + off + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != header.fields.len() {
                    return Err(Error::parse(
                        path,
                        format!("line {line_no}"),
                        format!(
                            "expected {} values, got {}",
                            header.fields.len(),
                            toks.len()
                        ),
                    ));
                }
                let mut row = Vec::with_capacity(toks.len());
                for (f, t) in header.fields.iter().zip(&toks) {
                    let fv = match f.ty {
                        FieldType::F => {
                            let v: f64 = t.parse().map_err(|_| {
                                Error::parse(
                                    path,
                                    format!("line {line_no}"),
                                    format!("bad float value {t:?} for field {}", f.name),
                                )
                            })?;
                            // packed-float rgb: recover bit pattern via f32
                            FieldValue { num: v, bits: (v as f32).to_bits() }
                        }
                        FieldType::U => {
                            let v: u64 = t.parse().map_err(|_| {
                                Error::parse(
                                    path,
                                    format!("line {line_no}"),
                                    format!("bad unsigned value {t:?} for field {}", f.name),
                                )
                            })?;
                            FieldValue { num: v as f64, bits: v as u32 }
                        }
                        FieldType::I => {
                            let v: i64 = t.parse().map_err(|_| {
                                Error::parse(
                                    path,
                                    format!("line {line_no}"),
                                    format!("bad integer value {t:?} for field {}", f.name),
                                )
                            })?;
                            FieldValue { num: v as f64, bits: v as u32 }
                        }
                    };
                    row.push(fv);
                }
                rows.push(row);
            }
            if rows.len() != header.points {
                return Err(Error::parse(
                    path,
                    "body",
                    format!("expected {} points, got {}", header.points, rows.len()),
                ));
            }
            assemble_points(path, &header, rows)
        }
        "binary" => {
            let stride: usize = header.fields.iter().map(|f| f.size).sum();
            let body = &bytes[header.header_len..];
            let need = stride * header.points;
            if body.len() < need {
                return Err(Error::parse(
                    path,
                    format!("byte {}", header.header_len + body.len()),
                    format!("binary body truncated: need {need} bytes, have {}", body.len()),
                ));
            }
            let mut rows = Vec::with_capacity(header.points);
            for i in 0..header.points {
                let rec = &body[i * stride..(i + 1) * stride];
                let mut off = 0usize;
                let mut row = Vec::with_capacity(header.fields.len());
                for f in &header.fields {
                    let raw = &rec[off..off + f.size];
                    let num = read_scalar_le(f.ty, f.size, raw).ok_or_else(|| {
                        Error::Unsupported {
                            path: path.to_path_buf(),
                            message: format!("field {} with size {}", f.name, f.size),
                        }
                    })?;
                    let bits = match f.size {
                        4 => u32::from_le_bytes(raw.try_into().unwrap()),
                        _ => num as u32,
                    };
                    row.push(FieldValue { num, bits });
                    off += f.size;
                }
                rows.push(row);
            }
            assemble_points(path, &header, rows)
        }
        "binary_compressed" => Err(Error::Unsupported {
            path: path.to_path_buf(),
            message: "compressed PCD is not supported".into(),
        }),
        other => Err(Error::parse(
            path,
            "header",
            format!("unknown DATA mode {other}"),
        )),
    }
}

fn pack_rgb(rgb: [u8; 3]) -> u32 {
    ((rgb[0] as u32) << 16) | ((rgb[1] as u32) << 8) | rgb[2] as u32
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        // 9 significant digits
        format!("{v:.8e}")
    }
}

pub fn save_pcd(cloud: &PointCloud, path: &Path, binary: bool) -> Result<()> {
    let with_rgb = cloud.has_rgb();
    let with_normals = cloud.has_normals();

    let mut fields = vec!["x", "y", "z"];
    let mut sizes = vec!["8", "8", "8"];
    let mut types = vec!["F", "F", "F"];
    if with_rgb {
        fields.push("rgb");
        sizes.push("4");
        types.push("U");
    }
    if with_normals {
        fields.extend(["normal_x", "normal_y", "normal_z"]);
        sizes.extend(["8", "8", "8"]);
        types.extend(["F", "F", "F"]);
    }
    let counts = vec!["1"; fields.len()];

    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let hdr = format!(
        "# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\nFIELDS {}\nSIZE {}\nTYPE {}\nCOUNT {}\nWIDTH {}\nHEIGHT {}\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {}\nDATA {}\n",
        fields.join(" "),
        sizes.join(" "),
        types.join(" "),
        counts.join(" "),
        cloud.width,
        cloud.height,
        cloud.len(),
        if binary { "binary" } else { "ascii" },
    );
    w.write_all(hdr.as_bytes()).map_err(|e| Error::io(path, e))?;

    for p in &cloud.points {
        let n = p.normal.unwrap_or(Vec3::new(f64::NAN, f64::NAN, f64::NAN));
        if binary {
            let mut buf = Vec::with_capacity(64);
            buf.extend_from_slice(&p.x.to_le_bytes());
            buf.extend_from_slice(&p.y.to_le_bytes());
            buf.extend_from_slice(&p.z.to_le_bytes());
            if with_rgb {
                buf.extend_from_slice(&pack_rgb(p.rgb.unwrap_or([0, 0, 0])).to_le_bytes());
            }
            if with_normals {
                buf.extend_from_slice(&n.x.to_le_bytes());
                buf.extend_from_slice(&n.y.to_le_bytes());
                buf.extend_from_slice(&n.z.to_le_bytes());
            }
            w.write_all(&buf).map_err(|e| Error::io(path, e))?;
        } else {
            let mut cols = vec![fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z)];
            if with_rgb {
                cols.push(pack_rgb(p.rgb.unwrap_or([0, 0, 0])).to_string());
            }
            if with_normals {
                cols.extend([fmt_f64(n.x), fmt_f64(n.y), fmt_f64(n.z)]);
            }
            writeln!(w, "{}", cols.join(" ")).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
