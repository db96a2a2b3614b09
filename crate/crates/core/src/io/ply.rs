//! ASCII PLY reader/writer for vertex-only clouds (positions, optional
//! 8-bit color, optional normals). Non-vertex elements are skipped.

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::math::Vec3;
use std::io::{BufWriter, Write};
use std::path::Path;

struct ElementDef {
    name: String,
    count: usize,
    properties: Vec<String>,
}

pub fn load_ply(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, magic) = lines
        .next()
        .ok_or_else(|| Error::parse(path, "line 1", "empty file"))?;
    if magic.trim() != "ply" {
        return Err(Error::parse(path, "line 1", "missing 'ply' magic"));
    }

    let mut elements: Vec<ElementDef> = Vec::new();
    let mut header_end_line = 0usize;
    for (i, line) in lines.by_ref() {
        let line_no = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(Error::Unsupported {
                        path: path.to_path_buf(),
                        message: "only ASCII PLY is supported".into(),
                    });
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = toks.get(1).unwrap_or(&"").to_string();
                let count: usize = toks.get(2).unwrap_or(&"").parse().map_err(|_| {
                    Error::parse(path, format!("line {line_no}"), "bad element count")
                })?;
                elements.push(ElementDef { name, count, properties: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| {
                    Error::parse(path, format!("line {line_no}"), "property before element")
                })?;
                if toks.get(1) == Some(&"list") {
                    el.properties.push("__list__".to_string());
                } else {
                    el.properties.push(toks.last().unwrap_or(&"").to_string());
                }
            }
            Some("end_header") => {
                header_end_line = line_no;
                break;
            }
            Some(other) => {
                return Err(Error::parse(
                    path,
                    format!("line {line_no}"),
                    format!("unknown header keyword {other}"),
                ))
            }
        }
    }
    if header_end_line == 0 {
        return Err(Error::parse(path, "header", "missing end_header"));
    }

    let mut points = Vec::new();
    let mut data_lines = lines;
    for el in &elements {
        if el.name == "vertex" {
            let prop_idx = |n: &str| el.properties.iter().position(|p| p == n);
            let ix = prop_idx("x")
                .ok_or_else(|| Error::parse(path, "header", "vertex element lacks x"))?;
            let iy = prop_idx("y")
                .ok_or_else(|| Error::parse(path, "header", "vertex element lacks y"))?;
            let iz = prop_idx("z")
                .ok_or_else(|| Error::parse(path, "header", "vertex element lacks z"))?;
            let ir = prop_idx("red");
            let ig = prop_idx("green");
            let ib = prop_idx("blue");
            let inx = prop_idx("nx");
            let iny = prop_idx("ny");
            let inz = prop_idx("nz");

            for _ in 0..el.count {
                let (i, line) = data_lines.next().ok_or_else(|| {
                    Error::parse(path, "body", "truncated vertex data")
                })?;
                let line_no = i + 1;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() < el.properties.len() {
                    return Err(Error::parse(
                        path,
                        format!("line {line_no}"),
                        format!(
                            "expected {} values, got {}",
                            el.properties.len(),
                            toks.len()
                        ),
                    ));
                }
                let getf = |j: usize| -> Result<f64> {
                    toks[j].parse().map_err(|_| {
                        Error::parse(
                            path,
                            format!("line {line_no}"),
                            format!("bad value {:?}", toks[j]),
                        )
                    })
                };
                let x = getf(ix)?;
                let y = getf(iy)?;
                let z = getf(iz)?;
                let mut p = if x.is_finite() && y.is_finite() && z.is_finite() {
                    Point3::new(x, y, z)
                } else {
                    Point3::invalid()
                };
                if let (Some(r), Some(g), Some(b)) = (ir, ig, ib) {
                    p.rgb = Some([
                        getf(r)? as u8,
                        getf(g)? as u8,
                        getf(b)? as u8,
                    ]);
                }
                if let (Some(a), Some(b), Some(c)) = (inx, iny, inz) {
                    let n = Vec3::new(getf(a)?, getf(b)?, getf(c)?);
                    if n.is_finite() && n.norm() > 1e-12 {
                        p.normal = Some(n.normalized());
                    }
                }
                points.push(p);
            }
        } else {
            for _ in 0..el.count {
                data_lines.next();
            }
        }
    }

    Ok(PointCloud::unorganized(points))
}

pub fn save_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let with_rgb = cloud.has_rgb();
    let with_normals = cloud.has_normals();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);

    let mut header = String::from("ply\nformat ascii 1.0\n");
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if with_rgb {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if with_normals {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;

    let fmt = |v: f64| -> String {
        if v.is_nan() {
            "nan".to_string()
        } else {
            format!("{v:.8e}")
        }
    };
    for p in &cloud.points {
        let mut cols = vec![fmt(p.x), fmt(p.y), fmt(p.z)];
        if with_rgb {
            let rgb = p.rgb.unwrap_or([0, 0, 0]);
            cols.extend([rgb[0].to_string(), rgb[1].to_string(), rgb[2].to_string()]);
        }
        if with_normals {
            let n = p.normal.unwrap_or(Vec3::new(f64::NAN, f64::NAN, f64::NAN));
            cols.extend([fmt(n.x), fmt(n.y), fmt(n.z)]);
        }
        writeln!(w, "{}", cols.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
