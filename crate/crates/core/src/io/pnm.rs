//! PGM/PPM raster images (P2/P5 grayscale, P3/P6 color), 8-bit only.

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage { width, height, pixels: vec![0; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage { width, height, pixels: vec![[0, 0, 0]; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: [u8; 3]) {
        self.pixels[y * self.width + x] = v;
    }

    /// Rec. 601 luma.
    pub fn to_gray(&self) -> GrayImage {
        let pixels = self
            .pixels
            .iter()
            .map(|[r, g, b]| {
                (0.299 * *r as f64 + 0.587 * *g as f64 + 0.114 * *b as f64).round() as u8
            })
            .collect();
        GrayImage { width: self.width, height: self.height, pixels }
    }
}

/// Reads the PNM header tokens (magic, width, height, maxval), returning
/// the byte offset just past the maxval terminator.
fn parse_pnm_header(path: &Path, bytes: &[u8]) -> Result<(String, usize, usize, usize, usize)> {
    let mut toks: Vec<String> = Vec::new();
    let mut pos = 0usize;
    while toks.len() < 4 && pos < bytes.len() {
        let b = bytes[pos];
        if b == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            pos += 1;
        } else {
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
                pos += 1;
            }
            toks.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
    }
    if toks.len() < 4 {
        return Err(Error::parse(path, "header", "truncated PNM header"));
    }
    // exactly one whitespace byte after maxval before binary data
    if pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    let w: usize = toks[1]
        .parse()
        .map_err(|_| Error::parse(path, "header", "bad width"))?;
    let h: usize = toks[2]
        .parse()
        .map_err(|_| Error::parse(path, "header", "bad height"))?;
    let maxval: usize = toks[3]
        .parse()
        .map_err(|_| Error::parse(path, "header", "bad maxval"))?;
    if maxval != 255 {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            message: format!("maxval {maxval} (only 255 supported)"),
        });
    }
    Ok((toks[0].clone(), w, h, maxval, pos))
}

fn ascii_values(path: &Path, bytes: &[u8], expected: usize) -> Result<Vec<u8>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::parse(path, "body", "non-UTF8 ASCII body"))?;
    let mut vals = Vec::with_capacity(expected);
    for tok in text.split_whitespace() {
        let v: usize = tok
            .parse()
            .map_err(|_| Error::parse(path, "body", format!("bad sample {tok:?}")))?;
        if v > 255 {
            return Err(Error::parse(path, "body", format!("sample {v} exceeds 255")));
        }
        vals.push(v as u8);
    }
    if vals.len() != expected {
        return Err(Error::parse(
            path,
            "body",
            format!("expected {expected} samples, got {}", vals.len()),
        ));
    }
    Ok(vals)
}

pub fn load_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (magic, w, h, _max, data_off) = parse_pnm_header(path, &bytes)?;
    let pixels = match magic.as_str() {
        "P5" => {
            let body = &bytes[data_off..];
            if body.len() < w * h {
                return Err(Error::parse(
                    path,
                    format!("byte {data_off}"),
                    format!("binary body truncated: need {} bytes", w * h),
                ));
            }
            body[..w * h].to_vec()
        }
        "P2" => ascii_values(path, &bytes[data_off..], w * h)?,
        other => {
            return Err(Error::Unsupported {
                path: path.to_path_buf(),
                message: format!("magic {other} is not a PGM"),
            })
        }
    };
    Ok(GrayImage { width: w, height: h, pixels })
}

pub fn save_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(img.pixels.len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width, img.height).unwrap();
    out.extend_from_slice(&img.pixels);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (magic, w, h, _max, data_off) = parse_pnm_header(path, &bytes)?;
    let samples = match magic.as_str() {
        "P6" => {
            let body = &bytes[data_off..];
            if body.len() < w * h * 3 {
                return Err(Error::parse(
                    path,
                    format!("byte {data_off}"),
                    format!("binary body truncated: need {} bytes", w * h * 3),
                ));
            }
            body[..w * h * 3].to_vec()
        }
        "P3" => ascii_values(path, &bytes[data_off..], w * h * 3)?,
        other => {
            return Err(Error::Unsupported {
                path: path.to_path_buf(),
                message: format!("magic {other} is not a PPM"),
            })
        }
    };
    let pixels = samples
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok(RgbImage { width: w, height: h, pixels })
}

pub fn save_ppm(img: &RgbImage, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(img.pixels.len() * 3 + 32);
    write!(out, "P6\n{} {}\n255\n", img.width, img.height).unwrap();
    for p in &img.pixels {
        out.extend_from_slice(p);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads either a PGM or PPM by magic number, converting color to gray.
pub fn load_image_as_gray(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match bytes.get(..2) {
        Some(b"P5") | Some(b"P2") => load_pgm(path),
        Some(b"P6") | Some(b"P3") => Ok(load_ppm(path)?.to_gray()),
        _ => Err(Error::Unsupported {
            path: path.to_path_buf(),
            message: "not a PGM/PPM file".into(),
        }),
    }
}
