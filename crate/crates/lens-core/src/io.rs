//! Plain-text and netpbm file formats.
//!
//! Attribution maps travel as `AGF1`, a line-oriented ASCII grid:
//!
//! ```text
//! AGF1 <height> <width>
//! <width space-separated values>   (height rows)
//! ```
//!
//! Values are printed with 17 significant digits so that every finite
//! `f64` survives a write/read cycle bit-exactly; positive zero is
//! canonicalised to `0`. Images load from PGM (`P2` ASCII or `P5`
//! binary, maxval up to 65535) and are rescaled to `[0, 1]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::map::{AttributionMap, ImageTensor};

/// Formats `v` with 17 significant digits (`0` for positive zero), the
/// canonical representation used by every file this crate writes.
pub fn fmt_sig17(v: f64) -> String {
    if v == 0.0 && v.is_sign_positive() {
        "0".to_string()
    } else {
        format!("{:.16e}", v)
    }
}

/// Writes `map` to `path` in AGF1 format.
pub fn save_map(path: &Path, map: &AttributionMap) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("AGF1 {} {}\n", map.height(), map.width()));
    for r in 0..map.height() {
        let row = &map.values()[r * map.width()..(r + 1) * map.width()];
        let line: Vec<String> = row.iter().map(|v| fmt_sig17(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CoreError::io(path, e))
}

/// Reads an AGF1 file. Errors name the offending 1-based line.
pub fn load_map(path: &Path) -> Result<AttributionMap> {
    let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::parse(path, "empty file"))?
        .trim_end();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "AGF1" {
        return Err(CoreError::parse(path, "line 1: expected `AGF1 <height> <width>`"));
    }
    let height: usize = fields[1]
        .parse()
        .map_err(|_| CoreError::parse(path, format!("line 1: bad height {:?}", fields[1])))?;
    let width: usize = fields[2]
        .parse()
        .map_err(|_| CoreError::parse(path, format!("line 1: bad width {:?}", fields[2])))?;
    if height == 0 || width == 0 {
        return Err(CoreError::parse(path, "line 1: empty grid"));
    }

    let mut data = Vec::with_capacity(height * width);
    for row in 0..height {
        let lineno = row + 2;
        let line = lines
            .next()
            .ok_or_else(|| CoreError::parse(path, format!("line {lineno}: missing row")))?;
        let mut count = 0usize;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                CoreError::parse(path, format!("line {lineno}: bad value {tok:?}"))
            })?;
            if !v.is_finite() {
                return Err(CoreError::parse(
                    path,
                    format!("line {lineno}: non-finite value {tok:?}"),
                ));
            }
            data.push(v);
            count += 1;
        }
        if count != width {
            return Err(CoreError::parse(
                path,
                format!("line {lineno}: expected {width} values, found {count}"),
            ));
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(CoreError::parse(path, format!("trailing data after {height} rows")));
    }
    AttributionMap::new(height, width, data)
}

/// Reads a PGM image (`P2` or `P5`), rescaling samples to `[0, 1]`.
pub fn load_pgm(path: &Path) -> Result<ImageTensor> {
    let bytes = fs::read(path).map_err(|e| CoreError::io(path, e))?;
    let mut pos = 0usize;

    let magic = next_header_token(&bytes, &mut pos)
        .ok_or_else(|| CoreError::parse(path, "missing PGM magic"))?;
    if magic != "P2" && magic != "P5" {
        return Err(CoreError::parse(path, format!("unsupported magic {magic:?}")));
    }
    let mut dims = [0usize; 3];
    for (i, what) in ["width", "height", "maxval"].iter().enumerate() {
        let tok = next_header_token(&bytes, &mut pos)
            .ok_or_else(|| CoreError::parse(path, format!("missing {what}")))?;
        dims[i] = tok
            .parse()
            .map_err(|_| CoreError::parse(path, format!("bad {what} {tok:?}")))?;
    }
    let (width, height, maxval) = (dims[0], dims[1], dims[2]);
    if width == 0 || height == 0 {
        return Err(CoreError::parse(path, "empty image"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(CoreError::parse(path, format!("maxval {maxval} out of range 1..=65535")));
    }

    let n = width * height;
    let mut samples = Vec::with_capacity(n);
    if magic == "P2" {
        for _ in 0..n {
            let tok = next_header_token(&bytes, &mut pos)
                .ok_or_else(|| CoreError::parse(path, "truncated P2 raster"))?;
            let s: usize = tok
                .parse()
                .map_err(|_| CoreError::parse(path, format!("bad sample {tok:?}")))?;
            samples.push(s);
        }
    } else {
        // Exactly one whitespace byte separates the maxval from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(CoreError::parse(path, "missing raster separator"));
        }
        pos += 1;
        let per = if maxval < 256 { 1 } else { 2 };
        if bytes.len() - pos < n * per {
            return Err(CoreError::parse(path, "truncated P5 raster"));
        }
        for i in 0..n {
            let s = if per == 1 {
                bytes[pos + i] as usize
            } else {
                let hi = bytes[pos + 2 * i] as usize;
                let lo = bytes[pos + 2 * i + 1] as usize;
                hi << 8 | lo
            };
            samples.push(s);
        }
    }

    for (i, s) in samples.iter().enumerate() {
        if *s > maxval {
            return Err(CoreError::parse(path, format!("sample {i} exceeds maxval {maxval}")));
        }
    }
    let scale = maxval as f64;
    let data: Vec<f64> = samples.iter().map(|s| *s as f64 / scale).collect();
    ImageTensor::new(height, width, data)
}

/// Writes `img` as binary `P5` with maxval 255 (values are rounded to
/// the nearest 8-bit level).
pub fn save_pgm(path: &Path, img: &ImageTensor) -> Result<()> {
    let mut out: Vec<u8> = Vec::with_capacity(img.len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())
        .expect("write to Vec cannot fail");
    for v in img.values() {
        out.push((v * 255.0).round() as u8);
    }
    fs::write(path, out).map_err(|e| CoreError::io(path, e))
}

/// Pulls the next whitespace-delimited header token, skipping `#`
/// comments that run to end of line.
fn next_header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a str> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()
}
