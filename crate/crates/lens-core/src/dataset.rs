//! Dataset manifests and a built-in image source.
//!
//! A dataset is a directory of PGM images plus a `manifest.csv` mapping
//! relative paths to integer labels (`path,label` header included).
//! [`generate_digit_dataset`] materialises a deterministic ten-class
//! set of 8x8 digit glyphs — jittered in position, stroke intensity and
//! background noise — so every experiment can be reproduced from a seed
//! without shipping binary data.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::io::{load_pgm, save_pgm};
use crate::map::ImageTensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Image path relative to the manifest's directory.
    pub path: PathBuf,
    pub label: usize,
    /// File stem; doubles as the image id in result tables.
    pub id: String,
}

/// A parsed `manifest.csv` and the directory it lives in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Loads and validates a manifest: exact `path,label` header,
    /// non-empty body, unique image ids.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "path,label")) => {}
            Some((_, other)) => {
                return Err(CoreError::parse(
                    path,
                    format!("line 1: expected header `path,label`, found {other:?}"),
                ))
            }
            None => return Err(CoreError::parse(path, "empty manifest")),
        }

        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (rel, label_str) = line.split_once(',').ok_or_else(|| {
                CoreError::parse(path, format!("line {lineno}: expected `path,label`"))
            })?;
            let label: usize = label_str.trim().parse().map_err(|_| {
                CoreError::parse(path, format!("line {lineno}: bad label {label_str:?}"))
            })?;
            let rel = PathBuf::from(rel.trim());
            let id = rel
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| {
                    CoreError::parse(path, format!("line {lineno}: unusable image path"))
                })?
                .to_string();
            if !seen.insert(id.clone()) {
                return Err(CoreError::parse(
                    path,
                    format!("line {lineno}: duplicate image id {id:?}"),
                ));
            }
            entries.push(ManifestEntry { path: rel, label, id });
        }
        if entries.is_empty() {
            return Err(CoreError::parse(path, "manifest lists no images"));
        }
        let root = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok(DatasetManifest { root, entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Highest label + 1.
    pub fn n_classes(&self) -> usize {
        self.entries.iter().map(|e| e.label).max().map_or(0, |m| m + 1)
    }

    pub fn load_image(&self, entry: &ManifestEntry) -> Result<ImageTensor> {
        load_pgm(&self.root.join(&entry.path))
    }
}

/// 8x8 digit glyphs; rows top to bottom, `#` marks stroke pixels.
/// Every glyph keeps a one-pixel margin so a one-pixel jitter stays in
/// frame.
const GLYPHS: [[&str; 8]; 10] = [
    [
        "........", //
        "..###...", //
        ".#...#..", //
        ".#...#..", //
        ".#...#..", //
        ".#...#..", //
        "..###...", //
        "........",
    ],
    [
        "........", //
        "...#....", //
        "..##....", //
        "...#....", //
        "...#....", //
        "...#....", //
        "..###...", //
        "........",
    ],
    [
        "........", //
        "..###...", //
        ".#...#..", //
        "....#...", //
        "...#....", //
        "..#.....", //
        ".#####..", //
        "........",
    ],
    [
        "........", //
        ".####...", //
        ".....#..", //
        "..###...", //
        ".....#..", //
        ".....#..", //
        ".####...", //
        "........",
    ],
    [
        "........", //
        ".#..#...", //
        ".#..#...", //
        ".#..#...", //
        ".#####..", //
        "....#...", //
        "....#...", //
        "........",
    ],
    [
        "........", //
        ".#####..", //
        ".#......", //
        ".####...", //
        ".....#..", //
        ".....#..", //
        ".####...", //
        "........",
    ],
    [
        "........", //
        "..###...", //
        ".#......", //
        ".####...", //
        ".#...#..", //
        ".#...#..", //
        "..###...", //
        "........",
    ],
    [
        "........", //
        ".#####..", //
        ".....#..", //
        "....#...", //
        "...#....", //
        "..#.....", //
        "..#.....", //
        "........",
    ],
    [
        "........", //
        "..###...", //
        ".#...#..", //
        "..###...", //
        ".#...#..", //
        ".#...#..", //
        "..###...", //
        "........",
    ],
    [
        "........", //
        "..###...", //
        ".#...#..", //
        ".#...#..", //
        "..####..", //
        ".....#..", //
        "..###...", //
        "........",
    ],
];

pub const DIGIT_SIDE: usize = 8;
pub const DIGIT_CLASSES: usize = 10;

/// Writes `samples` glyph images (classes cycling 0..=9) and a
/// `manifest.csv` into `dir`, all derived from `seed`. Returns the
/// loaded manifest. Strokes get per-pixel intensity in
/// `[0.55, 1.0]`, the background noise in `[0, 0.40]`, and the whole
/// glyph shifts by up to one pixel in each axis. The stroke floor and
/// noise ceiling are deliberately close: a classifier has to pool
/// evidence over the glyph shape instead of thresholding single
/// pixels, which keeps its decision boundary (and therefore its
/// gradients) near the data.
pub fn generate_digit_dataset(dir: &Path, samples: usize, seed: u64) -> Result<DatasetManifest> {
    if samples == 0 {
        return Err(CoreError::Model("dataset needs at least one sample".into()));
    }
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = String::from("path,label\n");

    for i in 0..samples {
        let digit = i % DIGIT_CLASSES;
        let dy = rng.gen_range(-1isize..=1);
        let dx = rng.gen_range(-1isize..=1);
        let mut pixels = Vec::with_capacity(DIGIT_SIDE * DIGIT_SIDE);
        for r in 0..DIGIT_SIDE {
            for c in 0..DIGIT_SIDE {
                // Sample the glyph at the unshifted position.
                let gr = r as isize - dy;
                let gc = c as isize - dx;
                let on = gr >= 0
                    && gc >= 0
                    && (gr as usize) < DIGIT_SIDE
                    && (gc as usize) < DIGIT_SIDE
                    && GLYPHS[digit][gr as usize].as_bytes()[gc as usize] == b'#';
                let v: f64 = if on {
                    0.55 + 0.45 * rng.gen::<f64>()
                } else {
                    0.40 * rng.gen::<f64>()
                };
                // Quantise to the 8-bit grid the PGM will store.
                pixels.push((v * 255.0).round() / 255.0);
            }
        }
        let img = ImageTensor::new(DIGIT_SIDE, DIGIT_SIDE, pixels)?;
        let name = format!("img_{i:05}.pgm");
        save_pgm(&dir.join(&name), &img)?;
        manifest.push_str(&format!("{name},{digit}\n"));
    }

    let manifest_path = dir.join("manifest.csv");
    fs::write(&manifest_path, manifest).map_err(|e| CoreError::io(&manifest_path, e))?;
    DatasetManifest::load(&manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glyphs_are_distinct_and_in_frame() {
        for (d, glyph) in GLYPHS.iter().enumerate() {
            let mut ink = 0;
            for (r, row) in glyph.iter().enumerate() {
                assert_eq!(row.len(), 8, "digit {d} row {r}");
                for (c, b) in row.bytes().enumerate() {
                    if b == b'#' {
                        ink += 1;
                        assert!((1..7).contains(&r) && (1..7).contains(&c), "digit {d} margin");
                    } else {
                        assert_eq!(b, b'.');
                    }
                }
            }
            assert!(ink >= 8, "digit {d} too sparse");
            for other in &GLYPHS[d + 1..] {
                assert_ne!(&GLYPHS[d], other);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_loadable() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let m_a = generate_digit_dataset(dir_a.path(), 25, 9).unwrap();
        let m_b = generate_digit_dataset(dir_b.path(), 25, 9).unwrap();

        assert_eq!(m_a.len(), 25);
        assert_eq!(m_a.n_classes(), 10);
        for (ea, eb) in m_a.entries().iter().zip(m_b.entries()) {
            assert_eq!(ea.id, eb.id);
            assert_eq!(ea.label, eb.label);
            let bytes_a = std::fs::read(dir_a.path().join(&ea.path)).unwrap();
            let bytes_b = std::fs::read(dir_b.path().join(&eb.path)).unwrap();
            assert_eq!(bytes_a, bytes_b);
        }

        let img = m_a.load_image(&m_a.entries()[3]).unwrap();
        assert_eq!((img.height(), img.width()), (8, 8));
        // Quantised values survive the PGM round trip exactly.
        let direct = load_pgm(&dir_a.path().join(&m_a.entries()[3].path)).unwrap();
        assert_eq!(img, direct);
    }

    #[test]
    fn manifest_validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.csv");

        std::fs::write(&p, "image,class\na.pgm,0\n").unwrap();
        assert!(DatasetManifest::load(&p).is_err(), "bad header");

        std::fs::write(&p, "path,label\na.pgm,zero\n").unwrap();
        assert!(DatasetManifest::load(&p).is_err(), "bad label");

        std::fs::write(&p, "path,label\na.pgm,0\nsub/a.pgm,1\n").unwrap();
        assert!(DatasetManifest::load(&p).is_err(), "duplicate id");

        std::fs::write(&p, "path,label\n").unwrap();
        assert!(DatasetManifest::load(&p).is_err(), "no entries");

        std::fs::write(&p, "path,label\na.pgm,0\n").unwrap();
        let m = DatasetManifest::load(&p).unwrap();
        assert!(m.load_image(&m.entries()[0]).is_err(), "missing file");
    }
}
