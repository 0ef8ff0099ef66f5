//! Scalogram rendering (magnitude matrix to 224x224 RGB), PNG persistence and the
//! flip/rotation augmentations.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cwt::{self, Boundary, CwtOptions, ScaleNorm, Wavelet};
use crate::dataset::{DatasetManifest, ManifestEntry, Provenance, Signal, AUGMENT_TAG};
use crate::error::{Error, Result};
use crate::io::{derive_seed, write_atomic};

pub const IMAGE_SIZE: usize = 224;
pub const IMAGE_BYTES: usize = IMAGE_SIZE * IMAGE_SIZE * 3;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// 224x224 RGB, row-major, channels interleaved R, G, B.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    data: Vec<u8>,
}

impl std::fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RgbImage({IMAGE_SIZE}x{IMAGE_SIZE}x3)")
    }
}

impl RgbImage {
    pub fn from_bytes(data: Vec<u8>) -> Result<Self> {
        if data.len() != IMAGE_BYTES {
            return Err(Error::Image(format!(
                "expected {IMAGE_BYTES} bytes for a {IMAGE_SIZE}x{IMAGE_SIZE}x3 image, got {}",
                data.len()
            )));
        }
        Ok(RgbImage { data })
    }

    pub fn filled(rgb: [u8; 3]) -> Self {
        RgbImage {
            data: rgb.iter().copied().cycle().take(IMAGE_BYTES).collect(),
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(IMAGE_BYTES);
        for y in 0..IMAGE_SIZE {
            for x in 0..IMAGE_SIZE {
                data.extend_from_slice(&f(y, x));
            }
        }
        RgbImage { data }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * IMAGE_SIZE + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// `x -> ln(1 + x)`, then an affine map sending the minimum to 0 and the maximum to 1.
/// A constant matrix maps to all zeros.
pub fn log_normalize(m: &Matrix) -> Result<Matrix> {
    if m.data.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::InvalidArgument(
            "log_normalize needs a non-negative matrix".into(),
        ));
    }
    let logged: Vec<f64> = m.data.iter().map(|v| v.ln_1p()).collect();
    let lo = logged.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logged.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let data = if range > 0.0 {
        logged.iter().map(|v| (v - lo) / range).collect()
    } else {
        vec![0.0; logged.len()]
    };
    Matrix::new(m.rows, m.cols, data)
}

/// Bilinear resize on a corner-aligned grid: output corners sample input corners exactly.
pub fn resize_bilinear(m: &Matrix, out_h: usize, out_w: usize) -> Result<Matrix> {
    if m.rows < 2 || m.cols < 2 || out_h < 2 || out_w < 2 {
        return Err(Error::InvalidArgument(format!(
            "bilinear resize needs at least 2x2 on both sides ({}x{} -> {out_h}x{out_w})",
            m.rows, m.cols
        )));
    }
    if (m.rows, m.cols) == (out_h, out_w) {
        return Ok(m.clone());
    }
    let sy = (m.rows - 1) as f64 / (out_h - 1) as f64;
    let sx = (m.cols - 1) as f64 / (out_w - 1) as f64;
    let xs: Vec<(usize, usize, f64)> = (0..out_w).map(|x| axis_tap(x as f64 * sx, m.cols)).collect();
    let mut data = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let (y0, y1, fy) = axis_tap(y as f64 * sy, m.rows);
        for &(x0, x1, fx) in &xs {
            let top = m.get(y0, x0) + fx * (m.get(y0, x1) - m.get(y0, x0));
            let bot = m.get(y1, x0) + fx * (m.get(y1, x1) - m.get(y1, x0));
            data.push(top + fy * (bot - top));
        }
    }
    Matrix::new(out_h, out_w, data)
}

fn axis_tap(pos: f64, len: usize) -> (usize, usize, f64) {
    let i0 = (pos.floor() as usize).min(len - 1);
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, pos - i0 as f64)
}

/// 256-entry lookup table from `[0, 1]` to RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Colormap {
    entries: Vec<[u8; 3]>,
}

impl Default for Colormap {
    fn default() -> Self {
        Colormap::jet()
    }
}

impl Colormap {
    pub fn new(entries: Vec<[u8; 3]>) -> Result<Self> {
        if entries.len() != 256 {
            return Err(Error::InvalidArgument(format!(
                "colormap needs 256 entries, got {}",
                entries.len()
            )));
        }
        Ok(Colormap { entries })
    }

    /// Piecewise-linear "jet": dark blue (0,0,128) through cyan, yellow to dark red (128,0,0).
    pub fn jet() -> Self {
        let ch = |v: f64| (255.0 * v.clamp(0.0, 1.0)).round() as u8;
        let entries = (0..256)
            .map(|i| {
                let x = i as f64 / 255.0;
                [
                    ch(1.5 - (4.0 * x - 3.0).abs()),
                    ch(1.5 - (4.0 * x - 2.0).abs()),
                    ch(1.5 - (4.0 * x - 1.0).abs()),
                ]
            })
            .collect();
        Colormap { entries }
    }

    /// 256 lines of `r g b`, integers 0-255.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = Vec::with_capacity(256);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed: Option<Vec<u8>> = parts.iter().map(|p| p.parse().ok()).collect();
            match parsed {
                Some(v) if v.len() == 3 => entries.push([v[0], v[1], v[2]]),
                _ => {
                    return Err(Error::Data(format!(
                        "colormap line {}: expected `r g b` with values 0-255",
                        i + 1
                    )))
                }
            }
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn entry(&self, index: usize) -> [u8; 3] {
        self.entries[index]
    }

    pub fn lookup(&self, v: f64) -> [u8; 3] {
        self.entries[(v * 255.0).round() as usize]
    }
}

/// Per-pixel lookup `cm[round(v * 255)]` of a 224x224 matrix with values in `[0, 1]`.
pub fn apply_colormap(m: &Matrix, cm: &Colormap) -> Result<RgbImage> {
    if (m.rows, m.cols) != (IMAGE_SIZE, IMAGE_SIZE) {
        return Err(Error::Shape(format!(
            "colormap input must be {IMAGE_SIZE}x{IMAGE_SIZE}, got {}x{}",
            m.rows, m.cols
        )));
    }
    if let Some(v) = m.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("value {v} outside [0, 1]")));
    }
    let data = m.data.iter().flat_map(|&v| cm.lookup(v)).collect();
    Ok(RgbImage { data })
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, IMAGE_SIZE as u32, IMAGE_SIZE as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Image(e.to_string()))?;
        writer
            .write_image_data(&img.data)
            .map_err(|e| Error::Image(e.to_string()))?;
    }
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder.read_info().map_err(|e| Error::Image(e.to_string()))?;
    let info = reader.info();
    if (info.width as usize, info.height as usize) != (IMAGE_SIZE, IMAGE_SIZE)
        || info.color_type != png::ColorType::Rgb
        || info.bit_depth != png::BitDepth::Eight
    {
        return Err(Error::Image(format!(
            "expected {IMAGE_SIZE}x{IMAGE_SIZE} 8-bit RGB, found {}x{} {:?} {:?}",
            info.width, info.height, info.color_type, info.bit_depth
        )));
    }
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(|e| Error::Image(e.to_string()))?;
    buf.truncate(frame.buffer_size());
    RgbImage::from_bytes(buf)
}

pub fn write_image(path: &Path, img: &RgbImage) -> Result<()> {
    write_atomic(path, &encode_png(img)?)
}

pub fn read_image(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Horizontal mirror when `apply`.
pub fn augment_flip(img: &RgbImage, apply: bool) -> RgbImage {
    if !apply {
        return img.clone();
    }
    RgbImage::from_fn(|y, x| img.pixel(y, IMAGE_SIZE - 1 - x))
}

/// Rotation about the image center by `u * factor` full turns, bilinear resampling,
/// with source coordinates clamped to the nearest edge.
pub fn augment_rotate(img: &RgbImage, factor: f64, u: f64) -> RgbImage {
    let angle = u * factor * 2.0 * std::f64::consts::PI;
    if angle == 0.0 {
        return img.clone();
    }
    let (sin, cos) = angle.sin_cos();
    let c = (IMAGE_SIZE - 1) as f64 / 2.0;
    let max = (IMAGE_SIZE - 1) as f64;
    RgbImage::from_fn(|y, x| {
        let dx = x as f64 - c;
        let dy = y as f64 - c;
        // inverse rotation maps the output pixel back into the source
        let sx = (c + cos * dx + sin * dy).clamp(0.0, max);
        let sy = (c - sin * dx + cos * dy).clamp(0.0, max);
        let (x0, x1, fx) = axis_tap(sx, IMAGE_SIZE);
        let (y0, y1, fy) = axis_tap(sy, IMAGE_SIZE);
        let mut px = [0u8; 3];
        for (ch, out) in px.iter_mut().enumerate() {
            let at = |yy: usize, xx: usize| f64::from(img.data[(yy * IMAGE_SIZE + xx) * 3 + ch]);
            let top = at(y0, x0) + fx * (at(y0, x1) - at(y0, x0));
            let bot = at(y1, x0) + fx * (at(y1, x1) - at(y1, x0));
            *out = (top + fy * (bot - top)).round().clamp(0.0, 255.0) as u8;
        }
        px
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentPolicy {
    /// Augmented copies join the dataset before any train/validation split.
    #[default]
    BeforeSplit,
    /// Only training folds receive augmented copies of their own records.
    TrainOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    pub copies: usize,
    pub rotation_factor: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            copies: 2,
            rotation_factor: 0.2,
        }
    }
}

/// One augmented copy: random horizontal flip, then random rotation. The draw depends
/// only on `(seed, record_id, copy)`.
pub fn augment_copy(img: &RgbImage, record_id: &str, copy: usize, factor: f64, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, record_id, copy as u64));
    let flip = rng.gen_bool(0.5);
    let u: f64 = rng.gen_range(-1.0..=1.0);
    augment_rotate(&augment_flip(img, flip), factor, u)
}

pub fn augmented_id(record_id: &str, copy: usize) -> String {
    format!("{record_id}{AUGMENT_TAG}{}", copy + 1)
}

/// Materializes `copies` augmented images per original entry under `base/augmented/`
/// and returns the originals followed by the augmented entries.
pub fn augment_dataset(
    manifest: &DatasetManifest,
    base: &Path,
    params: &AugmentParams,
    seed: u64,
) -> Result<DatasetManifest> {
    if params.copies == 0 {
        return Ok(manifest.clone());
    }
    let originals: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| e.provenance == Provenance::Original)
        .collect();
    let produced: Vec<Vec<ManifestEntry>> = originals
        .par_iter()
        .map(|e| -> Result<Vec<ManifestEntry>> {
            let img = read_image(&base.join(&e.path))?;
            (0..params.copies)
                .map(|k| {
                    let id = augmented_id(&e.record_id, k);
                    let rel = PathBuf::from("augmented").join(format!("{id}.png"));
                    let aug = augment_copy(&img, &e.record_id, k, params.rotation_factor, seed);
                    write_image(&base.join(&rel), &aug)?;
                    Ok(ManifestEntry {
                        record_id: id,
                        path: rel,
                        label: e.label,
                        provenance: Provenance::Augmented,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut entries = manifest.entries.clone();
    entries.extend(produced.into_iter().flatten());
    DatasetManifest::new(entries)
}

/// Parameters of the signal-to-image pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalogramConfig {
    pub omega0: f64,
    pub voices: u32,
    pub norm: ScaleNorm,
    pub boundary: Boundary,
    /// Positions are decimated by a uniform stride but never below this many columns.
    pub min_columns: usize,
}

impl Default for ScalogramConfig {
    fn default() -> Self {
        ScalogramConfig {
            omega0: 6.0,
            voices: 12,
            norm: ScaleNorm::L1,
            boundary: Boundary::ZeroExtend,
            min_columns: 1024,
        }
    }
}

/// Full pipeline: CWT, magnitudes, log normalization, resize to 224x224, colormap.
pub fn render_scalogram(s: &Signal, cfg: &ScalogramConfig, cm: &Colormap) -> Result<RgbImage> {
    let n = s.samples.len();
    let grid = cwt::default_scales(n, s.fs, cfg.voices)?;
    let stride = (n / cfg.min_columns.max(1)).max(1);
    let opts = CwtOptions {
        wavelet: Wavelet::morlet(cfg.omega0)?,
        norm: cfg.norm,
        boundary: cfg.boundary,
        stride,
    };
    let coeffs = cwt::cwt_fast(s, &grid, &opts)?;
    let mag = Matrix::new(coeffs.num_scales(), coeffs.num_cols, cwt::magnitude(&coeffs))?;
    let img = resize_bilinear(&log_normalize(&mag)?, IMAGE_SIZE, IMAGE_SIZE)?;
    // resize is a convex combination of [0, 1] values; clamp away rounding excursions
    let img = Matrix::new(img.rows, img.cols, img.data.iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
    apply_colormap(&img, cm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_normalize_endpoints_and_constant() {
        let e1 = std::f64::consts::E - 1.0;
        let m = Matrix::new(2, 2, vec![0.0, e1, 0.0, e1]).unwrap();
        let out = log_normalize(&m).unwrap();
        assert_eq!(out.data, vec![0.0, 1.0, 0.0, 1.0]);
        let c = log_normalize(&Matrix::filled(3, 3, 2.5)).unwrap();
        assert!(c.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn resize_identity_constant_and_ramp() {
        let m = Matrix::new(224, 224, (0..224 * 224).map(|i| i as f64).collect()).unwrap();
        assert_eq!(resize_bilinear(&m, 224, 224).unwrap(), m);
        let c = resize_bilinear(&Matrix::filled(5, 7, 0.3), 224, 224).unwrap();
        assert!(c.data.iter().all(|v| (v - 0.3).abs() < 1e-15));
        let r = resize_bilinear(&Matrix::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap(), 224, 224).unwrap();
        for y in 0..224 {
            for x in 0..224 {
                assert!((r.get(y, x) - x as f64 / 223.0).abs() < 1e-9);
            }
        }
        assert!(resize_bilinear(&Matrix::filled(1, 5, 0.0), 224, 224).is_err());
    }

    #[test]
    fn jet_endpoints_and_rounding() {
        let cm = Colormap::jet();
        assert_eq!(cm.entry(0), [0, 0, 128]);
        assert_eq!(cm.entry(255), [128, 0, 0]);
        assert_eq!(cm.lookup(0.5), cm.entry(128));
        let zero = apply_colormap(&Matrix::filled(224, 224, 0.0), &cm).unwrap();
        assert_eq!(zero, RgbImage::filled(cm.entry(0)));
        let one = apply_colormap(&Matrix::filled(224, 224, 1.0), &cm).unwrap();
        assert_eq!(one, RgbImage::filled(cm.entry(255)));
        assert!(apply_colormap(&Matrix::filled(224, 224, 1.01), &cm).is_err());
    }

    #[test]
    fn colormap_text_parsing() {
        let text: String = (0..256).map(|i| format!("{i} {i} {}\n", 255 - i)).collect();
        let cm = Colormap::from_text(&text).unwrap();
        assert_eq!(cm.entry(10), [10, 10, 245]);
        assert!(Colormap::from_text("1 2 3\n").is_err());
        assert!(Colormap::from_text(&text.replace("0 0 255", "0 0 256")).is_err());
    }

    #[test]
    fn flip_examples() {
        let img = RgbImage::from_fn(|_, x| if x < 112 { [0; 3] } else { [255; 3] });
        let f = augment_flip(&img, true);
        assert_eq!(f, RgbImage::from_fn(|_, x| if x < 112 { [255; 3] } else { [0; 3] }));
        assert_eq!(augment_flip(&f, true), img);
        assert_eq!(augment_flip(&img, false), img);
    }

    #[test]
    fn rotate_constant_and_zero() {
        let c = RgbImage::filled([12, 200, 7]);
        assert_eq!(augment_rotate(&c, 0.2, 0.77), c);
        let img = RgbImage::from_fn(|y, x| [(x % 256) as u8, (y % 256) as u8, ((x * y) % 256) as u8]);
        assert_eq!(augment_rotate(&img, 0.2, 0.0), img);
    }

    #[test]
    fn png_rejects_truncated_and_wrong_size() {
        let img = RgbImage::from_fn(|y, x| [x as u8, y as u8, 3]);
        let bytes = encode_png(&img).unwrap();
        assert_eq!(decode_png(&bytes).unwrap(), img);
        assert!(decode_png(&bytes[..bytes.len() / 2]).is_err());

        let mut small = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut small, 100, 100);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&vec![0u8; 100 * 100 * 3]).unwrap();
        }
        assert!(matches!(decode_png(&small), Err(Error::Image(_))));
    }
}
