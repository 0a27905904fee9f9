//! Raster types shared by every stage: RGB images, binary masks and distance maps.
//!
//! All rasters are row-major. Image channels are `f64` in `[0, 1]`; quantization
//! to 8 bits only happens at PNG boundaries.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("undecodable PNG: {0}")]
    Decode(String),
    #[error("unsupported color type {0} (expected 8/16-bit RGB or RGBA)")]
    UnsupportedColor(String),
    #[error("PNG encoding failed: {0}")]
    Encode(String),
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("buffer length {got} does not match {expected}")]
    BufferLength { expected: usize, got: usize },
    #[error("channel value {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
}

fn check_same(a: (usize, usize), b: (usize, usize)) -> Result<(), ImageError> {
    if a == b {
        Ok(())
    } else {
        Err(ImageError::DimensionMismatch {
            left_w: a.0,
            left_h: a.1,
            right_w: b.0,
            right_h: b.1,
        })
    }
}

/// Dense RGB raster with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl Image {
    /// Builds an image from row-major pixels, rejecting values outside `[0, 1]`.
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self, ImageError> {
        if pixels.len() != width * height {
            return Err(ImageError::BufferLength {
                expected: width * height,
                got: pixels.len(),
            });
        }
        for (i, px) in pixels.iter().enumerate() {
            for &c in px {
                if !(0.0..=1.0).contains(&c) {
                    return Err(ImageError::OutOfRange { index: i, value: c });
                }
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: [f64; 3]) -> Self {
        let value = value.map(clamp01);
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// Builds an image from a generator `f(x, y)`; results are clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).map(clamp01));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, px: [f64; 3]) {
        self.pixels[y * self.width + x] = px.map(clamp01);
    }

    /// Copies the `w`×`h` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Image, ImageError> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(ImageError::InvalidDimensions { width: w, height: h });
        }
        Ok(Image::from_fn(w, h, |cx, cy| self.get(x + cx, y + cy)))
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.pixels
    }
}

#[inline]
fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Per-pixel `{0, 1}` raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImageError> {
        if bits.len() != width * height {
            return Err(ImageError::BufferLength {
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, false)
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self::filled(width, height, true)
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fraction_set(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.count_ones() as f64 / self.bits.len() as f64
        }
    }

    pub fn invert(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Nearest-neighbour resampling with half-pixel centers.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if (width, height) == self.dims() {
            return Ok(self.clone());
        }
        let xs = nearest_indices(self.width, width);
        let ys = nearest_indices(self.height, height);
        Ok(Self::from_fn(width, height, |x, y| self.get(xs[x], ys[y])))
    }
}

fn nearest_indices(src: usize, dst: usize) -> Vec<usize> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| (((i as f64 + 0.5) * scale).floor() as usize).min(src - 1))
        .collect()
}

/// Per-pixel nonnegative scalar raster.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DistanceMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ImageError> {
        if values.len() != width * height {
            return Err(ImageError::BufferLength {
                expected: width * height,
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Bilinear resize with half-pixel-center alignment and edge clamping.
pub fn resize(img: &Image, width: usize, height: usize) -> Result<Image, ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    if img.dims() == (width, height) {
        return Ok(img.clone());
    }
    let xs = bilinear_taps(img.width, width);
    let ys = bilinear_taps(img.height, height);
    let mut pixels = Vec::with_capacity(width * height);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            let p00 = img.get(x0, y0);
            let p10 = img.get(x1, y0);
            let p01 = img.get(x0, y1);
            let p11 = img.get(x1, y1);
            let mut out = [0.0; 3];
            for c in 0..3 {
                let top = p00[c] + (p10[c] - p00[c]) * tx;
                let bottom = p01[c] + (p11[c] - p01[c]) * tx;
                out[c] = clamp01(top + (bottom - top) * ty);
            }
            pixels.push(out);
        }
    }
    Ok(Image {
        width,
        height,
        pixels,
    })
}

fn bilinear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Computes `mask ⊙ a ⊕ (1 − mask) ⊙ b`: each output pixel is copied from `a`
/// where the mask is set and from `b` elsewhere.
pub fn compose(a: &Image, b: &Image, mask: &BinaryMask) -> Result<Image, ImageError> {
    check_same(a.dims(), b.dims())?;
    check_same(a.dims(), mask.dims())?;
    let pixels = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .zip(&mask.bits)
        .map(|((pa, pb), &m)| if m { *pa } else { *pb })
        .collect();
    Ok(Image {
        width: a.width,
        height: a.height,
        pixels,
    })
}

/// Peak signal-to-noise ratio in dB over the pixels where `region` is set.
///
/// Returns `f64::INFINITY` when the region is pixel-identical and `None` when the
/// region is empty.
pub fn psnr_region(a: &Image, b: &Image, region: &BinaryMask) -> Result<Option<f64>, ImageError> {
    check_same(a.dims(), b.dims())?;
    check_same(a.dims(), region.dims())?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((pa, pb), &m) in a.pixels.iter().zip(&b.pixels).zip(&region.bits) {
        if m {
            for c in 0..3 {
                let d = pa[c] - pb[c];
                sum += d * d;
            }
            n += 3;
        }
    }
    if n == 0 {
        return Ok(None);
    }
    let mse = sum / n as f64;
    Ok(Some(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }))
}

/// Round-half-up quantizer used at every 8-bit boundary.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (clamp01(v) * 255.0 + 0.5).floor() as u8
}

pub fn decode_png(bytes: &[u8]) -> Result<Image, ImageError> {
    let dynimg = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| ImageError::Decode(e.to_string()))?;
    from_dynamic(dynimg)
}

fn from_dynamic(dynimg: DynamicImage) -> Result<Image, ImageError> {
    let (width, height) = (dynimg.width() as usize, dynimg.height() as usize);
    let pixels: Vec<[f64; 3]> = match dynimg {
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 255.0))
            .collect(),
        DynamicImage::ImageRgba8(buf) => {
            log::warn!("discarding alpha channel of RGBA input");
            buf.pixels()
                .map(|p| [p.0[0], p.0[1], p.0[2]].map(|c| c as f64 / 255.0))
                .collect()
        }
        DynamicImage::ImageRgb16(buf) => buf
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 65535.0))
            .collect(),
        DynamicImage::ImageRgba16(buf) => {
            log::warn!("discarding alpha channel of RGBA input");
            buf.pixels()
                .map(|p| [p.0[0], p.0[1], p.0[2]].map(|c| c as f64 / 65535.0))
                .collect()
        }
        other => return Err(ImageError::UnsupportedColor(format!("{:?}", other.color()))),
    };
    Ok(Image {
        width,
        height,
        pixels,
    })
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>, ImageError> {
    let mut raw = Vec::with_capacity(img.pixels.len() * 3);
    for px in &img.pixels {
        raw.extend(px.map(quantize_u8));
    }
    let buf = RgbImage::from_raw(img.width as u32, img.height as u32, raw)
        .ok_or(ImageError::InvalidDimensions {
            width: img.width,
            height: img.height,
        })?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ImageError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

/// Encodes a mask as 8-bit grayscale, 255 where set.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>, ImageError> {
    let raw = mask.bits.iter().map(|&b| if b { 255u8 } else { 0 }).collect();
    let buf = GrayImage::from_raw(mask.width as u32, mask.height as u32, raw).ok_or(
        ImageError::InvalidDimensions {
            width: mask.width,
            height: mask.height,
        },
    )?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ImageError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

/// Decodes a grayscale mask PNG; values ≥ 128 are set.
pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask, ImageError> {
    let dynimg = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| ImageError::Decode(e.to_string()))?;
    let gray = dynimg.to_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    Ok(BinaryMask {
        width: w,
        height: h,
        bits: gray.pixels().map(|p| p.0[0] >= 128).collect(),
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, ImageError> {
    std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ImageError::NotFound(path.to_path_buf())
        } else {
            ImageError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ImageError> {
    std::fs::write(path, bytes).map_err(|e| ImageError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Loads an 8- or 16-bit RGB/RGBA PNG. Alpha is dropped, not composited.
pub fn load_png(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    decode_png(&read_file(path.as_ref())?)
}

/// Writes an 8-bit RGB PNG.
pub fn save_png(img: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    write_file(path.as_ref(), &encode_png(img)?)
}

pub fn load_mask_png(path: impl AsRef<Path>) -> Result<BinaryMask, ImageError> {
    decode_mask_png(&read_file(path.as_ref())?)
}

pub fn save_mask_png(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<(), ImageError> {
    write_file(path.as_ref(), &encode_mask_png(mask)?)
}
