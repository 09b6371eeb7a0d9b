//! Error level analysis.
//!
//! An image is re-saved as a baseline JPEG at a known quality, decoded again
//! and subtracted from the source sample by sample. Content whose compression
//! history differs from the rest of the picture (a pasted region, for
//! instance) stands out in the resulting map.
//!
//! The codec is pinned: [`jpeg_encoder`] with libjpeg quality scaling, 4:2:0
//! chroma subsampling (box-averaged) and the standard Annex K tables, decoded
//! through the `image` crate. [`CODEC_ID`] names that combination and is
//! written next to every map saved to disk.

use std::fmt;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader, RgbImage};
use jpeg_encoder::{ChromaSubsamplingMethod, ColorType, Encoder, SamplingFactor};

use crate::io::{write_atomic, write_text_atomic};
use crate::{Error, Result};

/// Identifies the encoder/decoder pair and its settings.
pub const CODEC_ID: &str =
    "jpeg-encoder/0.7 baseline libjpeg-scaling 4:2:0-average + image/0.25 decoder";

/// Smallest accepted side length: one full JPEG block.
pub const MIN_SIDE: u32 = 8;

/// An 8-bit RGB raster, row-major, interleaved.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::ImageTooSmall { width, height });
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::InvalidRaster {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.offset(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self> {
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w, h, rgb.into_raw())
    }

    /// Encodes the raster as PNG.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let buf = RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("raster length is validated on construction");
        let mut out = Cursor::new(Vec::new());
        DynamicImage::ImageRgb8(buf)
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| Error::InvalidArgument(format!("PNG encoding failed: {e}")))?;
        Ok(out.into_inner())
    }

    /// Saves the raster as a PNG file, atomically.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_png()?)
    }
}

/// JPEG quality on the libjpeg 1..=100 scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QualityLevel(u8);

impl QualityLevel {
    pub const DEFAULT: QualityLevel = QualityLevel(95);

    pub fn new(value: i64) -> Result<Self> {
        if (1..=100).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(Error::InvalidQuality(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl Default for QualityLevel {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl fmt::Display for QualityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Per-sample absolute recompression error of an RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElaMap {
    width: u32,
    height: u32,
    data: Vec<u8>,
    quality: QualityLevel,
    max_error: u8,
}

impl ElaMap {
    /// Wraps precomputed differences; `max_error` is derived from the data.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>, quality: QualityLevel) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::InvalidRaster {
                expected,
                actual: data.len(),
            });
        }
        let max_error = data.iter().copied().max().unwrap_or(0);
        Ok(Self {
            width,
            height,
            data,
            quality,
            max_error,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn quality(&self) -> QualityLevel {
        self.quality
    }

    pub fn max_error(&self) -> u8 {
        self.max_error
    }

    /// Mean error over all three channels inside `[x0, x1) × [y0, y1)`.
    pub fn region_mean(&self, x0: u32, y0: u32, x1: u32, y1: u32) -> f64 {
        let mut sum = 0u64;
        let mut n = 0u64;
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                let i = (y as usize * self.width as usize + x as usize) * 3;
                sum += self.data[i..i + 3].iter().map(|&v| v as u64).sum::<u64>();
                n += 3;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum as f64 / n as f64
        }
    }

    /// Text written next to a saved map.
    pub fn sidecar_header(&self, source: &Path) -> String {
        format!(
            "source={}\nquality={}\ncodec={}\nmax_error={}\n",
            source.display(),
            self.quality,
            CODEC_ID,
            self.max_error
        )
    }
}

/// Decodes a JPEG, PNG, TIFF or BMP file into 8-bit RGB.
///
/// Grayscale and paletted inputs are expanded to three channels, alpha is
/// dropped and 16-bit samples are rescaled to 8 bits.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    let format = image::guess_format(bytes).map_err(|_| Error::UnsupportedFormat)?;
    if !matches!(
        format,
        ImageFormat::Jpeg | ImageFormat::Png | ImageFormat::Tiff | ImageFormat::Bmp
    ) {
        return Err(Error::UnsupportedFormat);
    }
    let img = ImageReader::with_format(Cursor::new(bytes), format)
        .decode()
        .map_err(|e| match e {
            image::ImageError::Unsupported(_) => Error::UnsupportedFormat,
            other => Error::CorruptFile(other.to_string()),
        })?;
    RasterImage::from_dynamic(img)
}

/// Reads and decodes an image file.
pub fn load_image(path: &Path) -> Result<RasterImage> {
    decode_image(&std::fs::read(path)?)
}

/// Baseline JPEG encoding with the pinned codec settings.
pub fn encode_jpeg(img: &RasterImage, quality: QualityLevel) -> Result<Vec<u8>> {
    let (w, h) = (dim_u16(img.width)?, dim_u16(img.height)?);
    let mut out = Vec::new();
    let mut encoder = Encoder::new(&mut out, quality.value());
    encoder.set_sampling_factor(SamplingFactor::R_4_2_0);
    encoder.set_chroma_subsampling_method(ChromaSubsamplingMethod::Average);
    encoder.encode(img.data(), w, h, ColorType::Rgb)?;
    Ok(out)
}

fn dim_u16(side: u32) -> Result<u16> {
    u16::try_from(side)
        .map_err(|_| Error::InvalidArgument(format!("side {side} exceeds the JPEG limit of 65535")))
}

/// JPEG round trip: `decode(encode_jpeg(img, quality))`.
pub fn recompress(img: &RasterImage, quality: QualityLevel) -> Result<RasterImage> {
    let jpeg = encode_jpeg(img, quality)?;
    let decoded = ImageReader::with_format(Cursor::new(jpeg), ImageFormat::Jpeg)
        .decode()
        .map_err(|e| Error::CorruptFile(format!("re-decoding own JPEG output: {e}")))?;
    let out = RasterImage::from_dynamic(decoded)?;
    debug_assert_eq!((out.width, out.height), (img.width, img.height));
    Ok(out)
}

/// Absolute per-sample difference between `img` and its recompression.
pub fn compute_ela(img: &RasterImage, quality: QualityLevel) -> Result<ElaMap> {
    let round_trip = recompress(img, quality)?;
    Ok(difference(img, &round_trip, quality))
}

fn difference(a: &RasterImage, b: &RasterImage, quality: QualityLevel) -> ElaMap {
    let data: Vec<u8> = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| x.abs_diff(y))
        .collect();
    let max_error = data.iter().copied().max().unwrap_or(0);
    ElaMap {
        width: a.width,
        height: a.height,
        data,
        quality,
        max_error,
    }
}

/// Stretches a map linearly so that `max_error` becomes 255.
///
/// Samples are scaled by `255 / max(max_error, 1)` with round-half-up; an
/// all-zero map stays all zero.
pub fn enhance_ela(ela: &ElaMap) -> RasterImage {
    let max = ela.max_error.max(1) as u32;
    let data = ela
        .data
        .iter()
        .map(|&s| ((2 * 255 * s as u32 + max) / (2 * max)).min(255) as u8)
        .collect();
    RasterImage {
        width: ela.width,
        height: ela.height,
        data,
    }
}

/// Raw map as an image, without rescaling.
pub fn ela_as_image(ela: &ElaMap) -> RasterImage {
    RasterImage {
        width: ela.width,
        height: ela.height,
        data: ela.data.clone(),
    }
}

/// Writes `image` as PNG plus a `<path>.txt` sidecar describing `ela`.
pub fn save_ela_png(image: &RasterImage, ela: &ElaMap, source: &Path, path: &Path) -> Result<()> {
    image.save_png(path)?;
    write_text_atomic(&sidecar_path(path), &ela.sidecar_header(source))
}

/// Location of the sidecar header for a saved map.
pub fn sidecar_path(png: &Path) -> std::path::PathBuf {
    let mut s = png.as_os_str().to_owned();
    s.push(".txt");
    s.into()
}
